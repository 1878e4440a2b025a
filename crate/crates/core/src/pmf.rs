//! Truncated probability mass functions on the nonnegative integers.
//!
//! Every pmf lives on a finite window `{0, ..., N}` and carries the mass it
//! leaves outside that window as `tail_mass`. Constructors with infinite
//! support pick the smallest `N` whose tail is below the requested budget,
//! so downstream sums over the window are honest to that budget.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{csum, NeumaierSum};

/// Default tail budget for the infinite-support constructors.
pub const DEFAULT_EPS_TAIL: f64 = 1e-12;

/// Normalization slack allowed on `sum(values) + tail_mass`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedPmf {
    values: Vec<f64>,
    tail_mass: f64,
    label: String,
    #[serde(skip)]
    full_support: bool,
}

impl TruncatedPmf {
    fn build(values: Vec<f64>, tail_mass: f64, label: String) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("pmf window must be nonempty"));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!("entry {i} = {v} is not a probability")));
        }
        if !(tail_mass.is_finite() && tail_mass >= 0.0) {
            return Err(Error::invalid(format!("tail mass {tail_mass} is not a probability")));
        }
        let total = csum(values.iter().copied()) + tail_mass;
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(format!(
                "pmf `{label}` has total mass {total}, off by {:e}",
                total - 1.0
            )));
        }
        let full_support = values.iter().all(|&v| v > 0.0);
        Ok(Self {
            values,
            tail_mass,
            label,
            full_support,
        })
    }

    /// Poisson pmf with mean `lambda`, truncated at the smallest `N` with tail mass `<= eps_tail`.
    pub fn poisson(lambda: f64, eps_tail: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        check_eps(eps_tail)?;
        let log_lambda = lambda.ln();
        let (values, tail) = tail_truncated(
            -lambda,
            |x| log_lambda - ((x + 1) as f64).ln(),
            |x| lambda / (x as f64 + 1.0),
            eps_tail,
        )?;
        Self::build(values, tail, format!("poisson:{lambda}"))
    }

    /// Poisson pmf with mean `lambda` on the fixed window `{0, ..., max_index}`.
    pub fn poisson_on_window(lambda: f64, max_index: usize) -> Result<Self> {
        check_positive("lambda", lambda)?;
        let log_lambda = lambda.ln();
        let mut logs = Vec::with_capacity(max_index + 1);
        let mut running = NeumaierSum::new();
        running.add(-lambda);
        for x in 0..=max_index {
            logs.push(running.value());
            running.add(log_lambda - ((x + 1) as f64).ln());
        }
        let lv = running.value();
        let values: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        let tail = series_tail(lv, max_index + 1, |x| lambda / (x as f64 + 1.0));
        Self::build(values, tail, format!("poisson:{lambda}"))
    }

    /// Exact Poisson-binomial pmf of a sum of independent Bernoulli variables.
    pub fn bernoulli_sum(probs: &[f64]) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("bernoulli sum needs at least one probability"));
        }
        let mut values = vec![1.0];
        for &p in probs {
            if !(p.is_finite() && p > 0.0 && p < 1.0) {
                return Err(Error::invalid(format!("bernoulli probability {p} not in (0,1)")));
            }
            let mut next = vec![0.0; values.len() + 1];
            for (k, &v) in values.iter().enumerate() {
                next[k] += v * (1.0 - p);
                next[k + 1] += v * p;
            }
            values = next;
        }
        let label = format!(
            "bernoullisum:{}",
            probs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
        );
        Self::build(values, 0.0, label)
    }

    /// Negative binomial `binom(n+x-1, x) p^x (1-p)^n`, real `n > 0`.
    pub fn negative_binomial(n: f64, p: f64, eps_tail: f64) -> Result<Self> {
        check_positive("n", n)?;
        if !(p.is_finite() && p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("negative binomial p = {p} not in (0,1)")));
        }
        check_eps(eps_tail)?;
        let log_p = p.ln();
        let (values, tail) = tail_truncated(
            n * (-p).ln_1p(),
            |x| log_p + ((n + x as f64) / (x as f64 + 1.0)).ln(),
            |x| p * (n + x as f64) / (x as f64 + 1.0),
            eps_tail,
        )?;
        Self::build(values, tail, format!("negbin:{n},{p}"))
    }

    /// Normalize nonnegative weights into a pmf with zero tail.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weights must be nonempty"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total = csum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::invalid("at least one weight must be positive"));
        }
        let values = weights.iter().map(|w| w / total).collect();
        let label = format!(
            "weights:{}",
            weights.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
        );
        Self::build(values, 0.0, label)
    }

    /// Point mass at `k`, on the window `{0, ..., k}`.
    pub fn point_mass(k: usize) -> Self {
        let mut values = vec![0.0; k + 1];
        values[k] = 1.0;
        Self {
            values,
            tail_mass: 0.0,
            label: format!("delta:{k}"),
            full_support: k == 0,
        }
    }

    /// Exact discrete convolution `self ⋆ other` on `{0, ..., N_self + N_other}`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        let n = self.values.len() + other.values.len() - 1;
        let mut out = vec![0.0; n];
        for (i, &a) in self.values.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.values.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        let tail = self.tail_mass + other.tail_mass - self.tail_mass * other.tail_mass;
        Self::build(out, tail, format!("({})*({})", self.label, other.label))
    }

    /// `V ⋆ Π_eps`: a fully supported smoothing of `V` used to apply the
    /// full-support theory to finitely supported pmfs.
    pub fn perturb(&self, eps: f64) -> Result<Self> {
        check_positive("eps", eps)?;
        let smoother = Self::poisson(eps, DEFAULT_EPS_TAIL)?;
        let mut out = self.convolve(&smoother)?;
        out.label = format!("{}~{eps}", self.label);
        Ok(out)
    }

    /// Re-express on the window `{0, ..., max_index}`: zero-pad, or move the cut mass to the tail.
    pub fn with_window(&self, max_index: usize) -> Result<Self> {
        let mut values = self.values.clone();
        let mut tail = self.tail_mass;
        if max_index + 1 < values.len() {
            tail += csum(values[max_index + 1..].iter().copied());
            values.truncate(max_index + 1);
        } else {
            values.resize(max_index + 1, 0.0);
        }
        Self::build(values, tail, self.label.clone())
    }

    /// Same window, tail and label with new window values (the output of a
    /// mass-conserving evolution).
    pub(crate) fn evolved(&self, values: Vec<f64>) -> Self {
        let full_support = values.iter().all(|&v| v > 0.0);
        Self {
            values,
            tail_mass: self.tail_mass,
            label: self.label.clone(),
            full_support,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of sites in the window, `N + 1`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Top index `N` of the window.
    pub fn max_index(&self) -> usize {
        self.values.len() - 1
    }

    pub fn is_full_support(&self) -> bool {
        self.full_support
    }

    pub fn require_full_support(&self) -> Result<()> {
        match self.values.iter().position(|&v| v <= 0.0) {
            None => Ok(()),
            Some(index) => Err(Error::NotFullSupport {
                label: self.label.clone(),
                index,
            }),
        }
    }

    /// Mass carried by the window.
    pub fn window_mass(&self) -> f64 {
        csum(self.values.iter().copied())
    }

    /// The window restriction renormalized to total mass one. This is the
    /// stationary law of the truncated birth–death chain, and every
    /// `V`-weighted functional in the crate sums against it.
    pub fn weights(&self) -> Vec<f64> {
        let m = self.window_mass();
        self.values.iter().map(|v| v / m).collect()
    }

    /// Mean under the renormalized window weights.
    pub fn mean(&self) -> f64 {
        let m = self.window_mass();
        csum(self.values.iter().enumerate().map(|(x, v)| x as f64 * v)) / m
    }

    /// `V(x-1)/V(x)` with the `V(-1) = 0` convention.
    pub fn down_ratio(&self, x: usize) -> f64 {
        if x == 0 {
            0.0
        } else {
            self.values[x - 1] / self.values[x]
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {v} must be finite and positive")))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 && eps <= 1e-3 {
        Ok(())
    } else {
        Err(Error::invalid(format!("eps_tail = {eps} must lie in (0, 1e-3]")))
    }
}

/// Sum of `exp(log_first) * prod ratio(k)` over `k >= start`, for a pmf whose
/// successive ratios `ratio(x) = V(x+1)/V(x)` eventually decrease below one.
fn series_tail(log_first: f64, start: usize, ratio: impl Fn(usize) -> f64) -> f64 {
    let mut term = log_first.exp();
    let mut acc = 0.0;
    let mut x = start;
    loop {
        acc += term;
        let r = ratio(x);
        term *= r;
        x += 1;
        if r < 1.0 && term <= acc * 1e-18 {
            // remaining terms bounded by a geometric series with ratio <= r
            // once ratios are decreasing; slack is far below the f64 grain
            acc += term / (1.0 - r).max(1e-3);
            return acc;
        }
        if term == 0.0 || x > start + 1_000_000 {
            return acc;
        }
    }
}

/// Generate log-probabilities from `log_v0` and successive log ratios until
/// the remaining tail drops under `eps`. Returns the window values and the
/// mass beyond it.
fn tail_truncated(
    log_v0: f64,
    log_ratio: impl Fn(usize) -> f64,
    ratio: impl Fn(usize) -> f64 + Copy,
    eps: f64,
) -> Result<(Vec<f64>, f64)> {
    const MAX_WINDOW: usize = 1 << 22;
    let mut logs = vec![log_v0];
    let mut running = NeumaierSum::new();
    running.add(log_v0);
    let mut x = 0usize;
    loop {
        running.add(log_ratio(x));
        let next_log = running.value();
        let tail = series_tail(next_log, x + 1, ratio);
        if tail <= eps && ratio(x + 1) < 1.0 {
            let values = logs.iter().map(|l| l.exp()).collect();
            return Ok((values, tail));
        }
        logs.push(next_log);
        x += 1;
        if x > MAX_WINDOW {
            return Err(Error::invalid("truncation window exceeds 2^22 sites"));
        }
    }
}
