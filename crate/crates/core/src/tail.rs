//! Consequences of the modified log-Sobolev inequality: concentration
//! bounds, entropy decay along thinning, and hypercontractivity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{csum, xlogx_excess, xlogx_excess_ratio};
use crate::ode::integrate;
use crate::pmf::TruncatedPmf;
use crate::semigroup::{check_len, GridFunction};

/// `h(s) = (1+s) log(1+s) − s`.
pub fn bennett_h(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain(format!("h needs s >= 0, got {s}")));
    }
    Ok(xlogx_excess(s))
}

/// `k(u) = u log(1+u) / 4`.
pub fn chernoff_k(u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::domain(format!("k needs u >= 0, got {u}")));
    }
    Ok(u * u.ln_1p() / 4.0)
}

fn check_c_t(c: f64, t: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!("c = {c} must be positive")));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid(format!("t = {t} must be positive")));
    }
    Ok(())
}

/// `exp(−h(ct)/c)`.
pub fn concentration_bound(c: f64, t: f64) -> Result<f64> {
    check_c_t(c, t)?;
    Ok((-bennett_h(c * t)? / c).exp())
}

/// `exp(−k(ct)/c)`, the weaker bound from the `Δf²/f` inequality.
pub fn concentration_bound_k(c: f64, t: f64) -> Result<f64> {
    check_c_t(c, t)?;
    Ok((-chernoff_k(c * t)? / c).exp())
}

/// `V({g ≥ E_V g + t})`. The threshold carries a `1e-12` relative slack so
/// that lattice-valued `g` are not split by rounding in `E_V g`.
pub fn exact_tail(v: &TruncatedPmf, g: &GridFunction, t: f64) -> Result<f64> {
    check_len(v.len(), g.len())?;
    let w = v.weights();
    let mean = csum(w.iter().zip(g.values()).map(|(w, g)| w * g));
    let level = mean + t;
    let slack = 1e-12 * (1.0 + level.abs());
    Ok(csum(
        w.iter()
            .zip(g.values())
            .filter(|(_, &g)| g >= level - slack)
            .map(|(w, _)| *w),
    ))
}

/// `sup |g(x+1) − g(x)|` over the window.
pub fn lipschitz_constant(g: &GridFunction) -> f64 {
    g.values().windows(2).map(|p| (p[1] - p[0]).abs()).fold(0.0, f64::max)
}

fn require_lipschitz(g: &GridFunction) -> Result<()> {
    let l = lipschitz_constant(g);
    if l > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!("sup |Δg| = {l} exceeds 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub label: String,
    pub c_used: f64,
    pub lipschitz: f64,
    pub t_grid: Vec<f64>,
    pub exact_tail: Vec<f64>,
    pub bound_h: Vec<f64>,
    pub bound_k: Vec<f64>,
    pub holds: bool,
}

/// Exact tails of `g` against both bounds on a grid of `t`.
pub fn concentration_report(v: &TruncatedPmf, g: &GridFunction, c: f64, t_grid: &[f64]) -> Result<ConcentrationReport> {
    require_lipschitz(g)?;
    let mut exact = Vec::with_capacity(t_grid.len());
    let mut bh = Vec::with_capacity(t_grid.len());
    let mut bk = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        exact.push(exact_tail(v, g, t)?);
        bh.push(concentration_bound(c, t)?);
        bk.push(concentration_bound_k(c, t)?);
    }
    let holds = exact.iter().zip(&bh).all(|(e, b)| *e <= b + 1e-12);
    Ok(ConcentrationReport {
        label: v.label().to_string(),
        c_used: c,
        lipschitz: lipschitz_constant(g),
        t_grid: t_grid.to_vec(),
        exact_tail: exact,
        bound_h: bh,
        bound_k: bk,
        holds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChernoffRow {
    pub sigma: f64,
    /// `log G(σ) = log Σ V e^{σ g}`.
    pub log_g: f64,
    /// `H(σ) − H(0)` with `H(σ) = log G(σ)/σ` and `H(0) = E_V g`.
    pub h_increment: f64,
    /// `(e^σ − σ − 1) / (cσ)`.
    pub bound: f64,
    pub ok: bool,
}

/// `log Σ exp(a_i)` with max subtraction.
pub(crate) fn log_sum_exp(a: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = a.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + csum(a.map(|x| (x - m).exp())).ln()
}

/// Tabulates `H(σ) − H(0)` against `(1/c)(e^σ − σ − 1)/σ`.
pub fn chernoff_scan(v: &TruncatedPmf, g: &GridFunction, c: f64, sigma_grid: &[f64]) -> Result<Vec<ChernoffRow>> {
    check_len(v.len(), g.len())?;
    require_lipschitz(g)?;
    let w = v.weights();
    let gv = g.values();
    let mean = csum(w.iter().zip(gv).map(|(w, g)| w * g));
    let mut rows = Vec::with_capacity(sigma_grid.len());
    for &sigma in sigma_grid {
        check_c_t(c, sigma)?;
        // log G - σ E g = log Σ w e^{σ (g - E g)}, centred for accuracy
        let centred = log_sum_exp(w.iter().zip(gv).map(|(w, g)| w.ln() + sigma * (g - mean)));
        let h_increment = centred / sigma;
        let bound = sigma.exp_m1() / sigma / c - 1.0 / c;
        let scale = h_increment.abs().max(bound.abs()).max(1.0);
        rows.push(ChernoffRow {
            sigma,
            log_g: centred + sigma * mean,
            h_increment,
            bound,
            ok: h_increment <= bound + 1e-10 * scale,
        });
    }
    Ok(rows)
}

/// The Chernoff bound at the optimal `σ* = log(1 + ct)`:
/// `exp((e^σ − σ − 1)/c − σt)`, which equals `exp(−h(ct)/c)`.
pub fn chernoff_at_optimum(c: f64, t: f64) -> Result<f64> {
    check_c_t(c, t)?;
    let s = (c * t).ln_1p();
    Ok(((s.exp_m1() - s) / c - s * t).exp())
}

/// A reference family `V_t` driving the thinning dynamics
/// `∂_t V_t(x) = α_t (V_t(x) − V_t(x−1))`, with curvature bound `c_t`.
pub trait ThinningFamily: Sync {
    fn log_pmf(&self, t: f64, x: usize) -> f64;
    fn alpha(&self, t: f64) -> f64;
    /// Lower bound on the curvature of `V_t`.
    fn c(&self, t: f64) -> f64;
    /// `V_t(x−1)/V_t(x)`, zero at `x = 0`.
    fn down_ratio(&self, t: f64, x: usize) -> f64 {
        if x == 0 {
            0.0
        } else {
            (self.log_pmf(t, x - 1) - self.log_pmf(t, x)).exp()
        }
    }
    fn label(&self) -> String;
}

/// `V_t = Π_{λ e^{−t}}`, with `α_t = λ e^{−t}` and `c_t = 1/α_t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonThinning {
    pub lambda: f64,
    #[serde(skip)]
    ln_factorials: Vec<f64>,
}

const LN_FACTORIAL_TABLE: usize = 1024;

impl PoissonThinning {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!("lambda = {lambda} must be positive")));
        }
        let mut ln_factorials = Vec::with_capacity(LN_FACTORIAL_TABLE);
        let mut acc = crate::numeric::NeumaierSum::new();
        for k in 0..LN_FACTORIAL_TABLE {
            if k > 1 {
                acc.add((k as f64).ln());
            }
            ln_factorials.push(acc.value());
        }
        Ok(Self { lambda, ln_factorials })
    }

    fn ln_factorial(&self, x: usize) -> f64 {
        match self.ln_factorials.get(x) {
            Some(&v) => v,
            None => csum((2..=x).map(|k| (k as f64).ln())),
        }
    }

    pub fn mean_at(&self, t: f64) -> f64 {
        self.lambda * (-t).exp()
    }
}

impl ThinningFamily for PoissonThinning {
    fn log_pmf(&self, t: f64, x: usize) -> f64 {
        let m = self.mean_at(t);
        -m + x as f64 * m.ln() - self.ln_factorial(x)
    }

    fn alpha(&self, t: f64) -> f64 {
        self.mean_at(t)
    }

    fn c(&self, t: f64) -> f64 {
        1.0 / self.mean_at(t)
    }

    fn down_ratio(&self, t: f64, x: usize) -> f64 {
        x as f64 / self.mean_at(t)
    }

    fn label(&self) -> String {
        format!("poisson-thinning:{}", self.lambda)
    }
}

/// Largest relative residual of `∂_t V_t(x) = α_t (V_t(x) − V_t(x−1))` on
/// `0..=max_x`, with the time derivative taken by central differences.
pub fn family_residual(family: &dyn ThinningFamily, t: f64, max_x: usize, h: f64) -> f64 {
    let v = |s: f64, x: usize| family.log_pmf(s, x).exp();
    (0..=max_x)
        .map(|x| {
            let dt = (v(t + h, x) - v(t - h, x)) / (2.0 * h);
            let prev = if x == 0 { 0.0 } else { v(t, x - 1) };
            let rhs = family.alpha(t) * (v(t, x) - prev);
            (dt - rhs).abs() / (dt.abs().max(rhs.abs()).max(v(t, x)))
        })
        .fold(0.0, f64::max)
}

/// Smallest `E_t(x) − c_t` over `x < max_x`: nonnegative when the family's
/// stated curvature bound holds on that range.
pub fn family_curvature_slack(family: &dyn ThinningFamily, t: f64, max_x: usize) -> f64 {
    (0..max_x)
        .map(|x| family.down_ratio(t, x + 1) - family.down_ratio(t, x) - family.c(t))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRow {
    pub t: f64,
    /// `D(p_t ‖ V_t)`.
    pub value: f64,
    /// `D(p_0 ‖ V_0) exp(−∫ α c)`.
    pub bound: f64,
    pub margin: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTrace {
    pub family: String,
    pub initial: String,
    pub tol: f64,
    pub rows: Vec<DecayRow>,
    pub holds: bool,
}

fn d_against_family(p: &[f64], family: &dyn ThinningFamily, t: f64) -> f64 {
    csum(
        p.iter()
            .enumerate()
            .filter(|(_, &px)| px > 0.0)
            .map(|(x, &px)| px * (px.ln() - family.log_pmf(t, x))),
    )
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &t in t_grid {
        if !(t.is_finite() && t >= prev) {
            return Err(Error::invalid("time grid must be finite, nonnegative and increasing"));
        }
        prev = t;
    }
    Ok(())
}

/// Integrates `∂_t p_t(x) = α_t (V_t(x)/V_t(x+1) p_t(x+1) − V_t(x−1)/V_t(x) p_t(x))`
/// on the window of `p0` and compares `D(p_t‖V_t)` with the decay bound.
pub fn decay_trace(p0: &TruncatedPmf, family: &dyn ThinningFamily, t_grid: &[f64], tol: f64) -> Result<DecayTrace> {
    check_grid(t_grid)?;
    let n = p0.len();
    // state: p(0..n) followed by ∫ α c
    let mut y = p0.weights();
    y.push(0.0);
    let d0 = d_against_family(&y[..n], family, 0.0);
    let rhs = |t: f64, y: &[f64], out: &mut [f64]| {
        let a = family.alpha(t);
        for x in 0..n {
            let inflow = if x + 1 < n {
                family.down_ratio(t, x + 1) * y[x + 1]
            } else {
                0.0
            };
            out[x] = a * (inflow - family.down_ratio(t, x) * y[x]);
        }
        out[n] = a * family.c(t);
    };
    let mut rows = Vec::with_capacity(t_grid.len());
    let mut t = 0.0;
    let mut h = 1e-3;
    for &target in t_grid {
        if target > t {
            integrate(rhs, &mut y, t, target, tol, &mut h)?;
            t = target;
        }
        let value = d_against_family(&y[..n], family, t);
        let bound = d0 * (-y[n]).exp();
        let margin = bound - value;
        rows.push(DecayRow {
            t,
            value,
            bound,
            margin,
            ok: margin >= -1e-8,
        });
    }
    Ok(DecayTrace {
        family: family.label(),
        initial: p0.label().to_string(),
        tol,
        holds: rows.iter().all(|r| r.ok),
        rows,
    })
}

/// `decay_trace` for the Poisson thinning family started at `Π_λ`.
pub fn thinning_decay_trace(p0: &TruncatedPmf, lambda: f64, t_grid: &[f64], tol: f64) -> Result<DecayTrace> {
    decay_trace(p0, &PoissonThinning::new(lambda)?, t_grid, tol)
}

/// `λ(t) − μ(t) + μ(t) log(μ(t)/λ(t))` for `λ(t) = λe^{−t}`, `μ(t) = μe^{−t}`:
/// the divergence between two thinned Poisson laws.
pub fn poisson_thinning_divergence(lambda: f64, mu: f64, t: f64) -> f64 {
    let s = (-t).exp();
    s * lambda * xlogx_excess_ratio(mu / lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperRow {
    pub t: f64,
    pub q: f64,
    /// `u(t) = log Λ(q(t), t) / q(t)`.
    pub u: f64,
    /// `u(t) − u(previous)`.
    pub increment: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperTrace {
    pub family: String,
    pub p: f64,
    pub tol: f64,
    pub rows: Vec<HyperRow>,
    pub monotone: bool,
}

/// Largest tolerated `exp(∫ max rate) · ε_mach` in `hyper_trace`.
pub const MAX_AMPLIFIED_ROUNDING: f64 = 1e-3;

/// Co-evolves `V_t` and `∂_t g_t(x) = α_t V_t(x−1)/V_t(x) (g_t(x) − g_t(x−1))`
/// and tracks `u(t) = log Σ V_t e^{q(t) g_t} / q(t)` with
/// `q(t) = p exp(−∫ α c)`.
///
/// The `g` dynamics run thinning backwards: a perturbation at site `x`
/// grows like `exp(∫ α V_t(x−1)/V_t(x))`, i.e. `e^{xt}` for Poisson. The
/// trace fails with a numeric error rather than report amplified rounding.
pub fn hyper_trace(
    family: &dyn ThinningFamily,
    g0: &GridFunction,
    p: f64,
    t_grid: &[f64],
    tol: f64,
) -> Result<HyperTrace> {
    check_grid(t_grid)?;
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::invalid(format!("p = {p} must exceed 1")));
    }
    let n = g0.len();
    // state: g(0..n), ∫ α c, ∫ max_x α V(x-1)/V(x)
    let mut y = g0.values().to_vec();
    y.push(0.0);
    y.push(0.0);
    let rhs = |t: f64, y: &[f64], out: &mut [f64]| {
        let a = family.alpha(t);
        out[0] = 0.0;
        let mut top: f64 = 0.0;
        for x in 1..n {
            let rate = a * family.down_ratio(t, x);
            top = top.max(rate);
            out[x] = rate * (y[x] - y[x - 1]);
        }
        out[n] = a * family.c(t);
        out[n + 1] = top;
    };
    let u_at = |t: f64, y: &[f64]| {
        let q = p * (-y[n]).exp();
        let log_lambda = log_sum_exp((0..n).map(|x| family.log_pmf(t, x) + q * y[x]));
        (q, log_lambda / q)
    };
    let mut rows: Vec<HyperRow> = Vec::with_capacity(t_grid.len());
    let mut t = 0.0;
    let mut h = 1e-3;
    for &target in t_grid {
        if target > t {
            integrate(rhs, &mut y, t, target, tol, &mut h)?;
            t = target;
        }
        let amplification = y[n + 1].exp() * f64::EPSILON;
        if amplification > MAX_AMPLIFIED_ROUNDING {
            return Err(Error::Numeric(format!(
                "co-evolution of g is ill-conditioned by t = {t}: rounding amplified to {amplification:e}; \
                 shorten the horizon or the window"
            )));
        }
        let (q, u) = u_at(t, &y);
        if !u.is_finite() {
            return Err(Error::Numeric(format!("u({t}) is not finite")));
        }
        let (increment, ok) = match rows.last() {
            None => (0.0, true),
            Some(prev) => {
                let inc = u - prev.u;
                (inc, inc >= -1e-8 * (1.0 + prev.u.abs()))
            }
        };
        rows.push(HyperRow { t, q, u, increment, ok });
    }
    Ok(HyperTrace {
        family: family.label(),
        p,
        tol,
        monotone: rows.iter().all(|r| r.ok),
        rows,
    })
}

/// `hyper_trace` for the Poisson thinning family.
pub fn hypercontractivity_trace(
    lambda: f64,
    g0: &GridFunction,
    p: f64,
    t_grid: &[f64],
    tol: f64,
) -> Result<HyperTrace> {
    hyper_trace(&PoissonThinning::new(lambda)?, g0, p, t_grid, tol)
}

/// The degree-one Poisson–Charlier polynomial `(x − λ)/λ` on `0..n`.
pub fn charlier1(lambda: f64, n: usize) -> GridFunction {
    GridFunction::from_fn(n, |x| (x as f64 - lambda) / lambda).expect("finite")
}

/// `C = 1 + λ/p − (λ/p) e^{p/λ}`; along the Charlier trace `u(t) ≡ −C`.
pub fn charlier_constant(lambda: f64, p: f64) -> f64 {
    let r = lambda / p;
    1.0 + r - r * (p / lambda).exp()
}

/// Geometric grid `t0, t0·ratio, …` up to `t1` inclusive.
pub fn geometric_grid(t0: f64, t1: f64, ratio: f64) -> Result<Vec<f64>> {
    if !(t0 > 0.0 && t1 >= t0 && ratio > 1.0) {
        return Err(Error::invalid("geometric grid needs 0 < t0 <= t1 and ratio > 1"));
    }
    let mut out = vec![t0];
    let mut t = t0;
    while t * ratio < t1 * (1.0 + 1e-12) {
        t *= ratio;
        out.push(t);
    }
    Ok(out)
}
