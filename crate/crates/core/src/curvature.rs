//! The curvature profile `E(x) = V(x)/V(x+1) - V(x-1)/V(x)` and the
//! structural properties built on it: c-log-concavity, ultra-log-concavity,
//! the mean bound and monotonicity of the profile.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pmf::TruncatedPmf;

/// Relative tolerance for the ultra-log-concavity comparison.
pub const ULC_REL_TOL: f64 = 1e-12;

/// Slack allowed in `c_inf <= 1/mean`.
pub const MEAN_BOUND_TOL: f64 = 1e-10;

/// Relative slack allowed when checking that the profile is nondecreasing.
pub const INCREASING_REL_TOL: f64 = 1e-12;

/// `E(x)` for `x = 0..N-1`, with `V(-1) = 0`.
pub fn curvature_profile(v: &TruncatedPmf) -> Result<Vec<f64>> {
    v.require_full_support()?;
    let vals = v.values();
    Ok((0..vals.len().saturating_sub(1))
        .map(|x| vals[x] / vals[x + 1] - v.down_ratio(x))
        .collect())
}

/// Infimum of the curvature profile over the window, with its location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureInfimum {
    pub value: f64,
    pub argmin: usize,
    /// The infimum sits on the last profile site, so the true infimum over
    /// all of Z+ may be lower than what the window shows.
    pub at_window_edge: bool,
}

pub fn curvature_infimum(v: &TruncatedPmf) -> Result<CurvatureInfimum> {
    let profile = curvature_profile(v)?;
    infimum_of(&profile).ok_or_else(|| Error::Degenerate(format!("pmf `{}` has a single-site window", v.label())))
}

fn infimum_of(profile: &[f64]) -> Option<CurvatureInfimum> {
    let (argmin, &value) = profile.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    Some(CurvatureInfimum {
        value,
        argmin,
        at_window_edge: argmin + 1 == profile.len() && profile.len() > 1,
    })
}

/// Largest `c` with `E(x) >= c` on the window.
pub fn c_log_concave_constant(v: &TruncatedPmf) -> Result<f64> {
    curvature_infimum(v).map(|inf| inf.value)
}

/// Whether `x V(x)^2 >= (x+1) V(x-1) V(x+1)` at every interior site, i.e.
/// `V / Π_λ` is log-concave. Compared in log space.
pub fn is_ulc(v: &TruncatedPmf) -> bool {
    let vals = v.values();
    let n = vals.len();
    if n < 3 {
        return true;
    }
    // internal zeros break log-concavity of the ratio sequence
    let first = vals.iter().position(|&p| p > 0.0);
    let last = vals.iter().rposition(|&p| p > 0.0);
    if let (Some(a), Some(b)) = (first, last) {
        if vals[a..=b].contains(&0.0) {
            return false;
        }
    }
    (1..n - 1).all(|x| {
        let (lo, mid, hi) = (vals[x - 1], vals[x], vals[x + 1]);
        if lo == 0.0 || hi == 0.0 {
            return true;
        }
        if mid == 0.0 {
            return false;
        }
        let lhs = (x as f64).ln() + 2.0 * mid.ln();
        let rhs = ((x + 1) as f64).ln() + lo.ln() + hi.ln();
        lhs - rhs >= -ULC_REL_TOL * (1.0 + rhs.abs())
    })
}

/// `V(0)/V(1)`, a lower bound for the curvature of an ultra-log-concave pmf.
pub fn ulc_c_bound(v: &TruncatedPmf) -> Result<f64> {
    if !is_ulc(v) {
        return Err(Error::Precondition(format!(
            "pmf `{}` is not ultra-log-concave",
            v.label()
        )));
    }
    let vals = v.values();
    if vals.len() < 2 || vals[1] == 0.0 {
        return Err(Error::Degenerate("V(1) = 0, ratio V(0)/V(1) undefined".into()));
    }
    Ok(vals[0] / vals[1])
}

/// `c_inf <= 1/mean + 1e-10`.
pub fn mean_bound_check(v: &TruncatedPmf) -> Result<bool> {
    let c = c_log_concave_constant(v)?;
    let mean = v.mean();
    if mean <= 0.0 {
        return Err(Error::Degenerate(format!("pmf `{}` has zero mean", v.label())));
    }
    Ok(c <= 1.0 / mean + MEAN_BOUND_TOL)
}

/// Whether `V(x)^2 V(x-1) - 2 V(x-1)^2 V(x+1) + V(x+1) V(x) V(x-2) >= 0`
/// across the window, i.e. whether the profile is nondecreasing.
///
/// The cubic is divided through by `V(x)^2 V(x-1)` so that the comparison is
/// scale-free: `1 - 2 V(x-1)V(x+1)/V(x)^2 + V(x+1)V(x-2)/(V(x)V(x-1)) >= 0`.
pub fn curvature_increasing_check(v: &TruncatedPmf) -> Result<bool> {
    v.require_full_support()?;
    let vals = v.values();
    let n = vals.len();
    let at = |i: isize| if i < 0 { 0.0 } else { vals[i as usize] };
    for x in 1..n.saturating_sub(1) {
        let xi = x as isize;
        let a = 2.0 * at(xi - 1) * at(xi + 1) / (at(xi) * at(xi));
        let b = at(xi + 1) * at(xi - 2) / (at(xi) * at(xi - 1));
        if 1.0 - a + b < -INCREASING_REL_TOL * (1.0 + a + b) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub label: String,
    pub window_max_index: usize,
    pub tail_mass: f64,
    pub profile: Vec<f64>,
    pub c_inf: f64,
    pub argmin: usize,
    pub infimum_at_window_edge: bool,
    pub ulc: bool,
    pub ulc_c: Option<f64>,
    pub mean: f64,
    pub mean_bound_ok: bool,
    pub increasing: bool,
}

impl CurvatureReport {
    pub fn compute(v: &TruncatedPmf) -> Result<Self> {
        let profile = curvature_profile(v)?;
        let inf = infimum_of(&profile)
            .ok_or_else(|| Error::Degenerate(format!("pmf `{}` has a single-site window", v.label())))?;
        let ulc = is_ulc(v);
        Ok(Self {
            label: v.label().to_string(),
            window_max_index: v.max_index(),
            tail_mass: v.tail_mass(),
            c_inf: inf.value,
            argmin: inf.argmin,
            infimum_at_window_edge: inf.at_window_edge,
            ulc,
            ulc_c: if ulc { ulc_c_bound(v).ok() } else { None },
            mean: v.mean(),
            mean_bound_ok: mean_bound_check(v)?,
            increasing: curvature_increasing_check(v)?,
            profile,
        })
    }
}

/// Evidence gathered on the convolution conjecture
/// `c_{U⋆V} >= (1/c_U + 1/c_V)^{-1}`. Report-only: nothing here is asserted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvolutionProbe {
    pub samples: usize,
    pub seed: u64,
    /// Smallest `c_{U⋆V} (1/c_U + 1/c_V)` seen; the conjecture predicts `>= 1`.
    pub min_ratio: f64,
    pub argmin_sample: usize,
    pub worst_pair: (String, String),
    /// Samples with ratio below one (by more than `1e-12`).
    pub below_one: usize,
}

/// Draws `samples` pairs of random ULC pmfs and records
/// `c_{U⋆V} (1/c_U + 1/c_V)` for each.
pub fn convolution_probe(samples: usize, seed: u64) -> Result<ConvolutionProbe> {
    use rayon::prelude::*;

    let rows: Vec<(f64, String, String)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::random::stream_rng(seed, i as u64);
            let u = crate::random::ulc_pmf(&mut rng)?;
            let v = crate::random::ulc_pmf(&mut rng)?;
            let cu = c_log_concave_constant(&u)?;
            let cv = c_log_concave_constant(&v)?;
            let cuv = c_log_concave_constant(&u.convolve(&v)?)?;
            Ok((
                cuv * (1.0 / cu + 1.0 / cv),
                u.label().to_string(),
                v.label().to_string(),
            ))
        })
        .collect::<Result<_>>()?;
    let (argmin, worst) = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(i, r)| (i, r.clone()))
        .unwrap_or((0, (f64::NAN, String::new(), String::new())));
    Ok(ConvolutionProbe {
        samples,
        seed,
        min_ratio: worst.0,
        argmin_sample: argmin,
        worst_pair: (worst.1, worst.2),
        below_one: rows.iter().filter(|r| r.0 < 1.0 - 1e-12).count(),
    })
}
