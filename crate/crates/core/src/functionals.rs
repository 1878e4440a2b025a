//! Entropy, variance and relative entropy against a reference pmf, the
//! modified log-Sobolev right-hand sides, and the Poincaré and log-Sobolev
//! constants.
//!
//! Sums are formed from `u - 1 - log u` and `g log g - g + 1` kernels so
//! that near-sharp cases keep their digits.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{c_log_concave_constant, curvature_profile};
use crate::error::{Error, Result};
use crate::numeric::{csum, u_minus_log_excess, xlogx_excess_ratio};
use crate::pmf::TruncatedPmf;
use crate::random::{positive_function, stream_rng};
use crate::semigroup::{apply_l, check_len, GridFunction};

/// Relative slack for the log-Sobolev and ordering checks.
pub const LSI_TOL: f64 = 1e-10;

/// Clip range for `log f` in the constant search.
pub const LOG_CLIP: f64 = 40.0;

fn check_positive_pair(v: &TruncatedPmf, f: &GridFunction) -> Result<()> {
    check_len(v.len(), f.len())?;
    f.require_positive()
}

/// `Σ V f`.
pub fn mean(v: &TruncatedPmf, f: &GridFunction) -> Result<f64> {
    check_len(v.len(), f.len())?;
    Ok(csum(v.weights().iter().zip(f.values()).map(|(w, f)| w * f)))
}

/// `Ent_V(f) = Σ V f log f − μ log μ`, `μ = Σ V f`.
pub fn entropy(v: &TruncatedPmf, f: &GridFunction) -> Result<f64> {
    check_positive_pair(v, f)?;
    let mu = mean(v, f)?;
    let w = v.weights();
    Ok(mu * csum(w.iter().zip(f.values()).map(|(w, f)| w * xlogx_excess_ratio(f / mu))))
}

/// `var_V(f) = Σ V (f − μ)²`.
pub fn variance(v: &TruncatedPmf, f: &GridFunction) -> Result<f64> {
    let mu = mean(v, f)?;
    Ok(csum(
        v.weights().iter().zip(f.values()).map(|(w, f)| w * (f - mu) * (f - mu)),
    ))
}

/// `Σ V (Δf)²`, the Dirichlet form.
pub fn dirichlet(v: &TruncatedPmf, f: &GridFunction) -> Result<f64> {
    check_len(v.len(), f.len())?;
    let w = v.weights();
    let fv = f.values();
    Ok(csum((0..w.len() - 1).map(|x| w[x] * (fv[x + 1] - fv[x]).powi(2))))
}

/// `D(p‖q) = Σ p log(p/q)` over the common window.
pub fn relative_entropy(p: &TruncatedPmf, q: &TruncatedPmf) -> Result<f64> {
    check_len(q.len(), p.len())?;
    relative_entropy_values(p.values(), q.values())
}

pub(crate) fn relative_entropy_values(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut terms = Vec::with_capacity(p.len());
    for (x, (&px, &qx)) in p.iter().zip(q).enumerate() {
        if px == 0.0 {
            continue;
        }
        if qx <= 0.0 {
            return Err(Error::domain(format!("p has mass {px} at {x} where q vanishes")));
        }
        // p log(p/q) - p + q, each term nonnegative
        terms.push(qx * xlogx_excess_ratio(px / qx));
    }
    let pm = csum(p.iter().copied());
    let qm = csum(p.iter().zip(q).filter(|(p, _)| **p > 0.0).map(|(_, q)| *q));
    Ok(csum(terms) + pm - qm)
}

/// Size-biased companion `p̂(x) = K p(x+1) V(x)/V(x+1)` with normalizer
/// `K = (Σ p(x+1) V(x)/V(x+1))⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeBias {
    pub p_hat: TruncatedPmf,
    pub k: f64,
}

pub fn size_bias_transform(p: &TruncatedPmf, v: &TruncatedPmf) -> Result<SizeBias> {
    v.require_full_support()?;
    check_len(v.len(), p.len())?;
    let (pv, vv) = (p.weights(), v.values());
    let n = pv.len();
    let raw: Vec<f64> = (0..n)
        .map(|x| if x + 1 < n { pv[x + 1] * vv[x] / vv[x + 1] } else { 0.0 })
        .collect();
    let total = csum(raw.iter().copied());
    if total <= 0.0 {
        return Err(Error::Degenerate(format!(
            "`{}` has no mass above 0, so K is undefined",
            p.label()
        )));
    }
    let p_hat = TruncatedPmf::from_weights(&raw)?;
    Ok(SizeBias { p_hat, k: 1.0 / total })
}

fn rhs_terms(v: &TruncatedPmf, f: &GridFunction, term: impl Fn(f64, f64) -> f64) -> Result<f64> {
    check_positive_pair(v, f)?;
    let w = v.weights();
    let fv = f.values();
    Ok(csum((0..w.len() - 1).map(|x| w[x] * term(fv[x], fv[x + 1]))))
}

/// `Σ V f(x+1)[log(f(x+1)/f(x)) − 1 + f(x)/f(x+1)]`.
pub fn mlsi_rhs_new(v: &TruncatedPmf, f: &GridFunction) -> Result<f64> {
    rhs_terms(v, f, |a, b| b * u_minus_log_excess(a / b))
}

/// `Σ V f(x)[log(f(x)/f(x+1)) − 1 + f(x+1)/f(x)]`, the term separating the
/// new right-hand side from the symmetrized one.
pub fn mlsi_rhs_diff(v: &TruncatedPmf, f: &GridFunction) -> Result<f64> {
    rhs_terms(v, f, |a, b| a * u_minus_log_excess(b / a))
}

/// `Σ V Δf Δlog f`.
pub fn mlsi_rhs_caputo(v: &TruncatedPmf, f: &GridFunction) -> Result<f64> {
    rhs_terms(v, f, |a, b| (b - a) * (b / a).ln())
}

/// `Σ V (Δf)² / f`.
pub fn mlsi_rhs_bl(v: &TruncatedPmf, f: &GridFunction) -> Result<f64> {
    rhs_terms(v, f, |a, b| (b - a) * (b - a) / a)
}

/// Both sides of the size-biased restatement
/// `D(p‖V) ≤ (1/(cK)) (D(p̂‖p) + log(1/K) − 1 + K)` for `f = p/V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestatedForm {
    pub lhs: f64,
    /// `(1/K)(D(p̂‖p) + log(1/K) − 1 + K)`, to be divided by `c`.
    pub rhs: f64,
    pub k: f64,
}

/// Evaluates the restated form for a pmf `p` on the window of `v`.
pub fn restated_form(v: &TruncatedPmf, p: &TruncatedPmf) -> Result<RestatedForm> {
    let sb = size_bias_transform(p, v)?;
    let pw = p.weights();
    let lhs = relative_entropy_values(&pw, &v.weights())?;
    let d_hat = relative_entropy_values(sb.p_hat.values(), &pw)?;
    let k = sb.k;
    Ok(RestatedForm {
        lhs,
        rhs: (d_hat + u_minus_log_excess(k)) / k,
        k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LsiGaps {
    /// `rhs_new / c − ent`, nonnegative when the inequality holds.
    pub lsi: f64,
    /// `rhs_bl − rhs_new`.
    pub bl_minus_new: f64,
    /// `rhs_caputo − rhs_new − rhs_diff`, zero up to rounding.
    pub decomposition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LsiReport {
    pub ent: f64,
    pub rhs_new: f64,
    pub rhs_caputo: f64,
    pub rhs_diff: f64,
    pub rhs_bl: f64,
    pub c_used: f64,
    /// `c_used` does not exceed the curvature infimum of `V`.
    pub hypothesis_ok: bool,
    pub scale: f64,
    pub gaps: LsiGaps,
    pub lsi_holds: bool,
    pub decomposition_ok: bool,
    pub ordering_ok: bool,
    /// Present when `f` is given as a density `p/V`.
    pub restated: Option<RestatedForm>,
}

impl LsiReport {
    /// All checks that the theory guarantees passed.
    pub fn passed(&self) -> bool {
        (!self.hypothesis_ok || self.lsi_holds) && self.decomposition_ok && self.ordering_ok
    }
}

/// Evaluate every log-Sobolev functional of `f` and compare against `c`.
pub fn lsi_verify(v: &TruncatedPmf, f: &GridFunction, c: f64) -> Result<LsiReport> {
    v.require_full_support()?;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!("c = {c} must be positive")));
    }
    let ent = entropy(v, f)?;
    let rhs_new = mlsi_rhs_new(v, f)?;
    let rhs_diff = mlsi_rhs_diff(v, f)?;
    let rhs_caputo = mlsi_rhs_caputo(v, f)?;
    let rhs_bl = mlsi_rhs_bl(v, f)?;
    let c_inf = c_log_concave_constant(v)?;
    let hypothesis_ok = c <= c_inf * (1.0 + 1e-12) + 1e-15;
    let scale = ent.abs().max(rhs_new).max(1.0);
    let gaps = LsiGaps {
        lsi: rhs_new / c - ent,
        bl_minus_new: rhs_bl - rhs_new,
        decomposition: rhs_caputo - rhs_new - rhs_diff,
    };
    let cscale = rhs_caputo.abs().max(1.0);
    Ok(LsiReport {
        ent,
        rhs_new,
        rhs_caputo,
        rhs_diff,
        rhs_bl,
        c_used: c,
        hypothesis_ok,
        scale,
        lsi_holds: ent <= rhs_new / c + LSI_TOL * scale,
        decomposition_ok: gaps.decomposition.abs() <= 1e-12 * cscale && rhs_new >= 0.0 && rhs_diff >= 0.0,
        ordering_ok: gaps.bl_minus_new >= -1e-12 * rhs_bl.abs().max(1.0),
        gaps,
        restated: None,
    })
}

/// `lsi_verify` for the density `f = p/V`, adding the restated form.
pub fn lsi_verify_density(v: &TruncatedPmf, p: &TruncatedPmf, c: f64) -> Result<LsiReport> {
    check_len(v.len(), p.len())?;
    let (pw, vw) = (p.weights(), v.weights());
    let f = GridFunction::new(pw.iter().zip(&vw).map(|(p, v)| p / v).collect())?;
    let mut report = lsi_verify(v, &f, c)?;
    report.restated = Some(restated_form(v, p)?);
    Ok(report)
}

/// Symmetrized `−Q`: `D^{1/2} (−Q) D^{−1/2}` with `D = diag(V)`. Tridiagonal,
/// with off-diagonal `−sqrt(V(x)/V(x+1))`.
fn symmetrized_negative_generator(v: &TruncatedPmf) -> Result<DMatrix<f64>> {
    v.require_full_support()?;
    let vals = v.values();
    let n = vals.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        let up = if x + 1 < n { 1.0 } else { 0.0 };
        m[(x, x)] = up + v.down_ratio(x);
        if x + 1 < n {
            let off = -(vals[x] / vals[x + 1]).sqrt();
            m[(x, x + 1)] = off;
            m[(x + 1, x)] = off;
        }
    }
    Ok(m)
}

/// Spectrum of `−L_V` on the window, ascending.
pub fn generator_spectrum(v: &TruncatedPmf) -> Result<Vec<f64>> {
    let m = symmetrized_negative_generator(v)?;
    let eig = SymmetricEigen::try_new(m, 1e-15, 100_000)
        .ok_or_else(|| Error::Numeric("symmetric eigen-solver did not converge".into()))?;
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Optimal Poincaré constant `sup var_V(f) / Σ V (Δf)²`, i.e. one over the
/// spectral gap of `−L_V`.
pub fn poincare_constant(v: &TruncatedPmf) -> Result<f64> {
    let ev = generator_spectrum(v)?;
    if ev.len() < 2 {
        return Err(Error::Degenerate("single-site window has no spectral gap".into()));
    }
    let gap = ev[1];
    if gap <= 0.0 {
        return Err(Error::Numeric(format!("nonpositive spectral gap {gap}")));
    }
    Ok(1.0 / gap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareCheck {
    pub label: String,
    pub c: f64,
    pub trials: usize,
    pub seed: u64,
    pub violations: usize,
    /// Largest `var / dirichlet` over the trials.
    pub worst_ratio: f64,
    pub passed: bool,
}

/// `var_V(f) ≤ (1/c) Σ V (Δf)²` on `trials` random positive functions.
pub fn poincare_check(v: &TruncatedPmf, c: f64, trials: usize, seed: u64) -> Result<PoincareCheck> {
    v.require_full_support()?;
    let ratios: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let f = positive_function(&mut rng, v.len());
            Ok((variance(v, &f)?, dirichlet(v, &f)?))
        })
        .collect::<Result<_>>()?;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for (var, dir) in ratios {
        if var > dir / c + LSI_TOL * var.max(dir / c).max(1e-300) {
            violations += 1;
        }
        if dir > 0.0 {
            worst = worst.max(var / dir);
        }
    }
    Ok(PoincareCheck {
        label: v.label().to_string(),
        c,
        trials,
        seed,
        violations,
        worst_ratio: worst,
        passed: violations == 0,
    })
}

/// `Ent_V(f) / rhs_new(f)` and its gradient in `u = log f`.
fn ratio_and_gradient(w: &[f64], u: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = w.len();
    let f: Vec<f64> = u.iter().map(|u| u.exp()).collect();
    let mu = csum(w.iter().zip(&f).map(|(w, f)| w * f));
    let ent = mu * csum(w.iter().zip(&f).map(|(w, f)| w * xlogx_excess_ratio(f / mu)));
    let rhs = csum((0..n - 1).map(|x| w[x] * f[x + 1] * u_minus_log_excess(f[x] / f[x + 1])));
    if !(rhs > 0.0 && ent > 0.0) || !ent.is_finite() {
        return None;
    }
    let log_mu = mu.ln();
    let mut grad = vec![0.0; n];
    for y in 0..n {
        let d_ent = w[y] * f[y] * (u[y] - log_mu);
        let mut d_rhs = 0.0;
        if y > 0 {
            d_rhs += w[y - 1] * f[y] * (u[y] - u[y - 1]);
        }
        if y + 1 < n {
            d_rhs += w[y] * (f[y] - f[y + 1]);
        }
        // gradient of log(ent / rhs)
        grad[y] = d_ent / ent - d_rhs / rhs;
    }
    Some((ent / rhs, grad))
}

/// Exposed for gradient validation: `(Ent, rhs_new, ∂Ent/∂u, ∂rhs_new/∂u)`
/// at `f = e^u`.
pub fn lsi_functionals_with_gradient(v: &TruncatedPmf, u: &[f64]) -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
    check_len(v.len(), u.len())?;
    let w = v.weights();
    let n = w.len();
    let f: Vec<f64> = u.iter().map(|u| u.exp()).collect();
    let g = GridFunction::new(f.clone())?;
    let ent = entropy(v, &g)?;
    let rhs = mlsi_rhs_new(v, &g)?;
    let mu = mean(v, &g)?;
    let de = (0..n).map(|y| w[y] * f[y] * (u[y] - mu.ln())).collect();
    let dr = (0..n)
        .map(|y| {
            let mut d = 0.0;
            if y > 0 {
                d += w[y - 1] * f[y] * (u[y] - u[y - 1]);
            }
            if y + 1 < n {
                d += w[y] * (f[y] - f[y + 1]);
            }
            d
        })
        .collect();
    Ok((ent, rhs, de, dr))
}

fn ascend(w: &[f64], mut u: Vec<f64>, iters: usize) -> f64 {
    for x in u.iter_mut() {
        *x = x.clamp(-LOG_CLIP, LOG_CLIP);
    }
    let Some((mut best, mut grad)) = ratio_and_gradient(w, &u) else {
        return 0.0;
    };
    let mut step = 1.0;
    for _ in 0..iters {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < 1e-14 {
            break;
        }
        let mut improved = false;
        while step > 1e-12 {
            let trial: Vec<f64> = u
                .iter()
                .zip(&grad)
                .map(|(u, g)| (u + step * g / norm).clamp(-LOG_CLIP, LOG_CLIP))
                .collect();
            match ratio_and_gradient(w, &trial) {
                Some((r, g)) if r > best => {
                    best = r;
                    u = trial;
                    grad = g;
                    step *= 2.0;
                    improved = true;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !improved {
            break;
        }
    }
    best
}

/// A lower bound on the best constant in `Ent_V(f) ≤ C · rhs_new(f)`,
/// from multi-start gradient ascent on `log(Ent/rhs_new)` over `f = e^u`.
/// Restart 0 starts from an exponential; the rest from random walks.
pub fn lsi_constant_estimate(v: &TruncatedPmf, restarts: usize, seed: u64) -> Result<f64> {
    v.require_full_support()?;
    let w = v.weights();
    let n = w.len();
    if n < 2 {
        return Err(Error::Degenerate("single-site window".into()));
    }
    let best = (0..restarts.max(1))
        .into_par_iter()
        .map(|i| {
            let u: Vec<f64> = if i == 0 {
                (0..n).map(|x| 0.1 * x as f64).collect()
            } else {
                let mut rng = stream_rng(seed, i as u64);
                let scale: f64 = rng.random_range(0.1..1.0);
                positive_function(&mut rng, n)
                    .values()
                    .iter()
                    .map(|f| f.ln() * scale)
                    .collect()
            };
            ascend(&w, u, 300)
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// `(Θ'(0), ψ'(0))` along `∂_t f_t = L_V f_t`, computed directly by the
/// chain rule: `Θ(t) = Σ V f_t log f_t` and
/// `ψ(t) = Σ V [f_t(x+1) log(f_t(x+1)/f_t(x)) − f_t(x+1) + f_t(x)]`.
pub fn entropy_flow_derivatives(v: &TruncatedPmf, f: &GridFunction) -> Result<(f64, f64)> {
    check_positive_pair(v, f)?;
    let w = v.weights();
    let fv = f.values();
    let lf = apply_l(v, f)?;
    let d = lf.values();
    let theta = csum((0..w.len()).map(|x| w[x] * d[x] * (fv[x].ln() + 1.0)));
    let psi = csum((0..w.len() - 1).map(|x| {
        let (a, b) = (fv[x], fv[x + 1]);
        w[x] * (d[x + 1] * (b / a).ln() - b * d[x] / a + d[x])
    }));
    Ok((theta, psi))
}

/// `w(U; s) = −(U/s − 1) log U + (1 − U)(1 − 1/s)`, nonpositive for
/// `U, s > 0` and zero only at `U = 1`.
pub fn w_term(u: f64, s: f64) -> f64 {
    // split as -(U/s)(log U - 1 + 1/U) + (log U - U + 1) to keep the
    // quadratic zero at U = 1 exact
    -(u / s) * u_minus_log_excess(1.0 / u) - u_minus_log_excess(u)
}

/// The curvature part and the `w` part of `ψ'(0)`:
/// `(−Σ V E Δf Δlog f, Σ V f(x+1) w(f(x)f(x+2)/f(x+1)², f(x)/f(x+1)))`.
/// Valid for `f` with zero increments on the top two sites.
pub fn psi_prime_parts(v: &TruncatedPmf, f: &GridFunction) -> Result<(f64, f64)> {
    check_positive_pair(v, f)?;
    let w = v.weights();
    let e = curvature_profile(v)?;
    let fv = f.values();
    let n = fv.len();
    let at = |i: usize| fv[i.min(n - 1)];
    let curv = -csum((0..n - 1).map(|x| w[x] * e[x] * (at(x + 1) - at(x)) * (at(x + 1) / at(x)).ln()));
    let wterm = csum((0..n - 1).map(|x| {
        let u = at(x) * at(x + 2) / (at(x + 1) * at(x + 1));
        w[x] * at(x + 1) * w_term(u, at(x) / at(x + 1))
    }));
    Ok((curv, wterm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson(lambda: f64) -> TruncatedPmf {
        TruncatedPmf::poisson(lambda, 1e-12).unwrap()
    }

    #[test]
    fn entropy_cases() {
        let v = poisson(2.0);
        let c = GridFunction::constant(v.len(), 3.0);
        assert_eq!(entropy(&v, &c).unwrap(), 0.0);
        let mut rng = stream_rng(1, 1);
        let f = positive_function(&mut rng, v.len());
        let e = entropy(&v, &f).unwrap();
        let scaled = entropy(&v, &f.map(|x| 2.5 * x).unwrap()).unwrap();
        assert!((scaled - 2.5 * e).abs() < 1e-12 * scaled);
        let bad = GridFunction::constant(v.len(), 0.0);
        assert!(matches!(entropy(&v, &bad), Err(Error::Domain(_))));
    }

    #[test]
    fn variance_cases() {
        let v = poisson(3.0);
        let id = GridFunction::from_fn(v.len(), |x| x as f64).unwrap();
        assert!((variance(&v, &id).unwrap() - 3.0).abs() < 1e-9);
        let shifted = id.map(|x| x + 5.0).unwrap();
        assert!((variance(&v, &shifted).unwrap() - variance(&v, &id).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn relative_entropy_poisson_pair() {
        let v = TruncatedPmf::poisson_on_window(2.0, 80).unwrap();
        let p = TruncatedPmf::poisson_on_window(1.0, 80).unwrap();
        let d = relative_entropy(&p, &v).unwrap();
        assert!((d - (1.0 + 0.5f64.ln())).abs() < 1e-12, "{d}");
        assert_eq!(relative_entropy(&v, &v).unwrap(), 0.0);
        let q = TruncatedPmf::from_weights(&[1.0, 0.0, 1.0]).unwrap();
        let r = TruncatedPmf::from_weights(&[1.0, 1.0, 1.0]).unwrap();
        assert!(relative_entropy(&r, &q).is_err());
    }

    #[test]
    fn size_bias_cases() {
        let v = TruncatedPmf::poisson_on_window(2.0, 90).unwrap();
        let p = TruncatedPmf::poisson_on_window(0.5, 90).unwrap();
        let sb = size_bias_transform(&p, &v).unwrap();
        assert!((sb.k - 4.0).abs() < 1e-12);
        for (a, b) in sb.p_hat.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let v = poisson(1.0);
        let d1 = TruncatedPmf::point_mass(1).with_window(v.max_index()).unwrap();
        let sb = size_bias_transform(&d1, &v).unwrap();
        assert!((sb.k - 1.0).abs() < 1e-12);
        assert!((sb.p_hat.values()[0] - 1.0).abs() < 1e-15);
        let d0 = TruncatedPmf::point_mass(0).with_window(v.max_index()).unwrap();
        assert!(matches!(size_bias_transform(&d0, &v), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rhs_vanish_on_constants() {
        let v = poisson(2.0);
        let c = GridFunction::constant(v.len(), 0.7);
        for r in [mlsi_rhs_new, mlsi_rhs_diff, mlsi_rhs_caputo, mlsi_rhs_bl] {
            assert_eq!(r(&v, &c).unwrap(), 0.0);
        }
    }

    #[test]
    fn poincare_of_poisson() {
        for lambda in [0.5, 2.0, 10.0] {
            let v = poisson(lambda);
            assert!((poincare_constant(&v).unwrap() - lambda).abs() < 1e-6);
        }
    }

    #[test]
    fn lemma_w_vanishes_on_unit_line() {
        for s in [0.1, 1.0, 7.0] {
            assert_eq!(w_term(1.0, s), 0.0);
            assert!(w_term(0.5, s) < 0.0 && w_term(3.0, s) < 0.0);
            let u: f64 = 2.0;
            let direct = -(u / s - 1.0) * u.ln() + (1.0 - u) * (1.0 - 1.0 / s);
            assert!((w_term(u, s) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn lsi_constant_search_on_poisson() {
        let v = poisson(2.0);
        let est = lsi_constant_estimate(&v, 4, 9).unwrap();
        assert!(est >= 2.0 - 1e-6, "{est}");
        assert!(est <= 2.0 + 1e-6, "{est}");
    }
}
