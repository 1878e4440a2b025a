//! Carré du champ calculus for `L_V`: pointwise `Γ₁`, `Γ₂`, their
//! `V`-averages in closed form, and randomized certification of the
//! integrated Bakry–Émery condition `Σ V Γ₂(f,f) ≥ c Σ V Γ₁(f,f)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::curvature_profile;
use crate::error::{Error, Result};
use crate::numeric::csum;
use crate::pmf::TruncatedPmf;
use crate::random::{interior_function, stream_rng};
use crate::semigroup::{apply_l, check_len, GridFunction};

/// Relative slack in the integrated BE comparison.
pub const BE_TOL: f64 = 1e-10;

fn check_pair(v: &TruncatedPmf, f: &GridFunction, g: &GridFunction) -> Result<()> {
    v.require_full_support()?;
    check_len(v.len(), f.len())?;
    check_len(v.len(), g.len())
}

/// `Γ₁(f,g) = ½[L_V(fg) − f L_V g − g L_V f]` at every site.
pub fn gamma1_pointwise(v: &TruncatedPmf, f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    check_pair(v, f, g)?;
    let lfg = apply_l(v, &f.mul(g))?;
    let lf = apply_l(v, f)?;
    let lg = apply_l(v, g)?;
    let (fv, gv) = (f.values(), g.values());
    GridFunction::from_fn(v.len(), |x| {
        0.5 * (lfg.values()[x] - (fv[x] * lg.values()[x] + gv[x] * lf.values()[x]))
    })
}

/// `Γ₂(f,g) = ½[L_V Γ₁(f,g) − Γ₁(f, L_V g) − Γ₁(g, L_V f)]` at every site.
pub fn gamma2_pointwise(v: &TruncatedPmf, f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    check_pair(v, f, g)?;
    let lf = apply_l(v, f)?;
    let lg = apply_l(v, g)?;
    let l_g1 = apply_l(v, &gamma1_pointwise(v, f, g)?)?;
    let a = gamma1_pointwise(v, f, &lg)?;
    let b = gamma1_pointwise(v, g, &lf)?;
    GridFunction::from_fn(v.len(), |x| 0.5 * (l_g1.values()[x] - (a.values()[x] + b.values()[x])))
}

/// `Σ_x w(x) h(x)` against the window weights.
pub fn weighted_sum(v: &TruncatedPmf, h: &GridFunction) -> f64 {
    csum(v.weights().iter().zip(h.values()).map(|(w, h)| w * h))
}

/// `Σ V Δf Δg`.
pub fn gamma1_mean(v: &TruncatedPmf, f: &GridFunction, g: &GridFunction) -> Result<f64> {
    check_pair(v, f, g)?;
    let w = v.weights();
    let (fv, gv) = (f.values(), g.values());
    Ok(csum(
        (0..w.len() - 1).map(|x| w[x] * (fv[x + 1] - fv[x]) * (gv[x + 1] - gv[x])),
    ))
}

/// Whether `Δf` vanishes on the top two sites of the window.
pub fn is_interior(f: &GridFunction) -> bool {
    let vals = f.values();
    let n = vals.len();
    if n < 3 {
        return false;
    }
    let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tol = 1e-15 * scale;
    (vals[n - 1] - vals[n - 2]).abs() <= tol && (vals[n - 2] - vals[n - 3]).abs() <= tol
}

fn require_interior(f: &GridFunction, name: &str) -> Result<()> {
    if is_interior(f) {
        Ok(())
    } else {
        Err(Error::window(format!(
            "{name} must have zero increments on the top two sites of the window"
        )))
    }
}

/// Second difference `Lf(x) = f(x+1) − 2f(x) + f(x−1)`, with `f` extended
/// as a constant above the window.
fn second_difference(f: &[f64], x: usize) -> f64 {
    let at = |i: usize| f[i.min(f.len() - 1)];
    at(x + 1) - 2.0 * at(x) + at(x - 1)
}

/// `Σ V [Lf(x+1) Lg(x+1) + E(x) Δf(x) Δg(x)]`, the closed form of `Σ V Γ₂(f,g)`.
pub fn gamma2_mean(v: &TruncatedPmf, f: &GridFunction, g: &GridFunction) -> Result<f64> {
    check_pair(v, f, g)?;
    require_interior(f, "f")?;
    require_interior(g, "g")?;
    let w = v.weights();
    let e = curvature_profile(v)?;
    let (fv, gv) = (f.values(), g.values());
    Ok(csum((0..w.len() - 1).map(|x| {
        let df = fv[x + 1] - fv[x];
        let dg = gv[x + 1] - gv[x];
        w[x] * (second_difference(fv, x + 1) * second_difference(gv, x + 1) + e[x] * df * dg)
    })))
}

/// `Σ V Γ₂(f,g)` summed from the pointwise definition.
pub fn gamma2_mean_brute(v: &TruncatedPmf, f: &GridFunction, g: &GridFunction) -> Result<f64> {
    Ok(weighted_sum(v, &gamma2_pointwise(v, f, g)?))
}

/// Pointwise residual of the one-step commutation identity
/// `L_V f(x+1) − L_V f(x) = Lf(x+1) − Lf(x) V(x−1)/V(x) − E(x) Δf(x)`,
/// at the sites `x = 0..N−2` where `L_V f(x+1)` is untouched by the window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutationResidual {
    pub residual: Vec<f64>,
    /// Sum of the magnitudes of the terms at each site.
    pub scale: Vec<f64>,
}

impl CommutationResidual {
    /// Largest `|residual| / max(scale, 1)`.
    pub fn worst_relative(&self) -> f64 {
        self.residual
            .iter()
            .zip(&self.scale)
            .map(|(r, s)| r.abs() / s.max(1.0))
            .fold(0.0, f64::max)
    }
}

pub fn one_step_commutation_residual(v: &TruncatedPmf, f: &GridFunction) -> Result<CommutationResidual> {
    check_pair(v, f, f)?;
    let lvf = apply_l(v, f)?;
    let e = curvature_profile(v)?;
    let fv = f.values();
    let lv = lvf.values();
    let n = fv.len();
    let sites = n.saturating_sub(2);
    let mut residual = Vec::with_capacity(sites);
    let mut scale = Vec::with_capacity(sites);
    for x in 0..sites {
        let lhs = lv[x + 1] - lv[x];
        let lf_next = fv[x + 2] - 2.0 * fv[x + 1] + fv[x];
        let down = v.down_ratio(x);
        // the V(-1) = 0 convention removes Lf(0)
        let lf_here = if x == 0 {
            0.0
        } else {
            fv[x + 1] - 2.0 * fv[x] + fv[x - 1]
        };
        let curv = e[x] * (fv[x + 1] - fv[x]);
        let rhs = lf_next - lf_here * down - curv;
        residual.push(lhs - rhs);
        scale.push(lv[x + 1].abs() + lv[x].abs() + lf_next.abs() + (lf_here * down).abs() + curv.abs());
    }
    Ok(CommutationResidual { residual, scale })
}

/// Both sides of the modified product rule
/// `Σ V Γ₁(f, gh) = Σ V Δf Δg h(·+1) + Σ V Δf Δh g`.
pub fn product_rule_sides(
    v: &TruncatedPmf,
    f: &GridFunction,
    g: &GridFunction,
    h: &GridFunction,
) -> Result<(f64, f64)> {
    check_pair(v, f, g)?;
    check_len(v.len(), h.len())?;
    let lhs = weighted_sum(v, &gamma1_pointwise(v, f, &g.mul(h))?);
    let w = v.weights();
    let (fv, gv, hv) = (f.values(), g.values(), h.values());
    let rhs = csum((0..w.len() - 1).map(|x| {
        let df = fv[x + 1] - fv[x];
        w[x] * df * ((gv[x + 1] - gv[x]) * hv[x + 1] + (hv[x + 1] - hv[x]) * gv[x])
    }));
    Ok((lhs, rhs))
}

/// `(Σ V Γ₁(φ∘f, f), Σ V φ'(f) Γ₁(f, f))`. The two agree for diffusions;
/// for the birth–death chain they generally do not.
pub fn chain_rule_sides(
    v: &TruncatedPmf,
    f: &GridFunction,
    phi: impl Fn(f64) -> f64,
    dphi: impl Fn(f64) -> f64,
) -> Result<(f64, f64)> {
    let pf = f.map(phi)?;
    let lhs = weighted_sum(v, &gamma1_pointwise(v, &pf, f)?);
    let g11 = gamma1_pointwise(v, f, f)?;
    let weighted = f.map(dphi)?.mul(&g11);
    Ok((lhs, weighted_sum(v, &weighted)))
}

/// The interior-supported function minimizing `Σ V Γ₂(f,f) / Σ V Γ₁(f,f)`
/// on the window, found as the lowest generalized eigenvector of the two
/// quadratic forms written in the increments `d = Δf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeExtremal {
    pub f: GridFunction,
    /// `Σ V Γ₂(f,f) / Σ V Γ₁(f,f)` recomputed from the closed forms.
    pub ratio: f64,
    /// The eigenvalue itself.
    pub eigenvalue: f64,
}

pub fn be_extremal(v: &TruncatedPmf) -> Result<BeExtremal> {
    v.require_full_support()?;
    let n = v.len();
    if n < 4 {
        return Err(Error::Degenerate(
            "window too short for an interior-supported nonconstant function".into(),
        ));
    }
    let m = n - 3; // free increments d_0..d_{m-1}; d_x = 0 for x >= m
    let w = v.weights();
    let e = curvature_profile(v)?;
    let mut a = DMatrix::<f64>::zeros(m, m);
    for x in 0..n - 1 {
        // w_x (d_{x+1} - d_x)^2
        if x < m {
            a[(x, x)] += w[x] * (1.0 + e[x]);
        }
        if x + 1 < m {
            a[(x + 1, x + 1)] += w[x];
            a[(x, x + 1)] -= w[x];
            a[(x + 1, x)] -= w[x];
        }
    }
    let s: Vec<f64> = (0..m).map(|x| 1.0 / w[x].sqrt()).collect();
    let b = DMatrix::from_fn(m, m, |i, j| s[i] * a[(i, j)] * s[j]);
    let eig = SymmetricEigen::new(b);
    let (k, &eigenvalue) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Numeric("empty eigen-decomposition".into()))?;
    let y = eig.eigenvectors.column(k);
    let d: Vec<f64> = (0..m).map(|x| s[x] * y[x]).collect();
    let dmax = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut vals = vec![0.0; n];
    for x in 0..n - 1 {
        let step = if x < m { d[x] / dmax } else { 0.0 };
        vals[x + 1] = vals[x] + step;
    }
    let f = GridFunction::new(vals)?;
    let g1 = gamma1_mean(v, &f, &f)?;
    let g2 = gamma2_mean(v, &f, &f)?;
    Ok(BeExtremal {
        f,
        ratio: g2 / g1,
        eigenvalue,
    })
}

/// One trial of the integrated BE comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeTrial {
    pub gamma1: f64,
    pub gamma2: f64,
    /// `Σ V Γ₂ − c Σ V Γ₁`.
    pub margin: f64,
    pub scale: f64,
    pub ok: bool,
}

impl BeTrial {
    pub fn evaluate(v: &TruncatedPmf, f: &GridFunction, c: f64) -> Result<Self> {
        let gamma1 = gamma1_mean(v, f, f)?;
        let gamma2 = gamma2_mean(v, f, f)?;
        let margin = gamma2 - c * gamma1;
        let scale = gamma2.abs() + (c * gamma1).abs();
        Ok(Self {
            gamma1,
            gamma2,
            margin,
            scale,
            ok: margin >= -BE_TOL * scale,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeReport {
    pub label: String,
    pub c: f64,
    pub trials: usize,
    pub seed: u64,
    pub violations: usize,
    /// Smallest `margin / scale` over the random trials.
    pub worst_relative_margin: f64,
    /// Ratio attained by the constructed near-extremal function.
    pub extremal_ratio: f64,
    pub extremal_violates: bool,
    pub passed: bool,
}

/// Checks `Σ V Γ₂(f,f) ≥ c Σ V Γ₁(f,f)` on `trials` random interior-supported
/// functions plus the constructed extremal function. Trial `i` draws from
/// its own stream of `seed`.
pub fn integrated_be_check(v: &TruncatedPmf, c: f64, trials: usize, seed: u64) -> Result<BeReport> {
    v.require_full_support()?;
    if !c.is_finite() {
        return Err(Error::invalid(format!("c = {c} must be finite")));
    }
    let results: Vec<BeTrial> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let f = interior_function(&mut rng, v.len());
            BeTrial::evaluate(v, &f, c)
        })
        .collect::<Result<_>>()?;
    let mut violations = results.iter().filter(|t| !t.ok).count();
    let worst = results
        .iter()
        .map(|t| if t.scale > 0.0 { t.margin / t.scale } else { 0.0 })
        .fold(f64::INFINITY, f64::min);
    let (extremal_ratio, extremal_violates) = match be_extremal(v) {
        Ok(ext) => {
            let t = BeTrial::evaluate(v, &ext.f, c)?;
            (ext.ratio, !t.ok)
        }
        Err(Error::Degenerate(_)) => (f64::NAN, false),
        Err(e) => return Err(e),
    };
    if extremal_violates {
        violations += 1;
    }
    Ok(BeReport {
        label: v.label().to_string(),
        c,
        trials,
        seed,
        violations,
        worst_relative_margin: if trials == 0 { 0.0 } else { worst },
        extremal_ratio,
        extremal_violates,
        passed: violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::positive_function;

    fn poisson(lambda: f64) -> TruncatedPmf {
        TruncatedPmf::poisson(lambda, 1e-12).unwrap()
    }

    #[test]
    fn constants_have_no_energy() {
        let v = poisson(2.0);
        let c = GridFunction::constant(v.len(), 3.0);
        let mut rng = stream_rng(0, 0);
        let f = positive_function(&mut rng, v.len());
        assert!(gamma1_pointwise(&v, &c, &f)
            .unwrap()
            .values()
            .iter()
            .all(|x| x.abs() < 1e-12));
        assert!(gamma2_pointwise(&v, &c, &c)
            .unwrap()
            .values()
            .iter()
            .all(|x| x.abs() < 1e-12));
        assert_eq!(gamma1_mean(&v, &c, &f).unwrap(), 0.0);
        assert_eq!(gamma2_mean(&v, &c, &c).unwrap(), 0.0);
    }

    #[test]
    fn identity_energy_is_window_mass() {
        let v = poisson(2.0);
        let id = GridFunction::from_fn(v.len(), |x| x as f64).unwrap();
        let g1 = gamma1_mean(&v, &id, &id).unwrap();
        assert!((g1 - (1.0 - v.tail_mass())).abs() < 1e-10);
    }

    #[test]
    fn pointwise_gamma1_is_symmetric_and_sums_to_closed_form() {
        let v = poisson(1.5);
        let mut rng = stream_rng(5, 0);
        let f = positive_function(&mut rng, v.len());
        let g = positive_function(&mut rng, v.len());
        let a = gamma1_pointwise(&v, &f, &g).unwrap();
        let b = gamma1_pointwise(&v, &g, &f).unwrap();
        assert_eq!(a, b);
        let s = weighted_sum(&v, &a);
        assert!((s - gamma1_mean(&v, &f, &g).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn exponential_gamma2_matches_definition() {
        let v = poisson(3.0);
        let f = crate::random::make_interior(&GridFunction::from_fn(v.len(), |x| (0.2 * x as f64).exp()).unwrap());
        let closed = gamma2_mean(&v, &f, &f).unwrap();
        let brute = gamma2_mean_brute(&v, &f, &f).unwrap();
        assert!(closed > 0.0);
        assert!((closed - brute).abs() <= 1e-9 * closed.abs());
    }

    #[test]
    fn boundary_support_is_rejected() {
        let v = poisson(2.0);
        let id = GridFunction::from_fn(v.len(), |x| x as f64).unwrap();
        assert!(matches!(gamma2_mean(&v, &id, &id), Err(Error::Window(_))));
    }

    #[test]
    fn commutation_identity_constant_is_exact() {
        let v = poisson(2.0);
        let c = GridFunction::constant(v.len(), 1.0);
        let r = one_step_commutation_residual(&v, &c).unwrap();
        assert!(r.residual.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn be_check_poisson() {
        let v = poisson(2.0);
        let ok = integrated_be_check(&v, 0.5, 200, 11).unwrap();
        assert!(ok.passed, "{ok:?}");
        let bad = integrated_be_check(&v, 0.6, 10, 11).unwrap();
        assert!(bad.violations > 0);
        assert!(bad.extremal_violates);
        assert!((ok.extremal_ratio - 0.5).abs() < 1e-3);
    }

    #[test]
    fn chain_rule_fails_for_exp() {
        let v = poisson(1.0);
        let f = GridFunction::from_fn(v.len(), |x| (x as f64 * 0.5).sin()).unwrap();
        let (a, b) = chain_rule_sides(&v, &f, f64::exp, f64::exp).unwrap();
        assert!((a - b).abs() > 1e-3 * a.abs().max(b.abs()));
    }
}
