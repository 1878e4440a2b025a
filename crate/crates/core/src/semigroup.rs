//! The truncated birth–death generator and the semigroups it drives.
//!
//! The chain jumps up at rate 1 and down at rate `V(x-1)/V(x)`. On the
//! window `{0, ..., N}` the birth rate at `N` is set to zero, which keeps
//! detailed balance and makes the renormalized restriction of `V` exactly
//! stationary.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::csum;
use crate::pmf::TruncatedPmf;

/// Default integrator tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Largest uniformized jump count `Λ h` per substep.
const SUBSTEP_LOAD: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("function value at {i} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn from_fn(len: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new((0..len).map(f).collect())
    }

    pub fn constant(len: usize, c: f64) -> Self {
        Self { values: vec![c; len] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    /// Entries must exceed `1e-300` so that log ratios stay finite.
    pub fn require_positive(&self) -> Result<()> {
        match self.values.iter().position(|&v| v <= 1e-300) {
            None => Ok(()),
            Some(i) => Err(Error::domain(format!(
                "function must be positive, found {} at {i}",
                self.values[i]
            ))),
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Self {
        Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape { expected, found })
    }
}

/// Tridiagonal Q-matrix of the truncated chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorMatrix {
    /// `down[x] = Q[x, x-1] = V(x-1)/V(x)`, with `down[0] = 0`.
    down: Vec<f64>,
    /// `up[x] = Q[x, x+1]`: one, except zero at the top site.
    up: Vec<f64>,
    diag: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn new(v: &TruncatedPmf) -> Result<Self> {
        v.require_full_support()?;
        let n = v.len();
        let down: Vec<f64> = (0..n).map(|x| v.down_ratio(x)).collect();
        let up: Vec<f64> = (0..n).map(|x| if x + 1 < n { 1.0 } else { 0.0 }).collect();
        let diag = down.iter().zip(&up).map(|(d, u)| -(d + u)).collect();
        Ok(Self { down, up, diag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn down(&self) -> &[f64] {
        &self.down
    }

    pub fn up(&self) -> &[f64] {
        &self.up
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// `Q[x, y]` as a dense lookup.
    pub fn entry(&self, x: usize, y: usize) -> f64 {
        match y as isize - x as isize {
            0 => self.diag[x],
            1 => self.up[x],
            -1 => self.down[x],
            _ => 0.0,
        }
    }

    /// Largest total jump rate, the uniformization constant.
    pub fn max_rate(&self) -> f64 {
        self.diag.iter().map(|d| -d).fold(0.0, f64::max)
    }

    /// `(Q f)(x)`: the generator acting on a function.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for x in 0..n {
            let mut acc = 0.0;
            if x + 1 < n {
                acc += self.up[x] * (f[x + 1] - f[x]);
            }
            if x > 0 {
                acc -= self.down[x] * (f[x] - f[x - 1]);
            }
            out[x] = acc;
        }
    }

    /// `(p Q)(x)`: the adjoint acting on a row vector of masses.
    pub fn apply_adjoint(&self, p: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for x in 0..n {
            let mut acc = self.diag[x] * p[x];
            if x > 0 {
                acc += p[x - 1] * self.up[x - 1];
            }
            if x + 1 < n {
                acc += p[x + 1] * self.down[x + 1];
            }
            out[x] = acc;
        }
    }

    /// Largest `|V(x) Q[x,x+1] - V(x+1) Q[x+1,x]|` relative to `V(x)`.
    pub fn detailed_balance_defect(&self, v: &TruncatedPmf) -> f64 {
        let vals = v.values();
        (0..self.dim().saturating_sub(1))
            .map(|x| (vals[x] * self.up[x] - vals[x + 1] * self.down[x + 1]).abs() / vals[x])
            .fold(0.0, f64::max)
    }
}

/// `L_V f` on the window (the forward difference is dropped at `N`).
pub fn apply_l(v: &TruncatedPmf, f: &GridFunction) -> Result<GridFunction> {
    check_len(v.len(), f.len())?;
    let q = GeneratorMatrix::new(v)?;
    let mut out = vec![0.0; f.len()];
    q.apply(f.values(), &mut out);
    GridFunction::new(out)
}

/// `L_V^* p`, which equals `p Q` on the window.
pub fn apply_l_adjoint(v: &TruncatedPmf, p: &TruncatedPmf) -> Result<Vec<f64>> {
    check_len(v.len(), p.len())?;
    let q = GeneratorMatrix::new(v)?;
    let mut out = vec![0.0; p.len()];
    q.apply_adjoint(p.values(), &mut out);
    Ok(out)
}

/// Diagnostics from a uniformization run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolveStats {
    pub substeps: usize,
    /// Sup-norm discrepancy between the run and a rerun with twice the
    /// substeps, relative to the sup norm of the state.
    pub step_doubling_error: f64,
}

#[derive(Clone, Copy)]
enum Side {
    /// Row vector `p ↦ p e^{tQ}`.
    Mass,
    /// Column vector `f ↦ e^{tQ} f`.
    Function,
}

fn uniformize(q: &GeneratorMatrix, start: &[f64], t: f64, substeps: usize, side: Side) -> Vec<f64> {
    let rate = q.max_rate();
    let mut state = start.to_vec();
    if t == 0.0 || rate == 0.0 {
        return state;
    }
    let h = t / substeps as f64;
    let load = rate * h;
    let n = q.dim();
    let mut term = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut acc = vec![0.0; n];
    for _ in 0..substeps {
        term.copy_from_slice(&state);
        let mut weight = (-load).exp();
        for (a, s) in acc.iter_mut().zip(&state) {
            *a = weight * s;
        }
        let mut k = 0usize;
        loop {
            k += 1;
            // term <- term P, P = I + Q / rate
            match side {
                Side::Mass => q.apply_adjoint(&term, &mut scratch),
                Side::Function => q.apply(&term, &mut scratch),
            }
            for (tv, s) in term.iter_mut().zip(&scratch) {
                *tv += s / rate;
            }
            weight *= load / k as f64;
            for (a, tv) in acc.iter_mut().zip(&term) {
                *a += weight * tv;
            }
            if k as f64 > load && weight < 1e-18 {
                break;
            }
        }
        state.copy_from_slice(&acc);
    }
    state
}

fn evolve_checked(q: &GeneratorMatrix, start: &[f64], t: f64, tol: f64, side: Side) -> Result<(Vec<f64>, EvolveStats)> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid(format!("time {t} must be finite and nonnegative")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    let substeps = ((q.max_rate() * t / SUBSTEP_LOAD).ceil() as usize).max(1);
    let coarse = uniformize(q, start, t, substeps, side);
    let fine = uniformize(q, start, t, 2 * substeps, side);
    let scale = fine.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let err = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    if err > tol {
        return Err(Error::Accuracy {
            tol,
            estimate: err,
            detail: format!("uniformization with {substeps} substeps over t = {t}"),
        });
    }
    Ok((
        fine,
        EvolveStats {
            substeps: 2 * substeps,
            step_doubling_error: err,
        },
    ))
}

/// `p_t = p_0 e^{tQ}`, the law of the chain at time `t`.
pub fn evolve_pmf(v: &TruncatedPmf, p0: &TruncatedPmf, t: f64, tol: f64) -> Result<TruncatedPmf> {
    evolve_pmf_with_stats(v, p0, t, tol).map(|(p, _)| p)
}

pub fn evolve_pmf_with_stats(
    v: &TruncatedPmf,
    p0: &TruncatedPmf,
    t: f64,
    tol: f64,
) -> Result<(TruncatedPmf, EvolveStats)> {
    check_len(v.len(), p0.len())?;
    let q = GeneratorMatrix::new(v)?;
    let (mut values, stats) = evolve_checked(&q, p0.values(), t, tol, Side::Mass)?;
    // uniformization is a positive scheme; clear rounding-level negatives
    for p in values.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let drift = (csum(values.iter().copied()) - p0.window_mass()).abs();
    if drift > 1e-10 * (1.0 + t) {
        return Err(Error::Accuracy {
            tol: 1e-10 * (1.0 + t),
            estimate: drift,
            detail: "mass drift".into(),
        });
    }
    Ok((p0.evolved(values), stats))
}

/// `f_t = e^{tQ} f_0`, solving `df/dt = L_V f`.
pub fn evolve_function(v: &TruncatedPmf, f0: &GridFunction, t: f64, tol: f64) -> Result<GridFunction> {
    evolve_function_with_stats(v, f0, t, tol).map(|(f, _)| f)
}

pub fn evolve_function_with_stats(
    v: &TruncatedPmf,
    f0: &GridFunction,
    t: f64,
    tol: f64,
) -> Result<(GridFunction, EvolveStats)> {
    check_len(v.len(), f0.len())?;
    let q = GeneratorMatrix::new(v)?;
    let (values, stats) = evolve_checked(&q, f0.values(), t, tol, Side::Function)?;
    Ok((GridFunction::new(values)?, stats))
}

/// The three sides of the self-adjointness identity:
/// `(Σ V f L g, Σ V (L f) g, -Σ V Δf Δg)`.
pub fn verify_self_adjoint(v: &TruncatedPmf, f: &GridFunction, g: &GridFunction) -> Result<(f64, f64, f64)> {
    check_len(v.len(), f.len())?;
    check_len(v.len(), g.len())?;
    let w = v.weights();
    let lf = apply_l(v, f)?;
    let lg = apply_l(v, g)?;
    let (fv, gv) = (f.values(), g.values());
    let a = csum((0..w.len()).map(|x| w[x] * fv[x] * lg.values()[x]));
    let b = csum((0..w.len()).map(|x| w[x] * lf.values()[x] * gv[x]));
    let c = -csum((0..w.len() - 1).map(|x| w[x] * (fv[x + 1] - fv[x]) * (gv[x + 1] - gv[x])));
    Ok((a, b, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson(lambda: f64) -> TruncatedPmf {
        TruncatedPmf::poisson(lambda, 1e-12).unwrap()
    }

    #[test]
    fn generator_invariants() {
        let v = TruncatedPmf::bernoulli_sum(&[0.2, 0.6, 0.9])
            .unwrap()
            .perturb(0.3)
            .unwrap();
        let q = GeneratorMatrix::new(&v).unwrap();
        for x in 0..q.dim() {
            assert_eq!(q.down()[x] + q.up()[x] + q.diag()[x], 0.0);
            let others: f64 = (0..q.dim()).filter(|&y| y != x).map(|y| q.entry(x, y)).sum();
            assert_eq!(others, -q.entry(x, x));
        }
        assert!(q.detailed_balance_defect(&v) < 1e-12);
        let w = v.weights();
        let mut out = vec![0.0; w.len()];
        q.apply_adjoint(&w, &mut out);
        assert!(out.iter().all(|o| o.abs() < 1e-12));
    }

    #[test]
    fn l_kills_constants_and_matches_mm_infinity() {
        let lambda = 3.0;
        let v = poisson(lambda);
        let c = GridFunction::constant(v.len(), 2.5);
        assert!(apply_l(&v, &c).unwrap().values().iter().all(|&x| x == 0.0));
        let id = GridFunction::from_fn(v.len(), |x| x as f64).unwrap();
        let l = apply_l(&v, &id).unwrap();
        for x in 0..v.max_index() {
            assert!((l.values()[x] - (1.0 - x as f64 / lambda)).abs() < 1e-12);
        }
        let mass: f64 = v.weights().iter().zip(l.values()).map(|(w, l)| w * l).sum();
        assert!(mass.abs() < 1e-12);
    }

    #[test]
    fn adjoint_cases() {
        let v = poisson(1.0);
        let delta = TruncatedPmf::point_mass(0).with_window(v.max_index()).unwrap();
        let out = apply_l_adjoint(&v, &delta).unwrap();
        assert_eq!(out[0], -1.0);
        assert_eq!(out[1], 1.0);
        assert!(out[2..].iter().all(|&o| o == 0.0));
        let stationary = TruncatedPmf::from_weights(v.values()).unwrap();
        let out = apply_l_adjoint(&v, &stationary).unwrap();
        assert!(out.iter().all(|o| o.abs() < 1e-12));
        let p = TruncatedPmf::poisson(2.5, 1e-12)
            .unwrap()
            .with_window(v.max_index())
            .unwrap();
        let out = apply_l_adjoint(&v, &p).unwrap();
        assert!(out.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let v = poisson(1.0);
        let f = GridFunction::constant(3, 1.0);
        assert!(matches!(apply_l(&v, &f), Err(Error::Shape { .. })));
    }

    #[test]
    fn evolve_pmf_identity_and_semigroup() {
        let v = poisson(2.0);
        let p0 = TruncatedPmf::point_mass(3).with_window(v.max_index()).unwrap();
        let same = evolve_pmf(&v, &p0, 0.0, 1e-10).unwrap();
        assert_eq!(same.values(), p0.values());
        let tol = 1e-10;
        let half = evolve_pmf(&v, &p0, 0.35, tol).unwrap();
        let two_halves = evolve_pmf(&v, &half, 0.35, tol).unwrap();
        let full = evolve_pmf(&v, &p0, 0.7, tol).unwrap();
        for (a, b) in two_halves.values().iter().zip(full.values()) {
            assert!((a - b).abs() <= 2.0 * tol);
        }
    }

    #[test]
    fn evolve_function_limits() {
        let v = TruncatedPmf::negative_binomial(3.0, 0.3, 1e-12).unwrap();
        let c = GridFunction::constant(v.len(), 4.0);
        let ct = evolve_function(&v, &c, 3.0, 1e-10).unwrap();
        assert!(ct.values().iter().all(|&x| (x - 4.0).abs() < 1e-12));

        let f0 = GridFunction::from_fn(v.len(), |x| 1.0 + (x as f64 * 0.7).sin().abs()).unwrap();
        let mean: f64 = v.weights().iter().zip(f0.values()).map(|(w, f)| w * f).sum();
        let ft = evolve_function(&v, &f0, 400.0, 1e-10).unwrap();
        for &x in ft.values() {
            assert!((x - mean).abs() < 1e-8, "{x} vs {mean}");
            assert!(x > 0.0);
        }
    }

    #[test]
    fn self_adjoint_special_cases() {
        let v = poisson(2.0);
        let c = GridFunction::constant(v.len(), 1.3);
        assert_eq!(verify_self_adjoint(&v, &c, &c).unwrap(), (0.0, 0.0, 0.0));
        let id = GridFunction::from_fn(v.len(), |x| x as f64).unwrap();
        let (a, b, c) = verify_self_adjoint(&v, &id, &id).unwrap();
        let expect = -(1.0 - v.tail_mass());
        for s in [a, b, c] {
            assert!((s - expect).abs() < 1e-10, "{s}");
        }
    }
}
