//! Birth–death dynamics on a box in `Z₊^d`.
//!
//! The chain jumps `x → x + e_i` at rate 1 (0 on the top face of axis `i`)
//! and `x → x − e_i` at rate `V(x − e_i)/V(x)`. Every positive `V` on the
//! box is reversible for it, so the averaged Γ-sums can be compared against
//! their brute-force definitions exactly as in one dimension.
//!
//! `V` outside the box from below is zero; functions are extended above the
//! box by clamping each coordinate.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gamma::{be_extremal, CommutationResidual, BE_TOL};
use crate::numeric::csum;
use crate::pmf::TruncatedPmf;
use crate::random::{bounded_walk, stream_rng, LOG_BOUND};
use crate::semigroup::GridFunction;

/// Smallest eigenvalue of `E^sym(y)` accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-12;

/// Size limits on the dense box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoxLimits {
    pub max_dim: usize,
    /// Largest admissible per-axis top index `N_k`.
    pub max_axis: usize,
}

impl Default for BoxLimits {
    fn default() -> Self {
        Self {
            max_dim: 4,
            max_axis: 64,
        }
    }
}

/// Row-major layout of `{0..N_1} × … × {0..N_d}`, last axis fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoxShape {
    sizes: Vec<usize>,
    #[serde(skip)]
    strides: Vec<usize>,
}

impl BoxShape {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        Self::with_limits(sizes, BoxLimits::default())
    }

    pub fn with_limits(sizes: Vec<usize>, limits: BoxLimits) -> Result<Self> {
        let d = sizes.len();
        if d == 0 || d > limits.max_dim {
            return Err(Error::invalid(format!("dimension {d} outside 1..={}", limits.max_dim)));
        }
        if let Some(&n) = sizes.iter().find(|&&n| n == 0 || n - 1 > limits.max_axis) {
            return Err(Error::window(format!(
                "axis of {n} sites outside 1..={}",
                limits.max_axis + 1
            )));
        }
        let mut strides = vec![1; d];
        for k in (0..d - 1).rev() {
            strides[k] = strides[k + 1] * sizes[k + 1];
        }
        Ok(Self { sizes, strides })
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    /// Sites per axis, `N_k + 1`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, x: &[usize]) -> Option<usize> {
        if x.len() != self.dim() || x.iter().zip(&self.sizes).any(|(&a, &n)| a >= n) {
            return None;
        }
        Some(x.iter().zip(&self.strides).map(|(a, s)| a * s).sum())
    }

    pub fn coords(&self, idx: usize) -> Vec<usize> {
        (0..self.dim()).map(|k| self.coord(idx, k)).collect()
    }

    #[inline]
    pub fn coord(&self, idx: usize, k: usize) -> usize {
        (idx / self.strides[k]) % self.sizes[k]
    }

    /// `x + e_k`, if inside the box.
    #[inline]
    pub fn up(&self, idx: usize, k: usize) -> Option<usize> {
        (self.coord(idx, k) + 1 < self.sizes[k]).then(|| idx + self.strides[k])
    }

    /// `x − e_k`, if inside the box.
    #[inline]
    pub fn down(&self, idx: usize, k: usize) -> Option<usize> {
        (self.coord(idx, k) > 0).then(|| idx - self.strides[k])
    }

    /// `x + e_k`, with the coordinate clamped at the top face.
    #[inline]
    fn up_clamped(&self, idx: usize, k: usize) -> usize {
        self.up(idx, k).unwrap_or(idx)
    }

    fn require_same(&self, other: &Self) -> Result<()> {
        if self.sizes == other.sizes {
            Ok(())
        } else {
            Err(Error::Shape {
                expected: self.len(),
                found: other.len(),
            })
        }
    }
}

/// A probability mass function on a box, with per-axis tail budgets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPmfD {
    shape: BoxShape,
    values: Vec<f64>,
    #[serde(skip)]
    weights: Vec<f64>,
    tail_masses: Vec<f64>,
    label: String,
    full_support: bool,
}

/// `V(x) = Π_k V_k(x_k)`.
pub fn product_pmf(factors: &[TruncatedPmf]) -> Result<GridPmfD> {
    product_pmf_with_limits(factors, BoxLimits::default())
}

pub fn product_pmf_with_limits(factors: &[TruncatedPmf], limits: BoxLimits) -> Result<GridPmfD> {
    for f in factors {
        f.require_full_support()?;
    }
    let shape = BoxShape::with_limits(factors.iter().map(|f| f.len()).collect(), limits)?;
    let fw: Vec<Vec<f64>> = factors.iter().map(|f| f.weights()).collect();
    let fv: Vec<&[f64]> = factors.iter().map(|f| f.values()).collect();
    let product = |vals: &[&[f64]]| -> Vec<f64> {
        (0..shape.len())
            .map(|idx| (0..shape.dim()).map(|k| vals[k][shape.coord(idx, k)]).product())
            .collect()
    };
    let values = product(&fv);
    let weights = product(&fw.iter().map(Vec::as_slice).collect::<Vec<_>>());
    let label = factors.iter().map(|f| f.label()).collect::<Vec<_>>().join(" ⊗ ");
    Ok(GridPmfD {
        shape,
        values,
        weights,
        tail_masses: factors.iter().map(|f| f.tail_mass()).collect(),
        label,
        full_support: true,
    })
}

impl GridPmfD {
    /// A pmf on the box proportional to `weights` (row-major, last axis
    /// fastest), with no tail.
    pub fn from_weights(shape: BoxShape, weights: &[f64], label: impl Into<String>) -> Result<Self> {
        if weights.len() != shape.len() {
            return Err(Error::Shape {
                expected: shape.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total = csum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::invalid("weights sum to zero"));
        }
        let values: Vec<f64> = weights.iter().map(|w| w / total).collect();
        Ok(Self {
            full_support: values.iter().all(|&v| v > 0.0),
            tail_masses: vec![0.0; shape.dim()],
            weights: values.clone(),
            values,
            shape,
            label: label.into(),
        })
    }

    pub fn shape(&self) -> &BoxShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values normalized to sum to one on the box; the stationary law of
    /// the truncated chain.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tail_masses(&self) -> &[f64] {
        &self.tail_masses
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_full_support(&self) -> bool {
        self.full_support
    }

    pub fn require_full_support(&self) -> Result<()> {
        if self.full_support {
            return Ok(());
        }
        let index = self.values.iter().position(|&v| v <= 0.0).unwrap_or(0);
        Err(Error::NotFullSupport {
            label: self.label.clone(),
            index,
        })
    }

    #[inline]
    fn w(&self, idx: Option<usize>) -> f64 {
        idx.map_or(0.0, |i| self.weights[i])
    }

    /// Marginal weights along axis `k`.
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        let mut out = vec![Vec::new(); self.shape.sizes[k]];
        for (idx, &w) in self.values.iter().enumerate() {
            out[self.shape.coord(idx, k)].push(w);
        }
        out.into_iter().map(csum).collect()
    }

    /// `V` restricted to the axis `k` through the origin, renormalized.
    pub fn axis_slice(&self, k: usize) -> Result<TruncatedPmf> {
        let w: Vec<f64> = (0..self.shape.sizes[k])
            .map(|a| self.weights[a * self.shape.strides[k]])
            .collect();
        TruncatedPmf::from_weights(&w)
    }
}

/// Real values on the sites of a box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunctionD {
    shape: BoxShape,
    values: Vec<f64>,
}

impl GridFunctionD {
    pub fn new(shape: BoxShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::Shape {
                expected: shape.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite function value at site {i}")));
        }
        Ok(Self { shape, values })
    }

    pub fn from_fn(shape: &BoxShape, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let values = (0..shape.len()).map(|i| f(&shape.coords(i))).collect();
        Self::new(shape.clone(), values)
    }

    pub fn constant(shape: &BoxShape, c: f64) -> Self {
        Self {
            shape: shape.clone(),
            values: vec![c; shape.len()],
        }
    }

    /// `f(x) = Σ_k u_k(x_k)`.
    pub fn separable(shape: &BoxShape, parts: &[GridFunction]) -> Result<Self> {
        if parts.len() != shape.dim() {
            return Err(Error::Shape {
                expected: shape.dim(),
                found: parts.len(),
            });
        }
        for (k, p) in parts.iter().enumerate() {
            crate::semigroup::check_len(shape.sizes[k], p.len())?;
        }
        Self::from_fn(shape, |x| csum(x.iter().zip(parts).map(|(&a, p)| p.values()[a])))
    }

    pub fn shape(&self) -> &BoxShape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
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

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.shape.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// `f` with every coordinate clamped to `N_k − 2`, so that increments
    /// vanish on the two top layers of each face.
    pub fn interior(&self) -> Self {
        let s = &self.shape;
        let values = (0..s.len())
            .map(|idx| {
                let mut src = 0;
                for k in 0..s.dim() {
                    let top = s.sizes[k].saturating_sub(3);
                    src += s.coord(idx, k).min(top) * s.strides[k];
                }
                self.values[src]
            })
            .collect();
        Self {
            shape: s.clone(),
            values,
        }
    }

    /// Whether every increment `Δ_k f(x)` with `x_k ≥ N_k − 2` vanishes.
    pub fn is_interior(&self) -> bool {
        let s = &self.shape;
        if s.sizes.iter().any(|&n| n < 3) {
            return false;
        }
        let scale = self.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        (0..s.len()).all(|idx| {
            (0..s.dim()).all(|k| {
                s.coord(idx, k) + 3 < s.sizes[k]
                    || s.up(idx, k)
                        .is_none_or(|j| (self.values[j] - self.values[idx]).abs() <= 1e-15 * scale)
            })
        })
    }
}

/// A random positive function on the box: `exp` of a sum of per-axis
/// bounded walks plus site noise, clamped to `[-3, 3]`.
pub fn positive_function_d<R: Rng>(rng: &mut R, shape: &BoxShape) -> GridFunctionD {
    let steps = [0.05, 0.4, 2.0];
    let walks: Vec<Vec<f64>> = shape
        .sizes
        .iter()
        .map(|&n| {
            let step = steps[rng.random_range(0..3)];
            bounded_walk(rng, n, step, LOG_BOUND / shape.dim() as f64)
        })
        .collect();
    let noise = [0.0, 0.3, 2.0][rng.random_range(0..3)];
    let values = (0..shape.len())
        .map(|idx| {
            let base: f64 = (0..shape.dim()).map(|k| walks[k][shape.coord(idx, k)]).sum();
            let jitter = if noise > 0.0 {
                rng.random_range(-noise..=noise)
            } else {
                0.0
            };
            (base + jitter).clamp(-LOG_BOUND, LOG_BOUND).exp()
        })
        .collect();
    GridFunctionD {
        shape: shape.clone(),
        values,
    }
}

/// [`positive_function_d`] made interior.
pub fn interior_function_d<R: Rng>(rng: &mut R, shape: &BoxShape) -> GridFunctionD {
    positive_function_d(rng, shape).interior()
}

fn check_fn(v: &GridPmfD, f: &GridFunctionD) -> Result<()> {
    v.shape.require_same(&f.shape)
}

fn require_interior(f: &GridFunctionD, name: &str) -> Result<()> {
    if f.is_interior() {
        Ok(())
    } else {
        Err(Error::window(format!(
            "{name} must have zero increments on the top two layers of every face"
        )))
    }
}

/// `L_V f` on the box.
pub fn apply_l_d(v: &GridPmfD, f: &GridFunctionD) -> Result<GridFunctionD> {
    v.require_full_support()?;
    check_fn(v, f)?;
    let s = &v.shape;
    let fv = &f.values;
    let values = (0..s.len())
        .map(|x| {
            csum((0..s.dim()).map(|k| {
                let up = s.up(x, k).map_or(0.0, |y| fv[y] - fv[x]);
                let down = s
                    .down(x, k)
                    .map_or(0.0, |y| v.weights[y] / v.weights[x] * (fv[x] - fv[y]));
                up - down
            }))
        })
        .collect();
    GridFunctionD::new(s.clone(), values)
}

fn pointwise_mul(a: &GridFunctionD, b: &GridFunctionD) -> GridFunctionD {
    GridFunctionD {
        shape: a.shape.clone(),
        values: a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
    }
}

/// `Γ₁(f,g)` at every site, from the generator.
pub fn gamma1_pointwise_d(v: &GridPmfD, f: &GridFunctionD, g: &GridFunctionD) -> Result<GridFunctionD> {
    check_fn(v, g)?;
    let lfg = apply_l_d(v, &pointwise_mul(f, g))?;
    let lf = apply_l_d(v, f)?;
    let lg = apply_l_d(v, g)?;
    let values = (0..f.len())
        .map(|x| 0.5 * (lfg.values[x] - (f.values[x] * lg.values[x] + g.values[x] * lf.values[x])))
        .collect();
    GridFunctionD::new(f.shape.clone(), values)
}

/// `Γ₂(f,g)` at every site, from the generator.
pub fn gamma2_pointwise_d(v: &GridPmfD, f: &GridFunctionD, g: &GridFunctionD) -> Result<GridFunctionD> {
    let lf = apply_l_d(v, f)?;
    let lg = apply_l_d(v, g)?;
    let l_g1 = apply_l_d(v, &gamma1_pointwise_d(v, f, g)?)?;
    let a = gamma1_pointwise_d(v, f, &lg)?;
    let b = gamma1_pointwise_d(v, g, &lf)?;
    let values = (0..f.len())
        .map(|x| 0.5 * (l_g1.values[x] - (a.values[x] + b.values[x])))
        .collect();
    GridFunctionD::new(f.shape.clone(), values)
}

fn weighted_sum_d(v: &GridPmfD, h: &GridFunctionD) -> f64 {
    csum(v.weights.iter().zip(&h.values).map(|(w, h)| w * h))
}

/// `Σ_x V(x) Σ_j Δ_j f(x) Δ_j g(x)`.
pub fn gamma1_mean_d(v: &GridPmfD, f: &GridFunctionD, g: &GridFunctionD) -> Result<f64> {
    v.require_full_support()?;
    check_fn(v, f)?;
    check_fn(v, g)?;
    let s = &v.shape;
    let (fv, gv) = (&f.values, &g.values);
    Ok(csum((0..s.len()).flat_map(|x| {
        (0..s.dim()).filter_map(move |j| s.up(x, j).map(|y| v.weights[x] * (fv[y] - fv[x]) * (gv[y] - gv[x])))
    })))
}

/// `E_ij(x) = V(x + e_j − e_i)/V(x + e_j) − V(x − e_i)/V(x)`.
pub fn eeij(v: &GridPmfD, x: &[usize], i: usize, j: usize) -> Result<f64> {
    v.require_full_support()?;
    let d = v.dim();
    if i >= d || j >= d {
        return Err(Error::invalid(format!("axis out of range for d = {d}")));
    }
    let s = &v.shape;
    let idx = s
        .index(x)
        .ok_or_else(|| Error::window(format!("{x:?} outside the box")))?;
    let xj = s
        .up(idx, j)
        .ok_or_else(|| Error::window(format!("{x:?} + e_{j} outside the box")))?;
    Ok(eeij_at(v, idx, xj, i))
}

/// `E_ij(x)` given the flat indices of `x` and `x + e_j`.
#[inline]
fn eeij_at(v: &GridPmfD, x: usize, xj: usize, i: usize) -> f64 {
    let s = &v.shape;
    v.w(s.down(xj, i)) / v.weights[xj] - v.w(s.down(x, i)) / v.weights[x]
}

/// `E^sym_ij(y) = V(y−e_i)V(y−e_j)/V(y) − V(y−e_i−e_j) − c 1{i=j} V(y−e_j)`.
pub fn esym_matrix(v: &GridPmfD, y: &[usize], c: f64) -> Result<DMatrix<f64>> {
    v.require_full_support()?;
    let idx = v
        .shape
        .index(y)
        .ok_or_else(|| Error::window(format!("{y:?} outside the box")))?;
    Ok(esym_at(v, idx, c))
}

fn esym_at(v: &GridPmfD, y: usize, c: f64) -> DMatrix<f64> {
    let s = &v.shape;
    let d = s.dim();
    let wy = v.weights[y];
    let down: Vec<Option<usize>> = (0..d).map(|k| s.down(y, k)).collect();
    DMatrix::from_fn(d, d, |i, j| {
        let wi = v.w(down[i]);
        let wj = v.w(down[j]);
        let wij = v.w(down[i].and_then(|z| s.down(z, j)));
        let diag = if i == j { c * wj } else { 0.0 };
        wi * wj / wy - wij - diag
    })
}

fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdReport {
    pub label: String,
    pub c: f64,
    pub sites: usize,
    pub min_eigenvalue: f64,
    pub worst_site: Vec<usize>,
    pub certified: bool,
}

/// Smallest eigenvalue of `E^sym(y)` over every site of the box; certified
/// when it is at least `-1e-12`.
pub fn esym_psd_certify(v: &GridPmfD, c: f64) -> Result<PsdReport> {
    v.require_full_support()?;
    if !c.is_finite() {
        return Err(Error::invalid(format!("c = {c} must be finite")));
    }
    let mins: Vec<f64> = (0..v.len())
        .into_par_iter()
        .map(|y| min_eigenvalue(esym_at(v, y, c)))
        .collect();
    let (worst, &min) = mins
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty box");
    Ok(PsdReport {
        label: v.label.clone(),
        c,
        sites: v.len(),
        min_eigenvalue: min,
        worst_site: v.shape.coords(worst),
        certified: min >= -PSD_TOL,
    })
}

/// The largest `c` for which every `E^sym(y)` is positive semidefinite:
/// the minimum over sites of the lowest eigenvalue of
/// `D^{-1/2} E^sym(y)|_{c=0} D^{-1/2}`, `D = diag V(y − e_j)`, taken over
/// the axes with `y_j ≥ 1` (the other rows vanish identically).
pub fn esym_c_max(v: &GridPmfD) -> Result<f64> {
    v.require_full_support()?;
    let s = &v.shape;
    let per_site: Vec<f64> = (0..v.len())
        .into_par_iter()
        .map(|y| {
            let active: Vec<usize> = (0..s.dim()).filter(|&k| s.down(y, k).is_some()).collect();
            if active.is_empty() {
                return f64::INFINITY;
            }
            let a = esym_at(v, y, 0.0);
            let scale: Vec<f64> = active.iter().map(|&k| 1.0 / v.w(s.down(y, k)).sqrt()).collect();
            let m = DMatrix::from_fn(active.len(), active.len(), |p, q| {
                scale[p] * a[(active[p], active[q])] * scale[q]
            });
            min_eigenvalue(m)
        })
        .collect();
    Ok(per_site.into_iter().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaSumsD {
    /// `Σ V Γ₁(f,g)`.
    pub gamma1: f64,
    /// `Σ V Γ₂(f,g)` summed from the pointwise definition.
    pub gamma2: f64,
    /// `Σ_x V(x) Σ_{i,j} L_ij f(x+e_i) L_ij g(x+e_i)`.
    pub mixed_square: f64,
    /// The curvature sum `Σ_{i,j,y} V(y−e_j) E_ij(y−e_j) (f(y) − f(y−e_i))(g(y) − g(y−e_j))`.
    pub curvature_sum: f64,
    pub scale: f64,
}

impl GammaSumsD {
    /// `mixed_square + curvature_sum`, the closed form of `Σ V Γ₂(f,g)`.
    pub fn gamma2_closed(&self) -> f64 {
        self.mixed_square + self.curvature_sum
    }
}

/// The d-dimensional Γ-sums for interior-supported `f`, `g`.
pub fn gamma_sums_d(v: &GridPmfD, f: &GridFunctionD, g: &GridFunctionD) -> Result<GammaSumsD> {
    check_fn(v, f)?;
    check_fn(v, g)?;
    require_interior(f, "f")?;
    require_interior(g, "g")?;
    let gamma1 = gamma1_mean_d(v, f, g)?;
    let g2 = gamma2_pointwise_d(v, f, g)?;
    let gamma2 = weighted_sum_d(v, &g2);
    let s = &v.shape;
    let d = s.dim();
    let (fv, gv) = (&f.values, &g.values);
    let mixed = |h: &[f64], x: usize, i: usize, j: usize| {
        // L_ij h(x + e_i) = h(x+e_i+e_j) − h(x+e_j) − h(x+e_i) + h(x)
        let xi = s.up_clamped(x, i);
        let xj = s.up_clamped(x, j);
        let xij = s.up_clamped(xi, j);
        h[xij] - h[xj] - h[xi] + h[x]
    };
    let mixed_terms: Vec<f64> = (0..s.len())
        .flat_map(|x| {
            (0..d * d).map(move |ij| {
                let (i, j) = (ij / d, ij % d);
                v.weights[x] * mixed(fv, x, i, j) * mixed(gv, x, i, j)
            })
        })
        .collect();
    let curv_terms: Vec<f64> = (0..s.len())
        .flat_map(|y| {
            (0..d * d).filter_map(move |ij| {
                let (i, j) = (ij / d, ij % d);
                let yj = s.down(y, j)?;
                let yi = s.down(y, i)?;
                let e = eeij_at(v, yj, y, i);
                Some(v.weights[yj] * e * (fv[y] - fv[yi]) * (gv[y] - gv[yj]))
            })
        })
        .collect();
    let g2_abs = csum(v.weights.iter().zip(&g2.values).map(|(w, h)| (w * h).abs()));
    let scale = g2_abs + csum(mixed_terms.iter().map(|t| t.abs())) + csum(curv_terms.iter().map(|t| t.abs()));
    Ok(GammaSumsD {
        gamma1,
        gamma2,
        mixed_square: csum(mixed_terms),
        curvature_sum: csum(curv_terms),
        scale,
    })
}

/// Residual of
/// `L_V f(x+e_j) − L_V f(x) = Σ_i [L_ij f(x+e_i) − L_ij f(x) V(x−e_i)/V(x) − E_ij(x)(f(x+e_j) − f(x+e_j−e_i))]`
/// at every `x` with all `x_k ≤ N_k − 2` and every `j`, flattened site-major.
pub fn one_step_commutation_residual_d(v: &GridPmfD, f: &GridFunctionD) -> Result<CommutationResidual> {
    let lf = apply_l_d(v, f)?;
    let s = &v.shape;
    let d = s.dim();
    let fv = &f.values;
    let mut residual = Vec::new();
    let mut scale = Vec::new();
    for x in 0..s.len() {
        if (0..d).any(|k| s.coord(x, k) + 2 >= s.sizes[k]) {
            continue;
        }
        for j in 0..d {
            let xj = s.up(x, j).expect("interior site");
            let lhs = lf.values[xj] - lf.values[x];
            let mut terms = Vec::with_capacity(3 * d);
            for i in 0..d {
                let xi = s.up(x, i).expect("interior site");
                let xij = s.up(xi, j).expect("interior site");
                terms.push(fv[xij] - fv[xj] - fv[xi] + fv[x]);
                if let Some(xm) = s.down(x, i) {
                    // L_ij f(x) = f(x+e_j) − f(x+e_j−e_i) − f(x) + f(x−e_i)
                    let xjm = s.down(xj, i).expect("x_i ≥ 1");
                    let lij = fv[xj] - fv[xjm] - fv[x] + fv[xm];
                    terms.push(-lij * v.weights[xm] / v.weights[x]);
                }
                let back = s.down(xj, i).map_or(0.0, |z| fv[z]);
                let e = eeij_at(v, x, xj, i);
                if e != 0.0 {
                    terms.push(-e * (fv[xj] - back));
                }
            }
            residual.push(lhs - csum(terms.iter().copied()));
            scale.push(lhs.abs() + csum(terms.iter().map(|t| t.abs())));
        }
    }
    Ok(CommutationResidual { residual, scale })
}

/// `Σ_y Σ_{i,j} E^sym_ij(y) (f(y) − f(y−e_j)) (log f(y) − log f(y−e_i))`
/// together with the sum of the magnitudes of its terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogSobGap {
    pub value: f64,
    pub scale: f64,
}

impl LogSobGap {
    pub fn nonnegative(&self) -> bool {
        self.value >= -1e-12 * self.scale
    }
}

pub fn logsob_gap_term(v: &GridPmfD, f: &GridFunctionD, c: f64) -> Result<LogSobGap> {
    v.require_full_support()?;
    check_fn(v, f)?;
    if !f.is_positive() {
        return Err(Error::domain("f must be strictly positive"));
    }
    require_interior(f, "f")?;
    let s = &v.shape;
    let d = s.dim();
    let fv = &f.values;
    let terms: Vec<f64> = (0..s.len())
        .into_par_iter()
        .flat_map_iter(|y| {
            let m = esym_at(v, y, c);
            (0..d * d)
                .filter_map(|ij| {
                    let (i, j) = (ij / d, ij % d);
                    let yj = s.down(y, j)?;
                    let yi = s.down(y, i)?;
                    Some(m[(i, j)] * (fv[y] - fv[yj]) * (fv[y] / fv[yi]).ln())
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(LogSobGap {
        value: csum(terms.iter().copied()),
        scale: csum(terms.iter().map(|t| t.abs())),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeReportD {
    pub label: String,
    pub c: f64,
    pub trials: usize,
    pub seed: u64,
    pub psd_certified: bool,
    pub violations: usize,
    pub worst_relative_margin: f64,
    /// Lowest `Σ V Γ₂ / Σ V Γ₁` over the axis-embedded 1-d extremals.
    pub extremal_ratio: f64,
    pub extremal_violates: bool,
    pub poincare_violations: usize,
    /// Largest `c · var / Σ V Γ₁` over the trials; the Poincaré inequality
    /// with constant `1/c` asks for at most one.
    pub worst_poincare_ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy)]
struct TrialD {
    margin: f64,
    scale: f64,
    var: f64,
    dirichlet: f64,
}

fn trial_d(v: &GridPmfD, f: &GridFunctionD, c: f64) -> Result<TrialD> {
    let g1 = gamma1_mean_d(v, f, f)?;
    let g2 = weighted_sum_d(v, &gamma2_pointwise_d(v, f, f)?);
    let mu = weighted_sum_d(v, f);
    let var = csum(v.weights.iter().zip(&f.values).map(|(w, x)| w * (x - mu) * (x - mu)));
    Ok(TrialD {
        margin: g2 - c * g1,
        scale: g2.abs() + (c * g1).abs(),
        var,
        dirichlet: g1,
    })
}

/// Randomized check of `Σ V Γ₂(f,f) ≥ c Σ V Γ₁(f,f)` and of
/// `var_V(f) ≤ (1/c) Σ V Γ₁(f,f)` on the same interior-supported trials,
/// plus the 1-d extremal of each axis slice embedded along that axis.
pub fn integrated_be_check_d(v: &GridPmfD, c: f64, trials: usize, seed: u64) -> Result<BeReportD> {
    v.require_full_support()?;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!("c = {c} must be positive")));
    }
    let psd = esym_psd_certify(v, c)?;
    let rows: Vec<TrialD> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            trial_d(v, &interior_function_d(&mut rng, &v.shape), c)
        })
        .collect::<Result<_>>()?;
    let be_ok = |t: &TrialD| t.margin >= -BE_TOL * t.scale;
    let mut violations = rows.iter().filter(|t| !be_ok(t)).count();
    let worst = rows
        .iter()
        .map(|t| if t.scale > 0.0 { t.margin / t.scale } else { 0.0 })
        .fold(f64::INFINITY, f64::min);
    let poincare_violations = rows
        .iter()
        .filter(|t| c * t.var > t.dirichlet + BE_TOL * (c * t.var).max(t.dirichlet))
        .count();
    let worst_poincare = rows
        .iter()
        .filter(|t| t.dirichlet > 0.0)
        .map(|t| c * t.var / t.dirichlet)
        .fold(0.0, f64::max);

    let mut extremal_ratio = f64::INFINITY;
    let mut extremal_violates = false;
    for k in 0..v.dim() {
        let slice = v.axis_slice(k)?;
        let ext = match be_extremal(&slice) {
            Ok(e) => e,
            Err(Error::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        };
        let g = ext.f.values();
        let f = GridFunctionD::from_fn(&v.shape, |x| g[x[k]])?;
        let t = trial_d(v, &f, c)?;
        extremal_ratio = extremal_ratio.min((t.margin + c * t.dirichlet) / t.dirichlet);
        extremal_violates |= !be_ok(&t);
    }
    if extremal_violates {
        violations += 1;
    }
    Ok(BeReportD {
        label: v.label.clone(),
        c,
        trials,
        seed,
        psd_certified: psd.certified,
        violations,
        worst_relative_margin: if trials == 0 { 0.0 } else { worst },
        extremal_ratio,
        extremal_violates,
        poincare_violations,
        worst_poincare_ratio: worst_poincare,
        passed: violations == 0 && poincare_violations == 0,
    })
}

/// One sampled non-product measure in the log-Sobolev probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeCase {
    pub lambdas: (f64, f64),
    /// Interaction strength: `V(x) ∝ Π_λ1(x_1) Π_λ2(x_2) e^{θ x_1 x_2}`.
    pub theta: f64,
    pub c: f64,
    /// Smallest `gap / scale` over the functions tried.
    pub min_relative_gap: f64,
}

/// Evidence on whether positive semidefiniteness of `E^sym` forces the
/// log-Sobolev gap term to be nonnegative. Report-only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogSobProbe {
    pub samples: usize,
    pub functions_per_sample: usize,
    pub seed: u64,
    /// Samples whose `E^sym` is positive semidefinite for some `c > 0`.
    pub psd_cases: usize,
    /// PSD samples where some function made the gap negative beyond `1e-12·scale`.
    pub negative_cases: usize,
    pub worst: Option<ProbeCase>,
}

/// Samples coupled measures on a `size × size` box, takes `c` just below
/// the largest PSD-certified value and evaluates the gap term on random
/// interior functions.
pub fn logsob_probe(samples: usize, functions: usize, size: usize, seed: u64) -> Result<LogSobProbe> {
    let shape = BoxShape::new(vec![size, size])?;
    let cases: Vec<Option<(ProbeCase, bool)>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let l1 = rng.random_range(0.3..4.0);
            let l2 = rng.random_range(0.3..4.0);
            let theta = rng.random_range(-0.4..0.4);
            let logw: Vec<f64> = (0..shape.len())
                .map(|idx| {
                    let (a, b) = (shape.coord(idx, 0) as f64, shape.coord(idx, 1) as f64);
                    let lf = |n: f64| csum((2..=n as usize).map(|k| (k as f64).ln()));
                    a * f64::ln(l1) - lf(a) + b * f64::ln(l2) - lf(b) + theta * a * b
                })
                .collect();
            let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
            let v = GridPmfD::from_weights(shape.clone(), &w, format!("coupled θ={theta:.4}"))?;
            let cmax = esym_c_max(&v)?;
            if !(cmax.is_finite() && cmax > 0.0) {
                return Ok(None);
            }
            let c = cmax * (1.0 - 1e-9);
            let mut min_rel = f64::INFINITY;
            let mut negative = false;
            for _ in 0..functions {
                let f = interior_function_d(&mut rng, &shape);
                let gap = logsob_gap_term(&v, &f, c)?;
                negative |= !gap.nonnegative();
                if gap.scale > 0.0 {
                    min_rel = min_rel.min(gap.value / gap.scale);
                }
            }
            Ok(Some((
                ProbeCase {
                    lambdas: (l1, l2),
                    theta,
                    c,
                    min_relative_gap: min_rel,
                },
                negative,
            )))
        })
        .collect::<Result<_>>()?;
    let psd: Vec<&(ProbeCase, bool)> = cases.iter().flatten().collect();
    let worst = psd
        .iter()
        .min_by(|a, b| a.0.min_relative_gap.total_cmp(&b.0.min_relative_gap))
        .map(|c| c.0.clone());
    Ok(LogSobProbe {
        samples,
        functions_per_sample: functions,
        seed,
        psd_cases: psd.len(),
        negative_cases: psd.iter().filter(|c| c.1).count(),
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::curvature_profile;
    use crate::functionals::{entropy_flow_derivatives, psi_prime_parts};
    use crate::gamma::{gamma1_mean, gamma2_mean};
    use crate::random::interior_function;

    fn poisson(lambda: f64) -> TruncatedPmf {
        TruncatedPmf::poisson(lambda, 1e-12).unwrap()
    }

    fn pp(ls: &[f64]) -> GridPmfD {
        product_pmf(&ls.iter().map(|&l| poisson(l)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn shape_indexing_round_trips() {
        let s = BoxShape::new(vec![3, 4, 5]).unwrap();
        for idx in 0..s.len() {
            assert_eq!(s.index(&s.coords(idx)), Some(idx));
        }
        assert_eq!(s.index(&[3, 0, 0]), None);
        assert!(BoxShape::new(vec![2; 5]).is_err());
        assert!(BoxShape::new(vec![66]).is_err());
    }

    #[test]
    fn product_normalization_and_marginals() {
        let (a, b) = (poisson(1.0), poisson(2.0));
        let v = product_pmf(&[a.clone(), b.clone()]).unwrap();
        let total = csum(v.values().iter().copied());
        let tails = v.tail_masses();
        assert!((total + tails[0] + tails[1] - 1.0).abs() < 1e-12);
        for (k, f) in [a, b].iter().enumerate() {
            let m = v.marginal(k);
            let scale = csum(m.iter().copied());
            for (x, p) in f.weights().iter().enumerate() {
                assert!((m[x] / scale - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_dimension_reduces_to_profile() {
        let u = TruncatedPmf::negative_binomial(3.0, 0.4, 1e-12).unwrap();
        let v = product_pmf(std::slice::from_ref(&u)).unwrap();
        let prof = curvature_profile(&u).unwrap();
        for (x, e) in prof.iter().enumerate() {
            assert!((eeij(&v, &[x], 0, 0).unwrap() - e).abs() < 1e-12 * (1.0 + e.abs()));
        }
        assert!(eeij(&v, &[u.max_index()], 0, 0).is_err());
    }

    #[test]
    fn product_curvature_is_diagonal() {
        let v = pp(&[1.5, 3.0]);
        for y in [[1, 1], [2, 5], [0, 3], [7, 0]] {
            let m = esym_matrix(&v, &y, 0.0).unwrap();
            assert!(m[(0, 1)].abs() < 1e-15 && m[(1, 0)].abs() < 1e-15);
        }
        assert!((eeij(&v, &[2, 3], 0, 0).unwrap() - 1.0 / 1.5).abs() < 1e-12);
        assert!((eeij(&v, &[2, 3], 1, 1).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(eeij(&v, &[2, 3], 0, 1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn psd_certification() {
        let v = pp(&[2.0, 4.0]);
        assert!(esym_psd_certify(&v, 0.25).unwrap().certified);
        let bad = esym_psd_certify(&v, 0.6).unwrap();
        assert!(!bad.certified);
        assert!((esym_c_max(&v).unwrap() - 0.25).abs() < 1e-9);
    }

    #[test]
    fn gamma_sums_agree_and_bound() {
        let v = pp(&[1.0, 2.5]);
        let mut rng = stream_rng(4, 0);
        for _ in 0..4 {
            let f = interior_function_d(&mut rng, v.shape());
            let g = interior_function_d(&mut rng, v.shape());
            let s = gamma_sums_d(&v, &f, &g).unwrap();
            assert!((s.gamma2 - s.gamma2_closed()).abs() <= 1e-10 * s.scale, "{s:?}");
            let ss = gamma_sums_d(&v, &f, &f).unwrap();
            assert!(ss.gamma2 >= ss.curvature_sum - 1e-10 * ss.scale);
        }
        let k = GridFunctionD::constant(v.shape(), 2.0);
        let s = gamma_sums_d(&v, &k, &k).unwrap();
        assert_eq!((s.gamma1, s.mixed_square, s.curvature_sum), (0.0, 0.0, 0.0));
        assert!(s.gamma2.abs() < 1e-14);
    }

    #[test]
    fn separable_functions_tensorize() {
        let (a, b) = (poisson(1.0), poisson(3.0));
        let v = product_pmf(&[a.clone(), b.clone()]).unwrap();
        let mut rng = stream_rng(6, 0);
        let ua = interior_function(&mut rng, a.len());
        let ub = interior_function(&mut rng, b.len());
        let f = GridFunctionD::separable(v.shape(), &[ua.clone(), ub.clone()]).unwrap();
        let s = gamma_sums_d(&v, &f, &f).unwrap();
        let g1 = gamma1_mean(&a, &ua, &ua).unwrap() + gamma1_mean(&b, &ub, &ub).unwrap();
        let g2 = gamma2_mean(&a, &ua, &ua).unwrap() + gamma2_mean(&b, &ub, &ub).unwrap();
        assert!((s.gamma1 - g1).abs() < 1e-10 * g1.abs().max(1.0));
        assert!((s.gamma2 - g2).abs() < 1e-10 * g2.abs().max(1.0));
    }

    #[test]
    fn commutation_identity_holds_for_coupled_measure() {
        let shape = BoxShape::new(vec![7, 6, 5]).unwrap();
        let mut rng = stream_rng(8, 0);
        let w: Vec<f64> = (0..shape.len()).map(|_| rng.random_range(0.1..1.0)).collect();
        let v = GridPmfD::from_weights(shape.clone(), &w, "random").unwrap();
        let f = positive_function_d(&mut rng, &shape);
        let r = one_step_commutation_residual_d(&v, &f).unwrap();
        assert!(!r.residual.is_empty());
        assert!(r.worst_relative() <= 1e-12, "{}", r.worst_relative());
    }

    #[test]
    fn gap_term_in_one_dimension_matches_flow_quantities() {
        let u = poisson(2.0);
        let v = product_pmf(std::slice::from_ref(&u)).unwrap();
        let mut rng = stream_rng(10, 0);
        let f1 = interior_function(&mut rng, u.len());
        let f = GridFunctionD::new(v.shape().clone(), f1.values().to_vec()).unwrap();
        let c = 0.5;
        let gap = logsob_gap_term(&v, &f, c).unwrap();
        let (theta, psi) = entropy_flow_derivatives(&u, &f1).unwrap();
        let (_, wterm) = psi_prime_parts(&u, &f1).unwrap();
        let expect = c * theta - psi + wterm;
        assert!(
            (gap.value - expect).abs() < 1e-10 * gap.scale.max(1.0),
            "{} vs {expect}",
            gap.value
        );
    }

    #[test]
    fn be_check_passes_and_fails_where_expected() {
        let v = pp(&[1.0, 2.0]);
        let ok = integrated_be_check_d(&v, 0.5, 24, 3).unwrap();
        assert!(ok.passed && ok.psd_certified, "{ok:?}");
        let bad = integrated_be_check_d(&v, 0.6, 4, 3).unwrap();
        assert!(!bad.psd_certified && bad.extremal_violates);
    }

    #[test]
    fn probe_is_deterministic() {
        let a = logsob_probe(6, 3, 6, 1).unwrap();
        assert_eq!(a, logsob_probe(6, 3, 6, 1).unwrap());
    }
}
