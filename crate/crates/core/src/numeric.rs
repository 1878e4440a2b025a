//! Small numerical kernels shared by the functionals.
//!
//! The entropy-type sums in this crate are dominated by terms of the form
//! `u - 1 - log u` and `g log g - g + 1`, which vanish quadratically near
//! `u = 1`. Evaluating them naively loses every significant digit exactly
//! where the inequalities are sharp, so each has a short series branch.

use std::iter::Sum;
use std::ops::AddAssign;

/// Kahan–Babuška–Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl Sum<f64> for NeumaierSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator of `f64`.
pub fn csum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().sum::<NeumaierSum>().value()
}

const SERIES_CUTOFF: f64 = 0.1;

/// `d - log(1 + d)`, i.e. `u - 1 - log u` at `u = 1 + d`. Nonnegative for `d > -1`.
pub fn d_minus_log1p(d: f64) -> f64 {
    if d.abs() < SERIES_CUTOFF {
        // sum_{k>=2} (-1)^k d^k / k
        let mut term = d * d;
        let mut acc = 0.0;
        let mut k = 2.0;
        let mut sign = 1.0;
        while k < 40.0 {
            acc += sign * term / k;
            term *= d;
            sign = -sign;
            k += 1.0;
        }
        acc
    } else {
        d - d.ln_1p()
    }
}

/// `u - 1 - log u` taking the ratio `u > 0` itself.
pub fn u_minus_log_excess(u: f64) -> f64 {
    if (u - 1.0).abs() < SERIES_CUTOFF {
        d_minus_log1p(u - 1.0)
    } else {
        u - 1.0 - u.ln()
    }
}

/// `(1 + d) log(1 + d) - d`, i.e. `g log g - g + 1` at `g = 1 + d`. Nonnegative.
pub fn xlogx_excess(d: f64) -> f64 {
    if d.abs() < SERIES_CUTOFF {
        // sum_{k>=2} (-1)^k d^k / (k (k-1))
        let mut term = d * d;
        let mut acc = 0.0;
        let mut sign = 1.0;
        for k in 2..40 {
            let k = k as f64;
            acc += sign * term / (k * (k - 1.0));
            term *= d;
            sign = -sign;
        }
        acc
    } else {
        (1.0 + d) * d.ln_1p() - d
    }
}

/// `g log g - g + 1` taking the ratio `g >= 0` itself, so tiny ratios do
/// not collapse to `d = -1` (with `0 log 0 = 0`).
pub fn xlogx_excess_ratio(g: f64) -> f64 {
    if (g - 1.0).abs() < SERIES_CUTOFF {
        xlogx_excess(g - 1.0)
    } else if g == 0.0 {
        1.0
    } else {
        g * g.ln() - g + 1.0
    }
}

/// `u e^u - e^u + 1`, nonnegative for every real `u`.
pub fn phi(u: f64) -> f64 {
    if u.abs() < SERIES_CUTOFF {
        // sum_{k>=2} (k-1) u^k / k!
        let mut term = u * u / 2.0;
        let mut acc = 0.0;
        for k in 2..30 {
            acc += (k as f64 - 1.0) * term;
            term *= u / (k as f64 + 1.0);
        }
        acc
    } else {
        u * u.exp() - u.exp_m1()
    }
}

/// Relative discrepancy `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_diff(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
