//! Adaptive classical Runge–Kutta with step doubling, for the
//! time-inhomogeneous linear systems of the thinning dynamics.

use crate::error::{Error, Result};

const MAX_STEPS: usize = 2_000_000;

fn rk4_step<F>(rhs: &F, t: f64, y: &[f64], h: f64, out: &mut [f64])
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    rhs(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    rhs(t + h, &tmp, &mut k4);
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Integrate `y' = rhs(t, y)` from `t0` to `t1`. Each step is accepted when
/// the full-step/two-half-steps discrepancy is below `tol (1 + |y|)`
/// componentwise; the accepted value is the Richardson-extrapolated one.
/// Returns the number of accepted steps.
pub(crate) fn integrate<F>(rhs: F, y: &mut [f64], t0: f64, t1: f64, tol: f64, h0: &mut f64) -> Result<usize>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut t = t0;
    let mut h = h0.min(t1 - t0).max(1e-12);
    let mut full = vec![0.0; n];
    let mut half = vec![0.0; n];
    let mut two = vec![0.0; n];
    let mut steps = 0;
    while t < t1 {
        if steps > MAX_STEPS {
            return Err(Error::Accuracy {
                tol,
                estimate: f64::NAN,
                detail: format!("step limit reached at t = {t}"),
            });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        rk4_step(&rhs, t, y, h, &mut full);
        rk4_step(&rhs, t, y, 0.5 * h, &mut half);
        rk4_step(&rhs, t + 0.5 * h, &half, 0.5 * h, &mut two);
        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = (two[i] - full[i]).abs() / 15.0 / (1.0 + two[i].abs());
            err = err.max(e);
        }
        if !err.is_finite() {
            return Err(Error::Numeric(format!("nonfinite state at t = {t}")));
        }
        if err <= tol {
            for i in 0..n {
                y[i] = two[i] + (two[i] - full[i]) / 15.0;
            }
            t = if last { t1 } else { t + h };
            steps += 1;
            let grow = if err == 0.0 {
                2.0
            } else {
                (0.9 * (tol / err).powf(0.2)).clamp(0.2, 2.0)
            };
            if !last {
                h *= grow;
                *h0 = h;
            }
        } else {
            h *= (0.9 * (tol / err).powf(0.2)).clamp(0.1, 0.5);
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::Accuracy {
                    tol,
                    estimate: err,
                    detail: format!("step size underflow at t = {t}"),
                });
            }
        }
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut y = vec![1.0, 2.0];
        let mut h = 0.1;
        integrate(
            |_, y, out| {
                out[0] = -y[0];
                out[1] = -3.0 * y[1];
            },
            &mut y,
            0.0,
            2.0,
            1e-12,
            &mut h,
        )
        .unwrap();
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-11);
        assert!((y[1] - 2.0 * (-6.0f64).exp()).abs() < 1e-11);
    }
}
