//! Seeded generators for test functions and reference pmfs.
//!
//! Every random draw in the crate goes through a ChaCha8 stream derived from
//! a `(seed, stream)` pair, so parallel trials stay reproducible regardless
//! of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::pmf::TruncatedPmf;
use crate::semigroup::GridFunction;

/// Bound on `|log f|` for random positive test functions.
pub const LOG_BOUND: f64 = 3.0;

/// An independent generator for trial `stream` of a run seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A random walk started uniformly in `[-bound, bound]`, with steps of
/// size up to `step`, reflected into `[-bound, bound]`.
pub fn bounded_walk<R: Rng>(rng: &mut R, len: usize, step: f64, bound: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut u: f64 = rng.random_range(-bound..=bound);
    for _ in 0..len {
        out.push(u);
        u += rng.random_range(-step..=step);
        if u > bound {
            u = 2.0 * bound - u;
        } else if u < -bound {
            u = -2.0 * bound - u;
        }
        u = u.clamp(-bound, bound);
    }
    out
}

/// `exp` of a bounded random walk: values in `e^{[-3, 3]}`. The step size
/// is itself random so both smooth and rough functions appear.
pub fn positive_function<R: Rng>(rng: &mut R, len: usize) -> GridFunction {
    let step = match rng.random_range(0..3) {
        0 => 0.05,
        1 => 0.4,
        _ => 2.0,
    };
    let walk = bounded_walk(rng, len, step, LOG_BOUND);
    GridFunction::new(walk.into_iter().map(f64::exp).collect()).expect("bounded walk is finite")
}

/// Freeze `f` above `len - 3`, so that its increments vanish on the top two
/// sites of the window.
pub fn make_interior(f: &GridFunction) -> GridFunction {
    let vals = f.values();
    let n = vals.len();
    let top = n.saturating_sub(3);
    GridFunction::new((0..n).map(|x| vals[x.min(top)]).collect()).expect("finite input")
}

/// A positive, interior-supported random test function.
pub fn interior_function<R: Rng>(rng: &mut R, len: usize) -> GridFunction {
    make_interior(&positive_function(rng, len))
}

/// A random ultra-log-concave pmf: `Poisson(λ) ⋆ BernoulliSum(p)`, which is
/// ULC because both factors are and ULC is closed under convolution.
pub fn ulc_pmf<R: Rng>(rng: &mut R) -> Result<TruncatedPmf> {
    let lambda = rng.random_range(0.05..6.0);
    let k = rng.random_range(0..5);
    let base = TruncatedPmf::poisson(lambda, 1e-12)?;
    if k == 0 {
        return Ok(base);
    }
    let probs: Vec<f64> = (0..k).map(|_| rng.random_range(0.02..0.98)).collect();
    base.convolve(&TruncatedPmf::bernoulli_sum(&probs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::is_ulc;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream_rng(7, 1).random()).collect();
        let mut r = stream_rng(7, 1);
        let b: Vec<u64> = (0..4).map(|_| r.random()).collect();
        assert_eq!(a[0], b[0]);
        let c: u64 = stream_rng(7, 2).random();
        assert_ne!(a[0], c);
    }

    #[test]
    fn walks_stay_bounded() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..50 {
            let f = positive_function(&mut rng, 40);
            for &v in f.values() {
                assert!(v.ln().abs() <= LOG_BOUND + 1e-12);
            }
            let g = make_interior(&f);
            assert_eq!(g.values()[37], g.values()[39]);
        }
    }

    #[test]
    fn ulc_generator_is_ulc() {
        let mut rng = stream_rng(3, 0);
        for _ in 0..30 {
            let v = ulc_pmf(&mut rng).unwrap();
            assert!(is_ulc(&v));
            assert!(v.is_full_support());
        }
    }
}
