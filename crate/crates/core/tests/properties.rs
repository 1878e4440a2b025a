//! Invariants over randomly drawn measures and functions.

mod common;

use be_workbench::curvature::{c_log_concave_constant, curvature_profile, is_ulc};
use be_workbench::functionals::{dirichlet, entropy, lsi_verify, poincare_constant, variance};
use be_workbench::gamma::{gamma1_mean, gamma2_mean, gamma2_mean_brute};
use be_workbench::multidim::{esym_c_max, gamma1_mean_d, product_pmf, GridFunctionD};
use be_workbench::random::{interior_function, positive_function, stream_rng, ulc_pmf};
use be_workbench::{GridFunction, TruncatedPmf};
use common::rel;
use proptest::prelude::*;

fn ulc(seed: u64) -> TruncatedPmf {
    ulc_pmf(&mut stream_rng(seed, 0)).unwrap()
}

fn probs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.02f64..0.98, 1..7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_sum_to_one(lambda in 0.05f64..20.0, eps in 1e-14f64..1e-6) {
        let v = TruncatedPmf::poisson(lambda, eps).unwrap();
        let total: f64 = v.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(v.tail_mass() <= eps);
        prop_assert!((v.window_mass() + v.tail_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convolution_adds_means(a in probs(), lambda in 0.1f64..5.0) {
        let b = TruncatedPmf::bernoulli_sum(&a).unwrap();
        let p = TruncatedPmf::poisson(lambda, 1e-14).unwrap();
        let s = b.convolve(&p).unwrap();
        let expect: f64 = a.iter().sum::<f64>() + lambda;
        prop_assert!(rel(s.mean(), expect) < 1e-10);
    }

    #[test]
    fn perturbation_gives_full_support(w in prop::collection::vec(0.0f64..1.0, 2..10), eps in 0.01f64..2.0) {
        prop_assume!(w.iter().any(|&x| x > 0.0));
        let p = TruncatedPmf::from_weights(&w).unwrap().perturb(eps).unwrap();
        prop_assert!(p.is_full_support());
    }

    #[test]
    fn curvature_telescopes(seed in any::<u64>()) {
        let v = ulc(seed);
        let e = curvature_profile(&v).unwrap();
        let w = common::weights(&v);
        let mut acc = 0.0;
        for x in 0..e.len() {
            acc += e[x];
            prop_assert!(rel(acc, w[x] / w[x + 1]) < 1e-9, "x = {x}");
        }
    }

    #[test]
    fn curvature_matches_oracle(seed in any::<u64>()) {
        let v = ulc(seed);
        let w = common::weights(&v);
        prop_assert!(rel(c_log_concave_constant(&v).unwrap(), common::c_inf(&w)) < 1e-12);
        prop_assert!(is_ulc(&v));
        // an ulc law is c-log-concave with c ≤ 1/mean
        prop_assert!(common::c_inf(&w) <= 1.0 / common::mean_of(&w) * (1.0 + 1e-9));
    }

    #[test]
    fn gamma_sums_agree(seed in any::<u64>()) {
        let v = ulc(seed);
        let mut rng = stream_rng(seed, 1);
        let f = interior_function(&mut rng, v.len());
        let g = interior_function(&mut rng, v.len());
        let closed = gamma2_mean(&v, &f, &g).unwrap();
        let brute = gamma2_mean_brute(&v, &f, &g).unwrap();
        let w = common::weights(&v);
        let q = common::q_matrix(&w);
        let oracle = common::dot(&w, &common::gamma2(&q, f.values(), g.values()));
        let scale = gamma2_mean(&v, &f, &f).unwrap().abs() + gamma2_mean(&v, &g, &g).unwrap().abs();
        prop_assert!((closed - brute).abs() <= 1e-9 * scale);
        prop_assert!((closed - oracle).abs() <= 1e-8 * scale);
    }

    #[test]
    fn dirichlet_is_gamma1(seed in any::<u64>()) {
        let v = ulc(seed);
        let f = positive_function(&mut stream_rng(seed, 2), v.len());
        let a = gamma1_mean(&v, &f, &f).unwrap();
        let b = dirichlet(&v, &f).unwrap();
        prop_assert!(rel(a, b) < 1e-10);
        prop_assert!(rel(b, common::dirichlet(&common::weights(&v), f.values())) < 1e-10);
    }

    #[test]
    fn lsi_holds_for_ulc(seed in any::<u64>()) {
        let v = ulc(seed);
        let c = c_log_concave_constant(&v).unwrap();
        let f = positive_function(&mut stream_rng(seed, 3), v.len());
        let r = lsi_verify(&v, &f, c).unwrap();
        prop_assert!(r.passed(), "Ent {} > rhs {}", r.ent, r.rhs_new / c);
        let w = common::weights(&v);
        prop_assert!(rel(r.ent, common::entropy(&w, f.values())) < 1e-8 || r.ent < 1e-14);
        prop_assert!(entropy(&v, &f).unwrap() >= 0.0);
    }

    #[test]
    fn poincare_holds_for_ulc(seed in any::<u64>()) {
        let v = ulc(seed);
        let c = c_log_concave_constant(&v).unwrap();
        let cp = poincare_constant(&v).unwrap();
        prop_assert!(cp <= (1.0 + 1e-8) / c);
        let f = positive_function(&mut stream_rng(seed, 4), v.len());
        let var = variance(&v, &f).unwrap();
        prop_assert!(var <= cp * dirichlet(&v, &f).unwrap() * (1.0 + 1e-8) + 1e-14);
    }

    #[test]
    fn product_curvature_tensorizes(l1 in 0.2f64..6.0, l2 in 0.2f64..6.0) {
        let a = TruncatedPmf::poisson(l1, 1e-10).unwrap();
        let b = TruncatedPmf::poisson(l2, 1e-10).unwrap();
        let v = product_pmf(&[a.clone(), b.clone()]).unwrap();
        let expect = c_log_concave_constant(&a).unwrap().min(c_log_concave_constant(&b).unwrap());
        prop_assert!(rel(esym_c_max(&v).unwrap(), expect) < 1e-8);
    }

    #[test]
    fn product_dirichlet_of_one_coordinate(l1 in 0.2f64..6.0, l2 in 0.2f64..6.0, seed in any::<u64>()) {
        let a = TruncatedPmf::poisson(l1, 1e-10).unwrap();
        let b = TruncatedPmf::poisson(l2, 1e-10).unwrap();
        let v = product_pmf(&[a.clone(), b]).unwrap();
        let f1 = positive_function(&mut stream_rng(seed, 5), a.len());
        let fd = GridFunctionD::from_fn(v.shape(), |x| f1.values()[x[0]]).unwrap();
        let d = gamma1_mean_d(&v, &fd, &fd).unwrap();
        let one = gamma1_mean(&a, &f1, &f1).unwrap();
        prop_assert!(rel(d, one) < 1e-10);
    }
}

#[test]
fn constant_function_has_no_entropy_or_energy() {
    let v = TruncatedPmf::poisson(3.0, 1e-12).unwrap();
    let f = GridFunction::constant(v.len(), 2.5);
    assert!(entropy(&v, &f).unwrap().abs() < 1e-14);
    assert_eq!(dirichlet(&v, &f).unwrap(), 0.0);
}
