//! The modified log-Sobolev inequality: slack, sharp cases, restatement.

use be_workbench::curvature::c_log_concave_constant;
use be_workbench::functionals::{lsi_constant_estimate, lsi_verify, restated_form};
use be_workbench::random::{positive_function, stream_rng};
use be_workbench::{GridFunction, TruncatedPmf};

fn main() -> be_workbench::Result<()> {
    let v = TruncatedPmf::poisson_on_window(2.0, 60)?;
    for a in [-1.0, 0.3, 1.0] {
        let f = GridFunction::from_fn(v.len(), |x| (a * x as f64).exp())?;
        let r = lsi_verify(&v, &f, 0.5)?;
        println!(
            "Π_2, f = e^({a}x): Ent = {:.10}, rhs/c = {:.10}",
            r.ent,
            r.rhs_new / r.c_used
        );
    }

    let u = TruncatedPmf::bernoulli_sum(&[0.4, 0.7])?.perturb(1.0)?;
    let c = c_log_concave_constant(&u)?;
    let f = positive_function(&mut stream_rng(3, 0), u.len());
    let r = lsi_verify(&u, &f, c)?;
    println!(
        "{}: Ent = {:.6}, new {:.6} ≤ BL {:.6}, Caputo {:.6} = new + {:.6}",
        u.label(),
        r.ent,
        r.rhs_new / c,
        r.rhs_bl / c,
        r.rhs_caputo,
        r.rhs_diff
    );

    let p = TruncatedPmf::poisson_on_window(1.0, 60)?;
    let s = restated_form(&v, &p)?;
    println!(
        "size-biased form for Π_1 vs Π_2: D = {:.12}, bound = {:.12}, K = {:.6}",
        s.lhs,
        2.0 * s.rhs,
        s.k
    );

    println!(
        "best constant found on {} ≈ {:.6} (1/c = {:.6})",
        u.label(),
        lsi_constant_estimate(&u, 4, 11)?,
        1.0 / c
    );
    Ok(())
}
