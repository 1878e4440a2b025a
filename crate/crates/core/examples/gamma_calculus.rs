//! Γ₁/Γ₂ sums and the integrated Bakry–Émery condition.

use be_workbench::curvature::c_log_concave_constant;
use be_workbench::gamma::{be_extremal, gamma2_mean, gamma2_mean_brute, integrated_be_check};
use be_workbench::random::{interior_function, stream_rng};
use be_workbench::TruncatedPmf;

fn main() -> be_workbench::Result<()> {
    let v = TruncatedPmf::bernoulli_sum(&[0.3, 0.6, 0.8])?.perturb(0.5)?;
    let c = c_log_concave_constant(&v)?;
    println!("{}: c_inf = {c:.6}", v.label());

    let f = interior_function(&mut stream_rng(1, 0), v.len());
    println!(
        "Σ V Γ₂(f,f): closed form {:.12}, pointwise {:.12}",
        gamma2_mean(&v, &f, &f)?,
        gamma2_mean_brute(&v, &f, &f)?
    );

    let ext = be_extremal(&v)?;
    println!("smallest Γ₂/Γ₁ ratio on the window: {:.6}", ext.ratio);

    for factor in [1.0, 1.2] {
        let r = integrated_be_check(&v, factor * c, 200, 7)?;
        println!(
            "c = {:.4}: {} violations, worst margin/scale {:.3e}, extremal violates: {}",
            r.c, r.violations, r.worst_relative_margin, r.extremal_violates
        );
    }
    Ok(())
}
