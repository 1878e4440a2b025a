//! Curvature profiles E(x) for the standard families.

use be_workbench::curvature::CurvatureReport;
use be_workbench::TruncatedPmf;

fn main() -> be_workbench::Result<()> {
    let cases = [
        TruncatedPmf::poisson(2.0, 1e-12)?,
        TruncatedPmf::bernoulli_sum(&[0.2, 0.5, 0.9])?,
        TruncatedPmf::negative_binomial(3.0, 0.4, 1e-12)?,
        TruncatedPmf::poisson(1.0, 1e-12)?.convolve(&TruncatedPmf::bernoulli_sum(&[0.3, 0.7])?)?,
    ];
    for v in &cases {
        let r = CurvatureReport::compute(v)?;
        let head: Vec<String> = r.profile.iter().take(5).map(|e| format!("{e:.4}")).collect();
        println!("{}", r.label);
        println!("  E(0..5)  = [{}]", head.join(", "));
        println!(
            "  c_inf = {:.6} at x = {}{}; 1/mean = {:.6}; ulc = {} (V(0)/V(1) = {:?}); nondecreasing = {}",
            r.c_inf,
            r.argmin,
            if r.infimum_at_window_edge { " (window edge)" } else { "" },
            1.0 / r.mean,
            r.ulc,
            r.ulc_c,
            r.increasing
        );
    }
    Ok(())
}
