//! Spectral-gap Poincaré constants against 1/c.

use be_workbench::curvature::c_log_concave_constant;
use be_workbench::functionals::{poincare_check, poincare_constant};
use be_workbench::TruncatedPmf;

fn main() -> be_workbench::Result<()> {
    let cases = [
        TruncatedPmf::poisson(0.5, 1e-12)?,
        TruncatedPmf::poisson(10.0, 1e-12)?,
        TruncatedPmf::bernoulli_sum(&[0.1, 0.5, 0.5, 0.9])?,
        TruncatedPmf::negative_binomial(4.0, 0.3, 1e-12)?,
    ];
    println!("{:<40} {:>12} {:>12} {:>10}", "V", "C_P", "1/c", "violations");
    for v in &cases {
        let c = c_log_concave_constant(v)?;
        let check = poincare_check(v, c, 200, 1)?;
        println!(
            "{:<40} {:>12.8} {:>12.8} {:>10}",
            v.label(),
            poincare_constant(v)?,
            1.0 / c,
            check.violations
        );
    }
    Ok(())
}
