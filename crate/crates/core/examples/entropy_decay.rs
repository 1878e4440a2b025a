//! Relative entropy along Poisson thinning decays at least like e^{-t}.

use be_workbench::tail::{geometric_grid, thinning_decay_trace};
use be_workbench::TruncatedPmf;

fn main() -> be_workbench::Result<()> {
    let p0 = TruncatedPmf::bernoulli_sum(&[0.2, 0.9, 0.9])?;
    let grid = geometric_grid(0.01, 10.0, 2.0)?;
    let trace = thinning_decay_trace(&p0, 2.0, &grid, 1e-10)?;
    println!("{} → {}", trace.initial, trace.family);
    for r in &trace.rows {
        println!(
            "t = {:>8.4}  D(p_t‖V_t) = {:.6e}  bound = {:.6e}",
            r.t, r.value, r.bound
        );
    }
    println!("bound holds: {}", trace.holds);
    Ok(())
}
