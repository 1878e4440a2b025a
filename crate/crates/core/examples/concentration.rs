//! Exact Poisson tails against the Bennett-type bound and the Chernoff scan.

use be_workbench::tail::{chernoff_scan, concentration_report};
use be_workbench::{GridFunction, TruncatedPmf};

fn main() -> be_workbench::Result<()> {
    let lambda = 2.0;
    let v = TruncatedPmf::poisson_on_window(lambda, 80)?;
    let id = GridFunction::from_fn(v.len(), |x| x as f64)?;
    let grid: Vec<f64> = (1..=10).map(f64::from).collect();
    let r = concentration_report(&v, &id, 1.0 / lambda, &grid)?;
    println!(
        "{:>4} {:>14} {:>14} {:>14}",
        "t", "P(X ≥ λ+t)", "e^{-h(ct)/c}", "e^{-k(ct)/c}"
    );
    for (i, t) in grid.iter().enumerate() {
        println!(
            "{t:>4} {:>14.6e} {:>14.6e} {:>14.6e}",
            r.exact_tail[i], r.bound_h[i], r.bound_k[i]
        );
    }
    for row in chernoff_scan(&v, &id, 1.0 / lambda, &[0.25, 1.0, 2.0])? {
        println!(
            "σ = {}: H(σ) − H(0) = {:.12}, bound = {:.12}",
            row.sigma, row.h_increment, row.bound
        );
    }
    Ok(())
}
