//! The q(t)-norm along the co-evolution: flat for the Charlier polynomial.

use be_workbench::random::{positive_function, stream_rng};
use be_workbench::tail::{charlier1, charlier_constant, hypercontractivity_trace};

fn main() -> be_workbench::Result<()> {
    let (lambda, p) = (2.0, 2.0);
    let grid = [0.0, 0.1, 0.2, 0.3, 0.4];
    let trace = hypercontractivity_trace(lambda, &charlier1(lambda, 45), p, &grid, 1e-12)?;
    println!("charlier, −C = {:.12}", -charlier_constant(lambda, p));
    for r in &trace.rows {
        println!("  t = {:.1}  q = {:.6}  u = {:.12}", r.t, r.q, r.u);
    }

    let g0 = positive_function(&mut stream_rng(5, 0), 30).map(f64::ln)?;
    let trace = hypercontractivity_trace(lambda, &g0, p, &grid, 1e-11)?;
    let u: Vec<String> = trace.rows.iter().map(|r| format!("{:.6}", r.u)).collect();
    println!("random g: u = [{}], nondecreasing: {}", u.join(", "), trace.monotone);
    Ok(())
}
