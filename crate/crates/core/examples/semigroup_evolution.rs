//! The birth–death chain of a pmf: generator, transient laws, duality.

use be_workbench::functionals::relative_entropy;
use be_workbench::semigroup::{evolve_function, evolve_pmf_with_stats, verify_self_adjoint};
use be_workbench::{GeneratorMatrix, GridFunction, TruncatedPmf};

fn main() -> be_workbench::Result<()> {
    let v = TruncatedPmf::poisson(3.0, 1e-12)?;
    let q = GeneratorMatrix::new(&v)?;
    println!(
        "Q has {} states, max exit rate {:.3}, detailed-balance defect {:.1e}",
        q.dim(),
        q.max_rate(),
        q.detailed_balance_defect(&v)
    );

    let p0 = TruncatedPmf::point_mass(0).with_window(v.max_index())?;
    for t in [0.25, 1.0, 4.0, 16.0] {
        let (pt, stats) = evolve_pmf_with_stats(&v, &p0, t, 1e-10)?;
        println!(
            "t = {t:>5}: D(p_t‖V) = {:.6e}  ({} substeps, doubling error {:.1e})",
            relative_entropy(&pt, &v)?,
            stats.substeps,
            stats.step_doubling_error
        );
    }

    let f = GridFunction::from_fn(v.len(), |x| (0.3 * x as f64).exp())?;
    let g = GridFunction::from_fn(v.len(), |x| (x as f64).sqrt())?;
    let (a, b, c) = verify_self_adjoint(&v, &f, &g)?;
    println!("Σ V f Lg = {a:.12}, Σ V (Lf) g = {b:.12}, −Σ V Δf Δg = {c:.12}");

    let ft = evolve_function(&v, &f, 1.0, 1e-10)?;
    println!("(P_1 f)(0) = {:.10}", ft.values()[0]);
    Ok(())
}
