//! Building truncated pmfs and moving between them.

use be_workbench::TruncatedPmf;

fn main() -> be_workbench::Result<()> {
    let p = TruncatedPmf::poisson(2.0, 1e-12)?;
    println!(
        "{}: window 0..={}, tail ≤ {:.1e}, mean {:.12}",
        p.label(),
        p.max_index(),
        p.tail_mass(),
        p.mean()
    );

    let b = TruncatedPmf::bernoulli_sum(&[0.2, 0.4, 0.6])?;
    println!("{}: {:?}", b.label(), b.values());

    let nb = TruncatedPmf::negative_binomial(3.0, 0.4, 1e-12)?;
    println!("{}: mean {:.10} (np/(1-p) = 2)", nb.label(), nb.mean());

    // Π_1 ⋆ Π_2 against Π_3
    let sum = TruncatedPmf::poisson(1.0, 1e-12)?.convolve(&TruncatedPmf::poisson(2.0, 1e-12)?)?;
    let three = TruncatedPmf::poisson(3.0, 1e-12)?;
    let sup = sum
        .values()
        .iter()
        .zip(three.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("sup |Π_1⋆Π_2 − Π_3| = {sup:.2e}");

    // finite support made fully supported by a small Poisson smear
    let holes = TruncatedPmf::from_weights(&[2.0, 0.0, 2.0])?;
    let smeared = holes.perturb(0.01)?;
    println!(
        "{} full support: {}; after perturbation: {} ({} sites)",
        holes.label(),
        holes.is_full_support(),
        smeared.is_full_support(),
        smeared.len()
    );
    Ok(())
}
