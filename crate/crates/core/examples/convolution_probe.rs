//! Evidence on the curvature of convolutions: c_{U⋆V}(1/c_U + 1/c_V) against 1.

use be_workbench::curvature::convolution_probe;

fn main() -> be_workbench::Result<()> {
    let r = convolution_probe(400, 2024)?;
    println!(
        "{} pairs: min ratio {:.15} (sample {})",
        r.samples, r.min_ratio, r.argmin_sample
    );
    println!("  U = {}\n  V = {}", r.worst_pair.0, r.worst_pair.1);
    println!("  below one: {}", r.below_one);
    Ok(())
}
