//! Kernel evaluations, Gram matrices and the median-heuristic bandwidth.
//!
//! cargo run --example kernel_basics

use surface_mmd::kernels::{gram, median_heuristic, squared_exponential, KernelConfig};
use surface_mmd::samples::SampleSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sigma5 = KernelConfig::new(5.0)?;
    // ‖(0,0) − (3,4)‖² = 25, so k = exp(−25 / 50)
    let k = squared_exponential(&[0.0, 0.0], &[3.0, 4.0], &sigma5)?;
    println!("k((0,0), (3,4); σ=5) = {k:.6}  (e^-1/2 = {:.6})", (-0.5f64).exp());

    let a = SampleSet::from_points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])?;
    let g = gram(&a, &a, &KernelConfig::new(1.0)?)?;
    println!("\nGram matrix of three points (σ=1), symmetric: {}", g.is_symmetric());
    for i in 0..g.rows() {
        let row: Vec<String> = g.row(i).iter().map(|v| format!("{v:.4}")).collect();
        println!("  [{}]", row.join(", "));
    }

    // pairwise squared distances {1, 9, 4}: median 4, σ² = 2
    let s = SampleSet::from_scalars(&[0.0, 1.0, 3.0])?;
    let cfg = median_heuristic(&s, 100)?;
    println!("\nmedian heuristic on {{0, 1, 3}}: σ = {:.6} (√2 = {:.6})", cfg.lengthscale, 2f64.sqrt());

    let flat = SampleSet::from_scalars(&[4.2; 10])?;
    println!("constant data falls back to σ = {}", median_heuristic(&flat, 100)?.lengthscale);
    Ok(())
}
