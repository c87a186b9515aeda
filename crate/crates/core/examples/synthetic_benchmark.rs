//! End-to-end benchmark on the default synthetic dataset, with and without
//! the cross-user shift.
//!
//! cargo run --release --example synthetic_benchmark

use std::time::Instant;

use surface_mmd::classifier::run_benchmark;
use surface_mmd::dataset::{generate_synthetic, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticSpec::default();
    let data = generate_synthetic(&spec)?;
    let cfg = spec.pipeline_config();
    println!(
        "{} classes, {} library and {} test trials, sources: {}",
        spec.classes,
        data.library.trial_count(),
        data.tests.len(),
        cfg.sources.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(", ")
    );

    for (label, no_cross_user) in [("full pipeline", false), ("no cross-user", true)] {
        let mut cfg = cfg.clone();
        cfg.ablations.no_cross_user = no_cross_user;
        let started = Instant::now();
        let out = run_benchmark(&data.library, &data.tests, &cfg)?;
        let r = &out.report;
        println!(
            "{label:<14} accuracy {:.1} ± {:.1} % over {} user folds, macro precision {:.1} % ({:.1} s)",
            100.0 * r.accuracy.mean,
            100.0 * r.accuracy.std,
            r.folds.len(),
            100.0 * r.macro_precision.unwrap_or(f64::NAN),
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
