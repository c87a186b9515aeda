//! Writes a small synthetic dataset in manifest layout, reads it back,
//! validates it and ranks the library for one test trial.
//!
//! cargo run --release --example manifest_dataset

use surface_mmd::classifier::classify_trial;
use surface_mmd::dataset::{generate_synthetic, load_dataset, validate_dataset, write_dataset, DatasetManifest, SyntheticSpec};
use surface_mmd::rng::from_seed;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticSpec {
        classes: 4,
        library_trials: 2,
        test_trials: 2,
        users: 2,
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&spec)?;
    let dir = std::env::temp_dir().join(format!("surface-mmd-example-{}", std::process::id()));
    let path = write_dataset(&dir, &data.manifest, &data.library, &data.tests)?;
    println!("manifest written to {}\n", path.display());
    println!("{}", std::fs::read_to_string(&path)?.lines().take(24).collect::<Vec<_>>().join("\n"));

    let manifest = DatasetManifest::from_file(&path)?;
    let (library, tests) = load_dataset(&manifest)?;
    println!("\nreloaded {} library and {} test trials, identical: {}", library.trial_count(), tests.len(), library == data.library && tests == data.tests);

    let cfg = spec.pipeline_config();
    let report = validate_dataset(&library, &tests, &cfg);
    println!("validation ok: {} ({} trials)", report.is_ok(), report.trials_checked);

    let probe = &tests[3];
    let result = classify_trial(probe, &library, &cfg, &mut from_seed(1))?;
    println!("\n{} (actual {}) → {}", probe.id, probe.class.as_deref().unwrap_or("?"), result.predicted);
    for c in result.ranking.iter().take(4) {
        println!("  {:<20} DS = {:.4e}", c.trial_id, c.score.value);
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
