//! HSIC independence test and the minimum-gap search on AR(1) realizations.
//! A larger coefficient means slower mixing, so the search has to step
//! further before samples look independent.
//!
//! cargo run --release --example hsic_mixing

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use surface_mmd::independence::{
    hsic_test, median_configs, minimum_independent_gap, mixing_report, MixingSearchConfig, RealizationSet,
};
use surface_mmd::rng::{from_seed, substream};
use surface_mmd::samples::SampleSet;

fn ar1(rho: f64, q: usize, len: usize, seed: u64) -> RealizationSet {
    let mut rng = from_seed(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let scale = (1.0 - rho * rho).sqrt();
    let realizations = (0..q)
        .map(|_| {
            let mut x = gauss();
            (0..len)
                .map(|_| {
                    let out = x;
                    x = rho * x + scale * gauss();
                    out
                })
                .collect()
        })
        .collect();
    RealizationSet::new(realizations, 1000.0).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // paired dependence: z = y² is uncorrelated with y but far from independent
    let mut rng = from_seed(3);
    let y: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
    let z: Vec<f64> = y.iter().map(|v| v * v).collect();
    let (ys, zs) = (SampleSet::from_scalars(&y)?, SampleSet::from_scalars(&z)?);
    let (cy, cz) = median_configs(&ys, &zs)?;
    let r = hsic_test(&ys, &zs, &cy, &cz, 0.05, 500, &mut rng)?;
    println!("y vs y²: HSIC_b = {:.5}, threshold = {:.5}, dependent: {}", r.hsic, r.threshold, r.reject_independence);

    let cfg = MixingSearchConfig {
        repetitions: 5,
        t1_max: 50,
        alpha: 0.05,
        max_gap: Some(200),
        ..MixingSearchConfig::default()
    };
    let mut results = BTreeMap::new();
    for (name, rho) in [("ar(0.0)", 0.0), ("ar(0.5)", 0.5), ("ar(0.9)", 0.9)] {
        let data = ar1(rho, 100, 400, 17);
        let res = minimum_independent_gap(&data, &cfg, &mut substream(5, &[(rho * 10.0) as u64]))?;
        results.insert(name.to_string(), res);
    }
    let report = mixing_report(&results, 1000.0);
    println!("\nminimum independent gap at 1 kHz (Q = 100, R = {}):", cfg.repetitions);
    for row in &report.rows {
        println!("  {:<8} T* = {:>3} samples ({:.0} ms), converged: {}", row.source, row.t_star_samples, row.t_star_ms, row.converged);
    }
    Ok(())
}
