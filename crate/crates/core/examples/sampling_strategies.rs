//! The three extraction strategies and the cross-user shift.
//!
//! cargo run --example sampling_strategies

use surface_mmd::rng::from_seed;
use surface_mmd::samples::SampleSet;
use surface_mmd::sampling::{
    cross_user_shift, equidistant_spatial, equidistant_temporal, random_spectral_pair, spectral_magnitudes, GridPlan,
    Image, SamplingSpec, TemporalGap, TimeSeries,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = from_seed(1);

    // a 480x320 RGB image sampled on the 17 x 18 pixel grid
    let data: Vec<f64> = (0..480 * 320 * 3).map(|i| (i % 251) as f64).collect();
    let img = Image::new(480, 320, 3, 255.0, data)?;
    let plan = GridPlan::shape(480, 320, 400, (17, 18))?;
    println!("image grid: {} columns x {} rows for n = 400", plan.cols, plan.rows);
    let spatial = equidistant_spatial(&img, &SamplingSpec::spatial(400, (17, 18)), &mut rng)?;
    println!("  {} points of dimension {} (HSV)", spatial.len(), spatial.dim());

    // 4.8 s at 2.5 kHz with an 11.8 ms gap
    let wave: Vec<f64> = (0..12_000).map(|i| (i as f64 * 0.01).sin()).collect();
    let ts = TimeSeries::new(vec![wave.clone()], 2500.0)?;
    let spec = SamplingSpec::temporal(400, TemporalGap::Seconds(0.0118));
    let temporal = equidistant_temporal(&ts, &spec, &mut rng)?;
    println!("temporal: {} points, first {:.4}", temporal.len(), temporal.point(0)[0]);

    // a 300 Hz tone plus a weaker 900 Hz one, capped at 1 kHz
    let tone: Vec<f64> = (0..2048)
        .map(|i| {
            let t = i as f64 / 8000.0;
            (std::f64::consts::TAU * 300.0 * t).sin() + 0.3 * (std::f64::consts::TAU * 900.0 * t).sin()
        })
        .collect();
    let spectrum = spectral_magnitudes(&TimeSeries::new(vec![tone], 8000.0)?, Some(1000.0))?;
    let (peak, _) = spectrum.magnitudes[0]
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
    println!(
        "spectrum: {} bins up to {} Hz, peak at {:.1} Hz",
        spectrum.bin_count(),
        spectrum.bin_frequencies.last().unwrap(),
        spectrum.bin_frequencies[peak]
    );
    let (a, b) = random_spectral_pair(&spectrum, &spectrum, 50, &mut rng)?;
    println!("  paired draw of 50 bins, identical sets: {}", a.as_flat() == b.as_flat());

    let y = SampleSet::from_scalars(&[1.0, 3.0])?;
    let z = SampleSet::from_scalars(&[10.0, 20.0])?;
    let shifted = cross_user_shift(&y, &z)?;
    println!("cross-user shift of {{10, 20}} onto mean 2: {:?}", shifted.as_flat());
    Ok(())
}
