//! Biased squared-MMD estimator, its repetition average and the
//! permutation-calibrated two-sample test.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, cross_kernel_sum, self_kernel_sum, KernelConfig, DEFAULT_SUBSET_SIZE};
use crate::rng;
use crate::samples::{check_same_dim, SampleSet};
use crate::sampling::{self, ChannelMode, DataStream, PreparedStream, SamplingSpec};
use crate::stats;

/// Default number of permutations for the null distribution.
pub const DEFAULT_SHUFFLES: usize = 1000;
/// Fewer shuffles make the tail quantile too coarse.
pub const MIN_SHUFFLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub mmd2: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub reject_null: bool,
    pub lengthscale: f64,
}

fn lexi_cmp(a: &SampleSet, b: &SampleSet) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.as_flat()
            .iter()
            .zip(b.as_flat())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Squared MMD before clamping. Analytically nonnegative; rounding can leave
/// values of order `-1e-16`.
pub fn mmd2_biased_raw(y: &SampleSet, z: &SampleSet, config: &KernelConfig) -> Result<f64> {
    config.validate()?;
    check_same_dim(y, z)?;
    if y.as_flat() == z.as_flat() {
        return Ok(0.0);
    }
    let gamma = config.gamma();
    let (n, m) = (y.len() as f64, z.len() as f64);
    let syy = self_kernel_sum(y, gamma);
    let szz = self_kernel_sum(z, gamma);
    // fixed orientation keeps the estimator bit-symmetric in its arguments
    let syz = match lexi_cmp(y, z) {
        Ordering::Greater => cross_kernel_sum(z, y, gamma),
        _ => cross_kernel_sum(y, z, gamma),
    };
    Ok(syy / (n * n) + szz / (m * m) - 2.0 * syz / (n * m))
}

/// Biased squared-MMD estimate between two sample sets, clamped at zero.
pub fn mmd2_biased(y: &SampleSet, z: &SampleSet, config: &KernelConfig) -> Result<f64> {
    Ok(mmd2_biased_raw(y, z, config)?.max(0.0))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::input(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Null statistics from `shuffles` random re-partitions of the pooled sample.
pub fn permutation_null<R: Rng + ?Sized>(
    y: &SampleSet,
    z: &SampleSet,
    config: &KernelConfig,
    shuffles: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    config.validate()?;
    let pooled = y.pooled(z)?;
    let (n, m) = (y.len(), z.len());
    let total = n + m;
    let gram = kernels::gram_self(&pooled, config);
    let row_sums: Vec<f64> = (0..total).map(|i| gram.row(i).iter().sum()).collect();
    let grand: f64 = row_sums.iter().sum();
    let (nf, mf) = (n as f64, m as f64);

    let mut idx: Vec<usize> = (0..total).collect();
    let mut nulls = Vec::with_capacity(shuffles);
    for _ in 0..shuffles {
        // partial Fisher-Yates: the first n slots become the Y group
        for i in 0..n {
            let j = rng.random_range(i..total);
            idx.swap(i, j);
        }
        let group = &idx[..n];
        let mut syy = 0.0;
        let mut sy = 0.0;
        for (a, &i) in group.iter().enumerate() {
            let row = gram.row(i);
            let mut off = 0.0;
            for &j in &group[a + 1..] {
                off += row[j];
            }
            syy += 1.0 + 2.0 * off;
            sy += row_sums[i];
        }
        let syz = sy - syy;
        let szz = grand - 2.0 * sy + syy;
        let v = syy / (nf * nf) + szz / (mf * mf) - 2.0 * syz / (nf * mf);
        nulls.push(v.max(0.0));
    }
    Ok(nulls)
}

/// `(1 − alpha)`-quantile of the permutation null of the squared MMD.
pub fn bootstrap_threshold<R: Rng + ?Sized>(
    y: &SampleSet,
    z: &SampleSet,
    config: &KernelConfig,
    alpha: f64,
    shuffles: usize,
    rng: &mut R,
) -> Result<f64> {
    check_alpha(alpha)?;
    if shuffles < MIN_SHUFFLES {
        return Err(Error::input(format!(
            "bootstrap needs at least {MIN_SHUFFLES} shuffles, got {shuffles}"
        )));
    }
    let mut nulls = permutation_null(y, z, config, shuffles, rng)?;
    Ok(stats::quantile(&mut nulls, 1.0 - alpha).expect("non-empty null sample"))
}

/// Two-sample test with the bandwidth set by the median heuristic on `z`.
pub fn two_sample_test<R: Rng + ?Sized>(
    y: &SampleSet,
    z: &SampleSet,
    alpha: f64,
    shuffles: usize,
    rng: &mut R,
) -> Result<TestResult> {
    let config = kernels::median_heuristic(z, DEFAULT_SUBSET_SIZE)?;
    two_sample_test_with(y, z, &config, alpha, shuffles, rng)
}

pub fn two_sample_test_with<R: Rng + ?Sized>(
    y: &SampleSet,
    z: &SampleSet,
    config: &KernelConfig,
    alpha: f64,
    shuffles: usize,
    rng: &mut R,
) -> Result<TestResult> {
    let mmd2 = mmd2_biased(y, z, config)?;
    let threshold = bootstrap_threshold(y, z, config, alpha, shuffles, rng)?;
    Ok(TestResult {
        mmd2,
        threshold,
        alpha,
        reject_null: mmd2 > threshold,
        lengthscale: config.lengthscale,
    })
}

/// Settings shared by every repetition of [`averaged_mmd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepetitionOptions {
    pub repetitions: usize,
    pub cross_user: bool,
    pub subset_size: usize,
    pub fallback_lengthscale: f64,
}

impl Default for RepetitionOptions {
    fn default() -> Self {
        Self {
            repetitions: 10,
            cross_user: false,
            subset_size: DEFAULT_SUBSET_SIZE,
            fallback_lengthscale: 1.0,
        }
    }
}

/// One repetition: shift (optionally), pick σ on the test side, estimate.
pub fn repetition_mmd(y: &SampleSet, z: &SampleSet, mode: ChannelMode, opts: &RepetitionOptions) -> Result<f64> {
    let z = if opts.cross_user {
        sampling::cross_user_shift(y, z)?
    } else {
        z.clone()
    };
    let single = |y: &SampleSet, z: &SampleSet| -> Result<f64> {
        let cfg = kernels::median_heuristic_with_fallback(z, opts.subset_size, opts.fallback_lengthscale)?;
        mmd2_biased(y, z, &cfg)
    };
    match mode {
        ChannelMode::Stacked => single(y, &z),
        ChannelMode::PerChannel => {
            let mut acc = 0.0;
            for c in 0..y.dim() {
                acc += single(&y.channel(c), &z.channel(c))?;
            }
            Ok(acc / y.dim() as f64)
        }
    }
}

/// Mean squared MMD over `opts.repetitions` independent paired draws.
///
/// Repetition `r` draws from the substream `(base, r)` where `base` is one
/// `u64` taken from `rng`, so the result does not depend on evaluation order.
pub fn averaged_mmd_prepared<R: Rng + ?Sized>(
    y: &PreparedStream,
    z: &PreparedStream,
    spec: &SamplingSpec,
    opts: &RepetitionOptions,
    rng: &mut R,
) -> Result<f64> {
    if opts.repetitions == 0 {
        return Err(Error::input("repetitions must be >= 1"));
    }
    spec.validate()?;
    let base = rng::base_seed(rng);
    let mut acc = 0.0;
    for r in 0..opts.repetitions {
        let mut rep_rng = rng::substream(base, &[r as u64]);
        let (ys, zs) = sampling::draw_pair(y, z, spec, &mut rep_rng)?;
        acc += repetition_mmd(&ys, &zs, spec.channel_mode, opts)?;
    }
    Ok(acc / opts.repetitions as f64)
}

/// [`averaged_mmd_prepared`] on raw streams (color conversion / DFT applied
/// per call).
pub fn averaged_mmd<R: Rng + ?Sized>(
    y: &DataStream,
    z: &DataStream,
    spec: &SamplingSpec,
    opts: &RepetitionOptions,
    rng: &mut R,
) -> Result<f64> {
    let py = sampling::prepare(y, spec).map_err(|e| Error::input(format!("stream Y: {e}")))?;
    let pz = sampling::prepare(z, spec).map_err(|e| Error::input(format!("stream Z: {e}")))?;
    averaged_mmd_prepared(&py, &pz, spec, opts, rng)
}
