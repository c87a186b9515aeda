//! Squared-exponential kernel, Gram matrices and median-heuristic bandwidths.
//!
//! All RKHS geometry in the crate goes through [`squared_exponential`] or the
//! internal summation helpers here, which evaluate the identical expression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samples::{check_same_dim, SampleSet};
use crate::stats;

/// Number of leading samples used by the median heuristic.
pub const DEFAULT_SUBSET_SIZE: usize = 100;

/// Length scale of the squared-exponential kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub lengthscale: f64,
    /// Substituted when the median heuristic degenerates to zero.
    pub fallback_lengthscale: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            lengthscale: 1.0,
            fallback_lengthscale: 1.0,
        }
    }
}

impl KernelConfig {
    pub fn new(lengthscale: f64) -> Result<Self> {
        let cfg = Self {
            lengthscale,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lengthscale", self.lengthscale),
            ("fallback_lengthscale", self.fallback_lengthscale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::input(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// `1 / (2 σ²)`, the factor multiplying squared distances in the exponent.
    #[inline]
    pub(crate) fn gamma(&self) -> f64 {
        1.0 / (2.0 * self.lengthscale * self.lengthscale)
    }
}

#[inline(always)]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

#[inline(always)]
pub(crate) fn kernel_value(d2: f64, gamma: f64) -> f64 {
    (-(d2 * gamma)).exp()
}

/// `exp(-‖y − z‖² / (2σ²))`.
pub fn squared_exponential(y: &[f64], z: &[f64], config: &KernelConfig) -> Result<f64> {
    config.validate()?;
    if y.len() != z.len() {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {}",
            y.len(),
            z.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::input("points must have at least one coordinate"));
    }
    if y.iter().chain(z).any(|v| !v.is_finite()) {
        return Err(Error::input("non-finite coordinate"));
    }
    Ok(kernel_value(sq_dist(y, z), config.gamma()))
}

/// Dense row-major kernel matrix between two point sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl GramMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().sum()
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Kernel matrix with `entries[i][j] = k(a_i, b_j)`.
pub fn gram(a: &SampleSet, b: &SampleSet, config: &KernelConfig) -> Result<GramMatrix> {
    config.validate()?;
    check_same_dim(a, b)?;
    let gamma = config.gamma();
    let mut entries = Vec::with_capacity(a.len() * b.len());
    for p in a.points() {
        entries.extend(b.points().map(|q| kernel_value(sq_dist(p, q), gamma)));
    }
    Ok(GramMatrix {
        rows: a.len(),
        cols: b.len(),
        entries,
    })
}

/// Symmetric kernel matrix of one set; diagonal is exactly one.
pub(crate) fn gram_self(a: &SampleSet, config: &KernelConfig) -> GramMatrix {
    let n = a.len();
    let gamma = config.gamma();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = 1.0;
        let p = a.point(i);
        for j in (i + 1)..n {
            let v = kernel_value(sq_dist(p, a.point(j)), gamma);
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    GramMatrix {
        rows: n,
        cols: n,
        entries,
    }
}

/// `Σ_i Σ_j k(a_i, a_j)` using symmetry.
pub(crate) fn self_kernel_sum(a: &SampleSet, gamma: f64) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2.
        return unsafe { self_kernel_sum_avx2(a, gamma) };
    }
    self_kernel_sum_impl(a, gamma)
}

/// `Σ_i Σ_j k(a_i, b_j)` with a fixed loop order.
pub(crate) fn cross_kernel_sum(a: &SampleSet, b: &SampleSet, gamma: f64) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2.
        return unsafe { cross_kernel_sum_avx2(a, b, gamma) };
    }
    cross_kernel_sum_impl(a, b, gamma)
}

// The AVX2 copies only widen the vector registers; without FMA contraction
// every lane performs the same IEEE operations, so results are bit-identical
// to the baseline path.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn self_kernel_sum_avx2(a: &SampleSet, gamma: f64) -> f64 {
    self_kernel_sum_impl(a, gamma)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn cross_kernel_sum_avx2(a: &SampleSet, b: &SampleSet, gamma: f64) -> f64 {
    cross_kernel_sum_impl(a, b, gamma)
}

/// Coordinate-major copy of a point set, so distance loops run over
/// contiguous columns.
struct Columns {
    cols: Vec<Vec<f64>>,
}

impl Columns {
    #[inline(always)]
    fn new(a: &SampleSet) -> Self {
        let cols = (0..a.dim())
            .map(|c| a.points().map(|p| p[c]).collect())
            .collect();
        Self { cols }
    }
}

#[inline(always)]
fn self_kernel_sum_impl(a: &SampleSet, gamma: f64) -> f64 {
    let n = a.len();
    let cols = Columns::new(a);
    let mut buf = vec![0.0; n];
    let mut off = 0.0;
    for i in 0..n {
        off += row_sum(a.point(i), &cols, i + 1, gamma, &mut buf);
    }
    n as f64 + 2.0 * off
}

#[inline(always)]
fn cross_kernel_sum_impl(a: &SampleSet, b: &SampleSet, gamma: f64) -> f64 {
    let cols = Columns::new(b);
    let mut buf = vec![0.0; b.len()];
    let mut total = 0.0;
    for i in 0..a.len() {
        total += row_sum(a.point(i), &cols, 0, gamma, &mut buf);
    }
    total
}

/// Sum of `k(p, q_j)` over the column-stored points `j >= from`.
// Plain index loops: iterator adaptors here are not reliably inlined into
// the AVX2 entry points.
#[inline(always)]
fn row_sum(p: &[f64], cols: &Columns, from: usize, gamma: f64, buf: &mut [f64]) -> f64 {
    let len = cols.cols[0].len() - from;
    let buf = &mut buf[..len];
    let first = &cols.cols[0][from..from + len];
    let x = p[0];
    for j in 0..len {
        let d = x - first[j];
        buf[j] = d * d;
    }
    for c in 1..cols.cols.len() {
        let col = &cols.cols[c][from..from + len];
        let x = p[c];
        for j in 0..len {
            let d = x - col[j];
            buf[j] += d * d;
        }
    }
    sum_exp_neg(buf, gamma)
}

/// `Σ exp(−gamma · d2[i])` in a fixed four-lane order. Overwrites `d2`.
#[inline(always)]
fn sum_exp_neg(d2: &mut [f64], gamma: f64) -> f64 {
    for v in d2.iter_mut() {
        *v = exp_neg(*v * gamma);
    }
    let mut lanes = [0.0f64; 4];
    let full = d2.len() / 4 * 4;
    let mut j = 0;
    while j < full {
        lanes[0] += d2[j];
        lanes[1] += d2[j + 1];
        lanes[2] += d2[j + 2];
        lanes[3] += d2[j + 3];
        j += 4;
    }
    let mut tail = 0.0;
    while j < d2.len() {
        tail += d2[j];
        j += 1;
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// `exp(−x)` for `x ≥ 0`, branch-free so the summation loop vectorizes.
///
/// Range reduction `−x = k·ln2 + r`, `|r| ≤ ln2/2`, then a degree-12 Taylor
/// polynomial; relative error stays within a few ulp. Inputs beyond 708 are
/// clamped, giving a value below 1e-307 instead of 0.
#[inline(always)]
pub(crate) fn exp_neg(x: f64) -> f64 {
    const SHIFT: f64 = 6_755_399_441_055_744.0; // 1.5 · 2^52
    const LOG2E: f64 = std::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    let v = -(x.min(708.0));
    let t = v * LOG2E + SHIFT;
    let k = t - SHIFT;
    let r = (v - k * LN2_HI) - k * LN2_LO;
    let mut p = 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    let bits = t
        .to_bits()
        .wrapping_sub(SHIFT.to_bits())
        .wrapping_add(1023)
        << 52;
    p * f64::from_bits(bits)
}

/// Median-heuristic bandwidth with the default fallback of `σ = 1`.
pub fn median_heuristic(samples: &SampleSet, subset_size: usize) -> Result<KernelConfig> {
    median_heuristic_with_fallback(samples, subset_size, KernelConfig::default().fallback_lengthscale)
}

/// `σ² = 0.5 · median{‖z_i − z_j‖²}` over distinct pairs among the first
/// `subset_size` samples. A zero median yields `fallback`.
pub fn median_heuristic_with_fallback(
    samples: &SampleSet,
    subset_size: usize,
    fallback: f64,
) -> Result<KernelConfig> {
    if !(fallback.is_finite() && fallback > 0.0) {
        return Err(Error::input(format!("fallback lengthscale must be > 0, got {fallback}")));
    }
    let k = subset_size.min(samples.len());
    if k < 2 {
        return Err(Error::input(format!(
            "median heuristic needs at least 2 samples, got {k}"
        )));
    }
    let mut d2 = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        let p = samples.point(i);
        for j in (i + 1)..k {
            d2.push(sq_dist(p, samples.point(j)));
        }
    }
    let med = stats::median(&mut d2).expect("non-empty pair list");
    let sigma2 = 0.5 * med;
    let lengthscale = if sigma2 > 0.0 { sigma2.sqrt() } else { fallback };
    Ok(KernelConfig {
        lengthscale,
        fallback_lengthscale: fallback,
    })
}
