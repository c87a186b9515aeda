//! HSIC dependence estimation and the search for the smallest temporal gap
//! at which extractions from repeated realizations look independent.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, KernelConfig, DEFAULT_SUBSET_SIZE};
use crate::mmd::MIN_SHUFFLES;
use crate::rng;
use crate::samples::SampleSet;
use crate::stats;

/// Shuffles per threshold inside the gap search.
pub const DEFAULT_SEARCH_SHUFFLES: usize = 200;

/// `K` centered on both sides next to the raw `L`; the statistic for any
/// pairing permutation `π` is `Σ Kc_ij L_π(i)π(j) / n²`.
struct CenteredPair {
    n: usize,
    kc: Vec<f64>,
    l: Vec<f64>,
}

impl CenteredPair {
    fn new(y: &SampleSet, z: &SampleSet, cfg_y: &KernelConfig, cfg_z: &KernelConfig) -> Result<Self> {
        check_pairs(y, z)?;
        let n = y.len();
        let mut kc = kernels::gram(y, y, cfg_y)?.entries().to_vec();
        let l = kernels::gram(z, z, cfg_z)?.entries().to_vec();
        // H K H via row, column and grand means (K is symmetric).
        let means: Vec<f64> = kc.chunks(n).map(|row| row.iter().sum::<f64>() / n as f64).collect();
        let grand = means.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            for j in 0..n {
                kc[i * n + j] += grand - means[i] - means[j];
            }
        }
        Ok(Self { n, kc, l })
    }

    fn statistic(&self) -> f64 {
        let s: f64 = self.kc.iter().zip(&self.l).map(|(a, b)| a * b).sum();
        (s / (self.n * self.n) as f64).max(0.0)
    }

    fn permuted(&self, perm: &[usize]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            let krow = &self.kc[i * n..(i + 1) * n];
            let lrow = &self.l[perm[i] * n..(perm[i] + 1) * n];
            let mut r = 0.0;
            for j in 0..n {
                r += krow[j] * lrow[perm[j]];
            }
            s += r;
        }
        (s / (n * n) as f64).max(0.0)
    }

    fn null<R: Rng + ?Sized>(&self, shuffles: usize, rng: &mut R) -> Vec<f64> {
        let mut perm: Vec<usize> = (0..self.n).collect();
        (0..shuffles)
            .map(|_| {
                perm.shuffle(rng);
                self.permuted(&perm)
            })
            .collect()
    }
}

fn check_pairs(y: &SampleSet, z: &SampleSet) -> Result<()> {
    if y.len() != z.len() {
        return Err(Error::input(format!(
            "HSIC needs paired observations, got {} and {}",
            y.len(),
            z.len()
        )));
    }
    if y.len() < 3 {
        return Err(Error::input(format!("HSIC needs at least 3 pairs, got {}", y.len())));
    }
    Ok(())
}

fn check_test_args(alpha: f64, shuffles: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::input(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if shuffles < MIN_SHUFFLES {
        return Err(Error::input(format!(
            "bootstrap needs at least {MIN_SHUFFLES} shuffles, got {shuffles}"
        )));
    }
    Ok(())
}

/// Biased HSIC estimate `trace(K H L H) / n²`.
pub fn hsic_b(y: &SampleSet, z: &SampleSet, cfg_y: &KernelConfig, cfg_z: &KernelConfig) -> Result<f64> {
    Ok(CenteredPair::new(y, z, cfg_y, cfg_z)?.statistic())
}

/// Median-heuristic bandwidths for both sides, each on its own sample set.
pub fn median_configs(y: &SampleSet, z: &SampleSet) -> Result<(KernelConfig, KernelConfig)> {
    Ok((
        kernels::median_heuristic(y, DEFAULT_SUBSET_SIZE)?,
        kernels::median_heuristic(z, DEFAULT_SUBSET_SIZE)?,
    ))
}

/// `(1 − alpha)`-quantile of HSIC under random re-pairings of `z` with `y`.
/// Bandwidths follow the median heuristic on each side.
pub fn hsic_threshold<R: Rng + ?Sized>(
    y: &SampleSet,
    z: &SampleSet,
    alpha: f64,
    shuffles: usize,
    rng: &mut R,
) -> Result<f64> {
    let (cy, cz) = median_configs(y, z)?;
    Ok(hsic_test(y, z, &cy, &cz, alpha, shuffles, rng)?.threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsicResult {
    pub hsic: f64,
    pub threshold: f64,
    pub reject_independence: bool,
}

/// Statistic and threshold from one pair of Gram matrices.
pub fn hsic_test<R: Rng + ?Sized>(
    y: &SampleSet,
    z: &SampleSet,
    cfg_y: &KernelConfig,
    cfg_z: &KernelConfig,
    alpha: f64,
    shuffles: usize,
    rng: &mut R,
) -> Result<HsicResult> {
    check_test_args(alpha, shuffles)?;
    let pair = CenteredPair::new(y, z, cfg_y, cfg_z)?;
    let hsic = pair.statistic();
    let mut null = pair.null(shuffles, rng);
    let threshold = stats::quantile(&mut null, 1.0 - alpha).expect("non-empty null sample");
    Ok(HsicResult {
        hsic,
        threshold,
        reject_independence: hsic > threshold,
    })
}

/// Q equally long scalar realizations of one source channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationSet {
    realizations: Vec<Vec<f64>>,
    rate: f64,
}

impl RealizationSet {
    pub fn new(realizations: Vec<Vec<f64>>, rate: f64) -> Result<Self> {
        if realizations.len() < 2 {
            return Err(Error::input(format!(
                "need at least 2 realizations, got {}",
                realizations.len()
            )));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::input(format!("rate must be > 0, got {rate}")));
        }
        let len = realizations[0].len();
        if let Some(q) = realizations.iter().position(|r| r.len() != len) {
            return Err(Error::shape(format!(
                "realization {q} has {} samples, expected {len}",
                realizations[q].len()
            )));
        }
        if realizations.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::input("realizations contain non-finite values"));
        }
        Ok(Self { realizations, rate })
    }

    pub fn count(&self) -> usize {
        self.realizations.len()
    }

    /// Samples per realization.
    pub fn len(&self) -> usize {
        self.realizations[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn realizations(&self) -> &[Vec<f64>] {
        &self.realizations
    }

    /// True when every realization holds a single repeated value.
    pub fn is_constant(&self) -> bool {
        self.realizations.iter().all(|r| r.iter().all(|&v| v == r[0]))
    }

    /// `{Y^q(t)}` over all realizations.
    fn slice_at(&self, t: usize) -> SampleSet {
        let v: Vec<f64> = self.realizations.iter().map(|r| r[t]).collect();
        SampleSet::from_scalars(&v).expect("finite, non-empty by construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingSearchConfig {
    pub repetitions: usize,
    /// Upper bound of the random start index, in samples.
    pub t1_max: usize,
    pub alpha: f64,
    /// Largest gap tried. `None` means the longest gap the streams allow,
    /// `len − t1_max`.
    pub max_gap: Option<usize>,
    pub shuffles: usize,
    /// Geometric growth factor for the gap (`> 1`). `None` steps by one
    /// sample.
    pub stride: Option<f64>,
}

impl Default for MixingSearchConfig {
    fn default() -> Self {
        Self {
            repetitions: 20,
            t1_max: 1,
            alpha: 0.05,
            max_gap: None,
            shuffles: DEFAULT_SEARCH_SHUFFLES,
            stride: None,
        }
    }
}

impl MixingSearchConfig {
    /// `t1_max` from a duration at the given sample rate (at least one sample).
    pub fn t1_max_from_seconds(seconds: f64, rate: f64) -> Result<usize> {
        if !(seconds.is_finite() && seconds > 0.0 && rate.is_finite() && rate > 0.0) {
            return Err(Error::input(format!(
                "t1_max of {seconds} s at {rate} Hz is not a positive duration"
            )));
        }
        Ok(((seconds * rate).round() as usize).max(1))
    }

    fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::input("repetitions must be >= 1"));
        }
        if self.t1_max == 0 {
            return Err(Error::input("t1_max must be at least one sample"));
        }
        check_test_args(self.alpha, self.shuffles)?;
        if let Some(s) = self.stride {
            if !(s.is_finite() && s > 1.0) {
                return Err(Error::input(format!("stride factor must be > 1, got {s}")));
            }
        }
        if self.max_gap == Some(0) {
            return Err(Error::input("max_gap must be >= 1"));
        }
        Ok(())
    }

    fn next_gap(&self, t: usize) -> usize {
        match self.stride {
            None => t + 1,
            Some(f) => ((t as f64 * f).ceil() as usize).max(t + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStep {
    pub gap: usize,
    pub cb_plus: f64,
    pub kappa_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingResult {
    /// First gap meeting the stopping rule, or the last gap tried.
    pub t_star: usize,
    pub trace: Vec<GapStep>,
    pub converged: bool,
    pub max_gap: usize,
}

/// Smallest gap `t` at which the `(1 − alpha)`-quantile of `R` HSIC values
/// falls to the mean of their bootstrap thresholds.
///
/// Each repetition draws a start `t₁` uniformly from the first `t1_max`
/// samples and pairs `{Y^q(t₁)}` with `{Y^q(t₁ + t)}`. Repetition `r` at gap
/// `t` uses the substream `(base, t, r)`.
pub fn minimum_independent_gap<R: Rng + ?Sized>(
    data: &RealizationSet,
    cfg: &MixingSearchConfig,
    rng: &mut R,
) -> Result<MixingResult> {
    cfg.validate()?;
    if data.count() < 3 {
        return Err(Error::input(format!(
            "need at least 3 realizations, got {}",
            data.count()
        )));
    }
    if data.len() < cfg.t1_max + 1 {
        return Err(Error::input(format!(
            "streams of {} samples are too short for t1_max = {}",
            data.len(),
            cfg.t1_max
        )));
    }
    if data.is_constant() {
        // every realization constant: HSIC carries no information
        return Err(Error::ConstantStream("realization set".into()));
    }
    let limit = data.len() - cfg.t1_max;
    let max_gap = match cfg.max_gap {
        Some(g) if g > limit => {
            return Err(Error::input(format!(
                "max_gap {g} exceeds stream length minus t1_max ({limit})"
            )))
        }
        Some(g) => g,
        None => limit,
    };

    let base = rng::base_seed(rng);
    let mut trace = Vec::new();
    let mut t = 1;
    loop {
        let reps: Vec<HsicResult> = (0..cfg.repetitions)
            .into_par_iter()
            .map(|r| {
                let mut rep_rng = rng::substream(base, &[t as u64, r as u64]);
                let t1 = rep_rng.random_range(0..cfg.t1_max);
                let y = data.slice_at(t1);
                let z = data.slice_at(t1 + t);
                let (cy, cz) = median_configs(&y, &z)?;
                hsic_test(&y, &z, &cy, &cz, cfg.alpha, cfg.shuffles, &mut rep_rng)
            })
            .collect::<Result<_>>()?;
        let kappa_bar = stats::mean(&reps.iter().map(|h| h.threshold).collect::<Vec<_>>());
        let mut hsics: Vec<f64> = reps.iter().map(|h| h.hsic).collect();
        let cb_plus = stats::quantile(&mut hsics, 1.0 - cfg.alpha).expect("R >= 1");
        trace.push(GapStep { gap: t, cb_plus, kappa_bar });
        if cb_plus <= kappa_bar {
            return Ok(MixingResult { t_star: t, trace, converged: true, max_gap });
        }
        let next = cfg.next_gap(t);
        if next > max_gap {
            return Ok(MixingResult { t_star: t, trace, converged: false, max_gap });
        }
        t = next;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingRow {
    pub source: String,
    pub t_star_samples: usize,
    pub t_star_ms: f64,
    pub converged: bool,
    pub max_gap: usize,
    /// `CB⁺ − κ̄` at the last gap tried; positive when unconverged.
    pub final_margin: f64,
    pub trace: Vec<GapStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub rate: f64,
    pub rows: Vec<MixingRow>,
}

/// One row per source, ordered by source name.
pub fn mixing_report(results: &BTreeMap<String, MixingResult>, rate: f64) -> MixingReport {
    let rows = results
        .iter()
        .map(|(source, res)| {
            let final_margin = res.trace.last().map_or(0.0, |s| s.cb_plus - s.kappa_bar);
            MixingRow {
                source: source.clone(),
                t_star_samples: res.t_star,
                t_star_ms: res.t_star as f64 / rate * 1000.0,
                converged: res.converged,
                max_gap: res.max_gap,
                final_margin,
                trace: res.trace.clone(),
            }
        })
        .collect();
    MixingReport { rate, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::from_seed(seed);
        (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
    }

    fn set(v: &[f64]) -> SampleSet {
        SampleSet::from_scalars(v).unwrap()
    }

    /// `trace(K H L H) / n²` by explicit matrix products.
    fn trace_oracle(k: &[Vec<f64>], l: &[Vec<f64>]) -> f64 {
        let n = k.len();
        let h = |i: usize, j: usize| if i == j { 1.0 - 1.0 / n as f64 } else { -1.0 / n as f64 };
        let mul = |a: &dyn Fn(usize, usize) -> f64, b: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
            (0..n)
                .map(|i| (0..n).map(|j| (0..n).map(|s| a(i, s) * b(s, j)).sum()).collect())
                .collect()
        };
        let kh = mul(&|i, j| k[i][j], &h);
        let khl = mul(&|i, j| kh[i][j], &|i, j| l[i][j]);
        let khlh = mul(&|i, j| khl[i][j], &h);
        (0..n).map(|i| khlh[i][i]).sum::<f64>() / (n * n) as f64
    }

    fn gram_rows(s: &SampleSet, c: &KernelConfig) -> Vec<Vec<f64>> {
        let g = kernels::gram(s, s, c).unwrap();
        (0..s.len()).map(|i| g.row(i).to_vec()).collect()
    }

    #[test]
    fn four_pairs_match_matrix_trace() {
        let y = set(&[0.0, 0.4, 1.3, -0.7]);
        let z = set(&[2.0, 1.1, -0.2, 0.5]);
        let (cy, cz) = (KernelConfig::new(0.8).unwrap(), KernelConfig::new(1.7).unwrap());
        let want = trace_oracle(&gram_rows(&y, &cy), &gram_rows(&z, &cz));
        assert_abs_diff_eq!(hsic_b(&y, &z, &cy, &cz).unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn constant_side_gives_zero() {
        let y = set(&normals(10, 3));
        let z = set(&[4.2; 10]);
        let c = KernelConfig::default();
        assert_abs_diff_eq!(hsic_b(&y, &z, &c, &c).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn size_checks() {
        let c = KernelConfig::default();
        assert!(hsic_b(&set(&[1.0, 2.0, 3.0]), &set(&[1.0, 2.0]), &c, &c).is_err());
        assert!(hsic_b(&set(&[1.0, 2.0]), &set(&[1.0, 2.0]), &c, &c).is_err());
        let mut r = rng::from_seed(0);
        assert!(hsic_threshold(&set(&[1.0, 2.0, 3.0]), &set(&[3.0, 1.0, 2.0]), 0.05, 99, &mut r).is_err());
    }

    #[test]
    fn perfect_dependence_is_detected() {
        let v = normals(100, 11);
        let (y, z) = (set(&v), set(&v));
        let (cy, cz) = median_configs(&y, &z).unwrap();
        let res = hsic_test(&y, &z, &cy, &cz, 0.05, 200, &mut rng::from_seed(5)).unwrap();
        assert!(res.reject_independence, "{res:?}");
    }

    #[test]
    fn threshold_limits() {
        let y = set(&normals(20, 1));
        let z = set(&normals(20, 2));
        let (cy, cz) = median_configs(&y, &z).unwrap();
        let pair = CenteredPair::new(&y, &z, &cy, &cz).unwrap();
        let null = pair.null(150, &mut rng::from_seed(9));
        let min = null.iter().cloned().fold(f64::INFINITY, f64::min);
        let near_one = hsic_test(&y, &z, &cy, &cz, 1.0 - 1e-12, 150, &mut rng::from_seed(9)).unwrap();
        assert_abs_diff_eq!(near_one.threshold, min, epsilon = 1e-12);

        // a constant side makes every shuffled statistic zero
        let flat = set(&[1.5; 20]);
        let c = KernelConfig::default();
        let res = hsic_test(&y, &flat, &c, &c, 0.05, 100, &mut rng::from_seed(1)).unwrap();
        assert_eq!(res.threshold, 0.0);
    }

    #[test]
    fn identity_permutation_reproduces_statistic() {
        let y = set(&normals(12, 4));
        let z = set(&normals(12, 5));
        let c = KernelConfig::default();
        let pair = CenteredPair::new(&y, &z, &c, &c).unwrap();
        let id: Vec<usize> = (0..12).collect();
        assert_abs_diff_eq!(pair.permuted(&id), pair.statistic(), epsilon = 1e-15);
    }

    fn white(q: usize, len: usize, seed: u64) -> RealizationSet {
        let mut r = rng::from_seed(seed);
        let reals = (0..q)
            .map(|_| (0..len).map(|_| StandardNormal.sample(&mut r)).collect())
            .collect();
        RealizationSet::new(reals, 1000.0).unwrap()
    }

    #[test]
    fn search_argument_checks() {
        let cfg = MixingSearchConfig { t1_max: 5, ..Default::default() };
        let mut r = rng::from_seed(0);
        assert!(minimum_independent_gap(&white(2, 50, 1), &cfg, &mut r).is_err());
        assert!(minimum_independent_gap(&white(10, 5, 1), &cfg, &mut r).is_err());
        let too_far = MixingSearchConfig { max_gap: Some(46), ..cfg };
        assert!(minimum_independent_gap(&white(10, 50, 1), &too_far, &mut r).is_err());
        let flat = RealizationSet::new(vec![vec![0.0; 30]; 5], 100.0).unwrap();
        assert!(matches!(
            minimum_independent_gap(&flat, &cfg, &mut r),
            Err(Error::ConstantStream(_))
        ));
        assert!(RealizationSet::new(vec![vec![0.0; 3], vec![0.0; 4]], 1.0).is_err());
    }

    #[test]
    fn unconverged_search_stops_at_max_gap() {
        // identical realizations shifted by one: Z is a deterministic function of Y
        let base: Vec<f64> = normals(60, 8);
        let reals: Vec<Vec<f64>> = (0..40).map(|q| base.iter().map(|v| v + q as f64).collect()).collect();
        let data = RealizationSet::new(reals, 100.0).unwrap();
        let cfg = MixingSearchConfig { t1_max: 10, max_gap: Some(4), repetitions: 5, ..Default::default() };
        let res = minimum_independent_gap(&data, &cfg, &mut rng::from_seed(2)).unwrap();
        assert!(!res.converged);
        assert_eq!(res.t_star, 4);
        let gaps: Vec<usize> = res.trace.iter().map(|s| s.gap).collect();
        assert_eq!(gaps, vec![1, 2, 3, 4]);
        assert!(res.trace.iter().all(|s| s.cb_plus > s.kappa_bar));
    }

    #[test]
    fn stride_grows_geometrically() {
        let cfg = MixingSearchConfig { stride: Some(1.5), ..Default::default() };
        let mut t = 1;
        let mut seen = vec![t];
        for _ in 0..6 {
            t = cfg.next_gap(t);
            seen.push(t);
        }
        assert_eq!(seen, vec![1, 2, 3, 5, 8, 12, 18]);
    }

    #[test]
    fn search_is_seed_deterministic() {
        let data = white(30, 80, 4);
        let cfg = MixingSearchConfig { t1_max: 20, repetitions: 6, ..Default::default() };
        let a = minimum_independent_gap(&data, &cfg, &mut rng::from_seed(77)).unwrap();
        let b = minimum_independent_gap(&data, &cfg, &mut rng::from_seed(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_rows() {
        let step = GapStep { gap: 50, cb_plus: 0.001, kappa_bar: 0.002 };
        let ok = MixingResult { t_star: 50, trace: vec![step], converged: true, max_gap: 900 };
        let bad_step = GapStep { gap: 3, cb_plus: 0.5, kappa_bar: 0.2 };
        let bad = MixingResult { t_star: 3, trace: vec![bad_step], converged: false, max_gap: 3 };
        let mut m = BTreeMap::new();
        m.insert("z_audio".to_string(), bad);
        m.insert("accel".to_string(), ok);
        let rep = mixing_report(&m, 10_000.0);
        assert_eq!(rep.rows[0].source, "accel");
        assert_abs_diff_eq!(rep.rows[0].t_star_ms, 5.0, epsilon = 1e-12);
        assert!(!rep.rows[1].converged);
        assert_eq!(rep.rows[1].max_gap, 3);
        assert_abs_diff_eq!(rep.rows[1].final_margin, 0.3, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symmetric_translation_invariant_nonnegative(
            y in prop::collection::vec(-5.0f64..5.0, 3..12),
            seed in any::<u64>(),
            shift in -100.0f64..100.0,
            sy in 0.2f64..3.0,
            sz in 0.2f64..3.0,
        ) {
            let n = y.len();
            let z = normals(n, seed);
            let (ys, zs) = (set(&y), set(&z));
            let (cy, cz) = (KernelConfig::new(sy).unwrap(), KernelConfig::new(sz).unwrap());
            let h = hsic_b(&ys, &zs, &cy, &cz).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert!((h - hsic_b(&zs, &ys, &cz, &cy).unwrap()).abs() <= 1e-12);
            let moved = ys.translated(&[shift]);
            prop_assert!((h - hsic_b(&moved, &zs, &cy, &cz).unwrap()).abs() <= 1e-12);
        }
    }
}
