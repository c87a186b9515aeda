//! Per-source discrepancies, their weighted geometric-mean fusion, the
//! nearest-neighbor decision and evaluation metrics.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::DEFAULT_SUBSET_SIZE;
use crate::mmd::{self, RepetitionOptions};
use crate::rng;
use crate::sampling::{self, DataStream, PreparedStream, SamplingSpec, Strategy};
use crate::stats;

/// Floor applied to raw squared-MMD values before taking logarithms.
pub const MMD_FLOOR: f64 = 1e-12;

/// One recorded interaction: named streams plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub id: String,
    /// Absent for unlabeled test trials.
    pub class: Option<String>,
    pub user: Option<String>,
    pub sources: BTreeMap<String, DataStream>,
}

impl Trial {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            class: None,
            user: None,
            sources: BTreeMap::new(),
        }
    }

    pub fn with_class(mut self, class: impl Into<String>) -> Self {
        self.class = Some(class.into());
        self
    }

    pub fn with_user(mut self, user: impl Into<String>) -> Self {
        self.user = Some(user.into());
        self
    }

    pub fn with_source(mut self, name: impl Into<String>, stream: DataStream) -> Self {
        self.sources.insert(name.into(), stream);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryClass {
    pub name: String,
    pub category: Option<String>,
    pub trials: Vec<Trial>,
}

/// Labeled reference trials grouped by class, in a fixed class order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassLibrary {
    classes: Vec<LibraryClass>,
}

impl ClassLibrary {
    pub fn new(classes: Vec<LibraryClass>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::input("library has no classes"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &classes {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::input(format!("duplicate library class `{}`", c.name)));
            }
            if c.trials.is_empty() {
                return Err(Error::input(format!("library class `{}` has no trials", c.name)));
            }
        }
        Ok(Self { classes })
    }

    /// Groups labeled trials by class, keeping first-appearance order.
    pub fn from_trials(trials: Vec<Trial>) -> Result<Self> {
        let mut classes: Vec<LibraryClass> = Vec::new();
        for t in trials {
            let name = t
                .class
                .clone()
                .ok_or_else(|| Error::input(format!("library trial `{}` has no class label", t.id)))?;
            match classes.iter_mut().find(|c| c.name == name) {
                Some(c) => c.trials.push(t),
                None => classes.push(LibraryClass {
                    name,
                    category: None,
                    trials: vec![t],
                }),
            }
        }
        Self::new(classes)
    }

    pub fn classes(&self) -> &[LibraryClass] {
        &self.classes
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    pub fn trial_count(&self) -> usize {
        self.classes.iter().map(|c| c.trials.len()).sum()
    }

    /// `(class index, trial index within class, trial)` in library order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &Trial)> + '_ {
        self.classes
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| c.trials.iter().enumerate().map(move |(ti, t)| (ci, ti, t)))
    }
}

/// How one information source is sampled and fused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceConfig {
    pub name: String,
    pub sampling: SamplingSpec,
    /// Move test-side samples onto the library-side mean before testing.
    pub cross_user: bool,
    pub weight: f64,
    /// Add one to the averaged MMD (binary-valued sources).
    pub metal_shift: bool,
    /// Length scale used when the median heuristic degenerates.
    pub fallback_lengthscale: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            name: String::new(),
            sampling: SamplingSpec::default(),
            cross_user: false,
            weight: 1.0,
            metal_shift: false,
            fallback_lengthscale: 1.0,
        }
    }
}

impl SourceConfig {
    pub fn new(name: impl Into<String>, sampling: SamplingSpec) -> Self {
        Self {
            name: name.into(),
            sampling,
            ..Self::default()
        }
    }

    pub fn cross_user(mut self, on: bool) -> Self {
        self.cross_user = on;
        self
    }

    pub fn weight(mut self, w: f64) -> Self {
        self.weight = w;
        self
    }

    pub fn metal_shift(mut self, on: bool) -> Self {
        self.metal_shift = on;
        self
    }
}

/// Switches that remove one function block of the pipeline each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablations {
    /// Keep images in RGB.
    pub no_hsv: bool,
    /// Sample spectral sources equidistantly in time instead.
    pub no_dft: bool,
    pub no_cross_user: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingSourcePolicy {
    #[default]
    Error,
    /// Drop the source from that comparison and rescale the remaining
    /// weights to the configured total.
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub sources: Vec<SourceConfig>,
    pub repetitions: usize,
    pub k: usize,
    pub ablations: Ablations,
    pub missing: MissingSourcePolicy,
    pub subset_size: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sources: Vec::new(),
            repetitions: 10,
            k: 1,
            ablations: Ablations::default(),
            missing: MissingSourcePolicy::Error,
            subset_size: DEFAULT_SUBSET_SIZE,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::Config("no information sources selected".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for s in &self.sources {
            if !names.insert(s.name.as_str()) {
                return Err(Error::Config(format!("source `{}` configured twice", s.name)));
            }
            if !(s.weight.is_finite() && s.weight > 0.0) {
                return Err(Error::Config(format!("source `{}` needs a weight > 0, got {}", s.name, s.weight)));
            }
            if !(s.fallback_lengthscale.is_finite() && s.fallback_lengthscale > 0.0) {
                return Err(Error::Config(format!("source `{}` needs a fallback length scale > 0", s.name)));
            }
            s.sampling
                .validate()
                .map_err(|e| Error::Config(format!("source `{}`: {e}", s.name)))?;
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if self.subset_size < 2 {
            return Err(Error::Config("median-heuristic subset needs >= 2 samples".into()));
        }
        Ok(())
    }

    /// Source settings after the ablation switches are applied.
    pub fn effective_sources(&self) -> Vec<SourceConfig> {
        self.sources
            .iter()
            .map(|s| {
                let mut s = s.clone();
                if self.ablations.no_hsv {
                    s.sampling.hsv = false;
                }
                if self.ablations.no_dft && s.sampling.strategy == Strategy::RandomSpectral {
                    s.sampling.strategy = Strategy::EquidistantTemporal;
                }
                if self.ablations.no_cross_user {
                    s.cross_user = false;
                }
                s
            })
            .collect()
    }

    fn repetition_options(&self, source: &SourceConfig) -> RepetitionOptions {
        RepetitionOptions {
            repetitions: self.repetitions,
            cross_user: source.cross_user,
            subset_size: self.subset_size,
            fallback_lengthscale: source.fallback_lengthscale,
        }
    }
}

/// Fused score of one trial comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyScore {
    pub value: f64,
    /// Averaged squared MMD per source, after flooring and metal shift.
    pub per_source: BTreeMap<String, f64>,
}

impl DiscrepancyScore {
    /// `exp(Σ w_s ln v_s)`. Sources missing from `weights` get weight 1.
    pub fn fuse(per_source: BTreeMap<String, f64>, weights: &BTreeMap<String, f64>) -> Result<Self> {
        if per_source.is_empty() {
            return Err(Error::input("no per-source values to fuse"));
        }
        let mut log = 0.0;
        for (name, &v) in &per_source {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Internal(format!("source `{name}` discrepancy {v} is not positive")));
            }
            log += weights.get(name).copied().unwrap_or(1.0) * v.ln();
        }
        Ok(Self {
            value: log.exp(),
            per_source,
        })
    }
}

fn finish_source(raw: f64, source: &SourceConfig) -> f64 {
    if source.metal_shift {
        raw.max(0.0) + 1.0
    } else {
        raw.max(MMD_FLOOR)
    }
}

fn lookup<'a>(trial: &'a Trial, source: &str) -> Result<&'a DataStream> {
    trial
        .sources
        .get(source)
        .ok_or_else(|| Error::input(format!("trial `{}` has no source `{source}`", trial.id)))
}

/// Averaged squared MMD of one source between a library trial `y` and a
/// test trial `z`, floored at [`MMD_FLOOR`] (or shifted by one for metal
/// sources).
pub fn source_discrepancy<R: Rng + ?Sized>(
    y: &Trial,
    z: &Trial,
    source: &str,
    cfg: &PipelineConfig,
    rng: &mut R,
) -> Result<f64> {
    cfg.validate()?;
    let sources = cfg.effective_sources();
    let sc = sources
        .iter()
        .find(|s| s.name == source)
        .ok_or_else(|| Error::Config(format!("source `{source}` is not configured")))?;
    let (ys, zs) = (lookup(y, source)?, lookup(z, source)?);
    let spec = resolve_spec(sc, [ys, zs].into_iter());
    let raw = mmd::averaged_mmd(ys, zs, &spec, &cfg.repetition_options(sc), rng)?;
    Ok(finish_source(raw, sc))
}

/// Fixes a shared spectral length when recordings differ in length, so all
/// spectra of a source live on one bin grid.
fn resolve_spec<'a>(source: &SourceConfig, streams: impl Iterator<Item = &'a DataStream>) -> SamplingSpec {
    let mut spec = source.sampling.clone();
    if spec.strategy == Strategy::RandomSpectral && spec.spectral_length.is_none() {
        let lens: Vec<usize> = streams.map(|s| s.point_count()).collect();
        if let (Some(&min), Some(&max)) = (lens.iter().min(), lens.iter().max()) {
            if min != max {
                spec.spectral_length = Some(min);
            }
        }
    }
    spec
}

/// A trial with every configured source transformed once (HSV, DFT).
struct PreparedTrial {
    streams: Vec<Option<PreparedStream>>,
}

struct Prepared {
    sources: Vec<SourceConfig>,
    specs: Vec<SamplingSpec>,
    weights: BTreeMap<String, f64>,
    library: Vec<PreparedTrial>,
    /// `(class index, trial index)` per prepared library trial.
    index: Vec<(usize, usize)>,
}

fn prepare_trial(t: &Trial, specs: &[SamplingSpec], sources: &[SourceConfig], policy: MissingSourcePolicy) -> Result<PreparedTrial> {
    let streams = sources
        .iter()
        .zip(specs)
        .map(|(sc, spec)| match t.sources.get(&sc.name) {
            Some(stream) => sampling::prepare(stream, spec)
                .map(Some)
                .map_err(|e| Error::input(format!("trial `{}`, source `{}`: {e}", t.id, sc.name))),
            None if policy == MissingSourcePolicy::Skip => Ok(None),
            None => Err(Error::input(format!("trial `{}` has no source `{}`", t.id, sc.name))),
        })
        .collect::<Result<_>>()?;
    Ok(PreparedTrial { streams })
}

fn prepare_library<'a>(library: &'a ClassLibrary, tests: impl Iterator<Item = &'a Trial> + Clone, cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.validate()?;
    let sources = cfg.effective_sources();
    let specs: Vec<SamplingSpec> = sources
        .iter()
        .map(|sc| {
            let streams = library
                .iter()
                .map(|(_, _, t)| t)
                .chain(tests.clone())
                .filter_map(|t| t.sources.get(&sc.name));
            resolve_spec(sc, streams)
        })
        .collect();
    let weights = sources.iter().map(|s| (s.name.clone(), s.weight)).collect();
    let mut prepared = Vec::with_capacity(library.trial_count());
    let mut index = Vec::with_capacity(library.trial_count());
    for (ci, ti, t) in library.iter() {
        prepared.push(prepare_trial(t, &specs, &sources, cfg.missing)?);
        index.push((ci, ti));
    }
    Ok(Prepared {
        sources,
        specs,
        weights,
        library: prepared,
        index,
    })
}

impl Prepared {
    /// Per-source values for one (library, test) cell; `None` where a
    /// source is missing on either side.
    fn cell(&self, lib: usize, z: &PreparedTrial, test_idx: u64, base: u64, cfg: &PipelineConfig) -> Result<Vec<Option<f64>>> {
        let y = &self.library[lib];
        (0..self.sources.len())
            .map(|s| match (&y.streams[s], &z.streams[s]) {
                (Some(ys), Some(zs)) => {
                    let sc = &self.sources[s];
                    let mut cell_rng = rng::substream(base, &[test_idx, lib as u64, s as u64]);
                    let raw = mmd::averaged_mmd_prepared(ys, zs, &self.specs[s], &cfg.repetition_options(sc), &mut cell_rng)
                        .map_err(|e| Error::input(format!("source `{}`: {e}", sc.name)))?;
                    Ok(Some(finish_source(raw, sc)))
                }
                _ => Ok(None),
            })
            .collect()
    }

    fn score(&self, values: &[Option<f64>]) -> Result<DiscrepancyScore> {
        let total: f64 = self.sources.iter().map(|s| s.weight).sum();
        let present: f64 = self
            .sources
            .iter()
            .zip(values)
            .filter(|(_, v)| v.is_some())
            .map(|(s, _)| s.weight)
            .sum();
        if present == 0.0 {
            return Err(Error::input("no configured source is present in both trials"));
        }
        let per_source = self
            .sources
            .iter()
            .zip(values)
            .filter_map(|(s, v)| v.map(|v| (s.name.clone(), v)))
            .collect();
        let weights = self
            .weights
            .iter()
            .map(|(k, w)| (k.clone(), w * total / present))
            .collect();
        DiscrepancyScore::fuse(per_source, &weights)
    }

    fn classify(&self, library: &ClassLibrary, z: &PreparedTrial, test_idx: u64, base: u64, cfg: &PipelineConfig) -> Result<(Classification, Vec<Vec<Option<f64>>>)> {
        let cells: Vec<Vec<Option<f64>>> = (0..self.library.len())
            .into_par_iter()
            .map(|lib| self.cell(lib, z, test_idx, base, cfg))
            .collect::<Result<_>>()?;
        let mut ranking = Vec::with_capacity(cells.len());
        for (lib, values) in cells.iter().enumerate() {
            let (ci, ti) = self.index[lib];
            let class = &library.classes[ci];
            ranking.push(RankedCandidate {
                class: class.name.clone(),
                class_index: ci,
                trial_index: ti,
                trial_id: class.trials[ti].id.clone(),
                score: self.score(values)?,
            });
        }
        rank(&mut ranking);
        let predicted = vote(&ranking, cfg.k).to_string();
        Ok((Classification { predicted, ranking }, cells))
    }
}

/// Fuses per-source values across all configured sources.
pub fn discrepancy_score<R: Rng + ?Sized>(y: &Trial, z: &Trial, cfg: &PipelineConfig, rng: &mut R) -> Result<DiscrepancyScore> {
    cfg.validate()?;
    let base = rng::base_seed(rng);
    let mut per_source = BTreeMap::new();
    let sources = cfg.effective_sources();
    let mut weights = BTreeMap::new();
    let total: f64 = sources.iter().map(|s| s.weight).sum();
    for (i, sc) in sources.iter().enumerate() {
        let (ys, zs) = match (y.sources.get(&sc.name), z.sources.get(&sc.name)) {
            (Some(a), Some(b)) => (a, b),
            _ if cfg.missing == MissingSourcePolicy::Skip => continue,
            _ => {
                lookup(y, &sc.name)?;
                lookup(z, &sc.name)?;
                unreachable!("lookup fails for the missing side")
            }
        };
        let spec = resolve_spec(sc, [ys, zs].into_iter());
        let mut cell_rng = rng::substream(base, &[0, 0, i as u64]);
        let raw = mmd::averaged_mmd(ys, zs, &spec, &cfg.repetition_options(sc), &mut cell_rng)?;
        per_source.insert(sc.name.clone(), finish_source(raw, sc));
        weights.insert(sc.name.clone(), sc.weight);
    }
    let present: f64 = weights.values().sum();
    if present == 0.0 {
        return Err(Error::input("no configured source is present in both trials"));
    }
    weights.values_mut().for_each(|w| *w *= total / present);
    DiscrepancyScore::fuse(per_source, &weights)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub class: String,
    pub class_index: usize,
    pub trial_index: usize,
    pub trial_id: String,
    pub score: DiscrepancyScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub predicted: String,
    /// Every library trial, most similar first.
    pub ranking: Vec<RankedCandidate>,
}

/// Sorts by score, breaking exact ties by library position.
pub fn rank(candidates: &mut [RankedCandidate]) {
    candidates.sort_by(|a, b| {
        a.score
            .value
            .total_cmp(&b.score.value)
            .then(a.class_index.cmp(&b.class_index))
            .then(a.trial_index.cmp(&b.trial_index))
    });
}

/// Plurality vote over the first `k` ranked candidates; a tie goes to the
/// class whose best candidate ranks first.
pub fn vote(ranking: &[RankedCandidate], k: usize) -> &str {
    let top = &ranking[..k.clamp(1, ranking.len())];
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for c in top {
        match counts.iter_mut().find(|(name, _)| *name == c.class) {
            Some((_, n)) => *n += 1,
            None => counts.push((&c.class, 1)),
        }
    }
    // `counts` is in order of first appearance, so `max_by_key` returning the
    // last maximum would be wrong; take the first.
    let best = counts.iter().map(|(_, n)| *n).max().unwrap_or(0);
    counts.iter().find(|(_, n)| *n == best).map(|(name, _)| *name).unwrap_or(&ranking[0].class)
}

/// Ranks every library trial against `z` and votes over the `cfg.k` nearest.
pub fn classify_trial<R: Rng + ?Sized>(z: &Trial, library: &ClassLibrary, cfg: &PipelineConfig, rng: &mut R) -> Result<Classification> {
    let prepared = prepare_library(library, std::iter::once(z), cfg)?;
    let zp = prepare_trial(z, &prepared.specs, &prepared.sources, cfg.missing)?;
    let base = rng::base_seed(rng);
    Ok(prepared.classify(library, &zp, 0, base, cfg)?.0)
}

// ---------------------------------------------------------------------------
// evaluation

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub test_id: String,
    pub actual: String,
    pub predicted: String,
    pub fold: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `(TP + TN) / (TP + TN + FP + FN)`.
    pub accuracy: f64,
    /// `TP / (TP + FP)`; absent when the class was never predicted.
    pub precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: String,
    pub count: usize,
    pub correct: usize,
    /// Fraction of the fold's trials classified correctly.
    pub accuracy: f64,
    /// Mean over library classes of the per-class accuracy within the fold.
    pub class_mean_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classes: Vec<String>,
    pub total: usize,
    pub correct: usize,
    /// Mean and spread of per-fold accuracy.
    pub accuracy: MeanStd,
    pub class_mean_accuracy: MeanStd,
    /// Mean of the defined class precisions.
    pub macro_precision: Option<f64>,
    pub per_class: Vec<ClassMetrics>,
    pub folds: Vec<FoldMetrics>,
    /// `confusion[actual][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl EvaluationReport {
    pub fn micro_accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }

    /// Confusion matrix as CSV: a header of predicted labels, one row per
    /// actual class.
    pub fn confusion_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["actual\\predicted".to_string()];
        header.extend(self.classes.iter().cloned());
        let to_err = |e: csv::Error| Error::Internal(format!("CSV encoding failed: {e}"));
        w.write_record(&header).map_err(to_err)?;
        for (name, row) in self.classes.iter().zip(&self.confusion) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec).map_err(to_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Internal(format!("CSV encoding failed: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
    }
}

fn confusion_counts(preds: &[&Prediction], index: &BTreeMap<&str, usize>, c: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0usize; c]; c];
    for p in preds {
        m[index[p.actual.as_str()]][index[p.predicted.as_str()]] += 1;
    }
    m
}

/// Per-class accuracy from a confusion matrix.
fn class_accuracies(m: &[Vec<usize>]) -> Vec<f64> {
    let total: usize = m.iter().flatten().sum();
    (0..m.len())
        .map(|c| {
            let tp = m[c][c];
            let fn_: usize = m[c].iter().sum::<usize>() - tp;
            let fp: usize = m.iter().map(|row| row[c]).sum::<usize>() - tp;
            let tn = total - tp - fn_ - fp;
            (tp + tn) as f64 / total as f64
        })
        .collect()
}

/// Metrics over labeled predictions. Folds appear in order of first
/// occurrence.
pub fn evaluate(predictions: &[Prediction], classes: &[String]) -> Result<EvaluationReport> {
    if predictions.is_empty() {
        return Err(Error::input("no predictions to evaluate"));
    }
    let index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    if index.len() != classes.len() {
        return Err(Error::input("class labels are not unique"));
    }
    for p in predictions {
        for label in [&p.actual, &p.predicted] {
            if !index.contains_key(label.as_str()) {
                return Err(Error::input(format!("prediction for `{}` uses unknown class `{label}`", p.test_id)));
            }
        }
    }
    let c = classes.len();
    let all: Vec<&Prediction> = predictions.iter().collect();
    let confusion = confusion_counts(&all, &index, c);
    let total = predictions.len();
    let correct = (0..c).map(|i| confusion[i][i]).sum();

    let accs = class_accuracies(&confusion);
    let per_class: Vec<ClassMetrics> = (0..c)
        .map(|i| {
            let tp = confusion[i][i];
            let fn_ = confusion[i].iter().sum::<usize>() - tp;
            let fp = confusion.iter().map(|row| row[i]).sum::<usize>() - tp;
            ClassMetrics {
                class: classes[i].clone(),
                tp,
                tn: total - tp - fn_ - fp,
                fp,
                fn_,
                accuracy: accs[i],
                precision: (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64),
            }
        })
        .collect();
    let defined: Vec<f64> = per_class.iter().filter_map(|m| m.precision).collect();
    let macro_precision = (!defined.is_empty()).then(|| stats::mean(&defined));

    let mut fold_names: Vec<&str> = Vec::new();
    for p in predictions {
        if !fold_names.contains(&p.fold.as_str()) {
            fold_names.push(&p.fold);
        }
    }
    let folds: Vec<FoldMetrics> = fold_names
        .iter()
        .map(|&f| {
            let members: Vec<&Prediction> = predictions.iter().filter(|p| p.fold == f).collect();
            let m = confusion_counts(&members, &index, c);
            let correct = members.iter().filter(|p| p.actual == p.predicted).count();
            FoldMetrics {
                fold: f.to_string(),
                count: members.len(),
                correct,
                accuracy: correct as f64 / members.len() as f64,
                class_mean_accuracy: stats::mean(&class_accuracies(&m)),
            }
        })
        .collect();
    let summary = |xs: Vec<f64>| MeanStd {
        mean: stats::mean(&xs),
        std: stats::std_dev(&xs),
    };
    Ok(EvaluationReport {
        classes: classes.to_vec(),
        total,
        correct,
        accuracy: summary(folds.iter().map(|f| f.accuracy).collect()),
        class_mean_accuracy: summary(folds.iter().map(|f| f.class_mean_accuracy).collect()),
        macro_precision,
        per_class,
        folds,
        confusion,
    })
}

// ---------------------------------------------------------------------------
// benchmark

/// Every per-source value computed during a benchmark run, indexed
/// `values[test][library][source]` (`None` for skipped sources).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsCache {
    pub sources: Vec<String>,
    pub weights: Vec<f64>,
    pub test_ids: Vec<String>,
    pub library_ids: Vec<String>,
    pub values: Vec<Vec<Vec<Option<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOutcome {
    pub report: EvaluationReport,
    pub predictions: Vec<Prediction>,
    pub cache: DsCache,
}

/// Classifies every test trial against the library and evaluates with one
/// fold per user. Cell `(test i, library j, source s)` draws from the
/// substream `(cfg.seed, i, j, s)`.
pub fn run_benchmark(library: &ClassLibrary, tests: &[Trial], cfg: &PipelineConfig) -> Result<BenchmarkOutcome> {
    if tests.is_empty() {
        return Err(Error::input("no test trials"));
    }
    let prepared = prepare_library(library, tests.iter(), cfg)?;
    let mut predictions = Vec::with_capacity(tests.len());
    let mut values = Vec::with_capacity(tests.len());
    for (i, t) in tests.iter().enumerate() {
        let actual = t
            .class
            .clone()
            .ok_or_else(|| Error::input(format!("test trial `{}` has no ground-truth class", t.id)))?;
        let zp = prepare_trial(t, &prepared.specs, &prepared.sources, cfg.missing)?;
        let (cls, cells) = prepared.classify(library, &zp, i as u64, cfg.seed, cfg)?;
        predictions.push(Prediction {
            test_id: t.id.clone(),
            actual,
            predicted: cls.predicted,
            fold: t.user.clone().unwrap_or_else(|| "all".to_string()),
        });
        values.push(cells);
    }
    let report = evaluate(&predictions, &library.class_names())?;
    let cache = DsCache {
        sources: prepared.sources.iter().map(|s| s.name.clone()).collect(),
        weights: prepared.sources.iter().map(|s| s.weight).collect(),
        test_ids: tests.iter().map(|t| t.id.clone()).collect(),
        library_ids: library.iter().map(|(_, _, t)| t.id.clone()).collect(),
        values,
    };
    Ok(BenchmarkOutcome {
        report,
        predictions,
        cache,
    })
}
