//! On-disk datasets described by a TOML manifest, plus validation and the
//! synthetic generator.
//!
//! A manifest names every information source, the file pattern of its
//! streams, the classes and the splits. Each stream file is located by
//! substituting `{split}`, `{class}`, `{category}`, `{trial}` and `{user}`
//! into the source pattern. See `docs/manifest.md` for the full schema.

mod synthetic;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use synthetic::{generate_synthetic, ImageGen, SpectralGen, SyntheticDataset, SyntheticSpec, TemporalGen};

use crate::classifier::{ClassLibrary, LibraryClass, PipelineConfig, SourceConfig, Trial};
use crate::error::{Error, Result};
use crate::sampling::{DataStream, GridPlan, Image, SamplingSpec, Strategy, StreamKind, TemporalPlan, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    Png,
    Jpeg,
    Bmp,
    /// One column per channel, one row per sample; a non-numeric first row
    /// is treated as a header.
    Csv,
    /// Raw little-endian `f64`, channels interleaved per sample.
    F64le,
}

impl FileFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        Some(match ext.as_str() {
            "png" => FileFormat::Png,
            "jpg" | "jpeg" => FileFormat::Jpeg,
            "bmp" => FileFormat::Bmp,
            "csv" | "txt" => FileFormat::Csv,
            "f64" | "bin" | "raw" => FileFormat::F64le,
            _ => return None,
        })
    }

    pub fn is_image(self) -> bool {
        matches!(self, FileFormat::Png | FileFormat::Jpeg | FileFormat::Bmp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDescriptor {
    pub name: String,
    pub kind: StreamKind,
    pub format: FileFormat,
    pub pattern: String,
    pub channels: usize,
    /// Samples per second; required for time series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    /// Maximum image value; defaults to 255.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// Inclusive bounds every value must respect.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    /// Sampling strategy; defaults by kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingSpec>,
    #[serde(default)]
    pub cross_user: bool,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub metal_shift: bool,
}

fn one() -> f64 {
    1.0
}

impl SourceDescriptor {
    /// Pipeline settings for this source.
    pub fn source_config(&self) -> SourceConfig {
        let sampling = self.sampling.clone().unwrap_or_else(|| match self.kind {
            StreamKind::Image => SamplingSpec::spatial(400, (17, 18)),
            StreamKind::TimeSeries => SamplingSpec::temporal(400, crate::sampling::TemporalGap::Cover),
        });
        SourceConfig::new(&self.name, sampling)
            .cross_user(self.cross_user)
            .weight(self.weight)
            .metal_shift(self.metal_shift)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRole {
    Library,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitDescriptor {
    pub name: String,
    pub role: SplitRole,
    /// Trials per class.
    pub trials: usize,
    /// Trial `t` belongs to `users[t % users.len()]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub users: Vec<String>,
    /// Number substituted for the first trial's `{trial}`.
    #[serde(default)]
    pub first_trial: usize,
}

impl SplitDescriptor {
    fn user(&self, t: usize) -> Option<&str> {
        (!self.users.is_empty()).then(|| self.users[t % self.users.len()].as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(default)]
    pub name: String,
    /// Directory of the stream files. Relative paths are resolved against
    /// the manifest's directory when loaded from a file.
    #[serde(default = "dot")]
    pub root: PathBuf,
    pub sources: Vec<SourceDescriptor>,
    pub classes: Vec<ClassEntry>,
    pub splits: Vec<SplitDescriptor>,
}

fn dot() -> PathBuf {
    PathBuf::from(".")
}

/// One stream file location with the labels it was derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Slot<'a> {
    split: &'a SplitDescriptor,
    class: &'a ClassEntry,
    trial: usize,
}

impl Slot<'_> {
    fn trial_id(&self) -> String {
        format!("{}/{}/{}", self.split.name, self.class.name, self.split.first_trial + self.trial)
    }

    fn path(&self, root: &Path, pattern: &str) -> PathBuf {
        let p = pattern
            .replace("{split}", &self.split.name)
            .replace("{class}", &self.class.name)
            .replace("{category}", self.class.category.as_deref().unwrap_or(""))
            .replace("{trial}", &(self.split.first_trial + self.trial).to_string())
            .replace("{user}", self.split.user(self.trial).unwrap_or(""));
        root.join(p)
    }
}

impl DatasetManifest {
    /// Reads and validates a manifest file; `root` becomes absolute.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: DatasetManifest = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        if m.root.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            m.root = base.join(&m.root);
        }
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Internal(format!("manifest serialization failed: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.sources.is_empty() {
            return bad("manifest declares no sources".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for s in &self.sources {
            if !names.insert(&s.name) {
                return bad(format!("source `{}` declared twice", s.name));
            }
            if s.channels == 0 {
                return bad(format!("source `{}` needs at least one channel", s.name));
            }
            match s.kind {
                StreamKind::Image if !s.format.is_image() => {
                    return bad(format!("image source `{}` cannot use {:?} files", s.name, s.format))
                }
                StreamKind::TimeSeries if s.format.is_image() => {
                    return bad(format!("time-series source `{}` cannot use {:?} files", s.name, s.format))
                }
                StreamKind::Image if !matches!(s.channels, 1 | 3) => {
                    return bad(format!("image source `{}` must have 1 or 3 channels", s.name))
                }
                StreamKind::TimeSeries => match s.rate {
                    Some(r) if r.is_finite() && r > 0.0 => {}
                    _ => return bad(format!("time-series source `{}` needs a rate > 0", s.name)),
                },
                _ => {}
            }
            if let Some(scale) = s.scale {
                if !(scale.is_finite() && scale > 0.0) {
                    return bad(format!("source `{}` scale must be > 0", s.name));
                }
            }
            if let Some([lo, hi]) = s.range {
                if !(lo <= hi) {
                    return bad(format!("source `{}` has an empty value range", s.name));
                }
            }
            if !(s.weight.is_finite() && s.weight > 0.0) {
                return bad(format!("source `{}` weight must be > 0", s.name));
            }
        }
        if self.classes.is_empty() {
            return bad("manifest declares no classes".into());
        }
        let mut classes = std::collections::BTreeSet::new();
        for c in &self.classes {
            if !classes.insert(&c.name) {
                return bad(format!("class `{}` declared twice", c.name));
            }
        }
        let mut libs = 0;
        let mut splits = std::collections::BTreeSet::new();
        for sp in &self.splits {
            if !splits.insert(&sp.name) {
                return bad(format!("split `{}` declared twice", sp.name));
            }
            if sp.trials == 0 {
                return bad(format!("split `{}` needs at least one trial per class", sp.name));
            }
            libs += usize::from(sp.role == SplitRole::Library);
        }
        if libs != 1 {
            return bad(format!("manifest needs exactly one library split, found {libs}"));
        }
        Ok(())
    }

    /// Pipeline settings of every declared source, in declaration order.
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            sources: self.sources.iter().map(SourceDescriptor::source_config).collect(),
            ..PipelineConfig::default()
        }
    }

    fn slots(&self) -> impl Iterator<Item = Slot<'_>> + '_ {
        self.splits.iter().flat_map(move |split| {
            self.classes
                .iter()
                .flat_map(move |class| (0..split.trials).map(move |trial| Slot { split, class, trial }))
        })
    }
}

// ---------------------------------------------------------------------------
// reading

fn read_image(path: &Path, desc: &SourceDescriptor) -> Result<DataStream> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::parse(path, other.to_string()),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match desc.channels {
        1 => img.to_luma8().into_raw().into_iter().map(f64::from).collect(),
        _ => img.to_rgb8().into_raw().into_iter().map(f64::from).collect(),
    };
    let scale = desc.scale.unwrap_or(255.0);
    let data = if scale == 255.0 {
        data
    } else {
        data.into_iter().map(|v| v / 255.0 * scale).collect()
    };
    Ok(DataStream::Image(Image::new(w, h, desc.channels, scale, data)?))
}

fn read_csv(path: &Path, channels: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, format!("{other:?}")),
        })?;
    let mut cols = vec![Vec::new(); channels];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if row == 0 => continue,
            Err(e) => return Err(Error::parse(path, format!("row {}: {e}", row + 1))),
        };
        if values.len() != channels {
            return Err(Error::shape(format!(
                "{}: row {} has {} columns, expected {channels}",
                path.display(),
                row + 1,
                values.len()
            )));
        }
        for (c, v) in values.into_iter().enumerate() {
            cols[c].push(v);
        }
    }
    Ok(cols)
}

fn read_f64le(path: &Path, channels: usize) -> Result<Vec<Vec<f64>>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let width = 8 * channels;
    if bytes.len() % width != 0 {
        return Err(Error::shape(format!(
            "{}: {} bytes is not a whole number of {channels}-channel f64 samples",
            path.display(),
            bytes.len()
        )));
    }
    let mut cols = vec![Vec::with_capacity(bytes.len() / width); channels];
    for (i, chunk) in bytes.chunks_exact(8).enumerate() {
        cols[i % channels].push(f64::from_le_bytes(chunk.try_into().expect("8-byte chunk")));
    }
    Ok(cols)
}

/// Reads one stream file as `desc` describes it. The pattern is ignored.
pub fn read_stream(path: &Path, desc: &SourceDescriptor) -> Result<DataStream> {
    let stream = match desc.format {
        f if f.is_image() => read_image(path, desc)?,
        FileFormat::Csv | FileFormat::F64le => {
            let cols = if desc.format == FileFormat::Csv {
                read_csv(path, desc.channels)?
            } else {
                read_f64le(path, desc.channels)?
            };
            let rate = desc.rate.expect("validated: time series have a rate");
            DataStream::TimeSeries(TimeSeries::new(cols, rate).map_err(|e| Error::shape(format!("{}: {e}", path.display())))?)
        }
        _ => unreachable!("all formats covered"),
    };
    if let Some([lo, hi]) = desc.range {
        let out_of_range = match &stream {
            DataStream::Image(img) => img.data.iter().any(|v| *v < lo || *v > hi),
            DataStream::TimeSeries(ts) => ts.channels.iter().flatten().any(|v| *v < lo || *v > hi),
        };
        if out_of_range {
            return Err(Error::shape(format!("{}: values outside [{lo}, {hi}]", path.display())));
        }
    }
    Ok(stream)
}

/// Reads every stream named by the manifest. The library split becomes the
/// class library; all other splits become labeled test trials.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<(ClassLibrary, Vec<Trial>)> {
    manifest.validate()?;
    let slots: Vec<Slot> = manifest.slots().collect();
    let trials: Vec<(SplitRole, Trial)> = slots
        .par_iter()
        .map(|slot| {
            let mut trial = Trial::new(slot.trial_id()).with_class(&slot.class.name);
            if let Some(u) = slot.split.user(slot.trial) {
                trial = trial.with_user(u);
            }
            for desc in &manifest.sources {
                let path = slot.path(&manifest.root, &desc.pattern);
                let stream = read_stream(&path, desc).map_err(|e| {
                    let ctx = format!(
                        "class `{}`, trial {}, source `{}`",
                        slot.class.name,
                        slot.split.first_trial + slot.trial,
                        desc.name
                    );
                    match e {
                        Error::Io { path, source } => Error::Io {
                            path: PathBuf::from(format!("{} ({ctx})", path.display())),
                            source,
                        },
                        Error::Shape(m) => Error::Shape(format!("{ctx}: {m}")),
                        Error::Parse { path, message } => Error::Parse {
                            path,
                            message: format!("{ctx}: {message}"),
                        },
                        other => other,
                    }
                })?;
                check_stream(&stream, desc).map_err(|m| Error::Shape(format!("{}: {m}", path.display())))?;
                trial = trial.with_source(&desc.name, stream);
            }
            Ok((slot.split.role, trial))
        })
        .collect::<Result<_>>()?;
    assemble(manifest, trials)
}

fn check_stream(stream: &DataStream, desc: &SourceDescriptor) -> std::result::Result<(), String> {
    if stream.kind() != desc.kind {
        return Err(format!("expected a {:?} stream, found {:?}", desc.kind, stream.kind()));
    }
    if stream.channel_count() != desc.channels {
        return Err(format!(
            "expected {} channels, found {}",
            desc.channels,
            stream.channel_count()
        ));
    }
    Ok(())
}

fn assemble(manifest: &DatasetManifest, trials: Vec<(SplitRole, Trial)>) -> Result<(ClassLibrary, Vec<Trial>)> {
    let mut by_class: BTreeMap<&str, Vec<Trial>> = BTreeMap::new();
    let mut tests = Vec::new();
    for (role, t) in trials {
        match role {
            SplitRole::Library => {
                let class = manifest
                    .classes
                    .iter()
                    .find(|c| Some(&c.name) == t.class.as_ref())
                    .expect("trial classes come from the manifest");
                by_class.entry(&class.name).or_default().push(t);
            }
            SplitRole::Test => tests.push(t),
        }
    }
    let classes = manifest
        .classes
        .iter()
        .map(|c| LibraryClass {
            name: c.name.clone(),
            category: c.category.clone(),
            trials: by_class.remove(c.name.as_str()).unwrap_or_default(),
        })
        .collect();
    Ok((ClassLibrary::new(classes)?, tests))
}

// ---------------------------------------------------------------------------
// writing

fn write_stream(path: &Path, stream: &DataStream, desc: &SourceDescriptor) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    match (stream, desc.format) {
        (DataStream::Image(img), f) if f.is_image() => {
            let scale = desc.scale.unwrap_or(255.0);
            let bytes: Vec<u8> = img
                .data
                .iter()
                .map(|v| (v / scale * 255.0).round().clamp(0.0, 255.0) as u8)
                .collect();
            let (w, h) = (img.width as u32, img.height as u32);
            let color = match img.channels {
                1 => image::ExtendedColorType::L8,
                3 => image::ExtendedColorType::Rgb8,
                c => return Err(Error::input(format!("cannot encode a {c}-channel image"))),
            };
            let format = match f {
                FileFormat::Png => image::ImageFormat::Png,
                FileFormat::Jpeg => image::ImageFormat::Jpeg,
                _ => image::ImageFormat::Bmp,
            };
            image::save_buffer_with_format(path, &bytes, w, h, color, format).map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::Internal(format!("encoding {}: {other}", path.display())),
            })
        }
        (DataStream::TimeSeries(ts), FileFormat::F64le) => {
            let mut bytes = Vec::with_capacity(ts.len() * ts.channel_count() * 8);
            for t in 0..ts.len() {
                for ch in &ts.channels {
                    bytes.extend_from_slice(&ch[t].to_le_bytes());
                }
            }
            fs::write(path, bytes).map_err(|e| Error::io(path, e))
        }
        (DataStream::TimeSeries(ts), FileFormat::Csv) => {
            // `{}` on f64 prints the shortest string that parses back exactly
            let mut text = String::new();
            for t in 0..ts.len() {
                let row: Vec<String> = ts.channels.iter().map(|ch| ch[t].to_string()).collect();
                text.push_str(&row.join(","));
                text.push('\n');
            }
            fs::write(path, text).map_err(|e| Error::io(path, e))
        }
        (s, f) => Err(Error::input(format!("cannot write a {:?} stream as {f:?}", s.kind()))),
    }
}

/// Writes `manifest.toml` and every stream into `dir`, laid out so that
/// [`load_dataset`] reads back the same library and test trials.
///
/// Trials are matched to manifest slots by id (`split/class/trial`).
pub fn write_dataset(dir: &Path, manifest: &DatasetManifest, library: &ClassLibrary, tests: &[Trial]) -> Result<PathBuf> {
    manifest.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut by_id: BTreeMap<&str, &Trial> = library.iter().map(|(_, _, t)| (t.id.as_str(), t)).collect();
    by_id.extend(tests.iter().map(|t| (t.id.as_str(), t)));
    let mut on_disk = manifest.clone();
    on_disk.root = dot();
    let slots: Vec<Slot> = manifest.slots().collect();
    slots.par_iter().try_for_each(|slot| {
        let id = slot.trial_id();
        let trial = by_id
            .get(id.as_str())
            .ok_or_else(|| Error::input(format!("no trial with id `{id}` to write")))?;
        for desc in &manifest.sources {
            let stream = trial
                .sources
                .get(&desc.name)
                .ok_or_else(|| Error::input(format!("trial `{id}` has no source `{}`", desc.name)))?;
            write_stream(&slot.path(dir, &desc.pattern), stream, desc)?;
        }
        Ok::<_, Error>(())
    })?;
    let path = dir.join("manifest.toml");
    fs::write(&path, on_disk.to_toml()?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// validation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamIssue {
    pub source: String,
    pub trial: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub trials_checked: usize,
    /// Streams whose shape cannot hold the configured sample pattern.
    pub infeasible: Vec<StreamIssue>,
    /// Constant streams: the median heuristic falls back to its default σ.
    pub constant: Vec<StreamIssue>,
    pub missing: Vec<StreamIssue>,
}

impl ValidationReport {
    /// True when no stream is infeasible or missing. Constant streams are
    /// only a warning.
    pub fn is_ok(&self) -> bool {
        self.infeasible.is_empty() && self.missing.is_empty()
    }
}

/// Why `spec` cannot be drawn from `stream`, if it cannot.
fn feasibility(stream: &DataStream, spec: &SamplingSpec) -> Option<String> {
    match (spec.strategy, stream) {
        (Strategy::EquidistantSpatial, DataStream::Image(img)) => {
            GridPlan::shape(img.width, img.height, spec.n, spec.spatial_gaps).err().map(|e| e.to_string())
        }
        (Strategy::EquidistantTemporal, DataStream::TimeSeries(ts)) => {
            let gap = match TemporalPlan::resolve_gap(ts.len(), ts.rate, spec) {
                Ok(g) => g,
                Err(e) => return Some(e.to_string()),
            };
            let needed = (spec.n - 1) * gap + 1;
            (needed > ts.len()).then(|| {
                format!("{} points at gap {gap} need {needed} samples, stream has {}", spec.n, ts.len())
            })
        }
        (Strategy::RandomSpectral, DataStream::TimeSeries(ts)) => {
            let len = spec.spectral_length.unwrap_or(ts.len()).min(ts.len());
            let nyquist = ts.rate / 2.0;
            if spec.frequency_cap.is_some_and(|c| c > nyquist) {
                return Some(format!("frequency cap exceeds the Nyquist frequency {nyquist} Hz"));
            }
            let cap = spec.frequency_cap.unwrap_or(nyquist);
            let bins = ((cap * len as f64 / ts.rate).floor() as usize).min(len / 2);
            (bins < spec.n).then(|| format!("{} spectral points need {} bins, spectrum has {bins}", spec.n, spec.n))
        }
        (strategy, s) => Some(format!("{strategy:?} sampling does not apply to a {:?} stream", s.kind())),
    }
}

/// Checks every stream of every trial against the effective source
/// settings of `cfg`. Reads only.
pub fn validate_dataset(library: &ClassLibrary, tests: &[Trial], cfg: &PipelineConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let sources = cfg.effective_sources();
    for t in library.iter().map(|(_, _, t)| t).chain(tests) {
        report.trials_checked += 1;
        for sc in &sources {
            let issue = |message: String| StreamIssue {
                source: sc.name.clone(),
                trial: t.id.clone(),
                message,
            };
            match t.sources.get(&sc.name) {
                None => report.missing.push(issue("source missing".into())),
                Some(stream) => {
                    if let Some(m) = feasibility(stream, &sc.sampling) {
                        report.infeasible.push(issue(m));
                    }
                    if stream.is_constant() {
                        report.constant.push(issue("constant stream; length scale falls back".into()));
                    }
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::TemporalGap;

    fn series(len: usize, v: f64) -> DataStream {
        DataStream::TimeSeries(TimeSeries::new(vec![vec![v; len]], 1000.0).unwrap())
    }

    fn minimal_manifest(format: FileFormat) -> DatasetManifest {
        DatasetManifest {
            name: "mini".into(),
            root: dot(),
            sources: vec![SourceDescriptor {
                name: "fr".into(),
                kind: StreamKind::TimeSeries,
                format,
                pattern: "{split}/{class}_{trial}_{user}.dat".into(),
                channels: 2,
                rate: Some(100.0),
                scale: None,
                range: None,
                sampling: Some(SamplingSpec::temporal(5, TemporalGap::Cover)),
                cross_user: true,
                weight: 1.0,
                metal_shift: false,
            }],
            classes: vec![ClassEntry {
                name: "felt".into(),
                category: Some("T".into()),
            }],
            splits: vec![
                SplitDescriptor {
                    name: "expert".into(),
                    role: SplitRole::Library,
                    trials: 1,
                    users: vec![],
                    first_trial: 1,
                },
                SplitDescriptor {
                    name: "users".into(),
                    role: SplitRole::Test,
                    trials: 2,
                    users: vec!["u1".into(), "u2".into()],
                    first_trial: 1,
                },
            ],
        }
    }

    fn ts2(seed: f64) -> DataStream {
        let a: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37 + seed).sin() * 1e3 / 7.0).collect();
        let b: Vec<f64> = a.iter().map(|v| v * -0.5 + 1.0 / 3.0).collect();
        DataStream::TimeSeries(TimeSeries::new(vec![a, b], 100.0).unwrap())
    }

    fn mini_dataset() -> (ClassLibrary, Vec<Trial>) {
        let lib = ClassLibrary::new(vec![LibraryClass {
            name: "felt".into(),
            category: Some("T".into()),
            trials: vec![Trial::new("expert/felt/1").with_class("felt").with_source("fr", ts2(0.0))],
        }])
        .unwrap();
        let tests = (1..=2)
            .map(|t| {
                Trial::new(format!("users/felt/{t}"))
                    .with_class("felt")
                    .with_user(format!("u{t}"))
                    .with_source("fr", ts2(t as f64))
            })
            .collect();
        (lib, tests)
    }

    #[test]
    fn round_trip_both_series_formats() {
        for format in [FileFormat::F64le, FileFormat::Csv] {
            let dir = tempfile::tempdir().unwrap();
            let m = minimal_manifest(format);
            let (lib, tests) = mini_dataset();
            let path = write_dataset(dir.path(), &m, &lib, &tests).unwrap();
            assert!(dir.path().join("users/felt_2_u2.dat").exists());
            let back = DatasetManifest::from_file(&path).unwrap();
            let (lib2, tests2) = load_dataset(&back).unwrap();
            assert_eq!(lib2, lib);
            assert_eq!(tests2, tests);
        }
    }

    #[test]
    fn missing_file_names_the_trial() {
        let dir = tempfile::tempdir().unwrap();
        let (lib, tests) = mini_dataset();
        let path = write_dataset(dir.path(), &minimal_manifest(FileFormat::F64le), &lib, &tests).unwrap();
        fs::remove_file(dir.path().join("users/felt_2_u2.dat")).unwrap();
        let err = load_dataset(&DatasetManifest::from_file(&path).unwrap()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Io { .. }));
        assert!(msg.contains("felt") && msg.contains("trial 2") && msg.contains("fr"), "{msg}");
    }

    #[test]
    fn corrupted_length_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let (lib, tests) = mini_dataset();
        let path = write_dataset(dir.path(), &minimal_manifest(FileFormat::F64le), &lib, &tests).unwrap();
        let f = dir.path().join("users/felt_1_u1.dat");
        let mut bytes = fs::read(&f).unwrap();
        bytes.truncate(bytes.len() - 8);
        fs::write(&f, bytes).unwrap();
        let err = load_dataset(&DatasetManifest::from_file(&path).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Shape(_)), "{err}");
        assert!(err.to_string().contains("felt_1_u1"), "{err}");
    }

    #[test]
    fn csv_header_and_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "a,b\n1,2\n3,4\n").unwrap();
        assert_eq!(read_csv(&p, 2).unwrap(), vec![vec![1.0, 3.0], vec![2.0, 4.0]]);
        fs::write(&p, "1,2\n3,x\n").unwrap();
        assert!(matches!(read_csv(&p, 2), Err(Error::Parse { .. })));
        fs::write(&p, "1,2,3\n").unwrap();
        assert!(matches!(read_csv(&p, 2), Err(Error::Shape(_))));
    }

    #[test]
    fn png_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<f64> = (0..5 * 4 * 3).map(|i| ((i * 37) % 256) as f64).collect();
        let img = DataStream::Image(Image::new(5, 4, 3, 255.0, data).unwrap());
        let desc = SourceDescriptor {
            name: "ca".into(),
            kind: StreamKind::Image,
            format: FileFormat::Png,
            pattern: String::new(),
            channels: 3,
            rate: None,
            scale: None,
            range: Some([0.0, 255.0]),
            sampling: None,
            cross_user: false,
            weight: 1.0,
            metal_shift: false,
        };
        let p = dir.path().join("a/b.png");
        write_stream(&p, &img, &desc).unwrap();
        assert_eq!(read_stream(&p, &desc).unwrap(), img);
    }

    #[test]
    fn manifest_checks() {
        let mut m = minimal_manifest(FileFormat::Csv);
        assert!(m.validate().is_ok());
        m.sources[0].rate = None;
        assert!(matches!(m.validate(), Err(Error::Config(_))));
        let mut m = minimal_manifest(FileFormat::Png);
        assert!(m.validate().is_err());
        m = minimal_manifest(FileFormat::Csv);
        m.splits[1].role = SplitRole::Library;
        assert!(m.validate().is_err());
        let text = minimal_manifest(FileFormat::Csv).to_toml().unwrap();
        let back: DatasetManifest = toml::from_str(&text).unwrap();
        assert_eq!(back, minimal_manifest(FileFormat::Csv));
    }

    #[test]
    fn validation_flags() {
        let lib = ClassLibrary::from_trials(vec![Trial::new("a").with_class("c").with_source("me", series(100, 0.0))]).unwrap();
        let tests = vec![Trial::new("b").with_class("c")];
        let cfg = PipelineConfig {
            sources: vec![SourceConfig::new("me", SamplingSpec::temporal(400, TemporalGap::Samples(1)))],
            ..Default::default()
        };
        let rep = validate_dataset(&lib, &tests, &cfg);
        assert_eq!(rep.trials_checked, 2);
        assert_eq!(rep.infeasible.len(), 1);
        assert_eq!(rep.constant.len(), 1);
        assert_eq!(rep.missing.len(), 1);
        assert!(!rep.is_ok());

        // 11.8 ms spacing fits a 4.8 s stream at 10 kHz
        let long = ClassLibrary::from_trials(vec![Trial::new("a").with_class("c").with_source("fr", {
            let v: Vec<f64> = (0..48_000).map(|i| (i as f64).sin()).collect();
            DataStream::TimeSeries(TimeSeries::new(vec![v], 10_000.0).unwrap())
        })])
        .unwrap();
        let cfg = PipelineConfig {
            sources: vec![SourceConfig::new("fr", SamplingSpec::temporal(400, TemporalGap::Seconds(0.0118)))],
            ..Default::default()
        };
        assert!(validate_dataset(&long, &[], &cfg).is_ok());
    }
}
