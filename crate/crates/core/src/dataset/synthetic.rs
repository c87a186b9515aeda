//! Seeded synthetic datasets with the shape of a surface-recognition corpus:
//! one image source, one mean-carrying time series and one vibration
//! series, with per-user offsets on the test side.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ClassEntry, DatasetManifest, FileFormat, SourceDescriptor, SplitDescriptor, SplitRole};
use crate::classifier::{ClassLibrary, LibraryClass, PipelineConfig, Trial};
use crate::error::{Error, Result};
use crate::rng::{substream, StreamRng};
use crate::sampling::{DataStream, Image, SamplingSpec, StreamKind, TemporalGap, TimeSeries};

const CATEGORIES: [&str; 9] = ["M", "S", "G", "W", "R", "C", "F", "P", "T"];

// substream tags, so that class-level and trial-level draws never collide
const TAG_CLASS: u64 = 1;
const TAG_TRIAL: u64 = 2;
const TAG_USER: u64 = 3;

/// Images with a per-class base color and per-pixel texture noise, stored
/// as 8-bit RGB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageGen {
    pub name: String,
    pub width: usize,
    pub height: usize,
    /// Fraction of the hue circle spanned by the class base colors.
    pub hue_range: f64,
    pub saturation: f64,
    pub value: f64,
    /// Per-trial standard deviation of the hue, in turns.
    pub hue_jitter: f64,
    /// Per-trial standard deviation of the brightness.
    pub value_jitter: f64,
    /// Per-pixel noise standard deviation, in unit intensity.
    pub texture: f64,
    pub cross_user: bool,
    pub sampling: SamplingSpec,
}

impl Default for ImageGen {
    fn default() -> Self {
        Self {
            name: "image".into(),
            width: 64,
            height: 48,
            hue_range: 0.6,
            saturation: 0.5,
            value: 0.6,
            hue_jitter: 0.02,
            value_jitter: 0.05,
            texture: 0.08,
            cross_user: false,
            sampling: SamplingSpec::spatial(200, (3, 3)),
        }
    }
}

/// AR(1) series around a per-class mean. Class `c` has mean
/// `c * mean_step`, coefficient `rho[c % rho.len()]` and stationary standard
/// deviation `noise_std * std_ratio^((7c) mod C)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemporalGen {
    pub name: String,
    pub length: usize,
    pub rate: f64,
    pub mean_step: f64,
    pub noise_std: f64,
    pub std_ratio: f64,
    pub rho: Vec<f64>,
    pub cross_user: bool,
    pub sampling: SamplingSpec,
}

impl Default for TemporalGen {
    fn default() -> Self {
        Self {
            name: "force".into(),
            length: 2000,
            rate: 1000.0,
            mean_step: 1.0,
            noise_std: 0.5,
            std_ratio: 1.15,
            rho: vec![0.0, 0.6, 0.9],
            cross_user: true,
            sampling: SamplingSpec::temporal(200, TemporalGap::Cover),
        }
    }
}

/// White noise plus a per-class set of tones at integer DFT bins.
///
/// Class `c` gets `tones_base + c * tones_step` tones at bins drawn from the
/// class seed, unless `tone_bins` lists the bins of every class explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralGen {
    pub name: String,
    pub length: usize,
    pub rate: f64,
    pub noise_std: f64,
    pub tone_amplitude: f64,
    pub tones_base: usize,
    pub tones_step: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tone_bins: Vec<Vec<usize>>,
    pub cross_user: bool,
    pub sampling: SamplingSpec,
}

impl Default for SpectralGen {
    fn default() -> Self {
        Self {
            name: "vibration".into(),
            length: 2048,
            rate: 8000.0,
            noise_std: 1.0,
            tone_amplitude: 0.4,
            tones_base: 4,
            tones_step: 12,
            tone_bins: Vec::new(),
            cross_user: true,
            sampling: SamplingSpec::spectral(200, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub name: String,
    pub classes: usize,
    pub library_trials: usize,
    pub test_trials: usize,
    /// Test trial `t` of every class belongs to user `t % users`.
    pub users: usize,
    /// Each user adds a constant drawn from `U(-user_offset, user_offset)`
    /// to the streams of cross-user sources.
    pub user_offset: f64,
    /// Each user scales cross-user streams by `1 + U(-user_gain, user_gain)`.
    pub user_gain: f64,
    pub seed: u64,
    pub repetitions: usize,
    pub image: Option<ImageGen>,
    pub temporal: Option<TemporalGen>,
    pub spectral: Option<SpectralGen>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            classes: 10,
            library_trials: 5,
            test_trials: 20,
            users: 10,
            user_offset: 3.0,
            user_gain: 0.05,
            seed: 7,
            repetitions: 5,
            image: Some(ImageGen::default()),
            temporal: Some(TemporalGen::default()),
            spectral: Some(SpectralGen::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    /// Describes the on-disk layout `write_dataset` produces.
    pub manifest: DatasetManifest,
    pub library: ClassLibrary,
    pub tests: Vec<Trial>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.classes < 2 {
            return bad("synthetic spec needs at least 2 classes");
        }
        if self.library_trials == 0 || self.test_trials == 0 {
            return bad("synthetic spec needs library and test trials");
        }
        if self.users == 0 {
            return bad("synthetic spec needs at least one user");
        }
        if !(self.user_offset >= 0.0 && self.user_gain >= 0.0 && self.user_gain < 1.0) {
            return bad("user offset must be >= 0 and user gain in [0, 1)");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1");
        }
        if self.image.is_none() && self.temporal.is_none() && self.spectral.is_none() {
            return bad("synthetic spec enables no source");
        }
        if let Some(g) = &self.image {
            if g.width == 0 || g.height == 0 || !(g.texture >= 0.0) {
                return bad("image generator needs positive dimensions and texture >= 0");
            }
        }
        if let Some(g) = &self.temporal {
            if g.length < 2 || !(g.rate > 0.0) || !(g.noise_std >= 0.0) || g.rho.is_empty() {
                return bad("temporal generator needs length >= 2, rate > 0 and a rho list");
            }
            if g.rho.iter().any(|r| !(r.abs() < 1.0)) {
                return bad("temporal rho values must lie in (-1, 1)");
            }
        }
        if let Some(g) = &self.spectral {
            if g.length < 4 || !(g.rate > 0.0) || !(g.noise_std >= 0.0) {
                return bad("spectral generator needs length >= 4 and rate > 0");
            }
            if !g.tone_bins.is_empty() && g.tone_bins.len() != self.classes {
                return bad("spectral tone_bins must list one bin set per class");
            }
            let nyquist_bin = g.length / 2;
            if g.tone_bins.iter().flatten().any(|&b| b == 0 || b >= nyquist_bin) {
                return bad("spectral tone bins must lie strictly between DC and Nyquist");
            }
            if g.tone_bins.is_empty() && g.tones_base + (self.classes - 1) * g.tones_step >= nyquist_bin {
                return bad("spectral generator asks for more tones than bins");
            }
        }
        Ok(())
    }

    pub fn class_name(c: usize) -> String {
        format!("class{c:02}")
    }

    pub fn user_name(u: usize) -> String {
        format!("user{:02}", u + 1)
    }

    pub fn manifest(&self) -> DatasetManifest {
        let mut sources = Vec::new();
        if let Some(g) = &self.image {
            sources.push(SourceDescriptor {
                name: g.name.clone(),
                kind: StreamKind::Image,
                format: FileFormat::Png,
                pattern: format!("{{split}}/{{class}}/{{trial}}_{}.png", g.name),
                channels: 3,
                rate: None,
                scale: Some(255.0),
                range: Some([0.0, 255.0]),
                sampling: Some(g.sampling.clone()),
                cross_user: g.cross_user,
                weight: 1.0,
                metal_shift: false,
            });
        }
        for (name, rate, sampling, cross_user) in [
            self.temporal.as_ref().map(|g| (&g.name, g.rate, &g.sampling, g.cross_user)),
            self.spectral.as_ref().map(|g| (&g.name, g.rate, &g.sampling, g.cross_user)),
        ]
        .into_iter()
        .flatten()
        {
            sources.push(SourceDescriptor {
                name: name.clone(),
                kind: StreamKind::TimeSeries,
                format: FileFormat::F64le,
                pattern: format!("{{split}}/{{class}}/{{trial}}_{name}.f64"),
                channels: 1,
                rate: Some(rate),
                scale: None,
                range: None,
                sampling: Some(sampling.clone()),
                cross_user,
                weight: 1.0,
                metal_shift: false,
            });
        }
        DatasetManifest {
            name: self.name.clone(),
            root: super::dot(),
            sources,
            classes: (0..self.classes)
                .map(|c| ClassEntry {
                    name: Self::class_name(c),
                    category: Some(CATEGORIES[c % CATEGORIES.len()].into()),
                })
                .collect(),
            splits: vec![
                SplitDescriptor {
                    name: "expert".into(),
                    role: SplitRole::Library,
                    trials: self.library_trials,
                    users: Vec::new(),
                    first_trial: 0,
                },
                SplitDescriptor {
                    name: "users".into(),
                    role: SplitRole::Test,
                    trials: self.test_trials,
                    users: (0..self.users).map(Self::user_name).collect(),
                    first_trial: 0,
                },
            ],
        }
    }

    /// The pipeline the synthetic data is designed for: the manifest's
    /// sources with this spec's repetition count and seed.
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            repetitions: self.repetitions,
            seed: self.seed,
            ..self.manifest().pipeline_config()
        }
    }
}

fn standard_normal(rng: &mut StreamRng) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match sector as u8 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn gen_image(g: &ImageGen, c: usize, classes: usize, rng: &mut StreamRng) -> Result<DataStream> {
    let hue = g.hue_range * c as f64 / classes as f64 + g.hue_jitter * standard_normal(rng);
    let value = (g.value + g.value_jitter * standard_normal(rng)).clamp(0.0, 1.0);
    let base = hsv_to_rgb(hue, g.saturation, value);
    let texture = Normal::new(0.0, g.texture).map_err(|e| Error::Config(e.to_string()))?;
    let mut data = Vec::with_capacity(g.width * g.height * 3);
    for _ in 0..g.width * g.height {
        let grain = texture.sample(rng);
        for b in base {
            // shared grain per pixel models luminance texture, the extra
            // term per channel a little color noise
            let v = b + grain + 0.25 * texture.sample(rng);
            data.push((v.clamp(0.0, 1.0) * 255.0).round());
        }
    }
    Ok(DataStream::Image(Image::new(g.width, g.height, 3, 255.0, data)?))
}

fn gen_temporal(g: &TemporalGen, c: usize, classes: usize, rng: &mut StreamRng) -> Vec<f64> {
    let mean = c as f64 * g.mean_step;
    let rho = g.rho[c % g.rho.len()];
    let std = g.noise_std * g.std_ratio.powi(((7 * c) % classes) as i32);
    let innovation = std * (1.0 - rho * rho).sqrt();
    let mut x = std * standard_normal(rng);
    (0..g.length)
        .map(|_| {
            let out = mean + x;
            x = rho * x + innovation * standard_normal(rng);
            out
        })
        .collect()
}

fn class_tones(g: &SpectralGen, c: usize, seed: u64) -> Vec<usize> {
    if !g.tone_bins.is_empty() {
        return g.tone_bins[c].clone();
    }
    let count = g.tones_base + c * g.tones_step;
    let mut rng = substream(seed, &[TAG_CLASS, c as u64]);
    // bins 1..len/2, excluding DC and Nyquist
    rand::seq::index::sample(&mut rng, g.length / 2 - 1, count)
        .into_iter()
        .map(|b| b + 1)
        .collect()
}

fn gen_spectral(g: &SpectralGen, tones: &[usize], rng: &mut StreamRng) -> Vec<f64> {
    let n = g.length as f64;
    let phases: Vec<f64> = tones.iter().map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    (0..g.length)
        .map(|i| {
            let t = i as f64;
            let tone: f64 = tones
                .iter()
                .zip(&phases)
                .map(|(&k, &ph)| (std::f64::consts::TAU * k as f64 * t / n + ph).cos())
                .sum();
            g.tone_amplitude * tone + g.noise_std * standard_normal(rng)
        })
        .collect()
}

/// Builds the dataset described by `spec`. A pure function of the spec:
/// every trial stream draws from its own substream of `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let manifest = spec.manifest();
    let tones: Vec<Vec<usize>> = match &spec.spectral {
        Some(g) => (0..spec.classes).map(|c| class_tones(g, c, spec.seed)).collect(),
        None => Vec::new(),
    };
    // (offset, gain) per user, shared by every cross-user source of a trial
    let user_effects: Vec<(f64, f64)> = (0..spec.users)
        .map(|u| {
            let mut r = substream(spec.seed, &[TAG_USER, u as u64]);
            let offset = spec.user_offset * (2.0 * r.random::<f64>() - 1.0);
            let gain = 1.0 + spec.user_gain * (2.0 * r.random::<f64>() - 1.0);
            (offset, gain)
        })
        .collect();

    let make_trial = |split: u64, c: usize, t: usize| -> Result<Trial> {
        let test_side = split == 1;
        let split_name = if test_side { "users" } else { "expert" };
        let mut trial = Trial::new(format!("{split_name}/{}/{t}", SyntheticSpec::class_name(c)))
            .with_class(SyntheticSpec::class_name(c));
        if test_side {
            trial.user = Some(SyntheticSpec::user_name(t % spec.users));
        }
        let effect = test_side.then(|| user_effects[t % spec.users]);
        let apply = |mut v: Vec<f64>, flagged: bool| {
            if let (Some((offset, gain)), true) = (effect, flagged) {
                v.iter_mut().for_each(|x| *x = offset + gain * *x);
            }
            v
        };
        let rng_for = |s: u64| substream(spec.seed, &[TAG_TRIAL, split, c as u64, t as u64, s]);
        if let Some(g) = &spec.image {
            trial = trial.with_source(&g.name, gen_image(g, c, spec.classes, &mut rng_for(0))?);
        }
        if let Some(g) = &spec.temporal {
            let v = apply(gen_temporal(g, c, spec.classes, &mut rng_for(1)), g.cross_user);
            trial = trial.with_source(&g.name, DataStream::TimeSeries(TimeSeries::new(vec![v], g.rate)?));
        }
        if let Some(g) = &spec.spectral {
            let v = apply(gen_spectral(g, &tones[c], &mut rng_for(2)), g.cross_user);
            trial = trial.with_source(&g.name, DataStream::TimeSeries(TimeSeries::new(vec![v], g.rate)?));
        }
        Ok(trial)
    };

    let classes = (0..spec.classes)
        .map(|c| {
            Ok(LibraryClass {
                name: SyntheticSpec::class_name(c),
                category: Some(CATEGORIES[c % CATEGORIES.len()].into()),
                trials: (0..spec.library_trials).map(|t| make_trial(0, c, t)).collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tests = Vec::with_capacity(spec.classes * spec.test_trials);
    for c in 0..spec.classes {
        for t in 0..spec.test_trials {
            tests.push(make_trial(1, c, t)?);
        }
    }
    Ok(SyntheticDataset {
        manifest,
        library: ClassLibrary::new(classes)?,
        tests,
    })
}
