//! Command-line front end. Every `cmd_*` returns the process exit code:
//! 0 on success, then [`Error::exit_code`] for failures (2 config or input,
//! 3 I/O, 4 data shape, 5 internal). Argument errors exit with 2.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::{run_benchmark, Ablations, ClassLibrary, EvaluationReport, MissingSourcePolicy, PipelineConfig, Prediction, Trial};
use crate::dataset::{
    generate_synthetic, read_stream, validate_dataset, write_dataset, DatasetManifest, FileFormat, SourceDescriptor, SyntheticSpec,
    ValidationReport,
};
use crate::error::{Error, Result};
use crate::independence::{minimum_independent_gap, mixing_report, MixingReport, MixingResult, MixingSearchConfig, RealizationSet};
use crate::kernels::{median_heuristic, DEFAULT_SUBSET_SIZE};
use crate::mmd::{two_sample_test_with, TestResult};
use crate::rng::{from_seed, substream};
use crate::sampling::{draw_pair, prepare, DataStream, SamplingSpec, StreamKind, TemporalGap};

#[derive(Debug, Parser)]
#[command(name = "surface-mmd", version, about = "Kernel two-sample surface recognition")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify every test trial against the library and evaluate.
    Classify(ClassifyArgs),
    /// Search the minimum gap between independent samples.
    Mixing(MixingArgs),
    /// Two-sample MMD test between two stream files.
    Test(TestArgs),
    /// Write a synthetic dataset in manifest layout.
    Synth(SynthArgs),
    /// Check stream shapes against the sampling settings.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Synthetic dataset: `default` or a TOML spec file. Used when no
    /// manifest is given.
    #[arg(long, value_name = "SPEC", conflicts_with = "manifest")]
    pub synthetic: Option<String>,
    /// Dataset manifest (TOML).
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MissingArg {
    Error,
    Skip,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Comma-separated source names to use (default: all declared).
    #[arg(long, value_delimiter = ',')]
    pub sources: Option<Vec<String>>,
    /// Per-source weights as `name=w`, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<String>,
    /// Keep images in RGB.
    #[arg(long)]
    pub no_hsv: bool,
    /// Sample spectral sources in the time domain.
    #[arg(long)]
    pub no_dft: bool,
    /// Disable the cross-user mean shift.
    #[arg(long)]
    pub no_cross_user: bool,
    /// MMD repetitions per source comparison.
    #[arg(long = "R", value_name = "R")]
    pub repetitions: Option<usize>,
    /// Points per sample set, for every source.
    #[arg(long)]
    pub n: Option<usize>,
    /// Neighbors in the vote.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "error")]
    pub missing: MissingArg,
    /// Seed for every random draw (and the synthetic generator).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the confusion matrix CSV here.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
    /// Write the per-pair discrepancy cache (JSON) here.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Library,
    Test,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct MixingArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Time-series sources to profile (default: all).
    #[arg(long, value_delimiter = ',')]
    pub source: Option<Vec<String>>,
    /// Classes to profile (default: all).
    #[arg(long, value_delimiter = ',')]
    pub class: Option<Vec<String>>,
    /// Which trials form the realizations of a class.
    #[arg(long, value_enum, default_value = "library")]
    pub split: SplitArg,
    #[arg(long = "R", value_name = "R", default_value_t = 20)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Upper bound of the random start, in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub t1max: f64,
    /// Largest gap tried, in samples.
    #[arg(long)]
    pub max_gap: Option<usize>,
    /// Geometric gap growth factor instead of unit steps.
    #[arg(long)]
    pub stride: Option<f64>,
    /// Permutations per HSIC threshold.
    #[arg(long = "B", value_name = "B", default_value_t = crate::independence::DEFAULT_SEARCH_SHUFFLES)]
    pub shuffles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    pub y: PathBuf,
    pub z: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Permutations for the threshold.
    #[arg(long = "B", value_name = "B", default_value_t = crate::mmd::DEFAULT_SHUFFLES)]
    pub shuffles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample rate of series files, in Hz.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    /// Channels of series files.
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    /// Compare DFT magnitudes instead of time-domain samples.
    #[arg(long)]
    pub spectral: bool,
    /// Temporal gap in samples (default: spread over the stream).
    #[arg(long)]
    pub gap: Option<usize>,
    /// Image grid spacing `da,db` in pixels.
    #[arg(long, value_delimiter = ',', default_values_t = [17, 18])]
    pub gaps: Vec<usize>,
    /// Convert images to HSV first.
    #[arg(long)]
    pub hsv: bool,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Synthetic spec (TOML); defaults to the built-in spec.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return report_error(&Error::Config(format!("thread pool: {e}"))),
    };
    pool.install(|| match &cli.command {
        Command::Classify(a) => cmd_classify(a),
        Command::Mixing(a) => cmd_mixing(a),
        Command::Test(a) => cmd_test(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Validate(a) => cmd_validate(a),
    })
}

fn report_error(e: &Error) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn exit_with<T>(r: Result<T>) -> i32 {
    match r {
        Ok(_) => 0,
        Err(e) => report_error(&e),
    }
}

fn timestamp() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_default()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// dataset resolution

/// Where the data came from, echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Manifest(PathBuf),
}

pub struct LoadedDataset {
    pub source: DatasetSource,
    pub name: String,
    pub base: PipelineConfig,
    pub library: ClassLibrary,
    pub tests: Vec<Trial>,
}

fn synthetic_spec(arg: Option<&str>, seed: Option<u64>) -> Result<SyntheticSpec> {
    let mut spec = match arg {
        None | Some("default") => SyntheticSpec::default(),
        Some(path) => {
            let path = Path::new(path);
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?
        }
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    Ok(spec)
}

pub fn load(args: &DatasetArgs, seed: Option<u64>) -> Result<LoadedDataset> {
    match &args.manifest {
        Some(path) => {
            let m = DatasetManifest::from_file(path)?;
            let (library, tests) = crate::dataset::load_dataset(&m)?;
            Ok(LoadedDataset {
                source: DatasetSource::Manifest(path.clone()),
                name: m.name.clone(),
                base: m.pipeline_config(),
                library,
                tests,
            })
        }
        None => {
            let spec = synthetic_spec(args.synthetic.as_deref(), seed)?;
            let d = generate_synthetic(&spec)?;
            Ok(LoadedDataset {
                name: spec.name.clone(),
                base: spec.pipeline_config(),
                source: DatasetSource::Synthetic(spec),
                library: d.library,
                tests: d.tests,
            })
        }
    }
}

impl PipelineArgs {
    /// Applies the flags on top of the dataset's declared pipeline.
    pub fn apply(&self, mut cfg: PipelineConfig) -> Result<PipelineConfig> {
        if let Some(names) = &self.sources {
            let mut picked = Vec::with_capacity(names.len());
            for name in names {
                let src = cfg
                    .sources
                    .iter()
                    .find(|s| &s.name == name)
                    .ok_or_else(|| Error::Config(format!("unknown source `{name}`")))?;
                picked.push(src.clone());
            }
            cfg.sources = picked;
        }
        for pair in &self.weights {
            let (name, w) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("weight `{pair}` is not of the form name=value")))?;
            let w: f64 = w.trim().parse().map_err(|_| Error::Config(format!("weight `{pair}` is not a number")))?;
            let src = cfg
                .sources
                .iter_mut()
                .find(|s| s.name == name.trim())
                .ok_or_else(|| Error::Config(format!("weight for unselected source `{name}`")))?;
            src.weight = w;
        }
        if let Some(n) = self.n {
            cfg.sources.iter_mut().for_each(|s| s.sampling.n = n);
        }
        if let Some(r) = self.repetitions {
            cfg.repetitions = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.k = self.k;
        cfg.missing = match self.missing {
            MissingArg::Error => MissingSourcePolicy::Error,
            MissingArg::Skip => MissingSourcePolicy::Skip,
        };
        cfg.ablations = Ablations {
            no_hsv: self.no_hsv,
            no_dft: self.no_dft,
            no_cross_user: self.no_cross_user,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

// ---------------------------------------------------------------------------
// classify

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub pipeline: PipelineConfig,
    /// Sources as actually sampled, after the ablations.
    pub effective_sources: Vec<crate::classifier::SourceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub micro_accuracy: f64,
    pub macro_precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub generated_at: String,
    pub dataset_name: String,
    pub library_trials: usize,
    pub test_trials: usize,
    pub config: RunConfig,
    pub summary: Summary,
    pub report: EvaluationReport,
    pub predictions: Vec<Prediction>,
}

/// Runs the benchmark the flags describe and returns the report document
/// plus the discrepancy cache.
pub fn classify(args: &ClassifyArgs) -> Result<(ClassifyReport, crate::classifier::DsCache)> {
    let data = load(&args.dataset, args.pipeline.seed)?;
    let cfg = args.pipeline.apply(data.base.clone())?;
    let outcome = run_benchmark(&data.library, &data.tests, &cfg)?;
    let r = &outcome.report;
    let report = ClassifyReport {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        generated_at: timestamp(),
        dataset_name: data.name,
        library_trials: data.library.trial_count(),
        test_trials: data.tests.len(),
        config: RunConfig {
            dataset: data.source,
            effective_sources: cfg.effective_sources(),
            pipeline: cfg,
        },
        summary: Summary {
            accuracy_mean: r.accuracy.mean,
            accuracy_std: r.accuracy.std,
            micro_accuracy: r.micro_accuracy(),
            macro_precision: r.macro_precision,
        },
        report: outcome.report.clone(),
        predictions: outcome.predictions,
    };
    Ok((report, outcome.cache))
}

pub fn cmd_classify(args: &ClassifyArgs) -> i32 {
    exit_with((|| {
        let (report, cache) = classify(args)?;
        let s = &report.summary;
        println!(
            "{} test trials, {} classes: accuracy {:.1} ± {:.1} % (micro {:.1} %), macro precision {}",
            report.test_trials,
            report.report.classes.len(),
            100.0 * s.accuracy_mean,
            100.0 * s.accuracy_std,
            100.0 * s.micro_accuracy,
            s.macro_precision.map_or("n/a".to_string(), |p| format!("{:.1} %", 100.0 * p)),
        );
        if let Some(path) = &args.out {
            write_json(path, &report)?;
        }
        if let Some(path) = &args.confusion {
            write_file(path, report.report.confusion_csv()?.as_bytes())?;
        }
        if let Some(path) = &args.cache {
            write_json(path, &cache)?;
        }
        Ok(())
    })())
}

// ---------------------------------------------------------------------------
// mixing

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Unsuitable {
    pub entry: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingConfigEcho {
    pub dataset: DatasetSource,
    pub split: &'static str,
    pub repetitions: usize,
    pub alpha: f64,
    pub t1max_seconds: f64,
    pub max_gap: Option<usize>,
    pub stride: Option<f64>,
    pub shuffles: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingDocument {
    pub tool: &'static str,
    pub version: &'static str,
    pub generated_at: String,
    pub config: MixingConfigEcho,
    /// One report per sample rate; rows are `source/class/channel`.
    pub groups: Vec<MixingReport>,
    /// Entries not searched, e.g. constant streams that are unsuitable for
    /// HSIC or classes with fewer than three trials.
    pub unsuitable: Vec<Unsuitable>,
}

struct MixingJob {
    entry: String,
    rate: f64,
    data: std::result::Result<RealizationSet, String>,
    path: [u64; 3],
}

fn mixing_jobs(args: &MixingArgs, data: &LoadedDataset) -> Result<Vec<MixingJob>> {
    let series_sources: Vec<&str> = data
        .base
        .sources
        .iter()
        .filter(|s| s.sampling.strategy != crate::sampling::Strategy::EquidistantSpatial)
        .map(|s| s.name.as_str())
        .collect();
    let sources: Vec<&str> = match &args.source {
        Some(list) => list.iter().map(String::as_str).collect(),
        None => series_sources,
    };
    let classes = data.library.class_names();
    if let Some(filter) = &args.class {
        if let Some(bad) = filter.iter().find(|c| !classes.contains(c)) {
            return Err(Error::Config(format!("unknown class `{bad}`")));
        }
    }
    let mut jobs = Vec::new();
    for (si, source) in sources.iter().enumerate() {
        for (ci, class) in classes.iter().enumerate() {
            if args.class.as_ref().is_some_and(|f| !f.contains(class)) {
                continue;
            }
            let lib = data.library.classes()[ci].trials.iter();
            let tests = data.tests.iter().filter(|t| t.class.as_deref() == Some(class.as_str()));
            let trials: Vec<&Trial> = match args.split {
                SplitArg::Library => lib.collect(),
                SplitArg::Test => tests.collect(),
                SplitArg::All => lib.chain(tests).collect(),
            };
            let mut series = Vec::with_capacity(trials.len());
            for t in &trials {
                match t.sources.get(*source) {
                    Some(DataStream::TimeSeries(ts)) => series.push(ts),
                    Some(DataStream::Image(_)) => {
                        return Err(Error::Config(format!("source `{source}` is not a time series")))
                    }
                    None => return Err(Error::Config(format!("trial `{}` has no source `{source}`", t.id))),
                }
            }
            let Some(first) = series.first() else {
                continue;
            };
            let rate = first.rate;
            let len = series.iter().map(|s| s.len()).min().unwrap_or(0);
            for ch in 0..first.channel_count() {
                let entry = format!("{source}/{class}/{}", first.channel_names[ch]);
                // realizations share one length: longer trials are truncated
                let realizations: Vec<Vec<f64>> = series.iter().map(|s| s.channels[ch][..len].to_vec()).collect();
                let data = if series.iter().any(|s| s.rate != rate) {
                    Err("trials use different sample rates".to_string())
                } else if realizations.len() < 3 {
                    Err(format!("{} trials, at least 3 needed", realizations.len()))
                } else {
                    RealizationSet::new(realizations, rate).map_err(|e| e.to_string()).and_then(|r| {
                        if r.is_constant() {
                            Err("constant stream, unsuitable for HSIC".to_string())
                        } else {
                            Ok(r)
                        }
                    })
                };
                jobs.push(MixingJob {
                    entry,
                    rate,
                    data,
                    path: [si as u64, ci as u64, ch as u64],
                });
            }
        }
    }
    Ok(jobs)
}

pub fn mixing(args: &MixingArgs) -> Result<MixingDocument> {
    let data = load(&args.dataset, None)?;
    let jobs = mixing_jobs(args, &data)?;
    let results: Vec<(String, f64, std::result::Result<MixingResult, String>)> = jobs
        .into_par_iter()
        .map(|job| {
            let res = job.data.and_then(|set| {
                let cfg = MixingSearchConfig {
                    repetitions: args.repetitions,
                    t1_max: MixingSearchConfig::t1_max_from_seconds(args.t1max, job.rate).map_err(|e| e.to_string())?,
                    alpha: args.alpha,
                    max_gap: args.max_gap,
                    shuffles: args.shuffles,
                    stride: args.stride,
                };
                let mut rng = substream(args.seed, &job.path);
                minimum_independent_gap(&set, &cfg, &mut rng).map_err(|e| match e {
                    Error::ConstantStream(_) => "constant stream, unsuitable for HSIC".to_string(),
                    other => other.to_string(),
                })
            });
            (job.entry, job.rate, res)
        })
        .collect();

    let mut by_rate: BTreeMap<u64, (f64, BTreeMap<String, MixingResult>)> = BTreeMap::new();
    let mut unsuitable = Vec::new();
    for (entry, rate, res) in results {
        match res {
            Ok(r) => {
                by_rate.entry(rate.to_bits()).or_insert_with(|| (rate, BTreeMap::new())).1.insert(entry, r);
            }
            Err(reason) => unsuitable.push(Unsuitable { entry, reason }),
        }
    }
    let mut groups: Vec<MixingReport> = by_rate.into_values().map(|(rate, m)| mixing_report(&m, rate)).collect();
    groups.sort_by(|a, b| a.rate.total_cmp(&b.rate));
    Ok(MixingDocument {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        generated_at: timestamp(),
        config: MixingConfigEcho {
            dataset: data.source,
            split: match args.split {
                SplitArg::Library => "library",
                SplitArg::Test => "test",
                SplitArg::All => "all",
            },
            repetitions: args.repetitions,
            alpha: args.alpha,
            t1max_seconds: args.t1max,
            max_gap: args.max_gap,
            stride: args.stride,
            shuffles: args.shuffles,
            seed: args.seed,
        },
        groups,
        unsuitable,
    })
}

pub fn cmd_mixing(args: &MixingArgs) -> i32 {
    exit_with((|| {
        let doc = mixing(args)?;
        for g in &doc.groups {
            println!("rate {} Hz", g.rate);
            println!("  {:<40} {:>8} {:>10}  converged", "entry", "T*", "T* [ms]");
            for r in &g.rows {
                println!("  {:<40} {:>8} {:>10.3}  {}", r.source, r.t_star_samples, r.t_star_ms, r.converged);
            }
        }
        for u in &doc.unsuitable {
            println!("  {:<40} skipped: {}", u.entry, u.reason);
        }
        if let Some(path) = &args.out {
            write_json(path, &doc)?;
        }
        Ok(())
    })())
}

// ---------------------------------------------------------------------------
// test

fn descriptor_for(path: &Path, args: &TestArgs) -> Result<SourceDescriptor> {
    let format = FileFormat::from_path(path)
        .ok_or_else(|| Error::input(format!("{}: unknown file type (png, jpg, bmp, csv or f64)", path.display())))?;
    let image = format.is_image();
    Ok(SourceDescriptor {
        name: path.display().to_string(),
        kind: if image { StreamKind::Image } else { StreamKind::TimeSeries },
        format,
        pattern: String::new(),
        channels: if image { 3 } else { args.channels },
        rate: (!image).then_some(args.rate),
        scale: None,
        range: None,
        sampling: None,
        cross_user: false,
        weight: 1.0,
        metal_shift: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestDocument {
    pub y: PathBuf,
    pub z: PathBuf,
    pub n: usize,
    pub shuffles: usize,
    pub seed: u64,
    pub result: TestResult,
}

pub fn two_sample(args: &TestArgs) -> Result<TestDocument> {
    let read = |p: &Path| -> Result<DataStream> {
        let desc = descriptor_for(p, args)?;
        let mut desc = desc;
        if desc.kind == StreamKind::Image {
            // let the file decide between gray and color
            let probe = image::ImageReader::open(p)
                .map_err(|e| Error::io(p, e))?
                .with_guessed_format()
                .map_err(|e| Error::io(p, e))?
                .decode()
                .map_err(|e| Error::parse(p, e.to_string()))?;
            desc.channels = if probe.color().has_color() { 3 } else { 1 };
        }
        read_stream(p, &desc)
    };
    if args.gaps.len() != 2 {
        return Err(Error::Config("--gaps takes two values, `da,db`".into()));
    }
    let y = read(&args.y)?;
    let z = read(&args.z)?;
    let spec = match (&y, args.spectral) {
        (DataStream::Image(_), _) => SamplingSpec {
            hsv: args.hsv,
            ..SamplingSpec::spatial(args.n, (args.gaps[0], args.gaps[1]))
        },
        (DataStream::TimeSeries(_), true) => SamplingSpec::spectral(args.n, None),
        (DataStream::TimeSeries(_), false) => {
            SamplingSpec::temporal(args.n, args.gap.map_or(TemporalGap::Cover, TemporalGap::Samples))
        }
    };
    if y.kind() != z.kind() {
        return Err(Error::input("cannot compare an image with a time series"));
    }
    let spec = match (&y, &z) {
        (DataStream::TimeSeries(a), DataStream::TimeSeries(b)) if args.spectral && a.len() != b.len() => SamplingSpec {
            spectral_length: Some(a.len().min(b.len())),
            ..spec
        },
        _ => spec,
    };
    let mut rng = from_seed(args.seed);
    let (ys, zs) = draw_pair(&prepare(&y, &spec)?, &prepare(&z, &spec)?, &spec, &mut rng)?;
    let config = median_heuristic(&zs, DEFAULT_SUBSET_SIZE)?;
    let result = two_sample_test_with(&ys, &zs, &config, args.alpha, args.shuffles, &mut rng)?;
    Ok(TestDocument {
        y: args.y.clone(),
        z: args.z.clone(),
        n: args.n,
        shuffles: args.shuffles,
        seed: args.seed,
        result,
    })
}

pub fn cmd_test(args: &TestArgs) -> i32 {
    exit_with((|| {
        let doc = two_sample(args)?;
        if args.json {
            println!("{}", serde_json::to_string_pretty(&doc).map_err(|e| Error::Internal(e.to_string()))?);
        } else {
            let r = &doc.result;
            println!("mmd2      {:.6e}", r.mmd2);
            println!("threshold {:.6e} (alpha {})", r.threshold, r.alpha);
            println!(
                "decision  {}",
                if r.reject_null { "reject: different distributions" } else { "no rejection" }
            );
        }
        Ok(())
    })())
}

// ---------------------------------------------------------------------------
// synth and validate

pub fn synth(args: &SynthArgs) -> Result<PathBuf> {
    let spec_arg = args.spec.as_ref().map(|p| p.to_string_lossy().into_owned());
    let spec = synthetic_spec(spec_arg.as_deref(), args.seed)?;
    let d = generate_synthetic(&spec)?;
    let manifest = write_dataset(&args.out, &d.manifest, &d.library, &d.tests)?;
    let spec_text = toml::to_string_pretty(&spec).map_err(|e| Error::Internal(e.to_string()))?;
    write_file(&args.out.join("synthetic.toml"), spec_text.as_bytes())?;
    Ok(manifest)
}

pub fn cmd_synth(args: &SynthArgs) -> i32 {
    exit_with(synth(args).map(|m| println!("wrote {}", m.display())))
}

pub fn validate(args: &ValidateArgs) -> Result<ValidationReport> {
    let data = load(&args.dataset, args.pipeline.seed)?;
    let cfg = args.pipeline.apply(data.base.clone())?;
    Ok(validate_dataset(&data.library, &data.tests, &cfg))
}

pub fn cmd_validate(args: &ValidateArgs) -> i32 {
    let report = match validate(args) {
        Ok(r) => r,
        Err(e) => return report_error(&e),
    };
    println!("{} trials checked", report.trials_checked);
    for (label, list) in [
        ("infeasible", &report.infeasible),
        ("missing", &report.missing),
        ("constant", &report.constant),
    ] {
        const SHOWN: usize = 12;
        for i in list.iter().take(SHOWN) {
            println!("  {label:<10} {} / {}: {}", i.trial, i.source, i.message);
        }
        if list.len() > SHOWN {
            println!("  {label:<10} ... and {} more", list.len() - SHOWN);
        }
    }
    if let Some(path) = &args.out {
        if let Err(e) = write_json(path, &report) {
            return report_error(&e);
        }
    }
    if report.is_ok() {
        println!("ok");
        0
    } else {
        Error::Shape(String::new()).exit_code()
    }
}
