//! Sample extraction from images, low-frequency series and vibration spectra,
//! plus color conversion and the cross-user mean shift.

use std::sync::Arc;

use rand::Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samples::{check_same_dim, Domain, SampleSet};

/// Default bound on the randomized start region, as a fraction of the stream.
pub const DEFAULT_INITIAL_WINDOW: f64 = 0.0115;

/// An image with interleaved channels; pixel `(a, b)` (column, row) starts at
/// `(b * width + a) * channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Declared maximum value (1 for unit-range data, 255 for 8-bit).
    pub scale: f64,
    pub data: Vec<f64>,
    pub channel_names: Vec<String>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, scale: f64, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::shape(format!(
                "image dimensions must be positive, got {width}x{height}x{channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::shape(format!(
                "image buffer holds {} values, expected {width}x{height}x{channels} = {}",
                data.len(),
                width * height * channels
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::shape(format!("image scale must be > 0, got {scale}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::shape("image contains non-finite values"));
        }
        Ok(Self {
            width,
            height,
            channels,
            scale,
            data,
            channel_names: (0..channels).map(|c| format!("c{c}")).collect(),
        })
    }

    #[inline]
    pub fn pixel(&self, a: usize, b: usize) -> &[f64] {
        let at = (b * self.width + a) * self.channels;
        &self.data[at..at + self.channels]
    }
}

/// A multi-channel series sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub channels: Vec<Vec<f64>>,
    pub rate: f64,
    pub channel_names: Vec<String>,
}

impl TimeSeries {
    pub fn new(channels: Vec<Vec<f64>>, rate: f64) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::shape("time series needs at least one channel"));
        }
        let len = channels[0].len();
        if len < 2 {
            return Err(Error::shape(format!("time series needs at least 2 samples, got {len}")));
        }
        if let Some((c, ch)) = channels.iter().enumerate().find(|(_, ch)| ch.len() != len) {
            return Err(Error::shape(format!(
                "channel {c} has {} samples, channel 0 has {len}",
                ch.len()
            )));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::shape(format!("sampling rate must be > 0, got {rate}")));
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::shape("time series contains non-finite values"));
        }
        let channel_names = (0..channels.len()).map(|c| format!("c{c}")).collect();
        Ok(Self {
            channels,
            rate,
            channel_names,
        })
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    fn stacked(&self, t: usize, out: &mut Vec<f64>) {
        out.extend(self.channels.iter().map(|ch| ch[t]));
    }

    pub fn truncated(&self, len: usize) -> TimeSeries {
        let len = len.min(self.len());
        TimeSeries {
            channels: self.channels.iter().map(|c| c[..len].to_vec()).collect(),
            rate: self.rate,
            channel_names: self.channel_names.clone(),
        }
    }

    /// True when every channel holds a single repeated value.
    pub fn is_constant(&self) -> bool {
        self.channels
            .iter()
            .all(|ch| ch.iter().all(|v| *v == ch[0]))
    }
}

/// One raw information-source stream of a trial.
#[derive(Debug, Clone, PartialEq)]
pub enum DataStream {
    Image(Image),
    TimeSeries(TimeSeries),
}

impl DataStream {
    pub fn kind(&self) -> StreamKind {
        match self {
            DataStream::Image(_) => StreamKind::Image,
            DataStream::TimeSeries(_) => StreamKind::TimeSeries,
        }
    }

    pub fn channel_count(&self) -> usize {
        match self {
            DataStream::Image(img) => img.channels,
            DataStream::TimeSeries(ts) => ts.channel_count(),
        }
    }

    /// Number of points along the sampled axis (pixels or time steps).
    pub fn point_count(&self) -> usize {
        match self {
            DataStream::Image(img) => img.width * img.height,
            DataStream::TimeSeries(ts) => ts.len(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            DataStream::Image(img) => (0..img.channels).all(|c| {
                let first = img.data[c];
                img.data.iter().skip(c).step_by(img.channels).all(|v| *v == first)
            }),
            DataStream::TimeSeries(ts) => ts.is_constant(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Image,
    TimeSeries,
}

/// Per-channel DFT magnitudes over bins in `(0, cap]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub magnitudes: Vec<Vec<f64>>,
    pub bin_frequencies: Vec<f64>,
}

impl Spectrum {
    pub fn bin_count(&self) -> usize {
        self.bin_frequencies.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    EquidistantSpatial,
    EquidistantTemporal,
    RandomSpectral,
}

impl Strategy {
    pub fn domain(self) -> Domain {
        match self {
            Strategy::EquidistantSpatial => Domain::Spatial,
            Strategy::EquidistantTemporal => Domain::Temporal,
            Strategy::RandomSpectral => Domain::Spectral,
        }
    }
}

/// Spacing between consecutive temporal samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalGap {
    Samples(usize),
    /// Converted at the stream rate, rounded to the nearest sample.
    Seconds(f64),
    /// Largest gap that keeps all `n` points inside the stream from any start
    /// in the initial window.
    Cover,
}

/// How multi-channel points enter the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// One point per location holding every channel.
    #[default]
    Stacked,
    /// One scalar MMD per channel, averaged.
    PerChannel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingSpec {
    pub strategy: Strategy,
    pub n: usize,
    pub temporal_gap: TemporalGap,
    /// Column and row spacing `(d_a, d_b)` in pixels.
    pub spatial_gaps: (usize, usize),
    /// Upper spectral bound in Hz; `None` keeps every bin up to Nyquist.
    pub frequency_cap: Option<f64>,
    /// Fraction of the stream eligible as the randomized start region.
    pub initial_window: f64,
    pub channel_mode: ChannelMode,
    /// Convert RGB images to HSV before spatial sampling.
    pub hsv: bool,
    /// Truncate series to this many samples before the DFT so every trial
    /// shares one bin grid.
    pub spectral_length: Option<usize>,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            strategy: Strategy::EquidistantTemporal,
            n: 400,
            temporal_gap: TemporalGap::Cover,
            spatial_gaps: (17, 18),
            frequency_cap: None,
            initial_window: DEFAULT_INITIAL_WINDOW,
            channel_mode: ChannelMode::Stacked,
            hsv: true,
            spectral_length: None,
        }
    }
}

impl SamplingSpec {
    pub fn spatial(n: usize, gaps: (usize, usize)) -> Self {
        Self {
            strategy: Strategy::EquidistantSpatial,
            n,
            spatial_gaps: gaps,
            ..Self::default()
        }
    }

    pub fn temporal(n: usize, gap: TemporalGap) -> Self {
        Self {
            strategy: Strategy::EquidistantTemporal,
            n,
            temporal_gap: gap,
            ..Self::default()
        }
    }

    pub fn spectral(n: usize, frequency_cap: Option<f64>) -> Self {
        Self {
            strategy: Strategy::RandomSpectral,
            n,
            frequency_cap,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::input("sampling spec needs n >= 1"));
        }
        if self.spatial_gaps.0 == 0 || self.spatial_gaps.1 == 0 {
            return Err(Error::input("spatial gaps must be >= 1"));
        }
        if let TemporalGap::Samples(0) = self.temporal_gap {
            return Err(Error::input("temporal gap must be >= 1 sample"));
        }
        if let TemporalGap::Seconds(s) = self.temporal_gap {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::input(format!("temporal gap must be > 0 s, got {s}")));
            }
        }
        if !(self.initial_window > 0.0 && self.initial_window <= 1.0) {
            return Err(Error::input(format!(
                "initial window must lie in (0, 1], got {}",
                self.initial_window
            )));
        }
        if let Some(cap) = self.frequency_cap {
            if !(cap.is_finite() && cap > 0.0) {
                return Err(Error::input(format!("frequency cap must be > 0, got {cap}")));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// color

/// Converts a 3-channel RGB image to HSV with every channel in `[0, 1]`
/// (hue as a fraction of a full turn, in `[0, 1)`).
pub fn rgb_to_hsv(img: &Image) -> Result<Image> {
    if img.channels != 3 {
        return Err(Error::input(format!(
            "HSV conversion needs 3 channels, image has {}",
            img.channels
        )));
    }
    let mut data = Vec::with_capacity(img.data.len());
    for px in img.data.chunks_exact(3) {
        let (r, g, b) = (px[0] / img.scale, px[1] / img.scale, px[2] / img.scale);
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let delta = max - min;
        let h = if delta <= 0.0 {
            0.0
        } else if max == r {
            ((g - b) / delta).rem_euclid(6.0)
        } else if max == g {
            (b - r) / delta + 2.0
        } else {
            (r - g) / delta + 4.0
        } / 6.0;
        let h = if h >= 1.0 { 0.0 } else { h };
        let s = if max > 0.0 { delta / max } else { 0.0 };
        data.extend_from_slice(&[h, s, max]);
    }
    Ok(Image {
        width: img.width,
        height: img.height,
        channels: 3,
        scale: 1.0,
        data,
        channel_names: vec!["h".into(), "s".into(), "v".into()],
    })
}

// ---------------------------------------------------------------------------
// spatial

/// A rectangular sampling grid anchored at `(a0, b0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPlan {
    pub a0: usize,
    pub b0: usize,
    pub cols: usize,
    pub rows: usize,
    pub gaps: (usize, usize),
    pub n: usize,
}

impl GridPlan {
    /// Grid locations `(a, b)` in row-major order, exactly `n` of them.
    pub fn locations(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).map(move |i| {
            let (r, c) = (i / self.cols, i % self.cols);
            (self.a0 + c * self.gaps.0, self.b0 + r * self.gaps.1)
        })
    }

    /// Grid for an image of the given size, at the origin.
    ///
    /// The shape follows the image aspect ratio so the points spread over as
    /// much of the image as the gaps allow.
    pub fn shape(width: usize, height: usize, n: usize, gaps: (usize, usize)) -> Result<GridPlan> {
        let (da, db) = gaps;
        if width == 0 || height == 0 || da == 0 || db == 0 || n == 0 {
            return Err(Error::input("grid needs positive image size, gaps and n"));
        }
        let max_cols = (width - 1) / da + 1;
        let max_rows = (height - 1) / db + 1;
        if max_cols * max_rows < n {
            return Err(Error::input(format!(
                "{n} grid points with gaps ({da},{db}) do not fit a {width}x{height} image; at most {} fit",
                max_cols * max_rows
            )));
        }
        let ideal = (n as f64 * max_cols as f64 / max_rows as f64).sqrt().ceil() as usize;
        let mut cols = ideal.clamp(1, max_cols.min(n));
        let mut rows = n.div_ceil(cols);
        if rows > max_rows {
            rows = max_rows;
            cols = n.div_ceil(rows);
        }
        Ok(GridPlan {
            a0: 0,
            b0: 0,
            cols,
            rows,
            gaps,
            n,
        })
    }

    /// Draws the grid start uniformly inside the initial area, which spans a
    /// `sqrt(window)` fraction of each axis, intersected with the positions
    /// that keep the grid in bounds.
    pub fn draw<R: Rng + ?Sized>(
        width: usize,
        height: usize,
        spec: &SamplingSpec,
        rng: &mut R,
    ) -> Result<GridPlan> {
        let mut plan = Self::shape(width, height, spec.n, spec.spatial_gaps)?;
        let slack_a = (width - 1) - plan.gaps.0 * (plan.cols - 1);
        let slack_b = (height - 1) - plan.gaps.1 * (plan.rows.saturating_sub(1));
        let side = spec.initial_window.sqrt();
        let ext_a = ((side * width as f64).floor() as usize).max(1) - 1;
        let ext_b = ((side * height as f64).floor() as usize).max(1) - 1;
        plan.a0 = rng.random_range(0..=slack_a.min(ext_a));
        plan.b0 = rng.random_range(0..=slack_b.min(ext_b));
        Ok(plan)
    }

    pub fn extract(&self, img: &Image) -> Result<SampleSet> {
        let (last_a, last_b) = (
            self.a0 + self.gaps.0 * (self.cols - 1),
            self.b0 + self.gaps.1 * (self.rows - 1),
        );
        if last_a >= img.width || last_b >= img.height {
            return Err(Error::input(format!(
                "grid reaches pixel ({last_a},{last_b}) outside a {}x{} image",
                img.width, img.height
            )));
        }
        let mut data = Vec::with_capacity(self.n * img.channels);
        for (a, b) in self.locations() {
            data.extend_from_slice(img.pixel(a, b));
        }
        Ok(SampleSet::from_flat(img.channels, data)?.with_source("", Domain::Spatial))
    }
}

/// Equidistant grid sampling from a randomized start in the initial area.
pub fn equidistant_spatial<R: Rng + ?Sized>(img: &Image, spec: &SamplingSpec, rng: &mut R) -> Result<SampleSet> {
    spec.validate()?;
    GridPlan::draw(img.width, img.height, spec, rng)?.extract(img)
}

// ---------------------------------------------------------------------------
// temporal

/// `n` indices `t0, t0 + gap, …`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalPlan {
    pub t0: usize,
    pub gap: usize,
    pub n: usize,
}

impl TemporalPlan {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).map(move |i| self.t0 + i * self.gap)
    }

    fn window_len(len: usize, spec: &SamplingSpec) -> usize {
        ((spec.initial_window * len as f64).floor() as usize).max(1)
    }

    /// Resolves the spacing in samples for a stream of `len` samples at `rate`.
    pub fn resolve_gap(len: usize, rate: f64, spec: &SamplingSpec) -> Result<usize> {
        let gap = match spec.temporal_gap {
            TemporalGap::Samples(g) => g,
            TemporalGap::Seconds(s) => ((s * rate).round() as usize).max(1),
            TemporalGap::Cover => {
                if spec.n <= 1 {
                    1
                } else {
                    let w = Self::window_len(len, spec);
                    (len.saturating_sub(w) / (spec.n - 1)).max(1)
                }
            }
        };
        Ok(gap)
    }

    pub fn draw<R: Rng + ?Sized>(len: usize, rate: f64, spec: &SamplingSpec, rng: &mut R) -> Result<TemporalPlan> {
        let gap = Self::resolve_gap(len, rate, spec)?;
        let span = (spec.n - 1) * gap;
        if len == 0 || span > len - 1 {
            return Err(Error::input(format!(
                "stream of {len} samples is too short for {} points at gap {gap}",
                spec.n
            )));
        }
        let slack = len - 1 - span;
        let t0 = rng.random_range(0..=slack.min(Self::window_len(len, spec) - 1));
        Ok(TemporalPlan { t0, gap, n: spec.n })
    }

    pub fn extract(&self, ts: &TimeSeries) -> Result<SampleSet> {
        let last = self.t0 + (self.n - 1) * self.gap;
        if last >= ts.len() {
            return Err(Error::input(format!(
                "temporal plan reaches index {last} of a {}-sample stream",
                ts.len()
            )));
        }
        let mut data = Vec::with_capacity(self.n * ts.channel_count());
        for t in self.indices() {
            ts.stacked(t, &mut data);
        }
        Ok(SampleSet::from_flat(ts.channel_count(), data)?.with_source("", Domain::Temporal))
    }
}

/// Equidistant temporal sampling from a randomized start in the initial window.
pub fn equidistant_temporal<R: Rng + ?Sized>(ts: &TimeSeries, spec: &SamplingSpec, rng: &mut R) -> Result<SampleSet> {
    spec.validate()?;
    TemporalPlan::draw(ts.len(), ts.rate, spec, rng)?.extract(ts)
}

// ---------------------------------------------------------------------------
// spectral

/// DFT magnitudes of every channel, keeping bins with `0 < f ≤ cap`.
///
/// `cap` defaults to Nyquist; a cap above Nyquist is rejected. No window is
/// applied.
pub fn spectral_magnitudes(ts: &TimeSeries, frequency_cap: Option<f64>) -> Result<Spectrum> {
    let n = ts.len();
    if n < 2 {
        return Err(Error::input("spectrum needs at least 2 samples"));
    }
    let nyquist = ts.rate / 2.0;
    let cap = frequency_cap.unwrap_or(nyquist);
    if cap > nyquist * (1.0 + 1e-12) {
        return Err(Error::input(format!(
            "frequency cap {cap} Hz exceeds Nyquist {nyquist} Hz"
        )));
    }
    let resolution = ts.rate / n as f64;
    let bins: Vec<usize> = (1..=n / 2)
        .take_while(|&k| k as f64 * resolution <= cap * (1.0 + 1e-12))
        .collect();
    if bins.is_empty() {
        return Err(Error::input(format!(
            "frequency cap {cap} Hz is below the first bin at {resolution} Hz"
        )));
    }
    let fft = fft_plan(n);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let magnitudes = ts
        .channels
        .iter()
        .map(|ch| {
            for (b, v) in buf.iter_mut().zip(ch) {
                *b = Complex::new(*v, 0.0);
            }
            fft.process(&mut buf);
            bins.iter().map(|&k| buf[k].norm()).collect()
        })
        .collect();
    Ok(Spectrum {
        magnitudes,
        bin_frequencies: bins.iter().map(|&k| k as f64 * resolution).collect(),
    })
}

fn fft_plan(n: usize) -> Arc<dyn rustfft::Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

fn check_same_grid(a: &Spectrum, b: &Spectrum) -> Result<()> {
    if a.bin_frequencies != b.bin_frequencies {
        return Err(Error::input(format!(
            "spectra use different bin grids ({} vs {} bins)",
            a.bin_count(),
            b.bin_count()
        )));
    }
    if a.magnitudes.len() != b.magnitudes.len() {
        return Err(Error::input(format!(
            "spectra have {} vs {} channels",
            a.magnitudes.len(),
            b.magnitudes.len()
        )));
    }
    Ok(())
}

/// Draws `n` distinct bin indices uniformly at random.
pub fn draw_bins<R: Rng + ?Sized>(bins: usize, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n > bins {
        return Err(Error::input(format!(
            "cannot draw {n} distinct bins from {bins}"
        )));
    }
    Ok(rand::seq::index::sample(rng, bins, n).into_vec())
}

pub fn spectral_points(spec: &Spectrum, bins: &[usize]) -> Result<SampleSet> {
    let channels = spec.magnitudes.len();
    let mut data = Vec::with_capacity(bins.len() * channels);
    for &k in bins {
        data.extend(spec.magnitudes.iter().map(|ch| ch[k]));
    }
    Ok(SampleSet::from_flat(channels, data)?.with_source("", Domain::Spectral))
}

/// Magnitudes from both spectra at one shared set of random, unique bins.
pub fn random_spectral_pair<R: Rng + ?Sized>(
    spec_y: &Spectrum,
    spec_z: &Spectrum,
    n: usize,
    rng: &mut R,
) -> Result<(SampleSet, SampleSet)> {
    check_same_grid(spec_y, spec_z)?;
    let bins = draw_bins(spec_y.bin_count(), n, rng)?;
    Ok((spectral_points(spec_y, &bins)?, spectral_points(spec_z, &bins)?))
}

// ---------------------------------------------------------------------------
// cross-user compensation

/// `z* = z + (ȳ − z̄)`: moves the test-side set onto the library-side mean.
pub fn cross_user_shift(y: &SampleSet, z: &SampleSet) -> Result<SampleSet> {
    check_same_dim(y, z)?;
    let offset: Vec<f64> = y.mean().iter().zip(z.mean()).map(|(a, b)| a - b).collect();
    Ok(z.translated(&offset))
}

// ---------------------------------------------------------------------------
// prepared streams and paired draws

/// A stream after color conversion or DFT, ready for repeated draws.
#[derive(Debug, Clone, PartialEq)]
pub enum PreparedStream {
    Image(Image),
    Series(TimeSeries),
    Spectrum(Spectrum),
}

/// Applies the per-stream transform implied by `spec` (HSV for images when
/// enabled, DFT for spectral sampling).
pub fn prepare(stream: &DataStream, spec: &SamplingSpec) -> Result<PreparedStream> {
    match (spec.strategy, stream) {
        (Strategy::EquidistantSpatial, DataStream::Image(img)) => Ok(PreparedStream::Image(
            if spec.hsv { rgb_to_hsv(img)? } else { img.clone() },
        )),
        (Strategy::EquidistantTemporal, DataStream::TimeSeries(ts)) => Ok(PreparedStream::Series(ts.clone())),
        (Strategy::RandomSpectral, DataStream::TimeSeries(ts)) => {
            let ts = match spec.spectral_length {
                Some(len) if len < ts.len() => ts.truncated(len),
                Some(len) if len > ts.len() => {
                    return Err(Error::input(format!(
                        "stream of {} samples is shorter than the spectral length {len}",
                        ts.len()
                    )))
                }
                _ => ts.clone(),
            };
            Ok(PreparedStream::Spectrum(spectral_magnitudes(&ts, spec.frequency_cap)?))
        }
        (strategy, stream) => Err(Error::input(format!(
            "{strategy:?} sampling cannot be applied to a {:?} stream",
            stream.kind()
        ))),
    }
}

/// Draws one sample-set pair sharing start location (or bins) where the
/// stream shapes allow.
pub fn draw_pair<R: Rng + ?Sized>(
    y: &PreparedStream,
    z: &PreparedStream,
    spec: &SamplingSpec,
    rng: &mut R,
) -> Result<(SampleSet, SampleSet)> {
    match (y, z) {
        (PreparedStream::Image(iy), PreparedStream::Image(iz)) => {
            let plan = GridPlan::draw(iy.width.min(iz.width), iy.height.min(iz.height), spec, rng)?;
            Ok((plan.extract(iy)?, plan.extract(iz)?))
        }
        (PreparedStream::Series(ty), PreparedStream::Series(tz)) => {
            let plan = TemporalPlan::draw(ty.len().min(tz.len()), ty.rate, spec, rng)?;
            Ok((plan.extract(ty)?, plan.extract(tz)?))
        }
        (PreparedStream::Spectrum(sy), PreparedStream::Spectrum(sz)) => random_spectral_pair(sy, sz, spec.n, rng),
        _ => Err(Error::input("paired streams must share one representation")),
    }
}
