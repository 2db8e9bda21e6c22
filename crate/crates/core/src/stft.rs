//! STFT analysis/synthesis with perfect-reconstruction overlap-add, plus the
//! quasi-octave band layout that sets the granularity of mixing parameters.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quasi-octave band edges used for parameter estimation at 48 kHz.
pub const DEFAULT_BAND_EDGES_HZ: [f64; 8] =
    [0.0, 400.0, 800.0, 1600.0, 3200.0, 6400.0, 13200.0, 24000.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// Periodic square-root Hann, used for both analysis and synthesis.
    #[default]
    SqrtHann,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub hop: usize,
    #[serde(default)]
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            sample_rate: 48_000,
            fft_size: 2048,
            hop: 1024,
            window: WindowKind::SqrtHann,
        }
    }
}

impl StftConfig {
    pub fn new(sample_rate: u32, fft_size: usize, hop: usize) -> Result<Self> {
        let config = Self {
            sample_rate,
            fft_size,
            hop,
            window: WindowKind::SqrtHann,
        };
        config.validate()?;
        Ok(config)
    }

    /// 50% overlap with the FFT size scaled from 2048 @ 48 kHz to the power of
    /// two nearest the equivalent duration at `sample_rate`.
    pub fn for_sample_rate(sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidSampleRate);
        }
        let target = 2048.0 * sample_rate as f64 / 48_000.0;
        let exponent = target.log2().round().clamp(4.0, 20.0) as u32;
        let fft_size = 1usize << exponent;
        Self::new(sample_rate, fft_size, fft_size / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidSampleRate);
        }
        if self.fft_size < 2 || !self.fft_size.is_power_of_two() {
            return Err(Error::FftSizeNotPowerOfTwo(self.fft_size));
        }
        if self.hop == 0 || !self.fft_size.is_multiple_of(self.hop) || !matches!(self.fft_size / self.hop, 2 | 4)
        {
            return Err(Error::InvalidHop {
                fft_size: self.fft_size,
                hop: self.hop,
            });
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate as f64 / self.fft_size as f64
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    /// Zero padding applied before the first and after the last input sample.
    pub fn padding(&self) -> usize {
        self.fft_size - self.hop
    }

    /// Number of frames needed so every input sample is covered by a full
    /// complement of overlapping frames.
    pub fn frame_count(&self, len: usize) -> usize {
        let span = len + 2 * self.padding() - self.fft_size;
        span.div_ceil(self.hop) + 1
    }

    pub fn synthesized_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.fft_size
        }
    }

    pub fn analysis_window(&self) -> Vec<f64> {
        match self.window {
            WindowKind::SqrtHann => (0..self.fft_size)
                .map(|n| {
                    let hann = 0.5 - 0.5 * (2.0 * PI * n as f64 / self.fft_size as f64).cos();
                    hann.sqrt()
                })
                .collect(),
        }
    }

    /// Synthesis window normalised so that the analysis/synthesis product
    /// overlap-adds to exactly one.
    pub fn synthesis_window(&self) -> Vec<f64> {
        let analysis = self.analysis_window();
        let overlap = self.fft_size / self.hop;
        (0..self.fft_size)
            .map(|n| {
                let sum: f64 = (0..overlap)
                    .map(|k| {
                        let w = analysis[(n + k * self.hop) % self.fft_size];
                        w * w
                    })
                    .sum();
                analysis[n] / sum
            })
            .collect()
    }

    /// Largest deviation from one of the overlap-added window product.
    pub fn cola_deviation(&self) -> f64 {
        let analysis = self.analysis_window();
        let synthesis = self.synthesis_window();
        (0..self.hop)
            .map(|n| {
                let sum: f64 = (0..self.fft_size / self.hop)
                    .map(|k| {
                        let i = n + k * self.hop;
                        analysis[i] * synthesis[i]
                    })
                    .sum();
                (sum - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Complex (bin, frame) grid stored frame-major.
#[derive(Clone, PartialEq)]
pub struct Spectrogram {
    bins: usize,
    frames: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for Spectrogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectrogram")
            .field("bins", &self.bins)
            .field("frames", &self.frames)
            .finish()
    }
}

impl Spectrogram {
    pub fn zeros(bins: usize, frames: usize) -> Self {
        Self {
            bins,
            frames,
            data: vec![Complex64::new(0.0, 0.0); bins * frames],
        }
    }

    pub fn from_fn(bins: usize, frames: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(bins * frames);
        for t in 0..frames {
            for k in 0..bins {
                data.push(f(k, t));
            }
        }
        Self { bins, frames, data }
    }

    pub fn from_frames(bins: usize, data: Vec<Complex64>) -> Result<Self> {
        if bins == 0 || !data.len().is_multiple_of(bins) {
            return Err(Error::DimensionMismatch {
                expected: format!("a multiple of {bins} values"),
                actual: data.len().to_string(),
            });
        }
        Ok(Self {
            bins,
            frames: data.len() / bins,
            data,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.bins, self.frames)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[frame * self.bins + bin]
    }

    pub fn set(&mut self, bin: usize, frame: usize, value: Complex64) {
        self.data[frame * self.bins + bin] = value;
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [Complex64] {
        &mut self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn map(&self, mut f: impl FnMut(Complex64) -> Complex64) -> Self {
        Self {
            bins: self.bins,
            frames: self.frames,
            data: self.data.iter().map(|&c| f(c)).collect(),
        }
    }

    pub(crate) fn check_dims(&self, bins: usize, frames: usize) -> Result<()> {
        if self.dims() != (bins, frames) {
            return Err(Error::DimensionMismatch {
                expected: format!("{bins} bins x {frames} frames"),
                actual: format!("{} bins x {} frames", self.bins, self.frames),
            });
        }
        Ok(())
    }
}

/// Left/right spectrogram pair with identical dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct StereoSpectrogram {
    left: Spectrogram,
    right: Spectrogram,
}

impl StereoSpectrogram {
    pub fn new(left: Spectrogram, right: Spectrogram) -> Result<Self> {
        right.check_dims(left.bins(), left.frames())?;
        Ok(Self { left, right })
    }

    pub fn left(&self) -> &Spectrogram {
        &self.left
    }

    pub fn right(&self) -> &Spectrogram {
        &self.right
    }

    pub fn bins(&self) -> usize {
        self.left.bins()
    }

    pub fn frames(&self) -> usize {
        self.left.frames()
    }

    pub fn tile(&self, bin: usize, frame: usize) -> (Complex64, Complex64) {
        (self.left.get(bin, frame), self.right.get(bin, frame))
    }

    pub fn is_finite(&self) -> bool {
        self.left.is_finite() && self.right.is_finite()
    }

    pub fn into_channels(self) -> (Spectrogram, Spectrogram) {
        (self.left, self.right)
    }
}

/// Reusable analysis/synthesis engine for one configuration.
pub struct Stft {
    config: StftConfig,
    analysis_window: Vec<f64>,
    synthesis_window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(config: &StftConfig) -> Result<Self> {
        config.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            analysis_window: config.analysis_window(),
            synthesis_window: config.synthesis_window(),
            forward: planner.plan_fft_forward(config.fft_size),
            inverse: planner.plan_fft_inverse(config.fft_size),
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    /// Frame `t` covers padded samples `[t*hop, t*hop + fft_size)`, where the
    /// padded signal has `fft_size - hop` zeros prepended.
    pub fn analyze(&self, samples: &[f64]) -> Result<Spectrogram> {
        let n = self.config.fft_size;
        if samples.len() < n {
            return Err(Error::InputTooShort {
                len: samples.len(),
                min: n,
            });
        }
        let pad = self.config.padding();
        let hop = self.config.hop;
        let frames = self.config.frame_count(samples.len());
        let bins = self.config.bins();
        let mut data = Vec::with_capacity(bins * frames);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for t in 0..frames {
            let start = (t * hop) as isize - pad as isize;
            for (i, slot) in buf.iter_mut().enumerate() {
                let idx = start + i as isize;
                let x = if idx >= 0 && (idx as usize) < samples.len() {
                    samples[idx as usize]
                } else {
                    0.0
                };
                *slot = Complex64::new(x * self.analysis_window[i], 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            data.extend_from_slice(&buf[..bins]);
        }
        Spectrogram::from_frames(bins, data)
    }

    /// Overlap-add synthesis over the full padded span,
    /// `(frames - 1) * hop + fft_size` samples long.
    pub fn synthesize(&self, spec: &Spectrogram) -> Result<Vec<f64>> {
        let n = self.config.fft_size;
        let bins = self.config.bins();
        if spec.bins() != bins {
            return Err(Error::DimensionMismatch {
                expected: format!("{bins} bins"),
                actual: format!("{} bins", spec.bins()),
            });
        }
        let hop = self.config.hop;
        let mut out = vec![0.0; self.config.synthesized_len(spec.frames())];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let scale = 1.0 / n as f64;
        for t in 0..spec.frames() {
            let frame = spec.frame(t);
            buf[..bins].copy_from_slice(frame);
            for k in 1..bins - 1 {
                buf[n - k] = frame[k].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let offset = t * hop;
            for (i, c) in buf.iter().enumerate() {
                out[offset + i] += c.re * scale * self.synthesis_window[i];
            }
        }
        Ok(out)
    }

    /// Synthesize and cut the padding back off, returning `len` samples.
    pub fn synthesize_trimmed(&self, spec: &Spectrogram, len: usize) -> Result<Vec<f64>> {
        let full = self.synthesize(spec)?;
        let pad = self.config.padding();
        if full.len() < pad + len {
            return Err(Error::DimensionMismatch {
                expected: format!("at least {} synthesized samples", pad + len),
                actual: full.len().to_string(),
            });
        }
        Ok(full[pad..pad + len].to_vec())
    }

    pub fn analyze_stereo(&self, left: &[f64], right: &[f64]) -> Result<StereoSpectrogram> {
        if left.len() != right.len() {
            return Err(Error::ChannelLengthMismatch {
                left: left.len(),
                right: right.len(),
            });
        }
        StereoSpectrogram::new(self.analyze(left)?, self.analyze(right)?)
    }
}

pub fn stft_analyze(left: &[f64], right: &[f64], config: &StftConfig) -> Result<StereoSpectrogram> {
    Stft::new(config)?.analyze_stereo(left, right)
}

pub fn stft_synthesize(spec: &Spectrogram, config: &StftConfig) -> Result<Vec<f64>> {
    Stft::new(config)?.synthesize(spec)
}

pub fn stft_synthesize_stereo(
    spec: &StereoSpectrogram,
    config: &StftConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let stft = Stft::new(config)?;
    Ok((stft.synthesize(spec.left())?, stft.synthesize(spec.right())?))
}

/// Partition of FFT bins into contiguous frequency bands.
#[derive(Clone, Debug, PartialEq)]
pub struct BandLayout {
    edges_hz: Vec<f64>,
    band_of_bin: Vec<usize>,
    ranges: Vec<Range<usize>>,
}

impl BandLayout {
    pub fn bands(&self) -> usize {
        self.ranges.len()
    }

    pub fn bins(&self) -> usize {
        self.band_of_bin.len()
    }

    pub fn edges_hz(&self) -> &[f64] {
        &self.edges_hz
    }

    pub fn band_of_bin(&self, bin: usize) -> usize {
        self.band_of_bin[bin]
    }

    pub fn bins_of_band(&self, band: usize) -> Range<usize> {
        self.ranges[band].clone()
    }

    /// `(lo, hi)` edge frequencies of a band in Hz.
    pub fn band_edges(&self, band: usize) -> (f64, f64) {
        (self.edges_hz[band], self.edges_hz[band + 1])
    }

    /// One band per bin. Estimating parameters at this granularity makes the
    /// custom side vanish identically, which is why bands are wide.
    pub fn per_bin(config: &StftConfig) -> Self {
        let bins = config.bins();
        let bin_hz = config.bin_hz();
        let mut edges_hz: Vec<f64> = (0..bins).map(|k| k as f64 * bin_hz).collect();
        edges_hz.push(config.nyquist_hz() + bin_hz / 2.0);
        Self {
            edges_hz,
            band_of_bin: (0..bins).collect(),
            ranges: (0..bins).map(|k| k..k + 1).collect(),
        }
    }
}

/// Assign each bin centre `k * fs / fft_size` to the band whose edges
/// bracket it. Edges above Nyquist are clipped and empty bands dropped; the
/// Nyquist bin (and anything above the last edge) joins the last band.
pub fn make_band_layout(config: &StftConfig, edges_hz: &[f64]) -> Result<BandLayout> {
    config.validate()?;
    if edges_hz.len() < 2
        || edges_hz[0] != 0.0
        || edges_hz.iter().any(|e| !e.is_finite())
        || edges_hz.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidBandEdges);
    }
    let nyquist = config.nyquist_hz();
    let mut clipped: Vec<f64> = Vec::with_capacity(edges_hz.len());
    for &e in edges_hz {
        let e = e.min(nyquist);
        if clipped.last().is_none_or(|&last| e > last) {
            clipped.push(e);
        }
    }

    let bins = config.bins();
    let bin_hz = config.bin_hz();
    let last_edge_band = clipped.len() - 2;
    let raw_band: Vec<usize> = (0..bins)
        .map(|k| {
            let f = k as f64 * bin_hz;
            clipped
                .windows(2)
                .position(|w| w[0] <= f && f < w[1])
                .unwrap_or(last_edge_band)
        })
        .collect();

    // Drop bands that received no bins and renumber.
    let mut edges = vec![clipped[0]];
    let mut ranges: Vec<Range<usize>> = Vec::new();
    let mut band_of_bin = vec![0; bins];
    for (b, &lo) in clipped.iter().enumerate().take(last_edge_band + 1) {
        let members: Vec<usize> = (0..bins).filter(|&k| raw_band[k] == b).collect();
        if let (Some(&first), Some(&last)) = (members.first(), members.last()) {
            if !ranges.is_empty() {
                edges.push(lo);
            }
            for &k in &members {
                band_of_bin[k] = ranges.len();
            }
            ranges.push(first..last + 1);
        }
    }
    edges.push(nyquist);
    Ok(BandLayout {
        edges_hz: edges,
        band_of_bin,
        ranges,
    })
}
