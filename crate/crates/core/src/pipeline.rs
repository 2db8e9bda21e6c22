//! Stereo enhancement topologies around a monaural enhancer.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::enhancer::{CountingEnhancer, Enhancer};
use crate::error::{Error, Result};
use crate::estimator::{estimate_all, EstimatorConfig, MixingParams};
use crate::io::AudioFile;
use crate::stft::{make_band_layout, BandLayout, Spectrogram, Stft, StftConfig, DEFAULT_BAND_EDGES_HZ};
use crate::transform::{alt_center_remix, cmss_forward, cmss_inverse, MidSideSpectrograms};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    /// Enhance the custom mid, discard the custom side.
    #[default]
    Cms,
    /// Enhance left and right independently.
    Ci,
    /// Custom-mid topology with the parameters pinned to the centre.
    StandardMid,
    /// Enhance both standard mid and side.
    StandardMs,
    /// Enhance both custom mid and custom side.
    CmssBoth,
    /// Enhance the custom mid and remix with the fixed centre inversion.
    AltCenter,
}

impl PipelineMode {
    pub const ALL: [PipelineMode; 6] = [
        PipelineMode::Cms,
        PipelineMode::Ci,
        PipelineMode::StandardMid,
        PipelineMode::StandardMs,
        PipelineMode::CmssBoth,
        PipelineMode::AltCenter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PipelineMode::Cms => "cms",
            PipelineMode::Ci => "ci",
            PipelineMode::StandardMid => "standard-mid",
            PipelineMode::StandardMs => "standard-ms",
            PipelineMode::CmssBoth => "cmss-both",
            PipelineMode::AltCenter => "alt-center",
        }
    }

    /// Enhancer calls per file.
    pub fn invocations(self) -> usize {
        match self {
            PipelineMode::Cms | PipelineMode::StandardMid | PipelineMode::AltCenter => 1,
            PipelineMode::Ci | PipelineMode::StandardMs | PipelineMode::CmssBoth => 2,
        }
    }

    pub fn supports_mono(self) -> bool {
        matches!(self, PipelineMode::Cms | PipelineMode::StandardMid | PipelineMode::Ci)
    }
}

impl fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PipelineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        PipelineMode::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::UnknownMode(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Stereo,
    Mono,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub stft: StftConfig,
    pub band_edges_hz: Vec<f64>,
    pub estimator: EstimatorConfig,
    pub mode: PipelineMode,
    pub output: OutputFormat,
    /// Scale the output down to -1 dBFS peak when it would exceed that.
    pub limiter: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            band_edges_hz: DEFAULT_BAND_EDGES_HZ.to_vec(),
            estimator: EstimatorConfig::default(),
            mode: PipelineMode::Cms,
            output: OutputFormat::Stereo,
            limiter: false,
        }
    }
}

impl PipelineConfig {
    pub fn with_mode(mut self, mode: PipelineMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        make_band_layout(&self.stft, &self.band_edges_hz)?;
        self.estimator.validate()?;
        if self.output == OutputFormat::Mono && !self.mode.supports_mono() {
            return Err(Error::MonoOutputUnsupported(self.mode.name()));
        }
        Ok(())
    }

    /// STFT settings for a given input rate; the configured ones when the
    /// rates agree, otherwise the rate-scaled defaults.
    pub fn stft_for(&self, sample_rate: u32) -> Result<StftConfig> {
        if sample_rate == self.stft.sample_rate {
            Ok(self.stft.clone())
        } else {
            StftConfig::for_sample_rate(sample_rate)
        }
    }
}

pub const LIMITER_CEILING_DBFS: f64 = -1.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub analysis_sec: f64,
    pub estimation_sec: f64,
    pub transform_sec: f64,
    pub enhancement_sec: f64,
    pub reconstruction_sec: f64,
    pub synthesis_sec: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: PipelineMode,
    pub output: OutputFormat,
    pub enhancer: String,
    pub invocations: usize,
    pub sample_rate: u32,
    pub samples: usize,
    pub fft_size: usize,
    pub hop: usize,
    pub frames: usize,
    pub bands: usize,
    pub limiter_gain: f64,
    pub timings: StageTimings,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    /// One channel for mono output, two for stereo.
    pub channels: Vec<Vec<f64>>,
    /// Mixing parameters used by the transform, when the mode has any.
    pub params: Option<MixingParams>,
    pub report: RunReport,
}

struct Clock(Instant);

impl Clock {
    fn start() -> Self {
        Clock(Instant::now())
    }

    fn lap(&mut self) -> f64 {
        let now = Instant::now();
        let dt = now.duration_since(self.0).as_secs_f64();
        self.0 = now;
        dt
    }
}

/// Runs one file through the configured topology.
pub fn process(
    left: &[f64],
    right: &[f64],
    sample_rate: u32,
    config: &PipelineConfig,
    enhancer: &dyn Enhancer,
) -> Result<PipelineOutput> {
    if left.len() != right.len() {
        return Err(Error::ChannelLengthMismatch {
            left: left.len(),
            right: right.len(),
        });
    }
    if left.iter().chain(right).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("input samples"));
    }
    let stft_config = config.stft_for(sample_rate)?;
    let config = PipelineConfig {
        stft: stft_config,
        ..config.clone()
    };
    config.validate()?;
    let layout = make_band_layout(&config.stft, &config.band_edges_hz)?;
    let stft = Stft::new(&config.stft)?;
    let counted = CountingEnhancer::new(enhancer);
    let mode = config.mode;
    let len = left.len();
    let mut timings = StageTimings::default();
    let mut clock = Clock::start();

    let spec = stft.analyze_stereo(left, right)?;
    timings.analysis_sec = clock.lap();
    let frames = spec.frames();

    let (mut channels, params) = if mode == PipelineMode::Ci {
        let (l, r) = spec.into_channels();
        let l = counted.enhance(&l)?;
        let r = counted.enhance(&r)?;
        timings.enhancement_sec = clock.lap();
        let channels = match config.output {
            OutputFormat::Stereo => vec![stft.synthesize_trimmed(&l, len)?, stft.synthesize_trimmed(&r, len)?],
            OutputFormat::Mono => {
                let mixed = Spectrogram::from_frames(
                    l.bins(),
                    l.as_slice().iter().zip(r.as_slice()).map(|(a, b)| 0.5 * (a + b)).collect(),
                )?;
                vec![stft.synthesize_trimmed(&mixed, len)?]
            }
        };
        timings.synthesis_sec = clock.lap();
        (channels, None)
    } else {
        let params = match mode {
            PipelineMode::StandardMid | PipelineMode::StandardMs => MixingParams::centre(layout.bands(), frames),
            _ => estimate_all(&spec, &layout, &config.stft, &config.estimator)?,
        };
        timings.estimation_sec = clock.lap();
        let ms = cmss_forward(&spec, &params, &layout)?;
        timings.transform_sec = clock.lap();
        let mid = counted.enhance(&ms.mid)?;
        let side = match mode {
            PipelineMode::StandardMs | PipelineMode::CmssBoth => counted.enhance(&ms.side)?,
            PipelineMode::AltCenter => ms.side,
            _ => Spectrogram::zeros(ms.side.bins(), ms.side.frames()),
        };
        timings.enhancement_sec = clock.lap();
        let channels = if config.output == OutputFormat::Mono {
            timings.reconstruction_sec = clock.lap();
            vec![stft.synthesize_trimmed(&mid, len)?]
        } else {
            let processed = MidSideSpectrograms {
                mid,
                side,
                params: params.clone(),
            };
            let stereo = if mode == PipelineMode::AltCenter {
                alt_center_remix(&processed)?
            } else {
                cmss_inverse(&processed, &params, &layout)?
            };
            timings.reconstruction_sec = clock.lap();
            vec![
                stft.synthesize_trimmed(stereo.left(), len)?,
                stft.synthesize_trimmed(stereo.right(), len)?,
            ]
        };
        timings.synthesis_sec = clock.lap();
        (channels, Some(params))
    };

    let limiter_gain = if config.limiter {
        limit_peak(&mut channels, LIMITER_CEILING_DBFS)
    } else {
        1.0
    };
    if channels.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("pipeline output"));
    }

    let report = RunReport {
        mode,
        output: config.output,
        enhancer: enhancer.name().to_string(),
        invocations: counted.count(),
        sample_rate,
        samples: len,
        fft_size: config.stft.fft_size,
        hop: config.stft.hop,
        frames,
        bands: layout.bands(),
        limiter_gain,
        timings,
    };
    Ok(PipelineOutput {
        channels,
        params,
        report,
    })
}

/// [`process`] for decoded audio; mono files are rejected.
pub fn process_audio(audio: &AudioFile, config: &PipelineConfig, enhancer: &dyn Enhancer) -> Result<PipelineOutput> {
    if audio.channel_count() != 2 {
        return Err(Error::NotStereo(audio.channel_count()));
    }
    process(&audio.channels[0], &audio.channels[1], audio.sample_rate, config, enhancer)
}

/// Scales every channel by a common gain so the peak sits at the ceiling;
/// returns the gain, 1 when nothing was above it.
pub fn limit_peak(channels: &mut [Vec<f64>], ceiling_dbfs: f64) -> f64 {
    let ceiling = 10f64.powf(ceiling_dbfs / 20.0);
    let peak = channels.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak <= ceiling {
        return 1.0;
    }
    let g = ceiling / peak;
    channels.iter_mut().flatten().for_each(|x| *x *= g);
    g
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandFidelity {
    pub band: usize,
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub active_frames: usize,
    pub mean_abs_dev: f64,
    pub max_abs_dev: f64,
    pub mean_input_theta: f64,
    pub mean_output_theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub bands: Vec<BandFidelity>,
    /// Over every active (band, frame) cell.
    pub mean_abs_dev: f64,
    pub max_abs_dev: f64,
    pub mean_output_theta: f64,
}

/// Band cells within this many dB of the band's loudest input frame count as active.
pub const FIDELITY_ACTIVE_RANGE_DB: f64 = 30.0;

/// Compares per-frame band panning angles (energy-weighted over the band's
/// tiles, no smoothing) of an input and an output pair.
pub fn spatial_fidelity_check(
    input: [&[f64]; 2],
    output: [&[f64]; 2],
    stft: &StftConfig,
    layout: &BandLayout,
) -> Result<FidelityReport> {
    for pair in [input, output] {
        if pair[0].len() != pair[1].len() {
            return Err(Error::ChannelLengthMismatch {
                left: pair[0].len(),
                right: pair[1].len(),
            });
        }
    }
    if input[0].len() != output[0].len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} samples", input[0].len()),
            actual: format!("{} samples", output[0].len()),
        });
    }
    let engine = Stft::new(stft)?;
    let raw = EstimatorConfig {
        alpha: 0.0,
        silence_rel: 0.0,
    };
    let a = estimate_all(&engine.analyze_stereo(input[0], input[1])?, layout, stft, &raw)?;
    let b = estimate_all(&engine.analyze_stereo(output[0], output[1])?, layout, stft, &raw)?;
    let rel = 10f64.powf(-FIDELITY_ACTIVE_RANGE_DB / 10.0);

    let mut bands = Vec::with_capacity(layout.bands());
    let (mut sum, mut max, mut out_sum, mut cells) = (0.0, 0.0f64, 0.0, 0usize);
    for band in 0..layout.bands() {
        let peak = (0..a.frames()).map(|t| a.band_energy(band, t)).fold(0.0, f64::max);
        let active: Vec<usize> = (0..a.frames())
            .filter(|&t| peak > 0.0 && a.band_energy(band, t) >= rel * peak && b.band_energy(band, t) > 0.0)
            .collect();
        let devs: Vec<f64> = active.iter().map(|&t| (a.theta(band, t) - b.theta(band, t)).abs()).collect();
        let n = active.len().max(1) as f64;
        let band_max = devs.iter().copied().fold(0.0, f64::max);
        let (lo_hz, hi_hz) = layout.band_edges(band);
        bands.push(BandFidelity {
            band,
            lo_hz,
            hi_hz,
            active_frames: active.len(),
            mean_abs_dev: devs.iter().sum::<f64>() / n,
            max_abs_dev: band_max,
            mean_input_theta: active.iter().map(|&t| a.theta(band, t)).sum::<f64>() / n,
            mean_output_theta: active.iter().map(|&t| b.theta(band, t)).sum::<f64>() / n,
        });
        sum += devs.iter().sum::<f64>();
        out_sum += active.iter().map(|&t| b.theta(band, t)).sum::<f64>();
        max = max.max(band_max);
        cells += active.len();
    }
    let n = cells.max(1) as f64;
    Ok(FidelityReport {
        bands,
        mean_abs_dev: sum / n,
        max_abs_dev: max,
        mean_output_theta: out_sum / n,
    })
}
