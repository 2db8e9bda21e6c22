//! Target-source mixing model and synthetic stereo scenes.
//!
//! A mono source tile `S1` is placed in the stereo field by a panning angle
//! `theta1` (0 = hard left, pi/2 = hard right, constant power) and an
//! interchannel phase difference `phi1`. The louder channel keeps the phase
//! closer to the source phase:
//!
//! ```text
//! L = S1 cos(theta1) exp( i phi1 sin^2 theta1)
//! R = S1 sin(theta1) exp(-i phi1 cos^2 theta1)
//! ```

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::PathBuf;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spcr::wrap_phase;
use crate::stft::{Stft, StftConfig};

pub fn check_theta(theta1: f64) -> Result<()> {
    if !(0.0..=FRAC_PI_2).contains(&theta1) {
        return Err(Error::OutOfRange {
            name: "theta1",
            value: theta1,
            range: "[0, pi/2]",
        });
    }
    Ok(())
}

pub fn mix_source_tile(s1: Complex64, theta1: f64, phi1: f64) -> Result<(Complex64, Complex64)> {
    check_theta(theta1)?;
    if !phi1.is_finite() {
        return Err(Error::NonFinite("phi1"));
    }
    Ok(mix_unchecked(s1, theta1, phi1))
}

pub(crate) fn mix_unchecked(s1: Complex64, theta1: f64, phi1: f64) -> (Complex64, Complex64) {
    let (sin, cos) = theta1.sin_cos();
    let left = s1 * Complex64::from_polar(cos, phi1 * sin * sin);
    let right = s1 * Complex64::from_polar(sin, -phi1 * cos * cos);
    (left, right)
}

/// Interchannel phase difference of a pure delay of `tau` samples at `f` Hz.
pub fn ipd_from_delay(tau: f64, f: f64, fs: f64) -> f64 {
    wrap_phase(TAU * f * tau / fs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Panning {
    Static {
        theta1: f64,
        phi1: f64,
    },
    /// Linear sweep of the panning angle over the whole scene.
    Sweep {
        theta_start: f64,
        theta_end: f64,
        phi1: f64,
    },
    /// Right channel delayed by `delay_samples` (fractional allowed).
    Delay {
        theta1: f64,
        delay_samples: f64,
    },
}

impl Panning {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Panning::Static { theta1, phi1 } => {
                check_theta(theta1)?;
                finite(phi1, "phi1")
            }
            Panning::Sweep {
                theta_start,
                theta_end,
                phi1,
            } => {
                check_theta(theta_start)?;
                check_theta(theta_end)?;
                finite(phi1, "phi1")
            }
            Panning::Delay {
                theta1,
                delay_samples,
            } => {
                check_theta(theta1)?;
                finite(delay_samples, "delay_samples")
            }
        }
    }
}

fn finite(v: f64, name: &'static str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarmonicSource {
    pub f0_hz: f64,
    /// Relative pitch excursion of the vibrato.
    pub vibrato_depth: f64,
    pub vibrato_hz: f64,
    /// Syllable rate of the on/off envelope.
    pub syllable_hz: f64,
    /// Fraction of each syllable period that is voiced; 1 or more gives a single
    /// segment faded in and out at the signal ends.
    pub duty: f64,
    pub max_harmonic_hz: f64,
    pub peak: f64,
}

impl HarmonicSource {
    /// Ungated variant: one long voiced segment.
    pub fn sustained() -> Self {
        Self {
            duty: 1.0,
            ..Self::default()
        }
    }
}

impl Default for HarmonicSource {
    fn default() -> Self {
        Self {
            f0_hz: 140.0,
            vibrato_depth: 0.08,
            vibrato_hz: 3.0,
            syllable_hz: 4.0,
            duty: 0.65,
            max_harmonic_hz: 16_000.0,
            peak: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    Harmonic(HarmonicSource),
    /// Mono WAV (stereo files are downmixed); sample rate must match.
    Wav { path: PathBuf },
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec::Harmonic(HarmonicSource::default())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseColor {
    #[default]
    White,
    Pink,
}

/// Diffuse noise: independent channels scaled to a broadband SNR against the
/// stereo target. `snr_db = inf` disables the noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
    #[serde(default)]
    pub color: NoiseColor,
}

/// RMS used for noise when the target is silent and an SNR cannot be formed.
pub const SILENT_TARGET_NOISE_RMS: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecipe {
    pub sample_rate: u32,
    pub duration_sec: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub source: SourceSpec,
    pub mix: Panning,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
}

impl SceneRecipe {
    pub fn new(duration_sec: f64, mix: Panning) -> Self {
        Self {
            sample_rate: 48_000,
            duration_sec,
            seed: 0,
            source: SourceSpec::default(),
            mix,
            noise: None,
        }
    }

    pub fn with_noise(mut self, snr_db: f64) -> Self {
        self.noise = Some(NoiseSpec {
            snr_db,
            color: NoiseColor::White,
        });
        self
    }

    pub fn with_source(mut self, source: SourceSpec) -> Self {
        self.source = source;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn len(&self) -> usize {
        (self.duration_sec * self.sample_rate as f64).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidSampleRate);
        }
        if !(self.duration_sec.is_finite() && self.duration_sec > 0.0) {
            return Err(Error::Config(format!(
                "duration_sec must be positive, got {}",
                self.duration_sec
            )));
        }
        self.mix.validate()?;
        if let Some(noise) = &self.noise {
            if noise.snr_db.is_nan() || noise.snr_db == f64::NEG_INFINITY {
                return Err(Error::NonFinite("snr_db"));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let recipe: SceneRecipe = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        recipe.validate()?;
        Ok(recipe)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Render the source named by the recipe.
    pub fn load_source(&self) -> Result<Vec<f64>> {
        let len = self.len();
        match &self.source {
            SourceSpec::Harmonic(h) => Ok(harmonic_source(h, self.sample_rate, len)),
            SourceSpec::Wav { path } => {
                let audio = crate::io::read_wav(path)?;
                if audio.sample_rate != self.sample_rate {
                    return Err(Error::Config(format!(
                        "source sample rate {} does not match recipe {}",
                        audio.sample_rate, self.sample_rate
                    )));
                }
                let mut mono = audio.downmix();
                mono.resize(len, 0.0);
                Ok(mono)
            }
        }
    }
}

/// Ground-truth mixing, resolvable per STFT frame and frequency.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixTruth {
    pub panning: Panning,
    pub sample_rate: u32,
    theta_per_frame: Vec<f64>,
}

impl MixTruth {
    pub fn theta_at_frame(&self, frame: usize) -> f64 {
        self.theta_per_frame[frame.min(self.theta_per_frame.len() - 1)]
    }

    pub fn phi_at(&self, freq_hz: f64) -> f64 {
        match self.panning {
            Panning::Static { phi1, .. } | Panning::Sweep { phi1, .. } => wrap_phase(phi1),
            Panning::Delay { delay_samples, .. } => {
                ipd_from_delay(delay_samples, freq_hz, self.sample_rate as f64)
            }
        }
    }

    pub fn theta_per_frame(&self) -> &[f64] {
        &self.theta_per_frame
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub sample_rate: u32,
    pub source: Vec<f64>,
    pub mixture: [Vec<f64>; 2],
    pub target: [Vec<f64>; 2],
    pub noise: [Vec<f64>; 2],
    pub truth: MixTruth,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }
}

pub fn synth_scene(recipe: &SceneRecipe) -> Result<Scene> {
    recipe.validate()?;
    let source = recipe.load_source()?;
    synth_scene_with_source(recipe, source)
}

/// Build a scene around an explicit mono source; `recipe.source` is ignored.
pub fn synth_scene_with_source(recipe: &SceneRecipe, source: Vec<f64>) -> Result<Scene> {
    recipe.validate()?;
    if source.len() != recipe.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} source samples", recipe.len()),
            actual: source.len().to_string(),
        });
    }
    if source.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("source"));
    }
    let config = StftConfig::for_sample_rate(recipe.sample_rate)?;
    let frames = config.frame_count(source.len());
    let theta_per_frame: Vec<f64> = (0..frames)
        .map(|t| frame_theta(&recipe.mix, &config, t, recipe.duration_sec))
        .collect();

    let target = match recipe.mix {
        Panning::Static { phi1, .. } | Panning::Sweep { phi1, .. } => {
            mix_in_stft_domain(&source, &config, &theta_per_frame, phi1)?
        }
        Panning::Delay {
            theta1,
            delay_samples,
        } => {
            let (sin, cos) = theta1.sin_cos();
            let delayed = fractional_delay(&source, delay_samples);
            [
                source.iter().map(|x| x * cos).collect(),
                delayed.iter().map(|x| x * sin).collect(),
            ]
        }
    };

    let noise = match &recipe.noise {
        Some(spec) if spec.snr_db != f64::INFINITY => {
            let target_energy: f64 = target.iter().flatten().map(|x| x * x).sum();
            make_noise(spec, source.len(), recipe.seed, target_energy)
        }
        _ => [vec![0.0; source.len()], vec![0.0; source.len()]],
    };
    let mixture = [0, 1].map(|c| {
        target[c]
            .iter()
            .zip(&noise[c])
            .map(|(t, n)| t + n)
            .collect::<Vec<f64>>()
    });

    Ok(Scene {
        sample_rate: recipe.sample_rate,
        source,
        mixture,
        target,
        noise,
        truth: MixTruth {
            panning: recipe.mix.clone(),
            sample_rate: recipe.sample_rate,
            theta_per_frame,
        },
    })
}

fn frame_theta(mix: &Panning, config: &StftConfig, frame: usize, duration: f64) -> f64 {
    match *mix {
        Panning::Static { theta1, .. } | Panning::Delay { theta1, .. } => theta1,
        Panning::Sweep {
            theta_start,
            theta_end,
            ..
        } => {
            let centre = frame as f64 * config.hop as f64 + config.fft_size as f64 / 2.0
                - config.padding() as f64;
            let progress = (centre / config.sample_rate as f64 / duration).clamp(0.0, 1.0);
            theta_start + (theta_end - theta_start) * progress
        }
    }
}

fn mix_in_stft_domain(
    source: &[f64],
    config: &StftConfig,
    theta_per_frame: &[f64],
    phi1: f64,
) -> Result<[Vec<f64>; 2]> {
    let stft = Stft::new(config)?;
    let spec = stft.analyze(source)?;
    let mut left = spec.clone();
    let mut right = spec.clone();
    for (t, &theta) in theta_per_frame.iter().enumerate() {
        let (gl, gr) = mix_unchecked(Complex64::new(1.0, 0.0), theta, phi1);
        left.frame_mut(t).iter_mut().for_each(|c| *c *= gl);
        right.frame_mut(t).iter_mut().for_each(|c| *c *= gr);
    }
    Ok([
        stft.synthesize_trimmed(&left, source.len())?,
        stft.synthesize_trimmed(&right, source.len())?,
    ])
}

/// Delay by linear-phase multiplication over a zero-padded whole-signal FFT.
pub fn fractional_delay(x: &[f64], delay: f64) -> Vec<f64> {
    if delay == 0.0 {
        return x.to_vec();
    }
    let n = (x.len() + 2 * delay.abs().ceil() as usize + 64).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = x
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        if k == n / 2 {
            *c *= (PI * delay).cos();
            continue;
        }
        let signed = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
        *c *= Complex64::from_polar(1.0, -TAU * signed * delay / n as f64);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().take(x.len()).map(|c| c.re / n as f64).collect()
}

fn make_noise(spec: &NoiseSpec, len: usize, seed: u64, target_energy: f64) -> [Vec<f64>; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x006e_6f69_7365);
    let mut channels = [0, 1].map(|_| {
        let white: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        match spec.color {
            NoiseColor::White => white,
            NoiseColor::Pink => pink_filter(&white),
        }
    });
    let energy: f64 = channels.iter().flatten().map(|x| x * x).sum();
    let wanted = if target_energy > 0.0 {
        target_energy / 10f64.powf(spec.snr_db / 10.0)
    } else {
        SILENT_TARGET_NOISE_RMS.powi(2) * 2.0 * len as f64
    };
    let gain = if energy > 0.0 { (wanted / energy).sqrt() } else { 0.0 };
    for ch in &mut channels {
        ch.iter_mut().for_each(|x| *x *= gain);
    }
    channels
}

// Paul Kellett's economy pink filter (about +-0.5 dB above 10 Hz at 44.1 kHz).
fn pink_filter(white: &[f64]) -> Vec<f64> {
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    white
        .iter()
        .map(|&w| {
            b0 = 0.99765 * b0 + w * 0.0990460;
            b1 = 0.96300 * b1 + w * 0.2965164;
            b2 = 0.57000 * b2 + w * 1.0526913;
            b0 + b1 + b2 + w * 0.1848
        })
        .collect()
}

/// Voiced harmonic complex with vibrato and a syllable-rate on/off envelope.
pub fn harmonic_source(params: &HarmonicSource, sample_rate: u32, len: usize) -> Vec<f64> {
    let fs = sample_rate as f64;
    let top_f0 = params.f0_hz * (1.0 + params.vibrato_depth.abs());
    let harmonics = ((params.max_harmonic_hz.min(0.45 * fs)) / top_f0).floor().max(1.0) as usize;
    let ramp = 0.015 * fs;
    let period = fs / params.syllable_hz;
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(len);
    for n in 0..len {
        let t = n as f64 / fs;
        let f0 = params.f0_hz * (1.0 + params.vibrato_depth * (TAU * params.vibrato_hz * t).sin());
        phase = (phase + TAU * f0 / fs) % TAU;

        // sin(h*phase) by the Chebyshev recurrence.
        let two_cos = 2.0 * phase.cos();
        let (mut prev, mut cur) = (0.0, phase.sin());
        let mut value = 0.0;
        for h in 1..=harmonics {
            value += cur / h as f64;
            let next = two_cos * cur - prev;
            prev = cur;
            cur = next;
        }

        let pos = n as f64 % period;
        let voiced = params.duty * period;
        let edge = if params.duty >= 1.0 {
            Some((n as f64).min((len - 1 - n) as f64))
        } else if pos >= voiced {
            None
        } else {
            Some(pos.min(voiced - pos))
        };
        let env = match edge {
            None => 0.0,
            Some(e) if e >= ramp => 1.0,
            Some(e) => 0.5 - 0.5 * (PI * e / ramp).cos(),
        };
        out.push(value * env);
    }
    let peak = out.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        let g = params.peak / peak;
        out.iter_mut().for_each(|x| *x *= g);
    }
    out
}
