//! Monaural enhancers operating on a single complex spectrogram.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::Spectrogram;

/// Mono spectrogram in, mono spectrogram of the same shape out.
///
/// Implementations take `&self` so one instance can serve several channels;
/// anything stateful belongs in the spectrogram pass itself.
pub trait Enhancer: Send + Sync {
    fn name(&self) -> &str;

    fn enhance(&self, spec: &Spectrogram) -> Result<Spectrogram>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityEnhancer;

impl Enhancer for IdentityEnhancer {
    fn name(&self) -> &str {
        "identity"
    }

    fn enhance(&self, spec: &Spectrogram) -> Result<Spectrogram> {
        Ok(spec.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseEstimate {
    /// Per-bin percentile of the magnitude over the whole file.
    Percentile { p: f64 },
    /// Per-bin RMS magnitude over the leading frames.
    FirstFrames { k: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateEnhancerConfig {
    pub noise: NoiseEstimate,
    /// Oversubtraction factor.
    pub beta: f64,
    pub floor_db: f64,
}

impl Default for GateEnhancerConfig {
    fn default() -> Self {
        Self {
            noise: NoiseEstimate::Percentile { p: 10.0 },
            beta: 2.0,
            floor_db: -25.0,
        }
    }
}

impl GateEnhancerConfig {
    pub fn validate(&self) -> Result<()> {
        match self.noise {
            NoiseEstimate::Percentile { p } if !(p > 0.0 && p <= 50.0) => {
                return Err(Error::OutOfRange {
                    name: "percentile",
                    value: p,
                    range: "(0, 50]",
                })
            }
            NoiseEstimate::FirstFrames { k: 0 } => {
                return Err(Error::OutOfRange {
                    name: "noise frames",
                    value: 0.0,
                    range: ">= 1",
                })
            }
            _ => {}
        }
        if !(self.beta >= 1.0 && self.beta.is_finite()) {
            return Err(Error::OutOfRange {
                name: "beta",
                value: self.beta,
                range: "[1, inf)",
            });
        }
        if self.floor_db.is_nan() || self.floor_db > 0.0 {
            return Err(Error::OutOfRange {
                name: "floor_db",
                value: self.floor_db,
                range: "(-inf, 0]",
            });
        }
        Ok(())
    }

    pub fn floor_linear(&self) -> f64 {
        10f64.powf(self.floor_db / 20.0)
    }
}

/// Spectral-subtraction gate with a stationary noise estimate.
#[derive(Clone, Debug)]
pub struct GateEnhancer {
    config: GateEnhancerConfig,
}

impl GateEnhancer {
    pub fn new(config: GateEnhancerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &GateEnhancerConfig {
        &self.config
    }

    /// Per-bin noise magnitude.
    pub fn noise_estimate(&self, spec: &Spectrogram) -> Result<Vec<f64>> {
        if spec.is_empty() {
            return Err(Error::EmptySpectrogram);
        }
        let (bins, frames) = spec.dims();
        let mut out = Vec::with_capacity(bins);
        let mut column = Vec::with_capacity(frames);
        for k in 0..bins {
            column.clear();
            column.extend((0..frames).map(|t| spec.get(k, t).norm()));
            let value = match self.config.noise {
                NoiseEstimate::Percentile { p } => percentile(&mut column, p),
                NoiseEstimate::FirstFrames { k: lead } => {
                    let n = lead.min(frames);
                    (column[..n].iter().map(|m| m * m).sum::<f64>() / n as f64).sqrt()
                }
            };
            out.push(value);
        }
        Ok(out)
    }
}

impl Enhancer for GateEnhancer {
    fn name(&self) -> &str {
        "gate"
    }

    fn enhance(&self, spec: &Spectrogram) -> Result<Spectrogram> {
        let noise = self.noise_estimate(spec)?;
        let floor2 = self.config.floor_linear().powi(2);
        let beta = self.config.beta;
        let mut out = spec.clone();
        for t in 0..out.frames() {
            for (x, n) in out.frame_mut(t).iter_mut().zip(&noise) {
                let power = x.norm_sqr();
                if power == 0.0 {
                    continue;
                }
                let g2 = ((power - beta * n * n) / power).clamp(floor2, 1.0);
                *x *= g2.sqrt();
            }
        }
        Ok(out)
    }
}

/// Linear interpolation between order statistics.
fn percentile(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (values.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    values[lo] + (values[hi] - values[lo]) * (rank - lo as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnhancerKind {
    Identity,
    Gate(GateEnhancerConfig),
}

impl Default for EnhancerKind {
    fn default() -> Self {
        EnhancerKind::Gate(GateEnhancerConfig::default())
    }
}

impl EnhancerKind {
    pub fn build(&self) -> Result<Box<dyn Enhancer>> {
        Ok(match self {
            EnhancerKind::Identity => Box::new(IdentityEnhancer),
            EnhancerKind::Gate(config) => Box::new(GateEnhancer::new(*config)?),
        })
    }
}

impl std::str::FromStr for EnhancerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(EnhancerKind::Identity),
            "gate" => Ok(EnhancerKind::default()),
            other => Err(Error::Config(format!("unknown enhancer: {other}"))),
        }
    }
}

/// Wraps an enhancer and counts the spectrograms it has processed.
pub struct CountingEnhancer<'a> {
    inner: &'a dyn Enhancer,
    calls: AtomicUsize,
}

impl<'a> CountingEnhancer<'a> {
    pub fn new(inner: &'a dyn Enhancer) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Enhancer for CountingEnhancer<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn enhance(&self, spec: &Spectrogram) -> Result<Spectrogram> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let out = self.inner.enhance(spec)?;
        if out.dims() != spec.dims() {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", spec.dims()),
                actual: format!("{:?}", out.dims()),
            });
        }
        Ok(out)
    }
}
