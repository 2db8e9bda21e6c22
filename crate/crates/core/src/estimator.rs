//! Per-band, per-frame estimation of the dynamic mixing parameters.
//!
//! Each frame is mapped to stereo-polar tiles. Within a band the raw panning
//! angle is the energy-weighted mean of the tile angles and the raw phase
//! difference is the argument of the energy-weighted sum of unit phasors.
//! Both are then smoothed over frames; the phase is smoothed as a complex
//! vector so it never jumps at the wrap point. A band's first non-silent
//! frame seeds its smoother directly. Silent bands hold their last value, or
//! the centre-panned, in-phase defaults before any activity.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spcr::{spcr_frame, wrap_phase, SpcrFrame};
use crate::stft::{BandLayout, StereoSpectrogram, StftConfig};

/// `(theta1, phi1)` per (band, frame), plus the band energy seen by the
/// estimator in that cell.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingParams {
    bands: usize,
    frames: usize,
    theta: Vec<f64>,
    phi: Vec<f64>,
    energy: Vec<f64>,
}

impl MixingParams {
    pub fn uniform(bands: usize, frames: usize, theta1: f64, phi1: f64) -> Self {
        Self {
            bands,
            frames,
            theta: vec![theta1; bands * frames],
            phi: vec![phi1; bands * frames],
            energy: vec![0.0; bands * frames],
        }
    }

    /// Centre-panned in-phase parameters everywhere.
    pub fn centre(bands: usize, frames: usize) -> Self {
        Self::uniform(bands, frames, FRAC_PI_4, 0.0)
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.bands, self.frames)
    }

    fn idx(&self, band: usize, frame: usize) -> usize {
        debug_assert!(band < self.bands && frame < self.frames);
        frame * self.bands + band
    }

    pub fn get(&self, band: usize, frame: usize) -> (f64, f64) {
        let i = self.idx(band, frame);
        (self.theta[i], self.phi[i])
    }

    pub fn theta(&self, band: usize, frame: usize) -> f64 {
        self.theta[self.idx(band, frame)]
    }

    pub fn phi(&self, band: usize, frame: usize) -> f64 {
        self.phi[self.idx(band, frame)]
    }

    pub fn band_energy(&self, band: usize, frame: usize) -> f64 {
        self.energy[self.idx(band, frame)]
    }

    pub fn set(&mut self, band: usize, frame: usize, theta1: f64, phi1: f64) {
        let i = self.idx(band, frame);
        self.theta[i] = theta1;
        self.phi[i] = phi1;
    }

    pub fn validate(&self) -> Result<()> {
        for (&t, &p) in self.theta.iter().zip(&self.phi) {
            if !(0.0..=FRAC_PI_2).contains(&t) {
                return Err(Error::OutOfRange {
                    name: "theta1",
                    value: t,
                    range: "[0, pi/2]",
                });
            }
            if !(p > -PI && p <= PI) {
                return Err(Error::OutOfRange {
                    name: "phi1",
                    value: p,
                    range: "(-pi, pi]",
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Weight of the previous smoothed value, in [0, 1).
    pub alpha: f64,
    /// Silence threshold relative to full-scale band energy.
    pub silence_rel: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            silence_rel: 1e-10,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: self.alpha,
                range: "[0, 1)",
            });
        }
        if !(self.silence_rel.is_finite() && self.silence_rel >= 0.0) {
            return Err(Error::OutOfRange {
                name: "silence_rel",
                value: self.silence_rel,
                range: "[0, inf)",
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandEstimate {
    pub theta1: f64,
    pub phi1: f64,
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct EstimatorState {
    phase: Vec<Complex64>,
    theta: Vec<f64>,
    last_energy: Vec<f64>,
    primed: Vec<bool>,
    alpha: f64,
    epsilon: Vec<f64>,
}

impl EstimatorState {
    pub fn new(layout: &BandLayout, stft: &StftConfig, config: &EstimatorConfig) -> Result<Self> {
        config.validate()?;
        // A full-scale bin in one channel carries (sum of window)^2.
        let window_sum: f64 = stft.analysis_window().iter().sum();
        let full_scale_tile = window_sum * window_sum;
        let bands = layout.bands();
        Ok(Self {
            phase: vec![Complex64::new(1.0, 0.0); bands],
            theta: vec![FRAC_PI_4; bands],
            last_energy: vec![0.0; bands],
            primed: vec![false; bands],
            alpha: config.alpha,
            epsilon: (0..bands)
                .map(|b| config.silence_rel * full_scale_tile * layout.bins_of_band(b).len() as f64)
                .collect(),
        })
    }

    pub fn bands(&self) -> usize {
        self.theta.len()
    }

    pub fn last_energy(&self, band: usize) -> f64 {
        self.last_energy[band]
    }

    /// Band energy at or below which a frame counts as silent.
    pub fn silence_threshold(&self, band: usize) -> f64 {
        self.epsilon[band]
    }

    pub fn smoothed_phase(&self, band: usize) -> Complex64 {
        self.phase[band]
    }

    fn current(&self, band: usize) -> BandEstimate {
        BandEstimate {
            theta1: self.theta[band].clamp(0.0, FRAC_PI_2),
            phi1: wrap_phase(self.phase[band].arg()),
            energy: self.last_energy[band],
        }
    }
}

/// Fold one frame of stereo-polar tiles into the state and return the
/// smoothed parameters for every band.
pub fn estimate_frame(
    spcr: &SpcrFrame,
    layout: &BandLayout,
    state: &mut EstimatorState,
) -> Result<Vec<BandEstimate>> {
    if spcr.len() != layout.bins() || state.bands() != layout.bands() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} bins in {} bands", layout.bins(), layout.bands()),
            actual: format!("{} bins, state for {} bands", spcr.len(), state.bands()),
        });
    }
    let gain = 1.0 - state.alpha;
    let mut out = Vec::with_capacity(layout.bands());
    for b in 0..layout.bands() {
        let mut weight = 0.0;
        let mut theta_mean = 0.0;
        let mut phasor = Complex64::new(0.0, 0.0);
        for tile in &spcr[layout.bins_of_band(b)] {
            let w = tile.u * tile.u;
            if w == 0.0 {
                continue;
            }
            weight += w;
            // Running weighted mean stays exact when every angle is equal.
            theta_mean += (w / weight) * (tile.theta - theta_mean);
            phasor += w * Complex64::from_polar(1.0, tile.phi);
        }
        state.last_energy[b] = weight;
        let norm = phasor.norm();
        if weight > state.epsilon[b] && norm > 0.0 {
            let unit = phasor / norm;
            if state.primed[b] {
                state.theta[b] += gain * (theta_mean - state.theta[b]);
                state.phase[b] = state.alpha * state.phase[b] + gain * unit;
            } else {
                state.theta[b] = theta_mean;
                state.phase[b] = unit;
                state.primed[b] = true;
            }
        }
        out.push(state.current(b));
    }
    Ok(out)
}

pub fn estimate_all(
    spec: &StereoSpectrogram,
    layout: &BandLayout,
    stft: &StftConfig,
    config: &EstimatorConfig,
) -> Result<MixingParams> {
    if layout.bins() != spec.bins() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} bins", layout.bins()),
            actual: format!("{} bins", spec.bins()),
        });
    }
    let mut state = EstimatorState::new(layout, stft, config)?;
    let mut params = MixingParams::centre(layout.bands(), spec.frames());
    for t in 0..spec.frames() {
        let frame = spcr_frame(spec.left().frame(t), spec.right().frame(t));
        for (b, est) in estimate_frame(&frame, layout, &mut state)?.into_iter().enumerate() {
            let i = params.idx(b, t);
            params.theta[i] = est.theta1;
            params.phi[i] = est.phi1;
            params.energy[i] = est.energy;
        }
    }
    Ok(params)
}
