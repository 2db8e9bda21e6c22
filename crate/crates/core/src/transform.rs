//! Standard, generalized and custom mid-side transforms.
//!
//! The generalized pair is a unitary rotation of `(L, R)`:
//!
//! ```text
//! M = c1 L + c2 R
//! S = c3 L - c4 R
//! ```
//!
//! with `c1 = cos t e^{-i p sin^2 t}`, `c2 = sin t e^{i p cos^2 t}`,
//! `c3 = sin t e^{-i p sin^2 t}`, `c4 = cos t e^{i p cos^2 t}` for panning
//! angle `t` and phase difference `p`. A source mixed with exactly those
//! parameters lands entirely in `M` and cancels from `S`. At `(pi/4, 0)` the
//! rotation reduces to `M = (L + R)/sqrt 2`, `S = (L - R)/sqrt 2`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimator::MixingParams;
use crate::mixing::check_theta;
use crate::stft::{BandLayout, Spectrogram, StereoSpectrogram};

pub fn standard_ms_forward(left: Complex64, right: Complex64) -> (Complex64, Complex64) {
    (0.5 * (left + right), 0.5 * (left - right))
}

pub fn standard_ms_inverse(mid: Complex64, side: Complex64) -> (Complex64, Complex64) {
    (mid + side, mid - side)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CmssCoefficients {
    pub c1: Complex64,
    pub c2: Complex64,
    pub c3: Complex64,
    pub c4: Complex64,
    /// `phi1 * sin^2 theta1`, the phase offset carried by the left channel.
    pub left_offset: f64,
    /// `phi1 * cos^2 theta1`, the phase offset carried by the right channel.
    pub right_offset: f64,
    cos: f64,
    sin: f64,
}

pub fn cmss_coeffs(theta1: f64, phi1: f64) -> Result<CmssCoefficients> {
    check_theta(theta1)?;
    if !(phi1 > -PI && phi1 <= PI) {
        return Err(Error::OutOfRange {
            name: "phi1",
            value: phi1,
            range: "(-pi, pi]",
        });
    }
    Ok(CmssCoefficients::new_unchecked(theta1, phi1))
}

impl CmssCoefficients {
    pub(crate) fn new_unchecked(theta1: f64, phi1: f64) -> Self {
        let (sin, cos) = theta1.sin_cos();
        let left_offset = phi1 * sin * sin;
        let right_offset = phi1 * cos * cos;
        Self {
            c1: Complex64::from_polar(cos, -left_offset),
            c2: Complex64::from_polar(sin, right_offset),
            c3: Complex64::from_polar(sin, -left_offset),
            c4: Complex64::from_polar(cos, right_offset),
            left_offset,
            right_offset,
            cos,
            sin,
        }
    }

    /// Centre-panned, in-phase parameters.
    pub fn centre() -> Self {
        Self::new_unchecked(FRAC_PI_4, 0.0)
    }

    #[inline]
    pub fn forward(&self, left: Complex64, right: Complex64) -> (Complex64, Complex64) {
        (
            self.c1 * left + self.c2 * right,
            self.c3 * left - self.c4 * right,
        )
    }

    #[inline]
    pub fn inverse(&self, mid: Complex64, side: Complex64) -> (Complex64, Complex64) {
        let left = (mid * self.cos + side * self.sin) * Complex64::from_polar(1.0, self.left_offset);
        let right =
            (mid * self.sin - side * self.cos) * Complex64::from_polar(1.0, -self.right_offset);
        (left, right)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MidSideSpectrograms {
    pub mid: Spectrogram,
    pub side: Spectrogram,
    pub params: MixingParams,
}

fn check_params(params: &MixingParams, layout: &BandLayout, bins: usize, frames: usize) -> Result<()> {
    if layout.bins() != bins {
        return Err(Error::DimensionMismatch {
            expected: format!("layout over {bins} bins"),
            actual: format!("layout over {} bins", layout.bins()),
        });
    }
    if params.dims() != (layout.bands(), frames) {
        return Err(Error::DimensionMismatch {
            expected: format!("params for {} bands x {frames} frames", layout.bands()),
            actual: format!("{} bands x {} frames", params.bands(), params.frames()),
        });
    }
    params.validate()
}

/// Coefficients for every (band, frame) cell, frame-major.
fn coefficient_grid(params: &MixingParams) -> Vec<CmssCoefficients> {
    (0..params.frames())
        .flat_map(|t| (0..params.bands()).map(move |b| (b, t)))
        .map(|(b, t)| {
            let (theta, phi) = params.get(b, t);
            CmssCoefficients::new_unchecked(theta, phi)
        })
        .collect()
}

pub fn cmss_forward(
    spec: &StereoSpectrogram,
    params: &MixingParams,
    layout: &BandLayout,
) -> Result<MidSideSpectrograms> {
    let (bins, frames) = (spec.bins(), spec.frames());
    check_params(params, layout, bins, frames)?;
    let coeffs = coefficient_grid(params);
    let bands = params.bands();
    let mut mid = Spectrogram::zeros(bins, frames);
    let mut side = Spectrogram::zeros(bins, frames);
    for t in 0..frames {
        let (l, r) = (spec.left().frame(t), spec.right().frame(t));
        let (m, s) = (mid.frame_mut(t), side.frame_mut(t));
        for b in 0..bands {
            let c = &coeffs[t * bands + b];
            for k in layout.bins_of_band(b) {
                (m[k], s[k]) = c.forward(l[k], r[k]);
            }
        }
    }
    Ok(MidSideSpectrograms {
        mid,
        side,
        params: params.clone(),
    })
}

pub fn cmss_inverse(
    ms: &MidSideSpectrograms,
    params: &MixingParams,
    layout: &BandLayout,
) -> Result<StereoSpectrogram> {
    let (bins, frames) = ms.mid.dims();
    ms.side.check_dims(bins, frames)?;
    check_params(params, layout, bins, frames)?;
    let coeffs = coefficient_grid(params);
    let bands = params.bands();
    let mut left = Spectrogram::zeros(bins, frames);
    let mut right = Spectrogram::zeros(bins, frames);
    for t in 0..frames {
        let (m, s) = (ms.mid.frame(t), ms.side.frame(t));
        let (l, r) = (left.frame_mut(t), right.frame_mut(t));
        for b in 0..bands {
            let c = &coeffs[t * bands + b];
            for k in layout.bins_of_band(b) {
                (l[k], r[k]) = c.inverse(m[k], s[k]);
            }
        }
    }
    StereoSpectrogram::new(left, right)
}

/// Reconstruct with the fixed centre inversion, ignoring the parameters, so
/// whatever the custom mid concentrated comes back centre-panned.
pub fn alt_center_remix(ms: &MidSideSpectrograms) -> Result<StereoSpectrogram> {
    let (bins, frames) = ms.mid.dims();
    ms.side.check_dims(bins, frames)?;
    let mut left = Spectrogram::zeros(bins, frames);
    let mut right = Spectrogram::zeros(bins, frames);
    for (i, (m, s)) in ms.mid.as_slice().iter().zip(ms.side.as_slice()).enumerate() {
        left.as_mut_slice()[i] = FRAC_1_SQRT_2 * (m + s);
        right.as_mut_slice()[i] = FRAC_1_SQRT_2 * (m - s);
    }
    StereoSpectrogram::new(left, right)
}
