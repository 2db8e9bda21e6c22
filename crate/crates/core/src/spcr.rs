//! Stereo-polar coordinates of an STFT tile.
//!
//! A left/right pair maps to a combined magnitude `u`, a bounded level angle
//! `theta` in `[0, pi/2]`, an interchannel phase difference `phi` and a base
//! phase `psi`. The phase split mirrors the source mixing model: the louder
//! channel sits proportionally closer to the base phase.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use num_complex::Complex64;

/// Principal value in `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpcrTile {
    pub u: f64,
    pub theta: f64,
    pub phi: f64,
    pub psi: f64,
}

impl SpcrTile {
    /// Tile value assigned to `(0, 0)`.
    pub const SILENT: SpcrTile = SpcrTile {
        u: 0.0,
        theta: FRAC_PI_4,
        phi: 0.0,
        psi: 0.0,
    };
}

/// One frame of stereo-polar tiles, indexed by bin.
pub type SpcrFrame = Vec<SpcrTile>;

/// A silent channel carries no phase information, so `phi` is pinned to zero
/// and `psi` taken from the live channel.
pub fn spcr_forward(left: Complex64, right: Complex64) -> SpcrTile {
    let l_mag = left.norm();
    let r_mag = right.norm();
    let u = l_mag.hypot(r_mag);
    match (l_mag > 0.0, r_mag > 0.0) {
        (false, false) => SpcrTile::SILENT,
        (true, false) => SpcrTile {
            u,
            theta: 0.0,
            phi: 0.0,
            psi: wrap_phase(left.arg()),
        },
        (false, true) => SpcrTile {
            u,
            theta: FRAC_PI_2,
            phi: 0.0,
            psi: wrap_phase(right.arg()),
        },
        (true, true) => {
            let theta = r_mag.atan2(l_mag);
            let phi = wrap_phase((left * right.conj()).arg());
            let sin2 = theta.sin().powi(2);
            SpcrTile {
                u,
                theta,
                phi,
                psi: wrap_phase(left.arg() - phi * sin2),
            }
        }
    }
}

pub fn spcr_inverse(tile: &SpcrTile) -> (Complex64, Complex64) {
    let (sin, cos) = tile.theta.sin_cos();
    let left = Complex64::from_polar(tile.u * cos, tile.psi + tile.phi * sin * sin);
    let right = Complex64::from_polar(tile.u * sin, tile.psi - tile.phi * cos * cos);
    (left, right)
}

pub fn spcr_frame(left: &[Complex64], right: &[Complex64]) -> SpcrFrame {
    left.iter()
        .zip(right)
        .map(|(&l, &r)| spcr_forward(l, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_tile(t: SpcrTile, u: f64, theta: f64, phi: f64, psi: f64) {
        assert!((t.u - u).abs() < 1e-14, "u {t:?}");
        assert!((t.theta - theta).abs() < 1e-14, "theta {t:?}");
        assert!(wrap_phase(t.phi - phi).abs() < 1e-14, "phi {t:?}");
        assert!(wrap_phase(t.psi - psi).abs() < 1e-14, "psi {t:?}");
    }

    #[test]
    fn wrap_is_principal_value() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_phase(0.25), 0.25);
    }

    #[test]
    fn forward_examples() {
        assert_tile(spcr_forward(c(1.0, 0.0), c(1.0, 0.0)), SQRT2, FRAC_PI_4, 0.0, 0.0);
        let t = spcr_forward(c(0.0, 1.0), c(1.0, 0.0));
        assert_tile(t, SQRT2, FRAC_PI_4, FRAC_PI_2, FRAC_PI_4);
        // The second form of the base phase agrees.
        let cos2 = t.theta.cos().powi(2);
        assert!(wrap_phase(0.0 + t.phi * cos2 - t.psi).abs() < 1e-14);
        let r = Complex64::from_polar(2.0, PI / 3.0);
        assert_tile(spcr_forward(c(0.0, 0.0), r), 2.0, FRAC_PI_2, 0.0, PI / 3.0);
    }

    #[test]
    fn singular_tiles() {
        assert_eq!(spcr_forward(c(0.0, 0.0), c(0.0, 0.0)), SpcrTile::SILENT);
        let l = Complex64::from_polar(0.5, -2.0);
        assert_tile(spcr_forward(l, c(0.0, 0.0)), 0.5, 0.0, 0.0, -2.0);
        let (l2, r2) = spcr_inverse(&spcr_forward(l, c(0.0, 0.0)));
        assert!((l2 - l).norm() < 1e-15 && r2.norm() < 1e-15);
    }

    #[test]
    fn inverse_examples() {
        let (l, r) = spcr_inverse(&SpcrTile {
            u: SQRT2,
            theta: FRAC_PI_4,
            phi: 0.0,
            psi: 0.0,
        });
        assert!((l - c(1.0, 0.0)).norm() < 1e-15 && (r - c(1.0, 0.0)).norm() < 1e-15);
        let (l, r) = spcr_inverse(&SpcrTile {
            u: SQRT2,
            theta: FRAC_PI_4,
            phi: FRAC_PI_2,
            psi: FRAC_PI_4,
        });
        assert!((l - c(0.0, 1.0)).norm() < 1e-15 && (r - c(1.0, 0.0)).norm() < 1e-15);
        let (l, r) = spcr_inverse(&SpcrTile {
            u: 0.0,
            theta: 1.1,
            phi: -2.0,
            psi: 0.3,
        });
        assert_eq!((l.norm(), r.norm()), (0.0, 0.0));
    }

    fn tile() -> impl Strategy<Value = (Complex64, Complex64)> {
        (1e-6f64..10.0, -PI..PI, 1e-6f64..10.0, -PI..PI)
            .prop_map(|(a, pa, b, pb)| (Complex64::from_polar(a, pa), Complex64::from_polar(b, pb)))
    }

    proptest! {
        #[test]
        fn round_trip((l, r) in tile()) {
            let t = spcr_forward(l, r);
            let (l2, r2) = spcr_inverse(&t);
            let scale = l.norm().hypot(r.norm());
            prop_assert!((l2 - l).norm() <= 1e-12 * scale);
            prop_assert!((r2 - r).norm() <= 1e-12 * scale);
        }

        #[test]
        fn invariants((l, r) in tile()) {
            let t = spcr_forward(l, r);
            let e = l.norm_sqr() + r.norm_sqr();
            prop_assert!((t.u * t.u - e).abs() <= 1e-12 * e);
            prop_assert!((0.0..=FRAC_PI_2).contains(&t.theta));
            prop_assert!(t.phi > -PI && t.phi <= PI && t.psi > -PI && t.psi <= PI);
            let cos2 = t.theta.cos().powi(2);
            prop_assert!(wrap_phase(r.arg() + t.phi * cos2 - t.psi).abs() < 1e-9);
        }

        #[test]
        fn theta_monotone_in_gain((l, r) in tile(), g in 1.01f64..10.0) {
            let t = spcr_forward(l, r).theta;
            prop_assert!(spcr_forward(l, r * g).theta > t);
            prop_assert!(spcr_forward(l * g, r).theta < t);
        }
    }
}
