//! Fast invariant checks runnable from the command line.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::enhancer::{Enhancer, IdentityEnhancer};
use crate::error::Result;
use crate::estimator::estimate_all;
use crate::mixing::{mix_source_tile, synth_scene, HarmonicSource, Panning, SceneRecipe, SourceSpec};
use crate::pipeline::{process, PipelineConfig, PipelineMode};
use crate::spcr::{spcr_forward, spcr_inverse, wrap_phase};
use crate::stft::{make_band_layout, Stft, StftConfig, DEFAULT_BAND_EDGES_HZ};
use crate::transform::cmss_coeffs;
use crate::Complex64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match run() {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn random_tile(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_params(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (rng.random_range(0.0..=FRAC_PI_2), wrap_phase(rng.random_range(-PI..PI)))
}

fn rel_err_db(test: &[f64], reference: &[f64]) -> f64 {
    let err: f64 = test.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum();
    let refe: f64 = reference.iter().map(|x| x * x).sum();
    10.0 * (err / refe).log10()
}

/// Runs every check; the caller decides what a failure means.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check("cmss inversion", || {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let mut worst = 0.0f64;
            for _ in 0..2000 {
                let (t, p) = random_params(&mut rng);
                let c = cmss_coeffs(t, p)?;
                let (l, r) = (random_tile(&mut rng), random_tile(&mut rng));
                let (m, s) = c.forward(l, r);
                let (l2, r2) = c.inverse(m, s);
                let scale = l.norm().hypot(r.norm());
                worst = worst.max((l2 - l).norm().hypot((r2 - r).norm()) / scale);
            }
            Ok((worst <= 1e-12, format!("max relative error {worst:.2e}")))
        }),
        check("target cancellation", || {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let mut worst = 0.0f64;
            for _ in 0..2000 {
                let (t, p) = random_params(&mut rng);
                let s1 = random_tile(&mut rng);
                let (l, r) = mix_source_tile(s1, t, p)?;
                let (m, s) = cmss_coeffs(t, p)?.forward(l, r);
                worst = worst.max(s.norm().max((m - s1).norm()) / s1.norm());
            }
            Ok((worst <= 1e-12, format!("max residual {worst:.2e}")))
        }),
        check("energy conservation", || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut worst = 0.0f64;
            for _ in 0..2000 {
                let (t, p) = random_params(&mut rng);
                let (l, r) = (random_tile(&mut rng), random_tile(&mut rng));
                let (m, s) = cmss_coeffs(t, p)?.forward(l, r);
                let before = l.norm_sqr() + r.norm_sqr();
                worst = worst.max((m.norm_sqr() + s.norm_sqr() - before).abs() / before);
            }
            Ok((worst <= 1e-12, format!("max relative error {worst:.2e}")))
        }),
        check("centre coefficients", || {
            let c = cmss_coeffs(FRAC_PI_4, 0.0)?;
            let worst = [c.c1, c.c2, c.c3, c.c4]
                .iter()
                .map(|x| (x.norm() - FRAC_1_SQRT_2).abs())
                .fold(0.0, f64::max);
            Ok((worst <= 1e-15, format!("max deviation {worst:.2e}")))
        }),
        check("stereo-polar round trip", || {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let mut worst = 0.0f64;
            for _ in 0..2000 {
                let (l, r) = (random_tile(&mut rng), random_tile(&mut rng));
                let (l2, r2) = spcr_inverse(&spcr_forward(l, r));
                worst = worst.max((l2 - l).norm().hypot((r2 - r).norm()) / l.norm().hypot(r.norm()));
            }
            Ok((worst <= 1e-12, format!("max relative error {worst:.2e}")))
        }),
        check("stft reconstruction", || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let x: Vec<f64> = (0..48_000).map(|_| rng.random_range(-1.0..1.0)).collect();
            let config = StftConfig::default();
            let stft = Stft::new(&config)?;
            let y = stft.synthesize_trimmed(&stft.analyze(&x)?, x.len())?;
            let err = rel_err_db(&y, &x);
            Ok((err <= -90.0, format!("{err:.1} dB")))
        }),
        check("estimator recovery", || {
            let recipe = SceneRecipe::new(1.0, Panning::Static { theta1: FRAC_PI_3, phi1: 0.5 })
                .with_source(SourceSpec::Harmonic(HarmonicSource::sustained()));
            let scene = synth_scene(&recipe)?;
            let config = StftConfig::default();
            let layout = make_band_layout(&config, &DEFAULT_BAND_EDGES_HZ)?;
            let spec = Stft::new(&config)?.analyze_stereo(&scene.mixture[0], &scene.mixture[1])?;
            let params = estimate_all(&spec, &layout, &config, &Default::default())?;
            let (mut dt, mut dp) = (0.0f64, 0.0f64);
            for t in 10..params.frames() {
                for b in 0..params.bands() {
                    let (theta, phi) = params.get(b, t);
                    dt = dt.max((theta - FRAC_PI_3).abs());
                    dp = dp.max(wrap_phase(phi - 0.5).abs());
                }
            }
            Ok((dt <= 0.01 && dp <= 0.02, format!("max error theta {dt:.2e}, phi {dp:.2e}")))
        }),
        check("cms transparency", || {
            let recipe = SceneRecipe::new(1.0, Panning::Static { theta1: 1.1, phi1: -0.3 })
                .with_source(SourceSpec::Harmonic(HarmonicSource::sustained()));
            let scene = synth_scene(&recipe)?;
            let [l, r] = &scene.mixture;
            let out = process(l, r, scene.sample_rate, &PipelineConfig::default(), &IdentityEnhancer)?;
            let err = rel_err_db(&out.channels.concat(), &[l.as_slice(), r.as_slice()].concat());
            Ok((err <= -60.0, format!("{err:.1} dB")))
        }),
        check("invocation counts", || {
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let l: Vec<f64> = (0..8192).map(|_| rng.random_range(-0.5..0.5)).collect();
            let r: Vec<f64> = (0..8192).map(|_| rng.random_range(-0.5..0.5)).collect();
            let id: &dyn Enhancer = &IdentityEnhancer;
            let mut counts = Vec::new();
            for mode in PipelineMode::ALL {
                let out = process(&l, &r, 48_000, &PipelineConfig::default().with_mode(mode), id)?;
                counts.push((mode, out.report.invocations));
            }
            let ok = counts.iter().all(|(m, n)| *n == m.invocations());
            let detail = counts.iter().map(|(m, n)| format!("{m}={n}")).collect::<Vec<_>>().join(" ");
            Ok((ok, detail))
        }),
        check("config round trip", || {
            let config = RunConfig::default();
            let ok = RunConfig::from_toml(&config.to_toml()?)? == config;
            Ok((ok, String::new()))
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for r in run_all() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
