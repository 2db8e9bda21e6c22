//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any criterion fails.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};
use std::process::ExitCode;
use std::time::Instant;

use cmss::enhancer::{GateEnhancer, GateEnhancerConfig, IdentityEnhancer};
use cmss::estimator::{estimate_all, EstimatorConfig, MixingParams};
use cmss::metrics::{compare_modes, snr_db};
use cmss::mixing::{ipd_from_delay, mix_source_tile, synth_scene, HarmonicSource, Panning, SceneRecipe, SourceSpec};
use cmss::pipeline::{process, spatial_fidelity_check, PipelineConfig, PipelineMode};
use cmss::spcr::{spcr_forward, spcr_inverse, wrap_phase};
use cmss::stft::{make_band_layout, BandLayout, Spectrogram, StereoSpectrogram, Stft, StftConfig, DEFAULT_BAND_EDGES_HZ};
use cmss::transform::{cmss_coeffs, cmss_forward, cmss_inverse};
use cmss::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

type Check = fn() -> cmss::Result<Outcome>;

fn random_tile(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_params(rng: &mut ChaCha8Rng, bands: usize, frames: usize) -> MixingParams {
    let mut p = MixingParams::centre(bands, frames);
    for t in 0..frames {
        for b in 0..bands {
            let theta = rng.random_range(0.0..=FRAC_PI_2);
            let phi = wrap_phase(rng.random_range(-PI..=PI));
            p.set(b, t, theta, phi);
        }
    }
    p
}

fn layout_48k() -> (StftConfig, BandLayout) {
    let config = StftConfig::default();
    let layout = make_band_layout(&config, &DEFAULT_BAND_EDGES_HZ).unwrap();
    (config, layout)
}

/// 1025 bins x 10 frames = 10,250 tiles with per-(band, frame) parameters.
fn random_tile_set(seed: u64) -> (StereoSpectrogram, MixingParams, BandLayout) {
    let (_, layout) = layout_48k();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = 10;
    let l = Spectrogram::from_fn(layout.bins(), frames, |_, _| random_tile(&mut rng));
    let r = Spectrogram::from_fn(layout.bins(), frames, |_, _| random_tile(&mut rng));
    let params = random_params(&mut rng, layout.bands(), frames);
    (StereoSpectrogram::new(l, r).unwrap(), params, layout)
}

fn rel_err_db(test: &[f64], reference: &[f64]) -> f64 {
    let err: f64 = test.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum();
    let refe: f64 = reference.iter().map(|x| x * x).sum();
    10.0 * (err / refe).log10()
}

fn sustained(recipe: SceneRecipe) -> SceneRecipe {
    recipe.with_source(SourceSpec::Harmonic(HarmonicSource::sustained()))
}

fn exact_inversion() -> cmss::Result<Outcome> {
    let start = Instant::now();
    let (spec, params, layout) = random_tile_set(1);
    let ms = cmss_forward(&spec, &params, &layout)?;
    let back = cmss_inverse(&ms, &params, &layout)?;
    let mut worst = 0.0f64;
    for i in 0..spec.left().as_slice().len() {
        let (l, r) = (spec.left().as_slice()[i], spec.right().as_slice()[i]);
        let (l2, r2) = (back.left().as_slice()[i], back.right().as_slice()[i]);
        worst = worst.max((l2 - l).norm().hypot((r2 - r).norm()) / l.norm().hypot(r.norm()));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        worst <= 1e-12 && secs < 2.0,
        format!("10250 tiles, max relative error {worst:.2e} (<= 1e-12), {secs:.3} s (< 2 s)"),
    ))
}

fn target_cancellation() -> cmss::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut side, mut mid) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let theta = rng.random_range(0.0..=FRAC_PI_2);
        let phi = wrap_phase(rng.random_range(-PI..=PI));
        let s1 = random_tile(&mut rng);
        let (l, r) = mix_source_tile(s1, theta, phi)?;
        let (m, s) = cmss_coeffs(theta, phi)?.forward(l, r);
        side = side.max(s.norm() / s1.norm());
        mid = mid.max((m - s1).norm() / s1.norm());
    }
    Ok(outcome(
        side <= 1e-12 && mid <= 1e-12,
        format!("max |S|/|S1| {side:.2e}, max |M-S1|/|S1| {mid:.2e} (<= 1e-12)"),
    ))
}

fn energy_conservation() -> cmss::Result<Outcome> {
    let (spec, params, layout) = random_tile_set(1);
    let ms = cmss_forward(&spec, &params, &layout)?;
    let mut worst = 0.0f64;
    for i in 0..spec.left().as_slice().len() {
        let before = spec.left().as_slice()[i].norm_sqr() + spec.right().as_slice()[i].norm_sqr();
        let after = ms.mid.as_slice()[i].norm_sqr() + ms.side.as_slice()[i].norm_sqr();
        worst = worst.max((after - before).abs() / before);
    }
    Ok(outcome(worst <= 1e-12, format!("max relative error {worst:.2e} (<= 1e-12)")))
}

fn centre_specialisation() -> cmss::Result<Outcome> {
    let c = cmss_coeffs(FRAC_PI_4, 0.0)?;
    let mag = [c.c1, c.c2, c.c3, c.c4]
        .iter()
        .map(|x| (x.norm() - FRAC_1_SQRT_2).abs())
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let (l, r) = (random_tile(&mut rng), random_tile(&mut rng));
        let (m, s) = c.forward(l, r);
        let (m_ref, s_ref) = (FRAC_1_SQRT_2 * (l + r), FRAC_1_SQRT_2 * (l - r));
        let (l2, r2) = c.inverse(m_ref, s_ref);
        let (l_ref, r_ref) = (FRAC_1_SQRT_2 * (m_ref + s_ref), FRAC_1_SQRT_2 * (m_ref - s_ref));
        let scale = l.norm().hypot(r.norm());
        for e in [(m - m_ref).norm(), (s - s_ref).norm(), (l2 - l_ref).norm(), (r2 - r_ref).norm()] {
            worst = worst.max(e / scale);
        }
    }
    Ok(outcome(
        mag <= 1e-15 && worst <= 1e-15,
        format!("coefficient magnitude deviation {mag:.2e}, transform deviation {worst:.2e} (<= 1e-15)"),
    ))
}

fn spcr_consistency() -> cmss::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut round, mut model) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let (l, r) = (random_tile(&mut rng), random_tile(&mut rng));
        let (l2, r2) = spcr_inverse(&spcr_forward(l, r));
        round = round.max((l2 - l).norm().hypot((r2 - r).norm()) / l.norm().hypot(r.norm()));

        let theta = rng.random_range(1e-3..FRAC_PI_2 - 1e-3);
        let phi = wrap_phase(rng.random_range(-PI..=PI));
        let s1 = random_tile(&mut rng);
        let (ml, mr) = mix_source_tile(s1, theta, phi)?;
        let tile = spcr_forward(ml, mr);
        for e in [
            (tile.theta - theta).abs(),
            wrap_phase(tile.phi - phi).abs(),
            wrap_phase(tile.psi - s1.arg()).abs(),
            (tile.u - s1.norm()).abs() / s1.norm(),
        ] {
            model = model.max(e);
        }
    }
    Ok(outcome(
        round <= 1e-12 && model <= 1e-12,
        format!("round trip {round:.2e}, model parameters {model:.2e} (<= 1e-12)"),
    ))
}

fn stft_fidelity() -> cmss::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let len = 5 * 48_000;
    let l: Vec<f64> = (0..len).map(|_| rng.random_range(-0.9..0.9)).collect();
    let r: Vec<f64> = (0..len).map(|i| 0.5 * (i as f64 * 0.013).sin() + rng.random_range(-0.4..0.4)).collect();
    let start = Instant::now();
    let config = PipelineConfig::default().with_mode(PipelineMode::Ci);
    let out = process(&l, &r, 48_000, &config, &IdentityEnhancer)?;
    let secs = start.elapsed().as_secs_f64();
    let interior = 2048..len - 2048;
    let err = rel_err_db(&out.channels[0][interior.clone()], &l[interior.clone()])
        .max(rel_err_db(&out.channels[1][interior.clone()], &r[interior]));
    Ok(outcome(
        err <= -90.0 && secs < 5.0,
        format!("interior error {err:.1} dB (<= -90 dB), {secs:.3} s (< 5 s)"),
    ))
}

fn estimator_recovery() -> cmss::Result<Outcome> {
    let (config, layout) = layout_48k();
    let stft = Stft::new(&config)?;
    let estimate = |recipe: &SceneRecipe| -> cmss::Result<(StereoSpectrogram, MixingParams)> {
        let scene = synth_scene(recipe)?;
        let spec = stft.analyze_stereo(&scene.mixture[0], &scene.mixture[1])?;
        let params = estimate_all(&spec, &layout, &config, &EstimatorConfig::default())?;
        Ok((spec, params))
    };

    let (_, params) = estimate(&sustained(SceneRecipe::new(
        2.0,
        Panning::Static { theta1: FRAC_PI_3, phi1: 0.5 },
    )))?;
    let (mut dt, mut dp) = (0.0f64, 0.0f64);
    for t in 10..params.frames() {
        for b in 0..layout.bands() {
            let (theta, phi) = params.get(b, t);
            dt = dt.max((theta - FRAC_PI_3).abs());
            dp = dp.max(wrap_phase(phi - 0.5).abs());
        }
    }

    let (spec, params) = estimate(&sustained(SceneRecipe::new(
        2.0,
        Panning::Delay { theta1: FRAC_PI_4, delay_samples: 2.0 },
    )))?;
    let mut di = 0.0f64;
    for b in (0..layout.bands()).filter(|&b| layout.band_edges(b).1 <= 6400.0) {
        let (mut num, mut den) = (0.0, 0.0);
        for t in 0..spec.frames() {
            for k in layout.bins_of_band(b) {
                let (l, r) = spec.tile(k, t);
                let w = l.norm_sqr() + r.norm_sqr();
                num += w * k as f64 * config.bin_hz();
                den += w;
            }
        }
        let want = ipd_from_delay(2.0, num / den, 48_000.0);
        for t in 10..params.frames() {
            di = di.max(wrap_phase(params.phi(b, t) - want).abs());
        }
    }
    Ok(outcome(
        dt <= 0.01 && dp <= 0.02 && di <= 0.2,
        format!("static: theta {dt:.2e} (<= 0.01), phi {dp:.2e} (<= 0.02); delay: ipd {di:.3} (<= 0.2)"),
    ))
}

fn single_source_transparency() -> cmss::Result<Outcome> {
    let scene = synth_scene(&sustained(SceneRecipe::new(
        3.0,
        Panning::Static { theta1: FRAC_PI_3, phi1: 0.5 },
    )))?;
    let [l, r] = &scene.mixture;
    let out = process(l, r, scene.sample_rate, &PipelineConfig::default(), &IdentityEnhancer)?;
    let err = rel_err_db(&out.channels.concat(), &[l.as_slice(), r.as_slice()].concat());
    Ok(outcome(err <= -60.0, format!("output vs input {err:.1} dB (<= -60 dB)")))
}

fn invocation_counts() -> cmss::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let gate = GateEnhancer::new(GateEnhancerConfig::default())?;
    let mut inputs: Vec<[Vec<f64>; 2]> = (0..3)
        .map(|i| {
            let len = 10_000 + 7_001 * i;
            [0, 1].map(|_| (0..len).map(|_| rng.random_range(-0.5..0.5)).collect())
        })
        .collect();
    inputs.push(synth_scene(&SceneRecipe::new(1.0, Panning::Static { theta1: 0.3, phi1: 0.2 }).with_noise(5.0))?.mixture);
    inputs.push([vec![0.0; 12_000], vec![0.0; 12_000]]);
    let mut seen = Vec::new();
    let mut ok = true;
    for [l, r] in &inputs {
        for mode in PipelineMode::ALL {
            let n = process(l, r, 48_000, &PipelineConfig::default().with_mode(mode), &gate)?.report.invocations;
            let want = match mode {
                PipelineMode::Cms | PipelineMode::StandardMid | PipelineMode::AltCenter => 1,
                PipelineMode::Ci | PipelineMode::StandardMs | PipelineMode::CmssBoth => 2,
            };
            ok &= n == want;
            if seen.len() < PipelineMode::ALL.len() {
                seen.push(format!("{mode}={n}"));
            }
        }
    }
    Ok(outcome(ok, format!("{} inputs: {}", inputs.len(), seen.join(" "))))
}

fn standard_mid_failure() -> cmss::Result<Outcome> {
    let recipe = sustained(SceneRecipe::new(2.0, Panning::Static { theta1: 0.05, phi1: 0.0 }));
    let reports = compare_modes(
        &recipe,
        &[PipelineMode::Cms, PipelineMode::StandardMid],
        &IdentityEnhancer,
        &PipelineConfig::default(),
    )?;
    let drop = reports[0].output_power_db.0 - reports[1].output_power_db.0;
    Ok(outcome(
        drop >= 6.0,
        format!("standard-mid speech power {drop:.2} dB below cms (>= 6 dB)"),
    ))
}

fn spatial_fidelity() -> cmss::Result<Outcome> {
    let recipe = SceneRecipe::new(3.0, Panning::Static { theta1: 0.45, phi1: 0.0 }).with_noise(7.5);
    let scene = synth_scene(&recipe)?;
    let [l, r] = &scene.mixture;
    let gate = GateEnhancer::new(GateEnhancerConfig::default())?;
    let (config, layout) = layout_48k();
    let mut devs = Vec::new();
    for mode in [PipelineMode::Cms, PipelineMode::AltCenter] {
        let out = process(l, r, 48_000, &PipelineConfig::default().with_mode(mode), &gate)?;
        let report = spatial_fidelity_check([l, r], [&out.channels[0], &out.channels[1]], &config, &layout)?;
        devs.push(report);
    }
    let cms = devs[0].mean_abs_dev;
    let centre = (devs[1].mean_output_theta - FRAC_PI_4).abs();
    Ok(outcome(
        cms <= 0.1 && centre <= 0.1,
        format!(
            "cms mean deviation {cms:.4} rad (<= 0.1); alt-center mean theta {:.4} rad, |theta - pi/4| {centre:.4} (<= 0.1)",
            devs[1].mean_output_theta
        ),
    ))
}

fn denoising() -> cmss::Result<Outcome> {
    let recipe = SceneRecipe::new(4.0, Panning::Static { theta1: 0.6, phi1: 0.4 }).with_noise(7.5);
    let scene = synth_scene(&recipe)?;
    let [l, r] = &scene.mixture;
    let target = [scene.target[0].as_slice(), scene.target[1].as_slice()].concat();
    let input = snr_db(&target, &[l.as_slice(), r.as_slice()].concat())?.0;
    let gate = GateEnhancer::new(GateEnhancerConfig::default())?;
    let out = process(l, r, 48_000, &PipelineConfig::default(), &gate)?;
    let output = snr_db(&target, &out.channels.concat())?.0;
    Ok(outcome(
        output > input,
        format!("input {input:.2} dB, output {output:.2} dB (output > input)"),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 12] = [
        ("exact inversion", exact_inversion),
        ("target cancellation", target_cancellation),
        ("energy conservation", energy_conservation),
        ("centre specialisation", centre_specialisation),
        ("stereo-polar round trip and model consistency", spcr_consistency),
        ("stft fidelity", stft_fidelity),
        ("estimator recovery", estimator_recovery),
        ("single-source transparency", single_source_transparency),
        ("enhancer invocation counts", invocation_counts),
        ("standard-mid attenuation on hard-left speech", standard_mid_failure),
        ("spatial fidelity", spatial_fidelity),
        ("denoising sanity", denoising),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = run().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        let tag = if result.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {name}: {}", i + 1, result.detail);
        failed += usize::from(!result.passed);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
