use std::fs;
use std::path::Path;

use cmss::config::RunConfig;
use cmss::enhancer::{CountingEnhancer, EnhancerKind, IdentityEnhancer};
use cmss::io::{read_wav, write_wav, AudioFile, Encoding, WriteOptions};
use cmss::metrics::snr_db;
use cmss::mixing::{synth_scene, Panning, SceneRecipe, SourceSpec};
use cmss::pipeline::{process, process_audio, PipelineConfig, PipelineMode};
use proptest::prelude::*;

fn stereo_snr(reference: &[Vec<f64>; 2], test: &[Vec<f64>]) -> f64 {
    let r: Vec<f64> = reference.iter().flatten().copied().collect();
    let t: Vec<f64> = test.iter().flatten().copied().collect();
    snr_db(&r, &t).unwrap().0
}

#[test]
fn shipped_scenes_parse_and_render() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let recipe = SceneRecipe::from_toml(&fs::read_to_string(&path).unwrap()).unwrap();
            let scene = synth_scene(&recipe).unwrap();
            assert_eq!(scene.len(), recipe.len(), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 3);
}

#[test]
fn wav_file_through_cms_improves_snr() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = SceneRecipe::new(
        3.0,
        Panning::Static {
            theta1: 0.35,
            phi1: 0.3,
        },
    )
    .with_noise(5.0)
    .with_seed(11);
    let scene = synth_scene(&recipe).unwrap();
    let path = dir.path().join("mix.wav");
    let audio = AudioFile::new(48_000, scene.mixture.to_vec(), Encoding::Pcm24).unwrap();
    write_wav(&path, &audio, WriteOptions { encoding: Encoding::Pcm24, clip: false }).unwrap();

    let input = read_wav(&path).unwrap();
    let gate = EnhancerKind::default().build().unwrap();
    let counted = CountingEnhancer::new(gate.as_ref());
    let out = process_audio(&input, &PipelineConfig::default(), &counted).unwrap();
    assert_eq!(counted.count(), 1);
    assert_eq!(out.channels.len(), 2);
    assert_eq!(out.channels[0].len(), input.len());

    let before = stereo_snr(&scene.target, &input.channels);
    let after = stereo_snr(&scene.target, &out.channels);
    assert!(after > before + 2.0, "{before} -> {after}");
}

#[test]
fn wav_source_recipe() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("talker.wav");
    let tone: Vec<f64> = (0..24_000).map(|i| 0.3 * (i as f64 * 0.03).sin()).collect();
    write_wav(&src, &AudioFile::new(48_000, vec![tone.clone()], Encoding::Float32).unwrap(), WriteOptions::default())
        .unwrap();
    let recipe = SceneRecipe::new(
        1.0,
        Panning::Static {
            theta1: 0.0,
            phi1: 0.0,
        },
    )
    .with_source(SourceSpec::Wav { path: src });
    let scene = synth_scene(&recipe).unwrap();
    assert_eq!(scene.len(), 48_000);
    // Shorter sources are zero padded.
    assert!(scene.source[30_000..].iter().all(|&x| x == 0.0));
    for (a, b) in scene.source[..24_000].iter().zip(&tone) {
        assert!((a - b).abs() < 1e-6);
    }
    // Hard left: the right channel carries nothing.
    let right: f64 = scene.target[1].iter().map(|x| x * x).sum();
    assert!(right < 1e-12);
}

#[test]
fn run_config_feeds_the_pipeline() {
    let config = RunConfig::from_toml(
        "mode = \"standard_ms\"\n[enhancer]\nkind = \"identity\"\n[estimator]\nalpha = 0.5\n",
    )
    .unwrap();
    let pipeline = config.pipeline();
    assert_eq!(pipeline.mode, PipelineMode::StandardMs);
    assert_eq!(pipeline.estimator.alpha, 0.5);
    let enhancer = config.enhancer.build().unwrap();
    assert_eq!(enhancer.name(), "identity");
}

#[test]
fn shipped_config_is_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    assert_eq!(RunConfig::load(path).unwrap(), RunConfig::default());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lossless_modes_are_transparent(
        seed in any::<u64>(),
        len in 2_048usize..12_000,
        mode in prop::sample::select(vec![PipelineMode::Ci, PipelineMode::StandardMs, PipelineMode::CmssBoth]),
    ) {
        let mut state = seed | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let left: Vec<f64> = (0..len).map(|_| next()).collect();
        let right: Vec<f64> = (0..len).map(|_| next()).collect();
        let config = PipelineConfig::default().with_mode(mode);
        let out = process(&left, &right, 48_000, &config, &IdentityEnhancer).unwrap();
        for (x, y) in left.iter().chain(&right).zip(out.channels.iter().flatten()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
