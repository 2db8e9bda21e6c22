use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use cmss::config::RunConfig;
use cmss::enhancer::EnhancerKind;
use cmss::estimator::estimate_all;
use cmss::io::{read_wav, write_wav, AudioFile, Encoding, WriteOptions};
use cmss::metrics::{compare_modes, format_table};
use cmss::mixing::{synth_scene, SceneRecipe};
use cmss::pipeline::{process_audio, OutputFormat, PipelineMode};
use cmss::selftest::run_all;
use cmss::stft::{make_band_layout, Stft};
use serde::Serialize;

use crate::{AnalyzeArgs, EnhanceArgs, MetricsArgs, SynthArgs};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_INVARIANT: u8 = 3;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(String),
    Invariant(usize),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Io(_) => EXIT_IO,
            Failure::Invariant(_) => EXIT_INVARIANT,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Io(m) => f.write_str(m),
            Failure::Invariant(n) => write!(f, "{n} self-test check(s) failed"),
        }
    }
}

impl From<cmss::Error> for Failure {
    fn from(e: cmss::Error) -> Self {
        use cmss::Error::*;
        match e {
            Io(_) | Wav(_) | UnsupportedChannelCount(_) | NotStereo(_) | InputTooShort { .. }
            | SampleOutOfRange { .. } | NonFinite(_) => Failure::Io(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn io_err(path: &Path, e: impl fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            RunConfig::from_toml(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
        }
    }
}

fn parse_encoding(name: Option<&str>, default: Encoding) -> Result<Encoding> {
    name.map_or(Ok(default), |n| n.parse().map_err(|e: cmss::Error| Failure::Usage(e.to_string())))
}

fn parse_enhancer(name: Option<&str>, default: &EnhancerKind) -> Result<EnhancerKind> {
    match name {
        None => Ok(default.clone()),
        // Keep a configured gate's settings when the flag only names the kind.
        Some("gate") if matches!(default, EnhancerKind::Gate(_)) => Ok(default.clone()),
        Some(n) => n.parse().map_err(|e: cmss::Error| Failure::Usage(e.to_string())),
    }
}

fn parse_mode(name: &str) -> Result<PipelineMode> {
    name.parse().map_err(|e: cmss::Error| Failure::Usage(e.to_string()))
}

fn read_input(path: &Path) -> Result<AudioFile> {
    read_wav(path).map_err(|e| io_err(path, e))
}

/// Write through a sibling temporary file so a failure leaves nothing at `path`.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let result = fs::write(&tmp, bytes).and_then(|()| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(path, e));
    }
    Ok(())
}

fn to_json(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn check_range(audio: &AudioFile, clip: bool, what: &str) -> Result<()> {
    if clip {
        return Ok(());
    }
    for ch in &audio.channels {
        if let Some((i, v)) = ch.iter().enumerate().find(|(_, v)| v.abs() > 1.0) {
            return Err(Failure::Io(format!(
                "{what}: sample {i} = {v} is outside [-1, 1]; pass --clip or enable the limiter"
            )));
        }
    }
    Ok(())
}

pub fn enhance(args: EnhanceArgs) -> Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(m) = &args.mode {
        config.mode = parse_mode(m)?;
    }
    if args.mono_out {
        config.output.format = OutputFormat::Mono;
    }
    config.enhancer = parse_enhancer(args.enhancer.as_deref(), &config.enhancer)?;
    config.output.encoding = parse_encoding(args.encoding.as_deref(), config.output.encoding)?;
    config.output.limiter |= args.limiter;
    config.output.clip |= args.clip;
    config.validate()?;
    let enhancer = config.enhancer.build()?;

    let input = read_input(&args.input)?;
    let out = process_audio(&input, &config.pipeline(), enhancer.as_ref())?;
    let audio = AudioFile::new(input.sample_rate, out.channels, config.output.encoding)?;
    check_range(&audio, config.output.clip, "output")?;
    let report = args.report.as_ref().map(|_| to_json(&out.report)).transpose()?;

    write_wav(&args.output, &audio, config.write_options()).map_err(|e| io_err(&args.output, e))?;
    if let (Some(path), Some(bytes)) = (&args.report, report) {
        write_atomic(path, &bytes)?;
    }
    eprintln!(
        "{}: mode {}, {} enhancer call(s), {} frames",
        args.output.display(),
        out.report.mode,
        out.report.invocations,
        out.report.frames
    );
    Ok(())
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let input = read_input(&args.input)?;
    if input.channel_count() != 2 {
        return Err(cmss::Error::NotStereo(input.channel_count()).into());
    }
    let pipeline = config.pipeline();
    let stft_config = pipeline.stft_for(input.sample_rate)?;
    let layout = make_band_layout(&stft_config, &pipeline.band_edges_hz)?;
    let spec = Stft::new(&stft_config)?.analyze_stereo(&input.channels[0], &input.channels[1])?;
    let params = estimate_all(&spec, &layout, &stft_config, &pipeline.estimator)?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Failure::Io(e.to_string());
    writer
        .write_record([
            "frame_index",
            "time_sec",
            "band_index",
            "band_lo_hz",
            "band_hi_hz",
            "theta1_rad",
            "phi1_rad",
            "band_energy",
        ])
        .map_err(csv_err)?;
    let fs = input.sample_rate as f64;
    let centre_offset = stft_config.fft_size as f64 / 2.0 - stft_config.padding() as f64;
    for t in 0..params.frames() {
        // Frame centre relative to the first input sample.
        let time = (t as f64 * stft_config.hop as f64 + centre_offset) / fs;
        for b in 0..params.bands() {
            let (lo, hi) = layout.band_edges(b);
            let (theta, phi) = params.get(b, t);
            writer
                .write_record([
                    t.to_string(),
                    format!("{time:.6}"),
                    b.to_string(),
                    lo.to_string(),
                    hi.to_string(),
                    format!("{theta:.9}"),
                    format!("{phi:.9}"),
                    format!("{:.9e}", params.band_energy(b, t)),
                ])
                .map_err(csv_err)?;
        }
    }
    let bytes = writer.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
    write_atomic(&args.output, &bytes)?;
    eprintln!(
        "{}: {} frames x {} bands",
        args.output.display(),
        params.frames(),
        params.bands()
    );
    Ok(())
}

fn load_recipe(path: &Path) -> Result<SceneRecipe> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut recipe = SceneRecipe::from_toml(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    // Source paths in a recipe are relative to the recipe file.
    if let cmss::mixing::SourceSpec::Wav { path: src } = &mut recipe.source {
        if src.is_relative() {
            if let Some(dir) = path.parent() {
                *src = dir.join(&*src);
            }
        }
    }
    Ok(recipe)
}

#[derive(Serialize)]
struct TruthFile<'a> {
    recipe: &'a SceneRecipe,
    truth: &'a cmss::mixing::MixTruth,
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let recipe = load_recipe(&args.recipe)?;
    let encoding = parse_encoding(args.encoding.as_deref(), Encoding::Float32)?;
    let scene = synth_scene(&recipe)?;
    let sr = scene.sample_rate;
    let stems = [
        ("mixture.wav", AudioFile::new(sr, scene.mixture.to_vec(), encoding)?),
        ("target.wav", AudioFile::new(sr, scene.target.to_vec(), encoding)?),
        ("noise.wav", AudioFile::new(sr, scene.noise.to_vec(), encoding)?),
        ("source.wav", AudioFile::new(sr, vec![scene.source.clone()], encoding)?),
    ];
    for (name, audio) in &stems {
        check_range(audio, args.clip, name)?;
    }
    let truth = to_json(&TruthFile {
        recipe: &recipe,
        truth: &scene.truth,
    })?;

    fs::create_dir_all(&args.output).map_err(|e| io_err(&args.output, e))?;
    let options = WriteOptions {
        encoding,
        clip: args.clip,
    };
    for (name, audio) in &stems {
        let path = args.output.join(name);
        write_wav(&path, audio, options).map_err(|e| io_err(&path, e))?;
    }
    write_atomic(&args.output.join("truth.json"), &truth)?;
    eprintln!("{}: {} samples at {} Hz", args.output.display(), scene.len(), sr);
    Ok(())
}

pub fn metrics(args: MetricsArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let modes = args
        .modes
        .iter()
        .filter(|m| !m.trim().is_empty())
        .map(|m| parse_mode(m))
        .collect::<Result<Vec<_>>>()?;
    if modes.is_empty() {
        return Err(Failure::Usage("no modes given".into()));
    }
    let kind = parse_enhancer(args.enhancer.as_deref(), &config.enhancer)?;
    let enhancer = kind.build()?;
    let recipe = load_recipe(&args.recipe)?;
    let mut pipeline = config.pipeline();
    pipeline.output = OutputFormat::Stereo;
    let reports = compare_modes(&recipe, &modes, enhancer.as_ref(), &pipeline)?;
    write_atomic(&args.output, &to_json(&reports)?)?;
    print!("{}", format_table(&reports));
    Ok(())
}

pub fn selftest() -> Result<()> {
    let results = run_all();
    let mut failed = 0;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {}: {}", r.name, r.detail);
        failed += usize::from(!r.passed);
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        return Err(Failure::Invariant(failed));
    }
    Ok(())
}
