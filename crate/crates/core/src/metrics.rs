//! Objective metrics: SNR, segmental SNR, side leakage, mode comparison.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::enhancer::Enhancer;
use crate::error::{Error, Result};
use crate::mixing::{synth_scene, SceneRecipe};
use crate::pipeline::{process, PipelineConfig, PipelineMode};
use crate::stft::{make_band_layout, Spectrogram, Stft, StereoSpectrogram};
use crate::transform::{cmss_forward, MidSideSpectrograms};

/// A decibel value; infinities serialize as the strings "inf" / "-inf".
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Db(pub f64);

impl Db {
    pub fn from_ratio(num: f64, den: f64) -> Self {
        Db(10.0 * (num / den).log10())
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for Db {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            x if x == f64::INFINITY => f.write_str("inf"),
            x if x == f64::NEG_INFINITY => f.write_str("-inf"),
            x => write!(f, "{x:.2}"),
        }
    }
}

impl Serialize for Db {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0.is_nan() {
            s.serialize_str("nan")
        } else {
            s.serialize_str(if self.0 > 0.0 { "inf" } else { "-inf" })
        }
    }
}

impl<'de> Deserialize<'de> for Db {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Db(x)),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(Db(f64::INFINITY)),
                "-inf" => Ok(Db(f64::NEG_INFINITY)),
                "nan" => Ok(Db(f64::NAN)),
                other => Err(serde::de::Error::custom(format!("not a dB value: {other}"))),
            },
        }
    }
}

fn check_lengths(reference: &[f64], test: &[f64]) -> Result<()> {
    if reference.len() != test.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} samples", reference.len()),
            actual: format!("{} samples", test.len()),
        });
    }
    Ok(())
}

/// 10·log10(Σ ref² / Σ (test − ref)²); +inf when they are identical.
pub fn snr_db(reference: &[f64], test: &[f64]) -> Result<Db> {
    check_lengths(reference, test)?;
    let signal: f64 = reference.iter().map(|x| x * x).sum();
    if signal == 0.0 {
        return Err(Error::ZeroReference);
    }
    let error: f64 = reference.iter().zip(test).map(|(r, t)| (t - r).powi(2)).sum();
    Ok(Db::from_ratio(signal, error))
}

/// Per-frame SNR is clamped to this range before averaging.
pub const SEGMENTAL_CLAMP_DB: (f64, f64) = (-10.0, 35.0);

/// Mean per-frame SNR over non-overlapping frames whose reference energy
/// (summed across channels) exceeds the median frame energy.
pub fn segmental_snr_db(reference: &[&[f64]], test: &[&[f64]], frame_len: usize) -> Result<Db> {
    if reference.len() != test.len() || reference.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} channels", reference.len()),
            actual: format!("{} channels", test.len()),
        });
    }
    for (r, t) in reference.iter().zip(test) {
        check_lengths(r, t)?;
    }
    if frame_len == 0 {
        return Err(Error::OutOfRange {
            name: "frame_len",
            value: 0.0,
            range: ">= 1",
        });
    }
    let len = reference[0].len();
    let frames = len / frame_len;
    let mut cells: Vec<(f64, f64)> = (0..frames)
        .map(|f| {
            let span = f * frame_len..(f + 1) * frame_len;
            reference.iter().zip(test).fold((0.0, 0.0), |(s, e), (r, t)| {
                let r = &r[span.clone()];
                let t = &t[span.clone()];
                (
                    s + r.iter().map(|x| x * x).sum::<f64>(),
                    e + r.iter().zip(t).map(|(a, b)| (b - a).powi(2)).sum::<f64>(),
                )
            })
        })
        .collect();
    let mut energies: Vec<f64> = cells.iter().map(|c| c.0).collect();
    energies.sort_by(f64::total_cmp);
    let median = match energies.len() {
        0 => return Err(Error::ZeroReference),
        n if n % 2 == 1 => energies[n / 2],
        n => 0.5 * (energies[n / 2 - 1] + energies[n / 2]),
    };
    cells.retain(|c| c.0 > median);
    if cells.is_empty() {
        return Err(Error::ZeroReference);
    }
    let (lo, hi) = SEGMENTAL_CLAMP_DB;
    let sum: f64 = cells.iter().map(|&(s, e)| Db::from_ratio(s, e).0.clamp(lo, hi)).sum();
    Ok(Db(sum / cells.len() as f64))
}

/// A set of (bin, frame) tiles.
#[derive(Clone, Debug, PartialEq)]
pub struct TileMask {
    bins: usize,
    frames: usize,
    active: Vec<bool>,
}

impl TileMask {
    pub fn new(bins: usize, frames: usize, active: Vec<bool>) -> Result<Self> {
        if active.len() != bins * frames {
            return Err(Error::DimensionMismatch {
                expected: format!("{} tiles", bins * frames),
                actual: format!("{} tiles", active.len()),
            });
        }
        Ok(Self { bins, frames, active })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.bins, self.frames)
    }

    pub fn count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn contains(&self, bin: usize, frame: usize) -> bool {
        self.active[frame * self.bins + bin]
    }
}

/// Tiles of a stereo spectrogram whose energy is within `range_db` of the loudest one.
pub fn active_tile_mask(spec: &StereoSpectrogram, range_db: f64) -> TileMask {
    let energy: Vec<f64> = spec
        .left()
        .as_slice()
        .iter()
        .zip(spec.right().as_slice())
        .map(|(l, r)| l.norm_sqr() + r.norm_sqr())
        .collect();
    let peak = energy.iter().copied().fold(0.0, f64::max);
    let threshold = peak * 10f64.powf(-range_db / 10.0);
    TileMask {
        bins: spec.bins(),
        frames: spec.frames(),
        active: energy.iter().map(|&e| peak > 0.0 && e >= threshold).collect(),
    }
}

/// Range used for ground-truth source-activity masks.
pub const SOURCE_MASK_RANGE_DB: f64 = 40.0;

/// 10·log10(Σ_mask |S|² / Σ_mask |M|²).
pub fn side_leakage_db(ms: &MidSideSpectrograms, mask: &TileMask) -> Result<Db> {
    if mask.dims() != ms.mid.dims() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", ms.mid.dims()),
            actual: format!("{:?}", mask.dims()),
        });
    }
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    let sum = |s: &Spectrogram| -> f64 {
        s.as_slice()
            .iter()
            .zip(&mask.active)
            .filter(|(_, &a)| a)
            .map(|(x, _)| x.norm_sqr())
            .sum()
    };
    let mid = sum(&ms.mid);
    if mid == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(Db::from_ratio(sum(&ms.side), mid))
}

fn mean_power_db(channels: &[Vec<f64>]) -> Db {
    let n: usize = channels.iter().map(Vec::len).sum();
    let e: f64 = channels.iter().flatten().map(|x| x * x).sum();
    Db::from_ratio(e, n.max(1) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mode: PipelineMode,
    pub enhancer: String,
    pub invocation_count: usize,
    pub input_snr_db: Db,
    pub broadband_snr_db: Db,
    pub segmental_snr_db: Db,
    /// Mixture side-to-mid ratio over source-active tiles under the mode's
    /// parameters; absent for channel-independent processing.
    pub side_leakage_db: Option<Db>,
    /// Mean square of the output over all channels and samples.
    pub output_power_db: Db,
}

/// Runs every mode on the same synthesized scene and measures each output
/// against the scene's stereo target.
pub fn compare_modes(
    recipe: &SceneRecipe,
    modes: &[PipelineMode],
    enhancer: &dyn Enhancer,
    config: &PipelineConfig,
) -> Result<Vec<MetricReport>> {
    let scene = synth_scene(recipe)?;
    let [ml, mr] = &scene.mixture;
    let [tl, tr] = &scene.target;
    let target = [tl.as_slice(), tr.as_slice()];
    let target_flat = [tl.as_slice(), tr.as_slice()].concat();
    let input_snr_db = snr_db(&target_flat, &[ml.as_slice(), mr.as_slice()].concat())?;

    let stft_config = config.stft_for(scene.sample_rate)?;
    let layout = make_band_layout(&stft_config, &config.band_edges_hz)?;
    let stft = Stft::new(&stft_config)?;
    let mixture_spec = stft.analyze_stereo(ml, mr)?;
    let mask = active_tile_mask(&stft.analyze_stereo(tl, tr)?, SOURCE_MASK_RANGE_DB);

    let mut reports = Vec::with_capacity(modes.len());
    for &mode in modes {
        let run = config.clone().with_mode(mode);
        let out = process(ml, mr, scene.sample_rate, &run, enhancer)?;
        if out.channels.len() != 2 {
            return Err(Error::MonoOutputUnsupported("metrics"));
        }
        let output = [out.channels[0].as_slice(), out.channels[1].as_slice()];
        let side_leakage_db = match &out.params {
            Some(params) => Some(side_leakage_db(&cmss_forward(&mixture_spec, params, &layout)?, &mask)?),
            None => None,
        };
        reports.push(MetricReport {
            mode,
            enhancer: enhancer.name().to_string(),
            invocation_count: out.report.invocations,
            input_snr_db,
            broadband_snr_db: snr_db(&target_flat, &output.concat())?,
            segmental_snr_db: segmental_snr_db(&target, &output, stft_config.hop)?,
            side_leakage_db,
            output_power_db: mean_power_db(&out.channels),
        });
    }
    Ok(reports)
}

/// Aligned plain-text table, one row per report.
pub fn format_table(reports: &[MetricReport]) -> String {
    let header = ["mode", "calls", "in_snr", "snr", "seg_snr", "leak", "power"];
    let rows: Vec<[String; 7]> = reports
        .iter()
        .map(|r| {
            [
                r.mode.to_string(),
                r.invocation_count.to_string(),
                r.input_snr_db.to_string(),
                r.broadband_snr_db.to_string(),
                r.segmental_snr_db.to_string(),
                r.side_leakage_db.map_or("-".into(), |d| d.to_string()),
                r.output_power_db.to_string(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
    };
    line(&header);
    for r in &rows {
        line(&r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}
