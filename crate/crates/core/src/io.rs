//! RIFF/WAVE ingestion and persistence (PCM16, PCM24, float32).

use std::fs;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Pcm16,
    Pcm24,
    #[default]
    Float32,
}

impl Encoding {
    fn full_scale(self) -> f64 {
        match self {
            Encoding::Pcm16 => 32_768.0,
            Encoding::Pcm24 => 8_388_608.0,
            Encoding::Float32 => 1.0,
        }
    }

    fn spec(self, sample_rate: u32, channels: u16) -> WavSpec {
        let (bits_per_sample, sample_format) = match self {
            Encoding::Pcm16 => (16, SampleFormat::Int),
            Encoding::Pcm24 => (24, SampleFormat::Int),
            Encoding::Float32 => (32, SampleFormat::Float),
        };
        WavSpec {
            channels,
            sample_rate,
            bits_per_sample,
            sample_format,
        }
    }
}

impl std::str::FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pcm16" => Ok(Encoding::Pcm16),
            "pcm24" => Ok(Encoding::Pcm24),
            "float32" | "f32" => Ok(Encoding::Float32),
            other => Err(Error::UnsupportedEncoding(other.to_string())),
        }
    }
}

/// Decoded audio with one sample vector per channel, normalised to [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct AudioFile {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
    pub encoding: Encoding,
}

impl AudioFile {
    pub fn new(sample_rate: u32, channels: Vec<Vec<f64>>, encoding: Encoding) -> Result<Self> {
        let audio = Self {
            sample_rate,
            channels,
            encoding,
        };
        audio.validate()?;
        Ok(audio)
    }

    pub fn stereo(sample_rate: u32, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        Self::new(sample_rate, vec![left, right], Encoding::Float32)
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn downmix(&self) -> Vec<f64> {
        let n = self.channels.len() as f64;
        (0..self.len())
            .map(|i| self.channels.iter().map(|c| c[i]).sum::<f64>() / n)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidSampleRate);
        }
        if !matches!(self.channels.len(), 1 | 2) {
            return Err(Error::UnsupportedChannelCount(self.channels.len() as u16));
        }
        let len = self.len();
        if let Some(bad) = self.channels.iter().find(|c| c.len() != len) {
            return Err(Error::ChannelLengthMismatch {
                left: len,
                right: bad.len(),
            });
        }
        if self.channels.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("audio samples"));
        }
        Ok(())
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioFile> {
    let reader = WavReader::open(path)?;
    let spec = reader.spec();
    if !matches!(spec.channels, 1 | 2) {
        return Err(Error::UnsupportedChannelCount(spec.channels));
    }
    let encoding = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => Encoding::Pcm16,
        (SampleFormat::Int, 24) => Encoding::Pcm24,
        (SampleFormat::Float, 32) => Encoding::Float32,
        (format, bits) => {
            return Err(Error::UnsupportedEncoding(format!("{format:?} {bits}-bit")))
        }
    };
    let interleaved: Vec<f64> = match encoding {
        Encoding::Float32 => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        _ => {
            let scale = encoding.full_scale();
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let nch = spec.channels as usize;
    let channels = (0..nch)
        .map(|c| interleaved.iter().skip(c).step_by(nch).copied().collect())
        .collect();
    AudioFile::new(spec.sample_rate, channels, encoding)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WriteOptions {
    pub encoding: Encoding,
    /// Saturate out-of-range samples instead of failing.
    pub clip: bool,
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self {
            encoding: Encoding::Float32,
            clip: false,
        }
    }
}

/// Validates everything up front, then writes through a sibling temporary
/// file so a failed write never leaves a partial file at `path`.
pub fn write_wav(path: impl AsRef<Path>, audio: &AudioFile, options: WriteOptions) -> Result<()> {
    audio.validate()?;
    if !options.clip {
        for ch in &audio.channels {
            if let Some((index, &value)) = ch.iter().enumerate().find(|(_, x)| x.abs() > 1.0) {
                return Err(Error::SampleOutOfRange { index, value });
            }
        }
    }
    let path = path.as_ref();
    let spec = options
        .encoding
        .spec(audio.sample_rate, audio.channel_count() as u16);
    let tmp = path.with_extension("wav.partial");
    let result = write_samples(&tmp, spec, audio, options.encoding);
    match result {
        Ok(()) => fs::rename(&tmp, path).map_err(Error::from),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

fn write_samples(path: &Path, spec: WavSpec, audio: &AudioFile, encoding: Encoding) -> Result<()> {
    let mut writer = WavWriter::create(path, spec)?;
    for i in 0..audio.len() {
        for ch in &audio.channels {
            let x = ch[i].clamp(-1.0, 1.0);
            match encoding {
                Encoding::Float32 => writer.write_sample(ch[i].clamp(-1.0, 1.0) as f32)?,
                Encoding::Pcm16 => writer.write_sample(quantize(x, encoding) as i16)?,
                Encoding::Pcm24 => writer.write_sample(quantize(x, encoding))?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

fn quantize(x: f64, encoding: Encoding) -> i32 {
    let scale = encoding.full_scale();
    (x * scale).round().clamp(-scale, scale - 1.0) as i32
}
