use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fft size {0} is not a power of two")]
    FftSizeNotPowerOfTwo(usize),
    #[error("hop {hop} is invalid for fft size {fft_size}; fft_size / hop must be 2 or 4")]
    InvalidHop { fft_size: usize, hop: usize },
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("channel lengths differ: left {left}, right {right}")]
    ChannelLengthMismatch { left: usize, right: usize },
    #[error("input has {len} samples, at least {min} required")]
    InputTooShort { len: usize, min: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("band edges must be strictly increasing and start at 0 Hz")]
    InvalidBandEdges,
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("empty spectrogram")]
    EmptySpectrogram,
    #[error("empty mask: no source-active tiles")]
    EmptyMask,
    #[error("reference signal is all zeros")]
    ZeroReference,
    #[error("stereo input required, got {0} channel(s)")]
    NotStereo(usize),
    #[error("unsupported channel count: {0}")]
    UnsupportedChannelCount(u16),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("sample {value} at index {index} is outside [-1, 1] and clipping is disabled")]
    SampleOutOfRange { index: usize, value: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("unknown mode: {0}")]
    UnknownMode(String),
    #[error("mono output is not available for mode {0}")]
    MonoOutputUnsupported(&'static str),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
