//! Custom mid-side stereo decomposition.
//!
//! A stereo signal is rotated, per frequency band and STFT frame, into a
//! custom mid signal that concentrates a spatially identified source and a
//! custom side signal from which that source cancels. Any monaural enhancer
//! can then run on the mid alone before the rotation is undone.

pub mod config;
pub mod enhancer;
pub mod error;
pub mod estimator;
pub mod io;
pub mod metrics;
pub mod mixing;
pub mod pipeline;
pub mod selftest;
pub mod spcr;
pub mod stft;
pub mod transform;

pub use error::{Error, Result};
pub use num_complex::Complex64;
