//! Frequency-warped spectrograms, residual CNN features and Gaussian mixture
//! clustering for unsupervised grouping of seismic signals.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod cluster;
pub mod error;
pub mod features;
pub mod pipeline;
pub mod scalar;
pub mod search;
pub mod signal;
pub mod spectral;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type Waveform64 = signal::Waveform<f64>;
pub type Segment64 = signal::Segment<f64>;
pub type Spectrogram64 = spectral::Spectrogram<f64>;
pub type FrequencyScale64 = spectral::FrequencyScale<f64>;
pub type CnnModel64 = features::CnnModel<f64>;
pub type GmmModel64 = cluster::GmmModel<f64>;

pub type Waveform32 = signal::Waveform<f32>;
pub type Spectrogram32 = spectral::Spectrogram<f32>;
pub type GmmModel32 = cluster::GmmModel<f32>;
