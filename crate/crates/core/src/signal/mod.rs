//! Waveform containers, file formats, synthetic generation and windowing.

mod io;
mod segment;
mod synthetic;

pub use io::{load_labels, load_waveform, save_labels, save_waveform, WaveformFormat};
pub use segment::{segment, segment_labeled, window_samples};
pub use synthetic::{
    generate_synthetic, low_frequency_two_class, EventKind, LowFrequencyTwoClass, SampleLabel, SyntheticEvent,
    SyntheticSpec, CLASS_LABELS,
};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniformly sampled single-channel record.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T> {
    samples: Vec<T>,
    sample_rate: T,
    channel_id: String,
    start_time: Option<f64>,
}

impl<T: Scalar> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate: T, channel_id: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyWaveform);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        if !(sample_rate > T::zero()) || !sample_rate.is_finite() {
            return Err(Error::invalid(format!(
                "sample_rate must be positive and finite, got {sample_rate}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
            channel_id: channel_id.into(),
            start_time: None,
        })
    }

    pub fn with_start_time(mut self, start_time: f64) -> Self {
        self.start_time = Some(start_time);
        self
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn sample_rate(&self) -> T {
        self.sample_rate
    }

    pub fn channel_id(&self) -> &str {
        &self.channel_id
    }

    pub fn start_time(&self) -> Option<f64> {
        self.start_time
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> T {
        T::of_usize(self.samples.len()) / self.sample_rate
    }
}

/// Fixed-length window cut from a waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T> {
    pub samples: Vec<T>,
    pub sample_rate: T,
    pub source_channel: String,
    pub offset_s: T,
    /// Ground truth, only known for synthetic data.
    pub label: Option<String>,
}

impl<T: Scalar> Segment<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Stable identifier `<channel>:<offset in samples>`.
    pub fn id(&self) -> String {
        let offset = (self.offset_s * self.sample_rate).round().as_f64() as i64;
        format!("{}:{offset}", self.source_channel)
    }
}
