use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::Segment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    /// 256-point frames with a 64-sample hop and a Hann window
    /// (0.39 Hz bins at 100 Hz sampling).
    fn default() -> Self {
        Self {
            n_fft: 256,
            hop: 64,
            window: WindowKind::Hann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_fft < 16 || !self.n_fft.is_power_of_two() {
            return Err(Error::invalid(format!(
                "n_fft must be a power of two >= 16, got {}",
                self.n_fft
            )));
        }
        if self.hop == 0 || self.hop > self.n_fft {
            return Err(Error::invalid(format!(
                "hop must be in 1..={}, got {}",
                self.n_fft, self.hop
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Frames produced for a signal of `n` samples.
    pub fn n_frames(&self, n: usize) -> usize {
        if n < self.n_fft {
            0
        } else {
            (n - self.n_fft) / self.hop + 1
        }
    }
}

/// One-sided power spectrogram, `n_frames x (n_fft/2 + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrogram<T> {
    pub power: Array2<T>,
    /// Frame centre times, relative to the segment start.
    pub frame_times_s: Vec<T>,
    pub sample_rate: T,
    pub n_fft: usize,
}

impl<T: Scalar> PowerSpectrogram<T> {
    pub fn n_frames(&self) -> usize {
        self.power.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.power.ncols()
    }

    pub fn bin_frequency(&self, k: usize) -> T {
        T::of_usize(k) * self.sample_rate / T::of_usize(self.n_fft)
    }
}

/// Reusable STFT plan.
pub struct Stft<T: Scalar> {
    cfg: StftConfig,
    fft: Arc<dyn Fft<T>>,
    window: Vec<T>,
}

impl<T: Scalar> Stft<T> {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.n_fft);
        let n = T::of_usize(cfg.n_fft);
        let window = (0..cfg.n_fft)
            .map(|i| match cfg.window {
                // periodic Hann
                WindowKind::Hann => T::of(0.5) * (T::one() - (T::TAU() * T::of_usize(i) / n).cos()),
                WindowKind::Rectangular => T::one(),
            })
            .collect();
        Ok(Self { cfg, fft, window })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn process(&self, samples: &[T], sample_rate: T) -> Result<PowerSpectrogram<T>> {
        let n_fft = self.cfg.n_fft;
        if samples.len() < n_fft {
            return Err(Error::invalid(format!(
                "segment of {} samples is shorter than n_fft = {n_fft}",
                samples.len()
            )));
        }
        let n_frames = self.cfg.n_frames(samples.len());
        let n_bins = self.cfg.n_bins();
        let mut power = Array2::zeros((n_frames, n_bins));
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.fft.get_inplace_scratch_len()];
        for t in 0..n_frames {
            let start = t * self.cfg.hop;
            for (i, c) in buf.iter_mut().enumerate() {
                *c = Complex::new(samples[start + i] * self.window[i], T::zero());
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (k, c) in buf.iter().take(n_bins).enumerate() {
                power[[t, k]] = c.norm_sqr();
            }
        }
        let half = T::of_usize(n_fft) / T::of(2.0);
        let frame_times_s = (0..n_frames)
            .map(|t| (T::of_usize(t * self.cfg.hop) + half) / sample_rate)
            .collect();
        Ok(PowerSpectrogram {
            power,
            frame_times_s,
            sample_rate,
            n_fft,
        })
    }
}

/// Power spectrogram of a segment; frame `t` covers samples `[t*hop, t*hop + n_fft)`.
pub fn stft<T: Scalar>(seg: &Segment<T>, cfg: &StftConfig) -> Result<PowerSpectrogram<T>> {
    Stft::new(*cfg)?.process(&seg.samples, seg.sample_rate)
}
