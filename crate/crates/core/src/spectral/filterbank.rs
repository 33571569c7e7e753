use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::scale::FrequencyScale;
use super::stft::{PowerSpectrogram, StftConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterNormalization {
    /// Triangles peak at 1.
    #[default]
    Peak,
    /// Triangles scaled by `2 / (upper - lower)` so each has unit area in Hz.
    Area,
}

/// Triangular filters over one-sided FFT bins, `n_filters x (n_fft/2 + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Filterbank<T> {
    weights: Array2<T>,
    scale: FrequencyScale<T>,
    breaks_hz: Vec<T>,
    fmin_hz: T,
    fmax_hz: T,
    sample_rate: T,
}

impl<T: Scalar> Filterbank<T> {
    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }

    pub fn scale(&self) -> FrequencyScale<T> {
        self.scale
    }

    /// The `n_filters + 2` band edges in Hz.
    pub fn breaks_hz(&self) -> &[T] {
        &self.breaks_hz
    }

    pub fn centers_hz(&self) -> Vec<T> {
        self.breaks_hz[1..self.breaks_hz.len() - 1].to_vec()
    }

    pub fn n_filters(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fmin_hz(&self) -> T {
        self.fmin_hz
    }

    pub fn fmax_hz(&self) -> T {
        self.fmax_hz
    }

    pub fn sample_rate(&self) -> T {
        self.sample_rate
    }

    pub fn normalized(mut self, norm: FilterNormalization) -> Self {
        if norm == FilterNormalization::Area {
            for (i, mut row) in self.weights.rows_mut().into_iter().enumerate() {
                let width = self.breaks_hz[i + 2] - self.breaks_hz[i];
                row.mapv_inplace(|w| w * T::of(2.0) / width);
            }
        }
        self
    }
}

/// Places `n_filters + 2` break frequencies uniformly on `scale` between
/// `fmin_hz` and `fmax_hz`; filter `i` rises from break `i` to a peak at
/// break `i+1` and falls back to zero at break `i+2`.
pub fn build_filterbank<T: Scalar>(
    scale: FrequencyScale<T>,
    n_filters: usize,
    cfg: &StftConfig,
    sample_rate: T,
    fmin_hz: T,
    fmax_hz: T,
) -> Result<Filterbank<T>> {
    cfg.validate()?;
    if n_filters == 0 {
        return Err(Error::invalid("n_filters must be >= 1"));
    }
    if !(sample_rate > T::zero()) {
        return Err(Error::invalid(format!(
            "sample_rate must be positive, got {sample_rate}"
        )));
    }
    let nyquist = sample_rate / T::of(2.0);
    if !(fmin_hz >= T::zero() && fmin_hz < fmax_hz && fmax_hz <= nyquist) {
        return Err(Error::invalid(format!(
            "need 0 <= fmin < fmax <= Nyquist ({nyquist} Hz), got fmin={fmin_hz}, fmax={fmax_hz}"
        )));
    }

    let lo = scale.to_scale(fmin_hz);
    let hi = scale.to_scale(fmax_hz);
    let steps = T::of_usize(n_filters + 1);
    let mut breaks_hz: Vec<T> = (0..n_filters + 2)
        .map(|j| scale.from_scale(lo + (hi - lo) * T::of_usize(j) / steps))
        .collect();
    // pin the ends against round-off in the inverse map
    breaks_hz[0] = fmin_hz;
    breaks_hz[n_filters + 1] = fmax_hz;

    let n_bins = cfg.n_bins();
    let bin_hz = sample_rate / T::of_usize(cfg.n_fft);
    let mut weights = Array2::zeros((n_filters, n_bins));
    for i in 0..n_filters {
        let (left, peak, right) = (breaks_hz[i], breaks_hz[i + 1], breaks_hz[i + 2]);
        if !(left < peak && peak < right) {
            return Err(Error::DegenerateFilterbank(format!(
                "filter {i} collapses: breaks {left}, {peak}, {right} Hz are not increasing"
            )));
        }
        for k in 0..n_bins {
            let f = T::of_usize(k) * bin_hz;
            let w = if f > left && f <= peak {
                (f - left) / (peak - left)
            } else if f > peak && f < right {
                (right - f) / (right - peak)
            } else {
                T::zero()
            };
            weights[[i, k]] = w;
        }
        if !weights.row(i).iter().any(|&w| w > T::zero()) {
            return Err(Error::DegenerateFilterbank(format!(
                "filter {i} ({left}..{right} Hz) contains no FFT bin at {bin_hz} Hz spacing; \
                 the band is too narrow for {n_filters} filters"
            )));
        }
    }

    Ok(Filterbank {
        weights,
        scale,
        breaks_hz,
        fmin_hz,
        fmax_hz,
        sample_rate,
    })
}

/// Band energies per frame, `n_frames x n_filters`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedPower<T> {
    pub values: Array2<T>,
    pub frame_times_s: Vec<T>,
    pub channel_centers_hz: Vec<T>,
    pub scale: FrequencyScale<T>,
}

/// `out[t][i] = sum_k weights[i][k] * power[t][k]`.
pub fn apply_filterbank<T: Scalar>(power: &PowerSpectrogram<T>, fb: &Filterbank<T>) -> Result<BandedPower<T>> {
    if power.n_bins() != fb.n_bins() {
        return Err(Error::dims(
            format!("{} FFT bins", fb.n_bins()),
            format!("{} FFT bins", power.n_bins()),
        ));
    }
    let values = power.power.dot(&fb.weights.t());
    Ok(BandedPower {
        values,
        frame_times_s: power.frame_times_s.clone(),
        channel_centers_hz: fb.centers_hz(),
        scale: fb.scale,
    })
}
