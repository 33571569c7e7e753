//! End-to-end composition: segments → spectrograms → CNN features → mixture.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_dataset, AugmentPolicy};
use crate::cluster::linalg::symmetric_eigen;
use crate::cluster::{assign_all, fit, Assignment, FitResult, TrainConfig};
use crate::error::{Error, Result};
use crate::features::{forward, init_cnn, stack_features, CnnConfig, CnnModel};
use crate::scalar::Scalar;
use crate::signal::Segment;
use crate::spectral::{
    build_filterbank, FilterNormalization, FrequencyScale, Spectrogram, SpectrogramBuilder, Stft, StftConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSettings {
    pub stft: StftConfig,
    pub n_filters: usize,
    pub fmin_hz: f64,
    /// Upper band edge; `None` means the Nyquist frequency.
    pub fmax_hz: Option<f64>,
    pub floor_db: f64,
    pub normalization: FilterNormalization,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            n_filters: 16,
            fmin_hz: 0.0,
            fmax_hz: None,
            floor_db: crate::spectral::DEFAULT_FLOOR_DB,
            normalization: FilterNormalization::Peak,
        }
    }
}

impl SpectralSettings {
    pub fn builder<T: Scalar>(&self, scale: FrequencyScale<T>, sample_rate: T) -> Result<SpectrogramBuilder<T>> {
        let fmax = match self.fmax_hz {
            Some(f) => T::of(f),
            None => sample_rate / T::of(2.0),
        };
        let fb = build_filterbank(
            scale,
            self.n_filters,
            &self.stft,
            sample_rate,
            T::of(self.fmin_hz),
            fmax,
        )?
        .normalized(self.normalization);
        SpectrogramBuilder::new(Stft::new(self.stft)?, fb, T::of(self.floor_db))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    pub spectral: SpectralSettings,
    /// `None` disables augmentation.
    pub augment: Option<AugmentPolicy>,
    /// The CNN input shape is taken from the spectrograms, not from here.
    pub cnn: CnnConfig,
    pub train: TrainConfig,
    pub scaling: FeatureScaling,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput<T> {
    pub spectrograms: Vec<Spectrogram<T>>,
    /// Standardised features of the input segments, one row each.
    pub features: Array2<T>,
    /// Number of rows the mixture was trained on (inputs plus augmented copies).
    pub n_train: usize,
    pub fit: FitResult<T>,
    pub assignments: Vec<Assignment<T>>,
}

impl<T: Scalar> PipelineOutput<T> {
    /// Full-data NLL of the final mixture on its training rows.
    pub fn loss(&self) -> T {
        self.fit.final_nll()
    }

    pub fn cluster_ids(&self) -> Vec<usize> {
        self.assignments.iter().map(|a| a.cluster_id).collect()
    }
}

/// One spectrogram per segment, in input order. All segments must share a
/// sample rate.
pub fn compute_spectrograms<T: Scalar>(
    segments: &[Segment<T>],
    scale: FrequencyScale<T>,
    spectral: &SpectralSettings,
) -> Result<Vec<Spectrogram<T>>> {
    let Some(first) = segments.first() else {
        return Err(Error::NotEnoughData("no segments".into()));
    };
    let builder = spectral.builder(scale, first.sample_rate)?;
    segments.par_iter().map(|s| builder.compute(s)).collect()
}

/// CNN with its input shape fitted to `shape` (`n_frames x n_channels`).
pub fn cnn_for_shape<T: Scalar>(cfg: &CnnConfig, shape: (usize, usize)) -> Result<CnnModel<T>> {
    let cfg = CnnConfig {
        input_shape: shape,
        ..cfg.clone()
    };
    init_cnn(&cfg)
}

pub fn extract_features<T: Scalar>(model: &CnnModel<T>, specs: &[Spectrogram<T>]) -> Result<Array2<T>> {
    let feats = specs
        .par_iter()
        .map(|s| forward(model, s))
        .collect::<Result<Vec<_>>>()?;
    stack_features(&feats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureScaling {
    None,
    /// Per-column zero mean, unit variance.
    #[default]
    Standardize,
    /// Zero mean, identity covariance (symmetric whitening). A single
    /// Gaussian then scores the same on every representation.
    Whiten,
}

/// Affine map `x -> (x - mean) W` fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler<T> {
    pub mean: Array1<T>,
    pub transform: Array2<T>,
}

impl<T: Scalar> Scaler<T> {
    pub fn fit(x: &Array2<T>, mode: FeatureScaling) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::NotEnoughData("no feature rows".into()));
        }
        let d = x.ncols();
        let n = T::of_usize(x.nrows());
        let mean = x.sum_axis(Axis(0)).mapv(|v| v / n);
        let centred = x - &mean;
        let cov = centred.t().dot(&centred).mapv(|v| v / n);
        // directions this far below the largest variance are treated as constant
        let tiny = |v: T, top: T| !(v > T::of(1e-12) * top);
        let transform = match mode {
            FeatureScaling::None => {
                return Ok(Self {
                    mean: Array1::zeros(d),
                    transform: Array2::eye(d),
                })
            }
            FeatureScaling::Standardize => {
                let top = cov.diag().iter().copied().fold(T::zero(), T::max);
                Array2::from_diag(
                    &cov.diag()
                        .mapv(|v| if tiny(v, top) { T::one() } else { T::one() / v.sqrt() }),
                )
            }
            FeatureScaling::Whiten => {
                let (vals, vecs) = symmetric_eigen(&cov);
                let top = vals.iter().copied().fold(T::zero(), T::max);
                let inv_sd = vals.mapv(|v| if tiny(v, top) { T::zero() } else { T::one() / v.sqrt() });
                // W = V diag(1/sqrt(lambda)) V^T
                let scaled = &vecs * &inv_sd;
                scaled.dot(&vecs.t())
            }
        };
        Ok(Self { mean, transform })
    }

    pub fn apply(&self, x: &Array2<T>) -> Array2<T> {
        (x - &self.mean).dot(&self.transform)
    }
}

/// Runs every stage on `segments` under `scale`. Augmented copies (if any)
/// join the training rows; assignments cover the input segments only.
pub fn run_pipeline<T: Scalar>(
    segments: &[Segment<T>],
    scale: FrequencyScale<T>,
    settings: &PipelineSettings,
) -> Result<PipelineOutput<T>> {
    let spectrograms = compute_spectrograms(segments, scale, &settings.spectral)?;
    let cnn = cnn_for_shape(&settings.cnn, spectrograms[0].shape())?;
    let raw = extract_features(&cnn, &spectrograms)?;

    let train_raw = match &settings.augment {
        Some(policy) if policy.copies_per_item > 0 => {
            let extra = augment_dataset(&spectrograms, policy)?;
            extract_features(&cnn, &extra)?
        }
        _ => raw.clone(),
    };
    let z = Scaler::fit(&train_raw, settings.scaling)?;
    let features = z.apply(&raw);
    let train = z.apply(&train_raw);

    let fit = fit(train.view(), &settings.train)?;
    let assignments = assign_all(&fit.model, features.view())?;
    Ok(PipelineOutput {
        spectrograms,
        features,
        n_train: train.nrows(),
        fit,
        assignments,
    })
}
