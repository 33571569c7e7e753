//! Mini-batch EM training with stagnation freeze and weight pruning.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::em::{e_step, floor_covariance, m_step_sparse, nll, prune};
use super::model::{CovarianceMode, GmmModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub k_init: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Training freezes once the best loss has not improved (relatively, by
    /// `stagnation_rel_tol`) for this many epochs.
    pub stagnation_epochs: usize,
    pub stagnation_rel_tol: f64,
    pub prune_weight_threshold: f64,
    pub covariance_mode: CovarianceMode,
    pub reg_floor: f64,
    /// Fraction of each batch subtracted from every component's soft count
    /// before weights are normalised. `0` gives plain EM; positive values
    /// starve redundant components so that pruning can remove them.
    pub weight_sparsity: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k_init: 10,
            max_epochs: 10_000,
            batch_size: 64,
            stagnation_epochs: 6_000,
            stagnation_rel_tol: 1e-4,
            prune_weight_threshold: 1e-3,
            covariance_mode: CovarianceMode::Full,
            reg_floor: 1e-2,
            weight_sparsity: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_points: usize) -> Result<()> {
        if n_points == 0 {
            return Err(Error::NotEnoughData("empty data set".into()));
        }
        if self.k_init == 0 {
            return Err(Error::invalid("k_init must be >= 1"));
        }
        if n_points < self.k_init {
            return Err(Error::NotEnoughData(format!(
                "{n_points} points cannot seed {} components",
                self.k_init
            )));
        }
        if self.batch_size == 0 || self.batch_size > n_points {
            return Err(Error::invalid(format!(
                "batch_size must be in 1..={n_points}, got {}",
                self.batch_size
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be >= 1"));
        }
        for (name, v) in [
            ("stagnation_rel_tol", self.stagnation_rel_tol),
            ("prune_weight_threshold", self.prune_weight_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.prune_weight_threshold > 1.0 / self.k_init as f64 {
            return Err(Error::invalid(format!(
                "prune_weight_threshold {} exceeds 1/k_init",
                self.prune_weight_threshold
            )));
        }
        if !(self.reg_floor > 0.0) {
            return Err(Error::invalid("reg_floor must be positive"));
        }
        if !(0.0..1.0).contains(&self.weight_sparsity) {
            return Err(Error::invalid("weight_sparsity must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    /// Model after the last epoch; its NLL is the last entry of `loss_history`.
    pub model: GmmModel<T>,
    /// Model with the lowest full-data loss seen during training.
    pub best_model: GmmModel<T>,
    /// Full-data NLL after each epoch.
    pub loss_history: Vec<T>,
    pub initial_nll: T,
    pub best_nll: T,
    /// 1-based epoch at which `best_model` was recorded (0 = initialisation).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl<T: Scalar> FitResult<T> {
    pub fn epochs_run(&self) -> usize {
        self.loss_history.len()
    }

    pub fn final_nll(&self) -> T {
        self.loss_history.last().copied().unwrap_or(self.initial_nll)
    }
}

fn global_covariance<T: Scalar>(data: ArrayView2<'_, T>) -> Array2<T> {
    let n = T::of_usize(data.nrows());
    let mean = data.sum_axis(Axis(0)).mapv(|v| v / n);
    let d = data.ncols();
    let mut cov = Array2::zeros((d, d));
    let mut diff = Array1::zeros(d);
    for x in data.rows() {
        diff.assign(&x);
        diff -= &mean;
        for a in 0..d {
            for b in a..d {
                cov[[a, b]] += diff[a] * diff[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[[a, b]] / n;
            cov[[a, b]] = v;
            cov[[b, a]] = v;
        }
    }
    cov
}

/// Initial mixture: means at `k_init` distinct random points, shared global
/// covariance (floored), uniform weights.
pub fn init_gmm<T: Scalar>(data: ArrayView2<'_, T>, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> GmmModel<T> {
    let k = cfg.k_init;
    let mut idx = sample(rng, data.nrows(), k).into_vec();
    idx.sort_unstable();
    let means = data.select(Axis(0), &idx);
    let mut cov = global_covariance(data);
    if cfg.covariance_mode == CovarianceMode::Diagonal {
        let d = cov.nrows();
        cov = Array2::from_shape_fn((d, d), |(i, j)| if i == j { cov[[i, i]] } else { T::zero() });
    }
    let cov = floor_covariance(&cov, cfg.covariance_mode, T::of(cfg.reg_floor));
    GmmModel {
        weights: Array1::from_elem(k, T::one() / T::of_usize(k)),
        means,
        covariances: vec![cov; k],
        mode: cfg.covariance_mode,
    }
}

/// Trains a mixture on `data` (`N x d`). Each epoch draws a batch without
/// replacement, runs one E and one M step on it, prunes light components and
/// records the full-data NLL.
pub fn fit<T: Scalar>(data: ArrayView2<'_, T>, cfg: &TrainConfig) -> Result<FitResult<T>> {
    let n = data.nrows();
    cfg.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = init_gmm(data, cfg, &mut rng);
    let initial_nll = nll(&model, data)?;

    let reg_floor = T::of(cfg.reg_floor);
    let sparsity = T::of(cfg.weight_sparsity);
    let threshold = T::of(cfg.prune_weight_threshold);
    let rel_tol = T::of(cfg.stagnation_rel_tol);

    let mut best = model.clone();
    let mut best_nll = initial_nll;
    let mut best_epoch = 0;
    // last epoch at which the loss beat the best by the relative tolerance
    let mut last_gain_epoch = 0;
    let mut history = Vec::with_capacity(cfg.max_epochs.min(100_000));
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let updated = if cfg.batch_size == n {
            let r = e_step(&model, data)?;
            m_step_sparse(&model, data, r.view(), reg_floor, sparsity)?
        } else {
            let mut idx = sample(&mut rng, n, cfg.batch_size).into_vec();
            idx.sort_unstable();
            let batch = data.select(Axis(0), &idx);
            let r = e_step(&model, batch.view())?;
            m_step_sparse(&model, batch.view(), r.view(), reg_floor, sparsity)?
        };
        model = prune(&updated, threshold);
        let loss = nll(&model, data)?;
        history.push(loss);

        if loss < best_nll - rel_tol * best_nll.abs() {
            last_gain_epoch = epoch;
        }
        if loss < best_nll {
            best_nll = loss;
            best = model.clone();
            best_epoch = epoch;
        }
        if epoch - last_gain_epoch >= cfg.stagnation_epochs {
            stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }

    Ok(FitResult {
        model,
        best_model: best,
        loss_history: history,
        initial_nll,
        best_nll,
        best_epoch,
        stopped_early,
    })
}
