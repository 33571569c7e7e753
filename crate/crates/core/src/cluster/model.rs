use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::linalg::{cholesky, solve_lower_in_place};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceMode {
    #[default]
    Full,
    Diagonal,
}

impl std::fmt::Display for CovarianceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CovarianceMode::Full => "full",
            CovarianceMode::Diagonal => "diagonal",
        })
    }
}

/// Gaussian mixture: weights, means (`K x d`) and one `d x d` covariance per
/// component. In diagonal mode off-diagonal entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel<T> {
    pub weights: Array1<T>,
    pub means: Array2<T>,
    pub covariances: Vec<Array2<T>>,
    pub mode: CovarianceMode,
}

impl<T: Scalar> GmmModel<T> {
    pub fn new(
        weights: Array1<T>,
        means: Array2<T>,
        covariances: Vec<Array2<T>>,
        mode: CovarianceMode,
    ) -> Result<Self> {
        let k = weights.len();
        let d = means.ncols();
        if k == 0 {
            return Err(Error::invalid("a mixture needs at least one component"));
        }
        if means.nrows() != k || covariances.len() != k {
            return Err(Error::dims(
                format!("{k} means and covariances"),
                format!("{} means, {} covariances", means.nrows(), covariances.len()),
            ));
        }
        if let Some(c) = covariances.iter().find(|c| c.dim() != (d, d)) {
            return Err(Error::dims(format!("{d}x{d} covariance"), format!("{:?}", c.dim())));
        }
        if weights.iter().any(|w| !(*w >= T::zero())) {
            return Err(Error::invalid("mixture weights must be non-negative"));
        }
        let total: T = weights.sum();
        if (total - T::one()).abs() > T::of(1e-6) {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self {
            weights,
            means,
            covariances,
            mode,
        })
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub(crate) fn factorize(&self) -> Result<Vec<ComponentFactor<T>>> {
        self.covariances
            .iter()
            .enumerate()
            .map(|(k, c)| ComponentFactor::new(c, self.mode).ok_or(Error::NotPositiveDefinite { component: k }))
            .collect()
    }
}

/// Cached factorisation for evaluating one Gaussian density.
pub(crate) struct ComponentFactor<T> {
    chol: Option<Array2<T>>,
    inv_std: Vec<T>,
    half_log_det: T,
}

impl<T: Scalar> ComponentFactor<T> {
    fn new(cov: &Array2<T>, mode: CovarianceMode) -> Option<Self> {
        let d = cov.nrows();
        match mode {
            CovarianceMode::Full => {
                let l = cholesky(cov)?;
                let half_log_det = (0..d).map(|i| l[[i, i]].ln()).sum();
                Some(Self {
                    chol: Some(l),
                    inv_std: vec![],
                    half_log_det,
                })
            }
            CovarianceMode::Diagonal => {
                let mut inv_std = Vec::with_capacity(d);
                let mut half_log_det = T::zero();
                for i in 0..d {
                    let v = cov[[i, i]];
                    if !(v > T::zero()) || !v.is_finite() {
                        return None;
                    }
                    let s = v.sqrt();
                    half_log_det += s.ln();
                    inv_std.push(T::one() / s);
                }
                Some(Self {
                    chol: None,
                    inv_std,
                    half_log_det,
                })
            }
        }
    }

    /// `log N(x; mean, cov)`.
    pub(crate) fn log_density(&self, x: ArrayView1<'_, T>, mean: ArrayView1<'_, T>, scratch: &mut Vec<T>) -> T {
        let d = x.len();
        scratch.clear();
        scratch.extend(x.iter().zip(mean.iter()).map(|(a, b)| *a - *b));
        let maha: T = match &self.chol {
            Some(l) => {
                solve_lower_in_place(l, scratch);
                scratch.iter().map(|v| *v * *v).sum()
            }
            None => scratch
                .iter()
                .zip(&self.inv_std)
                .map(|(v, s)| {
                    let z = *v * *s;
                    z * z
                })
                .sum(),
        };
        let half = T::of(0.5);
        -half * T::of_usize(d) * (T::TAU()).ln() - self.half_log_det - half * maha
    }
}
