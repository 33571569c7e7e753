//! Expectation and maximisation steps, loss, pruning and assignment.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::linalg::floor_eigenvalues;
use super::model::{CovarianceMode, GmmModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_dims<T: Scalar>(model: &GmmModel<T>, data: ArrayView2<'_, T>) -> Result<()> {
    if data.nrows() == 0 {
        return Err(Error::NotEnoughData("no data points".into()));
    }
    if data.ncols() != model.dim() {
        return Err(Error::dims(
            format!("{}-dimensional points", model.dim()),
            format!("{}-dimensional points", data.ncols()),
        ));
    }
    Ok(())
}

/// `log pi_k + log N(x_i; mu_k, Sigma_k)` for every point and component (`N x K`).
pub fn log_weighted_densities<T: Scalar>(model: &GmmModel<T>, data: ArrayView2<'_, T>) -> Result<Array2<T>> {
    check_dims(model, data)?;
    let factors = model.factorize()?;
    let log_w: Vec<T> = model.weights.iter().map(|w| w.ln()).collect();
    let mut out = Array2::zeros((data.nrows(), model.n_components()));
    let mut scratch = Vec::with_capacity(model.dim());
    for (i, x) in data.rows().into_iter().enumerate() {
        for (k, f) in factors.iter().enumerate() {
            out[[i, k]] = if log_w[k] == T::neg_infinity() {
                T::neg_infinity()
            } else {
                log_w[k] + f.log_density(x, model.means.row(k), &mut scratch)
            };
        }
    }
    Ok(out)
}

fn log_sum_exp<T: Scalar>(row: ArrayView1<'_, T>) -> T {
    let m = row.iter().cloned().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() || !m.is_finite() {
        return m;
    }
    m + row.iter().map(|v| (*v - m).exp()).sum::<T>().ln()
}

/// Negative log-likelihood of the whole data set, in nats (summed over points).
pub fn nll<T: Scalar>(model: &GmmModel<T>, data: ArrayView2<'_, T>) -> Result<T> {
    let lw = log_weighted_densities(model, data)?;
    let mut total = T::zero();
    for (i, row) in lw.rows().into_iter().enumerate() {
        let l = log_sum_exp(row);
        if !l.is_finite() {
            return Err(Error::DegenerateModel(format!(
                "point {i} has zero or non-finite likelihood"
            )));
        }
        total -= l;
    }
    Ok(total)
}

/// Posterior responsibilities (`N x K`); every row sums to one.
pub fn e_step<T: Scalar>(model: &GmmModel<T>, batch: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let mut lw = log_weighted_densities(model, batch)?;
    for (i, mut row) in lw.rows_mut().into_iter().enumerate() {
        let l = log_sum_exp(row.view());
        if !l.is_finite() {
            return Err(Error::DegenerateModel(format!(
                "all component densities vanish for point {i}"
            )));
        }
        row.mapv_inplace(|v| (v - l).exp());
        // renormalise away the last ulp of drift
        let s: T = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    Ok(lw)
}

/// Clamps a covariance at the variance floor: eigenvalues (full) or
/// diagonal entries (diagonal mode).
pub fn floor_covariance<T: Scalar>(cov: &Array2<T>, mode: CovarianceMode, reg_floor: T) -> Array2<T> {
    match mode {
        CovarianceMode::Full => floor_eigenvalues(cov, reg_floor),
        CovarianceMode::Diagonal => {
            let d = cov.nrows();
            Array2::from_shape_fn(
                (d, d),
                |(i, j)| if i == j { cov[[i, i]].max(reg_floor) } else { T::zero() },
            )
        }
    }
}

/// Standard weighted re-estimation. Components that receive no responsibility
/// keep their previous parameters with weight zero, ready for pruning.
pub fn m_step<T: Scalar>(
    model: &GmmModel<T>,
    batch: ArrayView2<'_, T>,
    responsibilities: ArrayView2<'_, T>,
    reg_floor: T,
) -> Result<GmmModel<T>> {
    m_step_sparse(model, batch, responsibilities, reg_floor, T::zero())
}

/// [`m_step`] with a sparsity pull on the weights:
/// `pi_k ∝ max(N_k - sparsity * N, 0)`. With `sparsity = 0` this is the
/// textbook update `pi_k = N_k / N`.
pub fn m_step_sparse<T: Scalar>(
    model: &GmmModel<T>,
    batch: ArrayView2<'_, T>,
    responsibilities: ArrayView2<'_, T>,
    reg_floor: T,
    sparsity: T,
) -> Result<GmmModel<T>> {
    check_dims(model, batch)?;
    let (n, k) = responsibilities.dim();
    if n != batch.nrows() || k != model.n_components() {
        return Err(Error::dims(
            format!("{}x{} responsibilities", batch.nrows(), model.n_components()),
            format!("{n}x{k}"),
        ));
    }
    if !(reg_floor > T::zero()) {
        return Err(Error::invalid("reg_floor must be positive"));
    }
    let tol = T::of(1e-6);
    for (i, row) in responsibilities.rows().into_iter().enumerate() {
        if (row.sum() - T::one()).abs() > tol || row.iter().any(|r| *r < T::zero()) {
            return Err(Error::invalid(format!(
                "responsibility row {i} is not a probability vector"
            )));
        }
    }

    let d = model.dim();
    let n_t = T::of_usize(n);
    let counts: Array1<T> = responsibilities.sum_axis(Axis(0));
    let empty_below = T::epsilon() * n_t;

    let mut raw_weights = Array1::zeros(k);
    let mut means = model.means.clone();
    let mut covariances = model.covariances.clone();
    for c in 0..k {
        let nk = counts[c];
        if nk <= empty_below {
            continue;
        }
        raw_weights[c] = (nk - sparsity * n_t).max(T::zero());
        let r = responsibilities.column(c);
        let mut mu = Array1::zeros(d);
        for (x, &w) in batch.rows().into_iter().zip(r.iter()) {
            mu.scaled_add(w, &x);
        }
        mu.mapv_inplace(|v| v / nk);
        let mut cov = Array2::zeros((d, d));
        let mut diff = Array1::zeros(d);
        for (x, &w) in batch.rows().into_iter().zip(r.iter()) {
            if w == T::zero() {
                continue;
            }
            diff.assign(&x);
            diff -= &mu;
            match model.mode {
                CovarianceMode::Full => {
                    for a in 0..d {
                        let wa = w * diff[a];
                        for b in a..d {
                            cov[[a, b]] += wa * diff[b];
                        }
                    }
                }
                CovarianceMode::Diagonal => {
                    for a in 0..d {
                        cov[[a, a]] += w * diff[a] * diff[a];
                    }
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = cov[[a, b]] / nk;
                cov[[a, b]] = v;
                cov[[b, a]] = v;
            }
        }
        means.row_mut(c).assign(&mu);
        covariances[c] = floor_covariance(&cov, model.mode, reg_floor);
    }

    let total = raw_weights.sum();
    if !(total > T::zero()) {
        return Err(Error::DegenerateModel(
            "every component lost its weight in the M-step".into(),
        ));
    }
    let weights = raw_weights.mapv(|w| w / total);
    Ok(GmmModel {
        weights,
        means,
        covariances,
        mode: model.mode,
    })
}

/// Drops components with weight below `threshold` and renormalises. The
/// heaviest component always survives.
pub fn prune<T: Scalar>(model: &GmmModel<T>, threshold: T) -> GmmModel<T> {
    let mut keep: Vec<usize> = (0..model.n_components())
        .filter(|&k| model.weights[k] >= threshold)
        .collect();
    if keep.len() == model.n_components() {
        return model.clone();
    }
    if keep.is_empty() {
        let best = model
            .weights
            .iter()
            .enumerate()
            .fold(0, |b, (k, w)| if *w > model.weights[b] { k } else { b });
        keep.push(best);
    }
    let total: T = keep.iter().map(|&k| model.weights[k]).sum();
    let weights = Array1::from_iter(keep.iter().map(|&k| model.weights[k] / total));
    let means = model.means.select(Axis(0), &keep);
    let covariances = keep.iter().map(|&k| model.covariances[k].clone()).collect();
    GmmModel {
        weights,
        means,
        covariances,
        mode: model.mode,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    pub cluster_id: usize,
    pub posterior: Vec<T>,
}

impl<T: Scalar> Assignment<T> {
    pub fn max_posterior(&self) -> T {
        self.posterior[self.cluster_id]
    }
}

fn argmax<T: Scalar>(v: &[T]) -> usize {
    // strict comparison keeps the lowest index on ties
    v.iter()
        .enumerate()
        .fold(0, |best, (k, x)| if *x > v[best] { k } else { best })
}

pub fn assign<T: Scalar>(model: &GmmModel<T>, x: ArrayView1<'_, T>) -> Result<Assignment<T>> {
    let row = x.insert_axis(Axis(0));
    let r = e_step(model, row)?;
    let posterior = r.row(0).to_vec();
    Ok(Assignment {
        cluster_id: argmax(&posterior),
        posterior,
    })
}

pub fn assign_all<T: Scalar>(model: &GmmModel<T>, data: ArrayView2<'_, T>) -> Result<Vec<Assignment<T>>> {
    let r = e_step(model, data)?;
    Ok(r.rows()
        .into_iter()
        .map(|row| {
            let posterior = row.to_vec();
            Assignment {
                cluster_id: argmax(&posterior),
                posterior,
            }
        })
        .collect())
}
