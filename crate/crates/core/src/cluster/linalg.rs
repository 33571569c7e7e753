//! Small dense symmetric-matrix routines (Cholesky, Jacobi eigensolver).

use ndarray::{Array1, Array2};

use crate::scalar::Scalar;

/// Lower Cholesky factor of a symmetric positive-definite matrix, or `None`.
pub fn cholesky<T: Scalar>(a: &Array2<T>) -> Option<Array2<T>> {
    let n = a.nrows();
    let mut l = Array2::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Some(l)
}

/// Solves `L y = b` in place for lower-triangular `L`.
pub fn solve_lower_in_place<T: Scalar>(l: &Array2<T>, b: &mut [T]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * b[k];
        }
        b[i] = s / l[[i, i]];
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns `(eigenvalues, eigenvectors as columns)`.
pub fn symmetric_eigen<T: Scalar>(a: &Array2<T>) -> (Array1<T>, Array2<T>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Array2::eye(n);
    let two = T::of(2.0);
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut scale = T::zero();
        for i in 0..n {
            scale += m[[i, i]] * m[[i, i]];
            for j in i + 1..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off <= T::epsilon() * T::epsilon() * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    (Array1::from_shape_fn(n, |i| m[[i, i]]), v)
}

pub fn min_eigenvalue<T: Scalar>(a: &Array2<T>) -> T {
    symmetric_eigen(a).0.iter().cloned().fold(T::infinity(), T::min)
}

/// Raises every eigenvalue below `floor` to `floor`. Matrices already above
/// the floor are returned untouched (bit-for-bit).
pub fn floor_eigenvalues<T: Scalar>(a: &Array2<T>, floor: T) -> Array2<T> {
    let n = a.nrows();
    // cheap exit: a successful Cholesky of (A - floor I) proves min eig > floor
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[[i, i]] -= floor;
    }
    if cholesky(&shifted).is_some() {
        return a.clone();
    }
    let (vals, vecs) = symmetric_eigen(a);
    let clamped = vals.mapv(|v| v.max(floor));
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let mut s = T::zero();
            for k in 0..n {
                s += vecs[[i, k]] * clamped[k] * vecs[[j, k]];
            }
            out[[i, j]] = s;
            out[[j, i]] = s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_reconstructs() {
        let a = array![[4.0f64, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let back = l.dot(&l.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(cholesky(&array![[1.0f64, 2.0], [2.0, 1.0]]).is_none());
    }

    #[test]
    fn jacobi_eigenpairs() {
        let a = array![[2.0f64, 1.0], [1.0, 2.0]];
        let (vals, vecs) = symmetric_eigen(&a);
        let mut sorted = vals.to_vec();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((sorted[0] - 1.0).abs() < 1e-12 && (sorted[1] - 3.0).abs() < 1e-12);
        for k in 0..2 {
            let v = vecs.column(k);
            let av = a.dot(&v);
            for i in 0..2 {
                assert!((av[i] - vals[k] * v[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn floor_clamps_only_small_eigenvalues() {
        let a = array![[1.0f64, 0.999], [0.999, 1.0]]; // eigenvalues 1.999, 0.001
        let f = floor_eigenvalues(&a, 0.01);
        let (vals, _) = symmetric_eigen(&f);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = vals.iter().cloned().fold(0.0, f64::max);
        assert!((min - 0.01).abs() < 1e-12);
        assert!((max - 1.999).abs() < 1e-12);
        let ok = array![[3.0f64, 0.5], [0.5, 2.0]];
        assert_eq!(floor_eigenvalues(&ok, 0.01), ok);
    }
}
