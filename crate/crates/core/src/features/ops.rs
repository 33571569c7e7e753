//! Forward-only tensor primitives on `H x W x C` tensors.

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView3, ArrayView4};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Output extent and leading pad of a "same" convolution along one axis.
fn same_padding(n: usize, k: usize, stride: usize) -> (usize, usize) {
    let out = n.div_ceil(stride);
    let total = ((out - 1) * stride + k).saturating_sub(n);
    (out, total / 2)
}

/// Zero-padded ("same") cross-correlation. `kernel` is `kh x kw x C x F`;
/// the output is `ceil(H/stride) x ceil(W/stride) x F`.
pub fn conv2d<T: Scalar>(
    input: ArrayView3<'_, T>,
    kernel: ArrayView4<'_, T>,
    bias: Option<ArrayView1<'_, T>>,
    stride: usize,
) -> Result<Array3<T>> {
    let (h, w, c) = input.dim();
    let (kh, kw, kc, f) = kernel.dim();
    if kc != c {
        return Err(Error::dims(
            format!("{kc} input channels (kernel)"),
            format!("{c} input channels"),
        ));
    }
    if stride == 0 {
        return Err(Error::invalid("stride must be >= 1"));
    }
    if let Some(b) = bias {
        if b.len() != f {
            return Err(Error::dims(format!("{f} biases"), b.len()));
        }
    }
    let (oh, pad_h) = same_padding(h, kh, stride);
    let (ow, pad_w) = same_padding(w, kw, stride);

    let x = input.as_standard_layout();
    let x = x.as_slice().expect("standard layout");
    let k = kernel.as_standard_layout();
    let k = k.as_slice().expect("standard layout");

    let mut out = vec![T::zero(); oh * ow * f];
    let mut acc = vec![T::zero(); f];
    for oy in 0..oh {
        for ox in 0..ow {
            match bias {
                Some(b) => acc.iter_mut().zip(b.iter()).for_each(|(a, &v)| *a = v),
                None => acc.iter_mut().for_each(|a| *a = T::zero()),
            }
            for i in 0..kh {
                let iy = (oy * stride + i) as isize - pad_h as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for j in 0..kw {
                    let ix = (ox * stride + j) as isize - pad_w as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let xbase = (iy as usize * w + ix as usize) * c;
                    let kbase = (i * kw + j) * c * f;
                    for ci in 0..c {
                        let xv = x[xbase + ci];
                        let krow = &k[kbase + ci * f..kbase + (ci + 1) * f];
                        for (a, &kv) in acc.iter_mut().zip(krow) {
                            *a += xv * kv;
                        }
                    }
                }
            }
            let obase = (oy * ow + ox) * f;
            out[obase..obase + f].copy_from_slice(&acc);
        }
    }
    Ok(Array3::from_shape_vec((oh, ow, f), out).expect("shape computed above"))
}

pub fn relu<T: Scalar>(x: &Array3<T>) -> Array3<T> {
    x.mapv(|v| v.max(T::zero()))
}

/// Per-window maximum; trailing rows/columns that do not fill a window are dropped.
pub fn max_pool<T: Scalar>(x: ArrayView3<'_, T>, window: usize, stride: usize) -> Result<Array3<T>> {
    let (h, w, c) = x.dim();
    if window == 0 || stride == 0 {
        return Err(Error::invalid("pool window and stride must be >= 1"));
    }
    if h < window || w < window {
        return Err(Error::ShapeUnderflow(format!(
            "{h}x{w} input is smaller than the {window}x{window} pool window"
        )));
    }
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    Ok(Array3::from_shape_fn((oh, ow, c), |(oy, ox, ch)| {
        let mut m = T::neg_infinity();
        for i in 0..window {
            for j in 0..window {
                m = m.max(x[[oy * stride + i, ox * stride + j, ch]]);
            }
        }
        m
    }))
}

/// Mean over all spatial positions, one value per channel.
pub fn avg_pool_global<T: Scalar>(x: ArrayView3<'_, T>) -> Result<Array1<T>> {
    let (h, w, c) = x.dim();
    if h == 0 || w == 0 {
        return Err(Error::ShapeUnderflow("global pooling over an empty tensor".into()));
    }
    let count = T::of_usize(h * w);
    Ok(Array1::from_shape_fn(c, |ch| {
        let mut s = T::zero();
        for i in 0..h {
            for j in 0..w {
                s += x[[i, j, ch]];
            }
        }
        s / count
    }))
}

/// `weight · x + bias` with `weight` shaped `out x in`.
pub fn linear<T: Scalar>(weight: &Array2<T>, bias: &Array1<T>, x: ArrayView1<'_, T>) -> Result<Array1<T>> {
    if weight.ncols() != x.len() || weight.nrows() != bias.len() {
        return Err(Error::dims(
            format!("{}x{} weight, {} bias", weight.nrows(), weight.ncols(), bias.len()),
            format!("{} inputs", x.len()),
        ));
    }
    Ok(Array1::from_shape_fn(weight.nrows(), |o| {
        let mut s = bias[o];
        for (wv, xv) in weight.row(o).iter().zip(x.iter()) {
            s += *wv * *xv;
        }
        s
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array3, Array4};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array3::from_shape_fn((5, 4, 2), |_| rng.random_range(-1.0..1.0f64));
        let mut k = Array4::zeros((3, 3, 2, 2));
        k[[1, 1, 0, 0]] = 1.0;
        k[[1, 1, 1, 1]] = 1.0;
        assert_eq!(conv2d(x.view(), k.view(), None, 1).unwrap(), x);
    }

    #[test]
    fn zero_kernel() {
        let x = Array3::from_elem((4, 4, 3), 2.5f64);
        let k = Array4::zeros((3, 3, 3, 5));
        let y = conv2d(x.view(), k.view(), None, 2).unwrap();
        assert_eq!(y.dim(), (2, 2, 5));
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn strided_output_shape() {
        let x = Array3::<f64>::zeros((7, 5, 1));
        let k = Array4::<f64>::zeros((3, 3, 1, 4));
        assert_eq!(conv2d(x.view(), k.view(), None, 2).unwrap().dim(), (4, 3, 4));
        let bad = Array4::<f64>::zeros((3, 3, 2, 4));
        assert!(conv2d(x.view(), bad.view(), None, 1).is_err());
    }

    #[test]
    fn pooling() {
        let x = Array3::from_shape_vec((2, 2, 1), vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(max_pool(x.view(), 2, 2).unwrap()[[0, 0, 0]], 4.0);
        let c = Array3::from_elem((6, 4, 3), 1.75f64);
        assert!(max_pool(c.view(), 2, 2).unwrap().iter().all(|&v| v == 1.75));
        assert!(avg_pool_global(c.view()).unwrap().iter().all(|&v| v == 1.75));
        assert!(max_pool(Array3::<f64>::zeros((1, 4, 1)).view(), 2, 2).is_err());
    }

    #[test]
    fn avg_pool_matches_sum_over_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array3::from_shape_fn((5, 7, 3), |_| rng.random_range(-3.0..3.0f64));
        let got = avg_pool_global(x.view()).unwrap();
        for ch in 0..3 {
            let mut s = 0.0;
            let mut n = 0;
            for v in x.index_axis(ndarray::Axis(2), ch).iter() {
                s += v;
                n += 1;
            }
            assert!((got[ch] - s / n as f64).abs() < 1e-9);
        }
    }
}
