use ndarray::{Array1, Array2, Array3, Array4, ArrayView3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ops::{avg_pool_global, conv2d, linear, max_pool, relu};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::Spectrogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub filters: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnConfig {
    /// `(n_frames, n_channels)` of the input spectrogram.
    pub input_shape: (usize, usize),
    pub stem_filters: usize,
    pub blocks: Vec<BlockSpec>,
    pub kernel_size: usize,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            input_shape: (17, 16),
            stem_filters: 8,
            blocks: vec![
                BlockSpec { filters: 8, stride: 1 },
                BlockSpec { filters: 16, stride: 2 },
            ],
            kernel_size: 3,
            feature_dim: 8,
            seed: 0,
        }
    }
}

impl CnnConfig {
    /// Spatial shape after each stage: stem, pool, then every block.
    pub fn stage_shapes(&self) -> Result<Vec<(usize, usize)>> {
        let (h, w) = self.input_shape;
        if h == 0 || w == 0 {
            return Err(Error::invalid("input shape must be at least 1x1"));
        }
        if self.stem_filters == 0 || self.feature_dim == 0 {
            return Err(Error::invalid("stem_filters and feature_dim must be >= 1"));
        }
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "kernel_size must be odd, got {}",
                self.kernel_size
            )));
        }
        if h < 2 || w < 2 {
            return Err(Error::ShapeUnderflow(format!(
                "{h}x{w} input cannot pass the 2x2 max pool after the stem"
            )));
        }
        let mut shapes = vec![(h, w), (h / 2, w / 2)];
        let (mut ch, mut cw) = (h / 2, w / 2);
        for (i, b) in self.blocks.iter().enumerate() {
            if b.filters == 0 {
                return Err(Error::invalid(format!("block {i} has zero filters")));
            }
            if b.stride != 1 && b.stride != 2 {
                return Err(Error::invalid(format!(
                    "block {i} stride must be 1 or 2, got {}",
                    b.stride
                )));
            }
            ch = ch.div_ceil(b.stride);
            cw = cw.div_ceil(b.stride);
            shapes.push((ch, cw));
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        self.stage_shapes().map(|_| ())
    }

    fn last_channels(&self) -> usize {
        self.blocks.last().map_or(self.stem_filters, |b| b.filters)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    /// `k x k x in x out`.
    pub weight: Array4<T>,
    pub bias: Array1<T>,
    pub stride: usize,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn apply(&self, x: ArrayView3<'_, T>) -> Result<Array3<T>> {
        conv2d(x, self.weight.view(), Some(self.bias.view()), self.stride)
    }

    fn he(rng: &mut ChaCha8Rng, k: usize, c_in: usize, c_out: usize, stride: usize) -> Self {
        Self {
            weight: he_normal(rng, (k, k, c_in, c_out), k * k * c_in),
            bias: Array1::zeros(c_out),
            stride,
        }
    }

    pub fn zeroed(&mut self) {
        self.weight.fill(T::zero());
        self.bias.fill(T::zero());
    }
}

/// conv → relu → conv, plus a shortcut (identity, or 1x1 projection when the
/// stride or channel count changes), summed and passed through relu.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock<T> {
    pub conv1: ConvLayer<T>,
    pub conv2: ConvLayer<T>,
    pub projection: Option<ConvLayer<T>>,
}

pub fn residual_block<T: Scalar>(x: ArrayView3<'_, T>, block: &ResidualBlock<T>) -> Result<Array3<T>> {
    let branch = block.conv2.apply(relu(&block.conv1.apply(x)?).view())?;
    let shortcut = match &block.projection {
        Some(p) => p.apply(x)?,
        None => x.to_owned(),
    };
    if branch.dim() != shortcut.dim() {
        return Err(Error::dims(
            format!("{:?} (branch)", branch.dim()),
            format!("{:?} (shortcut)", shortcut.dim()),
        ));
    }
    Ok(relu(&(branch + shortcut)))
}

/// Fixed-length feature vector produced by [`forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T>(pub Vec<T>);

impl<T: Scalar> FeatureVector<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Stacks feature vectors into an `n x d` matrix.
pub fn stack_features<T: Scalar>(features: &[FeatureVector<T>]) -> Result<Array2<T>> {
    let d = features.first().map_or(0, |f| f.len());
    if let Some(bad) = features.iter().find(|f| f.len() != d) {
        return Err(Error::dims(d, bad.len()));
    }
    let flat: Vec<T> = features.iter().flat_map(|f| f.0.iter().copied()).collect();
    Ok(Array2::from_shape_vec((features.len(), d), flat).expect("lengths checked"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel<T> {
    pub config: CnnConfig,
    pub stem: ConvLayer<T>,
    pub blocks: Vec<ResidualBlock<T>>,
    /// `feature_dim x last_channels`.
    pub head_weight: Array2<T>,
    pub head_bias: Array1<T>,
}

/// Normal weights with standard deviation `sqrt(2 / fan_in)`.
pub fn he_normal<T: Scalar, D: ndarray::ShapeBuilder>(
    rng: &mut ChaCha8Rng,
    shape: D,
    fan_in: usize,
) -> ndarray::ArrayBase<ndarray::OwnedRepr<T>, D::Dim> {
    let std = (2.0 / fan_in as f64).sqrt();
    ndarray::ArrayBase::from_shape_simple_fn(shape, || {
        let z: f64 = StandardNormal.sample(rng);
        T::of(z * std)
    })
}

/// Seeded He-initialised weights, zero biases.
pub fn init_cnn<T: Scalar>(cfg: &CnnConfig) -> Result<CnnModel<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = cfg.kernel_size;
    let stem = ConvLayer::he(&mut rng, k, 1, cfg.stem_filters, 1);
    let mut c_in = cfg.stem_filters;
    let mut blocks = Vec::with_capacity(cfg.blocks.len());
    for b in &cfg.blocks {
        let conv1 = ConvLayer::he(&mut rng, k, c_in, b.filters, b.stride);
        let conv2 = ConvLayer::he(&mut rng, k, b.filters, b.filters, 1);
        let projection =
            (b.stride != 1 || c_in != b.filters).then(|| ConvLayer::he(&mut rng, 1, c_in, b.filters, b.stride));
        blocks.push(ResidualBlock {
            conv1,
            conv2,
            projection,
        });
        c_in = b.filters;
    }
    let head_weight = he_normal(&mut rng, (cfg.feature_dim, c_in), c_in);
    Ok(CnnModel {
        config: cfg.clone(),
        stem,
        blocks,
        head_weight,
        head_bias: Array1::zeros(cfg.feature_dim),
    })
}

impl<T: Scalar> CnnModel<T> {
    /// Checks every tensor against the shapes implied by the config.
    pub fn validate(&self) -> Result<()> {
        let cfg = &self.config;
        cfg.validate()?;
        let k = cfg.kernel_size;
        let check = |name: &str, got: Vec<usize>, want: Vec<usize>| -> Result<()> {
            if got != want {
                return Err(Error::dims(format!("{name} {want:?}"), format!("{got:?}")));
            }
            Ok(())
        };
        let conv = |name: &str, l: &ConvLayer<T>, kk: usize, ci: usize, co: usize, s: usize| -> Result<()> {
            check(
                &format!("{name}.weight"),
                l.weight.shape().to_vec(),
                vec![kk, kk, ci, co],
            )?;
            check(&format!("{name}.bias"), l.bias.shape().to_vec(), vec![co])?;
            if l.stride != s {
                return Err(Error::dims(format!("{name} stride {s}"), l.stride));
            }
            Ok(())
        };
        conv("stem", &self.stem, k, 1, cfg.stem_filters, 1)?;
        if self.blocks.len() != cfg.blocks.len() {
            return Err(Error::dims(format!("{} blocks", cfg.blocks.len()), self.blocks.len()));
        }
        let mut c_in = cfg.stem_filters;
        for (i, (b, spec)) in self.blocks.iter().zip(&cfg.blocks).enumerate() {
            conv(&format!("block{i}.conv1"), &b.conv1, k, c_in, spec.filters, spec.stride)?;
            conv(&format!("block{i}.conv2"), &b.conv2, k, spec.filters, spec.filters, 1)?;
            let needs = spec.stride != 1 || c_in != spec.filters;
            match (&b.projection, needs) {
                (Some(p), true) => conv(&format!("block{i}.proj"), p, 1, c_in, spec.filters, spec.stride)?,
                (None, false) => {}
                _ => {
                    return Err(Error::invalid(format!(
                        "block {i}: projection must be present iff stride != 1 or channels change"
                    )))
                }
            }
            c_in = spec.filters;
        }
        check(
            "head.weight",
            self.head_weight.shape().to_vec(),
            vec![cfg.feature_dim, cfg.last_channels()],
        )?;
        check("head.bias", self.head_bias.shape().to_vec(), vec![cfg.feature_dim])?;
        let finite = self
            .stem
            .weight
            .iter()
            .chain(self.head_weight.iter())
            .all(|v| v.is_finite())
            && self.blocks.iter().all(|b| {
                b.conv1
                    .weight
                    .iter()
                    .chain(b.conv2.weight.iter())
                    .all(|v| v.is_finite())
            });
        if !finite {
            return Err(Error::invalid("model parameters must be finite"));
        }
        Ok(())
    }

    /// Zeroes every bias (for homogeneity checks).
    pub fn zero_biases(&mut self) {
        self.stem.bias.fill(T::zero());
        for b in &mut self.blocks {
            b.conv1.bias.fill(T::zero());
            b.conv2.bias.fill(T::zero());
            if let Some(p) = &mut b.projection {
                p.bias.fill(T::zero());
            }
        }
        self.head_bias.fill(T::zero());
    }

    /// Runs the network on an `H x W` image (one input channel).
    pub fn forward_image(&self, image: &Array2<T>) -> Result<FeatureVector<T>> {
        if image.dim() != self.config.input_shape {
            return Err(Error::dims(
                format!("{:?} input", self.config.input_shape),
                format!("{:?}", image.dim()),
            ));
        }
        let (h, w) = image.dim();
        let x = image
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((h, w, 1))
            .expect("same element count");
        let mut x = max_pool(relu(&self.stem.apply(x.view())?).view(), 2, 2)?;
        for b in &self.blocks {
            x = residual_block(x.view(), b)?;
        }
        let pooled = avg_pool_global(x.view())?;
        let out = linear(&self.head_weight, &self.head_bias, pooled.view())?;
        Ok(FeatureVector(out.to_vec()))
    }
}

/// stem conv → relu → 2x2 max pool → residual blocks → global average pool → linear head.
pub fn forward<T: Scalar>(model: &CnnModel<T>, spec: &Spectrogram<T>) -> Result<FeatureVector<T>> {
    model.forward_image(spec.values())
}
