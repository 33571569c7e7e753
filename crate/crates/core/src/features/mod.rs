//! Residual CNN feature extractor (forward pass only, seeded weights).

mod io;
mod model;
pub mod ops;

pub use io::{cnn_from_text, cnn_to_text, load_cnn, save_cnn};
pub use model::{
    forward, he_normal, init_cnn, residual_block, stack_features, BlockSpec, CnnConfig, CnnModel, ConvLayer,
    FeatureVector, ResidualBlock,
};
pub use ops::{avg_pool_global, conv2d, linear, max_pool, relu};
