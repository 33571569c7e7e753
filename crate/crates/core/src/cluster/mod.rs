//! Gaussian mixture clustering trained by mini-batch EM.

mod em;
mod fit;
mod io;
pub mod linalg;
mod metrics;
mod model;

pub use em::{
    assign, assign_all, e_step, floor_covariance, log_weighted_densities, m_step, m_step_sparse, nll, prune, Assignment,
};
pub use fit::{fit, init_gmm, FitResult, TrainConfig};
pub use io::{gmm_from_text, gmm_to_text, load_gmm, loss_history_to_csv, save_gmm, save_loss_history};
pub use metrics::{adjusted_rand_index, purity};
pub use model::{CovarianceMode, GmmModel};
