//! Random search over the warp constants `(c1, c2)`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorKind, Result};
use crate::pipeline::{run_pipeline, PipelineOutput, PipelineSettings};
use crate::scalar::Scalar;
use crate::signal::Segment;
use crate::spectral::FrequencyScale;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub c1_range: [f64; 2],
    /// Hz.
    pub c2_range: [f64; 2],
    pub n_trials: usize,
    pub seed: u64,
    /// Epoch budget of each trial's mixture fit.
    pub inner_max_epochs: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            c1_range: [100.0, 10_000.0],
            c2_range: [0.1, 1000.0],
            n_trials: 30,
            seed: 0,
            inner_max_epochs: 500,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("c1_range", self.c1_range), ("c2_range", self.c2_range)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} must satisfy 0 < low <= high, got [{lo}, {hi}]"
                )));
            }
        }
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be >= 1"));
        }
        if self.inner_max_epochs == 0 {
            return Err(Error::invalid("inner_max_epochs must be >= 1"));
        }
        Ok(())
    }

    /// The `(c1, c2)` pairs tried, in trial order.
    pub fn draw(&self) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut log_uniform = |[lo, hi]: [f64; 2]| {
            if lo == hi {
                return lo;
            }
            let v = rng.random_range(lo.ln()..hi.ln()).exp();
            v.clamp(lo, hi)
        };
        (0..self.n_trials)
            .map(|_| {
                let c1 = log_uniform(self.c1_range);
                let c2 = log_uniform(self.c2_range);
                (c1, c2)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial<T> {
    pub index: usize,
    pub c1: f64,
    pub c2: f64,
    /// Loss, or the failure cause prefixed with `numeric:` or `data:`.
    pub outcome: std::result::Result<T, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome<T> {
    pub best: usize,
    pub best_c1: f64,
    pub best_c2: f64,
    pub best_loss: T,
    pub trials: Vec<Trial<T>>,
}

/// Pipeline loss for `Warped(c1, c2)` under `settings`.
pub fn evaluate_constants<T: Scalar>(
    c1: f64,
    c2: f64,
    dataset: &[Segment<T>],
    settings: &PipelineSettings,
) -> Result<T> {
    let scale = FrequencyScale::warped(T::of(c1), T::of(c2))?;
    Ok(run_pipeline(dataset, scale, settings)?.loss())
}

fn cause(e: &Error) -> String {
    match e.kind() {
        ErrorKind::Numeric => format!("numeric: {e}"),
        ErrorKind::Data => format!("data: {e}"),
    }
}

/// Evaluates every drawn pair with the reduced epoch budget and returns the
/// lowest-loss trial (ties to the earliest).
pub fn search_constants<T: Scalar>(
    dataset: &[Segment<T>],
    scfg: &SearchConfig,
    settings: &PipelineSettings,
) -> Result<SearchOutcome<T>> {
    scfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::NotEnoughData("empty dataset".into()));
    }
    let mut inner = settings.clone();
    inner.train.max_epochs = scfg.inner_max_epochs;

    let trials: Vec<Trial<T>> = scfg
        .draw()
        .into_par_iter()
        .enumerate()
        .map(|(index, (c1, c2))| Trial {
            index,
            c1,
            c2,
            outcome: evaluate_constants(c1, c2, dataset, &inner).map_err(|e| cause(&e)),
        })
        .collect();

    let mut best: Option<(usize, T)> = None;
    for t in &trials {
        if let Ok(loss) = t.outcome {
            if best.is_none_or(|(_, b)| loss < b) {
                best = Some((t.index, loss));
            }
        }
    }
    let Some((best, best_loss)) = best else {
        return Err(Error::AllTrialsFailed {
            n_trials: trials.len(),
            causes: trials
                .iter()
                .filter_map(|t| t.outcome.clone().err().map(|c| (t.index, c)))
                .collect(),
        });
    };
    Ok(SearchOutcome {
        best,
        best_c1: trials[best].c1,
        best_c2: trials[best].c2,
        best_loss,
        trials,
    })
}

/// Refits the winning constants with the full epoch budget of `settings`.
pub fn refit_best<T: Scalar>(
    dataset: &[Segment<T>],
    outcome: &SearchOutcome<T>,
    settings: &PipelineSettings,
) -> Result<PipelineOutput<T>> {
    let scale = FrequencyScale::warped(T::of(outcome.best_c1), T::of(outcome.best_c2))?;
    run_pipeline(dataset, scale, settings)
}

/// `trial,c1,c2,loss,error`; failed trials leave `loss` empty.
pub fn trials_to_csv<T: Scalar>(trials: &[Trial<T>]) -> String {
    let mut out = String::from("trial,c1,c2,loss,error\n");
    for t in trials {
        match &t.outcome {
            Ok(loss) => writeln!(out, "{},{},{},{},", t.index, t.c1, t.c2, loss),
            Err(c) => writeln!(out, "{},{},{},,\"{}\"", t.index, t.c1, t.c2, c.replace('"', "'")),
        }
        .unwrap();
    }
    out
}

pub fn save_trials_csv<T: Scalar>(path: &Path, trials: &[Trial<T>]) -> Result<()> {
    fs::write(path, trials_to_csv(trials)).map_err(|e| Error::io(path, e))
}
