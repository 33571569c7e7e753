//! TOML run configuration. Every key is optional; command-line flags win
//! over the file, and the file wins over built-in defaults.
//!
//! ```toml
//! seed = 0
//! scale = "mel"                  # linear | mel | warped:<c1>,<c2>
//! out = "out"
//!
//! [data]                          # segments fed to spectrogram/features/fit/compare/search
//! source = "two-class"            # two-class | files
//! files = ["out/synth/SYN000.csv"]
//! window_s = 12.8
//! stride_s = 12.8
//!
//! [dataset]                       # the built-in two-class set (source = "two-class")
//! n_per_class = 60
//!
//! [synthetic]                     # `synth` command
//! channels = 2
//! duration_s = 60.0
//! sample_rate = 100.0
//! [[synthetic.events]]
//! kind = "tremor"
//! onset_s = 5.0
//! duration_s = 20.0
//! center_freq_hz = 1.0
//! bandwidth_hz = 0.5
//! amplitude = 1.0
//!
//! [spectral]                      # filterbank and log compression
//! n_filters = 16
//! [spectral.stft]
//! n_fft = 256
//! hop = 64
//!
//! [spectrogram]
//! scales = ["mel", "warped:2595,1"]
//!
//! [augment]                       # present = enabled
//! copies_per_item = 1
//!
//! [cnn]
//! stem_filters = 8
//! blocks = [{ filters = 8, stride = 1 }, { filters = 16, stride = 2 }]
//!
//! [train]
//! k_init = 10
//!
//! [search]
//! n_trials = 30
//!
//! [compare]
//! baseline = "linear"
//! warped = "search"               # or an explicit scale
//! [[compare.depths]]
//! label = "shallow"
//! blocks = [{ filters = 8, stride = 1 }]
//!
//! [assign]
//! model = "out/model.gmm"
//! features = "out/features.csv"
//! ```
//!
//! Every random stream is seeded from the top-level `seed`: the CNN uses
//! `seed`, training `seed + 1`, the search `seed + 2`, augmentation
//! `seed + 3`, the two-class dataset `seed + 4` and synthetic channel `i`
//! uses `seed + 100 + i`. Seeds inside sections are ignored.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use seiswarp::augment::AugmentPolicy;
use seiswarp::cluster::TrainConfig;
use seiswarp::features::{BlockSpec, CnnConfig};
use seiswarp::pipeline::{FeatureScaling, PipelineSettings, SpectralSettings};
use seiswarp::search::SearchConfig;
use seiswarp::signal::{LowFrequencyTwoClass, SyntheticEvent};
use seiswarp::spectral::FrequencyScale;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub scale: String,
    pub out: PathBuf,
    pub data: DataConfig,
    pub dataset: LowFrequencyTwoClass,
    pub synthetic: SynthConfig,
    pub spectral: SpectralSettings,
    pub spectrogram: SpectrogramConfig,
    pub augment: Option<AugmentPolicy>,
    pub cnn: CnnConfig,
    pub train: TrainConfig,
    pub scaling: FeatureScaling,
    pub search: SearchConfig,
    pub compare: CompareConfig,
    pub assign: AssignConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            scale: "mel".into(),
            out: PathBuf::from("out"),
            data: DataConfig::default(),
            dataset: LowFrequencyTwoClass::default(),
            synthetic: SynthConfig::default(),
            spectral: SpectralSettings::default(),
            spectrogram: SpectrogramConfig::default(),
            augment: None,
            cnn: CnnConfig::default(),
            train: TrainConfig::default(),
            scaling: FeatureScaling::default(),
            search: SearchConfig::default(),
            compare: CompareConfig::default(),
            assign: AssignConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    #[default]
    TwoClass,
    Files,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Waveform files (CSV or WAV by extension). A sibling `<stem>.labels.csv`
    /// supplies per-sample labels when present.
    pub files: Vec<PathBuf>,
    pub window_s: f64,
    pub stride_s: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::TwoClass,
            files: Vec::new(),
            window_s: 12.8,
            stride_s: 12.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub channels: usize,
    pub duration_s: f64,
    pub sample_rate: f64,
    pub noise_floor: f64,
    pub events: Vec<SyntheticEvent>,
    /// `csv` or `wav`.
    pub format: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            channels: 1,
            duration_s: 60.0,
            sample_rate: 100.0,
            noise_floor: 0.01,
            events: Vec::new(),
            format: "csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrogramConfig {
    /// Scales to emit; empty means the top-level `scale`.
    pub scales: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Depth {
    pub label: String,
    pub blocks: Vec<BlockSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Scale of the reference column.
    pub baseline: String,
    /// `search` (per-row constant search) or an explicit scale.
    pub warped: String,
    /// Empty means one row with the `[cnn]` blocks.
    pub depths: Vec<Depth>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            baseline: "linear".into(),
            warped: "search".into(),
            depths: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssignConfig {
    pub model: Option<PathBuf>,
    pub features: Option<PathBuf>,
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub scale: Option<String>,
    pub out: Option<PathBuf>,
}

impl Config {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", p.display())))?
            }
            None => Config::default(),
        };
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(s) = &overrides.scale {
            cfg.scale = s.clone();
        }
        if let Some(o) = &overrides.out {
            cfg.out = o.clone();
        }
        cfg.derive_seeds();
        cfg.scale()?;
        Ok(cfg)
    }

    fn derive_seeds(&mut self) {
        let s = self.seed;
        self.cnn.seed = s;
        self.train.seed = s.wrapping_add(1);
        self.search.seed = s.wrapping_add(2);
        if let Some(a) = &mut self.augment {
            a.seed = s.wrapping_add(3);
        }
        self.dataset.seed = s.wrapping_add(4);
    }

    pub fn channel_seed(&self, channel: usize) -> u64 {
        self.seed.wrapping_add(100).wrapping_add(channel as u64)
    }

    pub fn scale(&self) -> Result<FrequencyScale<f64>, CliError> {
        parse_scale(&self.scale)
    }

    pub fn pipeline(&self) -> PipelineSettings {
        PipelineSettings {
            spectral: self.spectral.clone(),
            augment: self.augment.clone(),
            cnn: self.cnn.clone(),
            train: self.train.clone(),
            scaling: self.scaling,
        }
    }
}

pub fn parse_scale(s: &str) -> Result<FrequencyScale<f64>, CliError> {
    s.parse()
        .map_err(|e| CliError::Usage(format!("bad scale `{s}` (want linear, mel or warped:<c1>,<c2>): {e}")))
}
