//! Power spectrograms and frequency-warped filterbanks.

pub mod filterbank;
pub mod scale;
pub mod spectrogram;
pub mod stft;

pub use filterbank::{apply_filterbank, build_filterbank, BandedPower, FilterNormalization, Filterbank};
pub use scale::{hz_to_warped, warped_to_hz, FrequencyScale, MEL_C1, MEL_C2_HZ};
pub use spectrogram::{
    load_spectrogram_csv, log_compress, save_spectrogram_csv, save_spectrogram_pgm, spectrogram_from_csv,
    spectrogram_to_csv, spectrogram_to_pgm, Spectrogram, SpectrogramBuilder, DEFAULT_FLOOR_DB, LOG_EPSILON,
};
pub use stft::{stft, PowerSpectrogram, Stft, StftConfig, WindowKind};
