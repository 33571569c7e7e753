use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::filterbank::{apply_filterbank, BandedPower, Filterbank};
use super::scale::FrequencyScale;
use super::stft::Stft;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::Segment;

/// Offset added before taking the logarithm.
pub const LOG_EPSILON: f64 = 1e-12;
pub const DEFAULT_FLOOR_DB: f64 = -100.0;

/// Log-power time x channel image.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    values: Array2<T>,
    frame_times_s: Vec<T>,
    channel_centers_hz: Vec<T>,
    scale: FrequencyScale<T>,
}

impl<T: Scalar> Spectrogram<T> {
    pub fn new(
        values: Array2<T>,
        frame_times_s: Vec<T>,
        channel_centers_hz: Vec<T>,
        scale: FrequencyScale<T>,
    ) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::invalid("spectrogram needs at least one frame and one channel"));
        }
        if frame_times_s.len() != values.nrows() {
            return Err(Error::dims(
                values.nrows(),
                format!("{} frame times", frame_times_s.len()),
            ));
        }
        if channel_centers_hz.len() != values.ncols() {
            return Err(Error::dims(
                values.ncols(),
                format!("{} channel centres", channel_centers_hz.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("spectrogram values must be finite"));
        }
        Ok(Self {
            values,
            frame_times_s,
            channel_centers_hz,
            scale,
        })
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn frame_times_s(&self) -> &[T] {
        &self.frame_times_s
    }

    pub fn channel_centers_hz(&self) -> &[T] {
        &self.channel_centers_hz
    }

    pub fn scale(&self) -> FrequencyScale<T> {
        self.scale
    }

    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Same metadata, new values of identical shape.
    pub(crate) fn with_parts(
        values: Array2<T>,
        frame_times_s: Vec<T>,
        channel_centers_hz: Vec<T>,
        scale: FrequencyScale<T>,
    ) -> Self {
        debug_assert_eq!(values.nrows(), frame_times_s.len());
        debug_assert_eq!(values.ncols(), channel_centers_hz.len());
        Self {
            values,
            frame_times_s,
            channel_centers_hz,
            scale,
        }
    }

    pub fn max_value(&self) -> T {
        self.values.iter().cloned().fold(T::neg_infinity(), T::max)
    }
}

/// `max(10 log10(v + 1e-12), floor_db)` elementwise.
pub fn log_compress<T: Scalar>(banded: &BandedPower<T>, floor_db: T) -> Result<Spectrogram<T>> {
    if let Some(((t, c), v)) = banded.values.indexed_iter().find(|(_, v)| !(**v >= T::zero())) {
        return Err(Error::NegativeValue {
            value: v.as_f64(),
            location: format!("frame {t}, channel {c}"),
        });
    }
    let eps = T::of(LOG_EPSILON);
    let ten = T::of(10.0);
    let values = banded.values.mapv(|v| (ten * (v + eps).log10()).max(floor_db));
    Spectrogram::new(
        values,
        banded.frame_times_s.clone(),
        banded.channel_centers_hz.clone(),
        banded.scale,
    )
}

/// STFT, filterbank and log compression bundled for repeated use.
pub struct SpectrogramBuilder<T: Scalar> {
    stft: Stft<T>,
    filterbank: Filterbank<T>,
    floor_db: T,
}

impl<T: Scalar> SpectrogramBuilder<T> {
    pub fn new(stft: Stft<T>, filterbank: Filterbank<T>, floor_db: T) -> Result<Self> {
        if stft.config().n_bins() != filterbank.n_bins() {
            return Err(Error::dims(filterbank.n_bins(), stft.config().n_bins()));
        }
        Ok(Self {
            stft,
            filterbank,
            floor_db,
        })
    }

    pub fn filterbank(&self) -> &Filterbank<T> {
        &self.filterbank
    }

    pub fn floor_db(&self) -> T {
        self.floor_db
    }

    pub fn compute(&self, seg: &Segment<T>) -> Result<Spectrogram<T>> {
        if seg.sample_rate != self.filterbank.sample_rate() {
            return Err(Error::invalid(format!(
                "segment sampled at {} Hz but filterbank built for {} Hz",
                seg.sample_rate,
                self.filterbank.sample_rate()
            )));
        }
        let power = self.stft.process(&seg.samples, seg.sample_rate)?;
        let banded = apply_filterbank(&power, &self.filterbank)?;
        log_compress(&banded, self.floor_db)
    }
}

fn join<T: Scalar>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// CSV with `#` metadata lines (`scale`, `c1`, `c2`, `frame_times`,
/// `channel_centers`) followed by one comma-separated row per frame.
pub fn spectrogram_to_csv<T: Scalar>(s: &Spectrogram<T>) -> String {
    let mut out = String::new();
    match s.scale {
        FrequencyScale::Linear => out.push_str("# scale=linear\n"),
        FrequencyScale::Warped { c1, c2 } => {
            out.push_str(&format!("# scale=warped\n# c1={c1}\n# c2={c2}\n"));
        }
    }
    out.push_str(&format!("# frame_times={}\n", join(&s.frame_times_s)));
    out.push_str(&format!("# channel_centers={}\n", join(&s.channel_centers_hz)));
    for row in s.values.rows() {
        out.push_str(&join(row.as_slice().expect("standard layout")));
        out.push('\n');
    }
    out
}

pub fn spectrogram_from_csv<T: Scalar>(path: &Path, text: &str) -> Result<Spectrogram<T>> {
    let header = |reason: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason,
    };
    let parse_list = |v: &str, line: usize| -> Result<Vec<T>> {
        if v.trim().is_empty() {
            return Ok(vec![]);
        }
        v.split(',')
            .map(|x| {
                x.trim().parse::<T>().map_err(|_| Error::Malformed {
                    path: path.to_path_buf(),
                    line,
                    reason: format!("not a number: `{x}`"),
                })
            })
            .collect()
    };
    let mut kind = None;
    let (mut c1, mut c2) = (None, None);
    let mut frame_times = None;
    let mut centers = None;
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let (k, v) = meta
                .split_once('=')
                .ok_or_else(|| header(format!("expected key=value on line {}", i + 1)))?;
            match k.trim() {
                "scale" => kind = Some(v.trim().to_string()),
                "c1" => {
                    c1 = Some(
                        parse_list(v, i + 1)?
                            .first()
                            .copied()
                            .ok_or_else(|| header("empty c1".into()))?,
                    )
                }
                "c2" => {
                    c2 = Some(
                        parse_list(v, i + 1)?
                            .first()
                            .copied()
                            .ok_or_else(|| header("empty c2".into()))?,
                    )
                }
                "frame_times" => frame_times = Some(parse_list(v, i + 1)?),
                "channel_centers" => centers = Some(parse_list(v, i + 1)?),
                _ => {}
            }
            continue;
        }
        rows.push(parse_list(line, i + 1)?);
    }
    let scale = match kind.as_deref() {
        Some("linear") => FrequencyScale::Linear,
        Some("warped") => FrequencyScale::warped(
            c1.ok_or_else(|| header("missing c1".into()))?,
            c2.ok_or_else(|| header("missing c2".into()))?,
        )?,
        other => return Err(header(format!("unknown or missing scale {other:?}"))),
    };
    let frame_times = frame_times.ok_or_else(|| header("missing frame_times".into()))?;
    let centers = centers.ok_or_else(|| header("missing channel_centers".into()))?;
    let n_cols = centers.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
        return Err(Error::dims(
            format!("{n_cols} columns"),
            format!("{} in row {bad}", rows[bad].len()),
        ));
    }
    let n_rows = rows.len();
    let flat: Vec<T> = rows.into_iter().flatten().collect();
    let values = Array2::from_shape_vec((n_rows, n_cols), flat).map_err(|e| Error::invalid(e.to_string()))?;
    Spectrogram::new(values, frame_times, centers, scale)
}

pub fn save_spectrogram_csv<T: Scalar>(path: &Path, s: &Spectrogram<T>) -> Result<()> {
    fs::write(path, spectrogram_to_csv(s)).map_err(|e| Error::io(path, e))
}

pub fn load_spectrogram_csv<T: Scalar>(path: &Path) -> Result<Spectrogram<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    spectrogram_from_csv(path, &text)
}

/// Binary PGM (P5), `n_frames` wide and `n_channels` tall, lowest channel at
/// the bottom. Values map linearly from `[floor_db, max]` onto `[0, 255]`.
pub fn spectrogram_to_pgm<T: Scalar>(s: &Spectrogram<T>, floor_db: T) -> Vec<u8> {
    let (frames, channels) = s.shape();
    let max = s.max_value();
    let range = max - floor_db;
    let mut out = format!("P5\n{frames} {channels}\n255\n").into_bytes();
    for c in (0..channels).rev() {
        for t in 0..frames {
            let px = if range > T::zero() {
                ((s.values[[t, c]] - floor_db) / range * T::of(255.0))
                    .round()
                    .max(T::zero())
                    .min(T::of(255.0))
                    .to_u8()
                    .unwrap_or(0)
            } else {
                0
            };
            out.push(px);
        }
    }
    out
}

pub fn save_spectrogram_pgm<T: Scalar>(path: &Path, s: &Spectrogram<T>, floor_db: T) -> Result<()> {
    fs::write(path, spectrogram_to_pgm(s, floor_db)).map_err(|e| Error::io(path, e))
}
