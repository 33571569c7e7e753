//! CSV and 16-bit PCM WAV waveform files.
//!
//! CSV layout: a `# sample_rate=<float>` line, an optional `# channel=<text>`
//! (and `# start_time=<float>`) line, then one decimal sample per line.
//! WAV: RIFF/WAVE, PCM format 1, mono, 16 bits; samples map to `s / 32768`.
//! Label files: a `label` header line, then one per-sample label per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{SampleLabel, Waveform};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveformFormat {
    Csv,
    Wav,
}

impl WaveformFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" | "txt" => Some(Self::Csv),
            "wav" => Some(Self::Wav),
            _ => None,
        }
    }
}

impl std::str::FromStr for WaveformFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "wav" | "wav-pcm" => Ok(Self::Wav),
            other => Err(Error::invalid(format!("unknown waveform format `{other}`"))),
        }
    }
}

pub fn save_labels(path: &Path, labels: &[SampleLabel]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 11 + 6);
    out.push_str("label\n");
    for l in labels {
        out.push_str(l.as_str());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_labels(path: &Path) -> Result<Vec<SampleLabel>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "label")) => {}
        _ => {
            return Err(Error::MalformedHeader {
                path: path.to_path_buf(),
                reason: "expected a `label` header line".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| Error::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("unknown label `{}`", l.trim()),
            })
        })
        .collect()
}

pub fn load_waveform<T: Scalar>(path: &Path, format: WaveformFormat) -> Result<Waveform<T>> {
    match format {
        WaveformFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_csv(path, &text)
        }
        WaveformFormat::Wav => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            parse_wav(path, &bytes)
        }
    }
}

pub fn save_waveform<T: Scalar>(path: &Path, w: &Waveform<T>, format: WaveformFormat) -> Result<()> {
    let bytes = match format {
        WaveformFormat::Csv => render_csv(w).into_bytes(),
        WaveformFormat::Wav => render_wav(w)?,
    };
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

fn render_csv<T: Scalar>(w: &Waveform<T>) -> String {
    let mut out = String::with_capacity(w.len() * 12 + 64);
    out.push_str(&format!("# sample_rate={}\n", w.sample_rate()));
    if !w.channel_id().is_empty() {
        out.push_str(&format!("# channel={}\n", w.channel_id()));
    }
    if let Some(t) = w.start_time() {
        out.push_str(&format!("# start_time={t}\n"));
    }
    for s in w.samples() {
        out.push_str(&format!("{s}\n"));
    }
    out
}

fn parse_csv<T: Scalar>(path: &Path, text: &str) -> Result<Waveform<T>> {
    let header_err = |reason: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason,
    };
    let mut sample_rate: Option<T> = None;
    let mut channel = String::new();
    let mut start_time = None;
    let mut samples = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if !samples.is_empty() {
                return Err(header_err(format!("metadata line {} after samples", i + 1)));
            }
            let Some((key, value)) = meta.split_once('=') else {
                return Err(header_err(format!("expected `key=value` on line {}", i + 1)));
            };
            let value = value.trim();
            match key.trim() {
                "sample_rate" => {
                    let sr: T = value
                        .parse()
                        .map_err(|_| header_err(format!("bad sample_rate `{value}`")))?;
                    if !(sr > T::zero()) || !sr.is_finite() {
                        return Err(header_err(format!("sample_rate must be positive, got {value}")));
                    }
                    sample_rate = Some(sr);
                }
                "channel" => channel = value.to_string(),
                "start_time" => {
                    start_time = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| header_err(format!("bad start_time `{value}`")))?,
                    )
                }
                _ => {}
            }
            continue;
        }
        if sample_rate.is_none() {
            return Err(header_err("missing `# sample_rate=` line before samples".into()));
        }
        let v: T = line.parse().map_err(|_| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            reason: format!("not a number: `{line}`"),
        })?;
        if !v.is_finite() {
            return Err(Error::NonFiniteSample { index: samples.len() });
        }
        samples.push(v);
    }

    let sample_rate = sample_rate.ok_or_else(|| header_err("missing `# sample_rate=` line".into()))?;
    let w = Waveform::new(samples, sample_rate, channel)?;
    Ok(match start_time {
        Some(t) => w.with_start_time(t),
        None => w,
    })
}

fn render_wav<T: Scalar>(w: &Waveform<T>) -> Result<Vec<u8>> {
    let sr = w.sample_rate().round().as_f64();
    if sr < 1.0 || sr > u32::MAX as f64 {
        return Err(Error::invalid(format!("sample rate {sr} not representable in WAV")));
    }
    let sr = sr as u32;
    let data_len = (w.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sr.to_le_bytes());
    out.extend_from_slice(&(sr * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in w.samples() {
        let q = (s.as_f64() * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    Ok(out)
}

fn parse_wav<T: Scalar>(path: &Path, bytes: &[u8]) -> Result<Waveform<T>> {
    let bad = |reason: &str| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("not a RIFF/WAVE file"));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);

    let mut pos = 12;
    let mut sample_rate = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32_at(pos + 4) as usize;
        let body = pos + 8;
        let end = body.checked_add(len).filter(|&e| e <= bytes.len());
        match id {
            b"fmt " => {
                let end = end.ok_or_else(|| bad("truncated fmt chunk"))?;
                if end - body < 16 {
                    return Err(bad("fmt chunk too short"));
                }
                if u16_at(body) != 1 {
                    return Err(bad("only PCM (format 1) is supported"));
                }
                if u16_at(body + 2) != 1 {
                    return Err(bad("only mono files are supported"));
                }
                if u16_at(body + 14) != 16 {
                    return Err(bad("only 16-bit samples are supported"));
                }
                sample_rate = Some(u32_at(body + 4));
            }
            b"data" => {
                let end = end.ok_or_else(|| bad("truncated data chunk"))?;
                data = Some(&bytes[body..end]);
            }
            _ => {}
        }
        pos = body + len + (len & 1);
    }

    let sample_rate = sample_rate.ok_or_else(|| bad("missing fmt chunk"))?;
    if sample_rate == 0 {
        return Err(bad("sample rate is zero"));
    }
    let data = data.ok_or_else(|| bad("missing data chunk"))?;
    let scale = T::of(32768.0);
    let samples: Vec<T> = data
        .chunks_exact(2)
        .map(|c| T::of(i16::from_le_bytes([c[0], c[1]]) as f64) / scale)
        .collect();
    Waveform::new(samples, T::of(sample_rate as f64), "")
}
