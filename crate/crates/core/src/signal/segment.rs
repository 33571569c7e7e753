use std::collections::BTreeMap;

use super::{SampleLabel, Segment, Waveform};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Converts a duration to a whole number of samples (rounded).
pub fn window_samples<T: Scalar>(seconds: T, sample_rate: T) -> usize {
    let n = (seconds * sample_rate).round();
    if n > T::zero() {
        n.to_usize().unwrap_or(0)
    } else {
        0
    }
}

fn window_and_stride<T: Scalar>(w: &Waveform<T>, window_s: T, stride_s: T) -> Result<(usize, usize)> {
    let win = window_samples(window_s, w.sample_rate());
    if win < 1 {
        return Err(Error::invalid(format!(
            "window of {window_s} s is shorter than one sample"
        )));
    }
    if !(stride_s > T::zero()) {
        return Err(Error::invalid(format!("stride must be positive, got {stride_s}")));
    }
    let stride = window_samples(stride_s, w.sample_rate()).max(1);
    Ok((win, stride))
}

/// Cuts `w` into windows at offsets `0, S, 2S, ...`; the trailing partial window is dropped.
pub fn segment<T: Scalar>(w: &Waveform<T>, window_s: T, stride_s: T) -> Result<Vec<Segment<T>>> {
    let (win, stride) = window_and_stride(w, window_s, stride_s)?;
    Ok(windows(w.len(), win, stride)
        .map(|start| make_segment(w, start, win, None))
        .collect())
}

/// Like [`segment`], labelling each window with the majority non-background
/// per-sample label (or `background` when no event is present).
pub fn segment_labeled<T: Scalar>(
    w: &Waveform<T>,
    labels: &[SampleLabel],
    window_s: T,
    stride_s: T,
) -> Result<Vec<Segment<T>>> {
    if labels.len() != w.len() {
        return Err(Error::dims(w.len(), labels.len()));
    }
    let (win, stride) = window_and_stride(w, window_s, stride_s)?;
    Ok(windows(w.len(), win, stride)
        .map(|start| {
            let mut counts: BTreeMap<SampleLabel, usize> = BTreeMap::new();
            for l in &labels[start..start + win] {
                if *l != SampleLabel::Background {
                    *counts.entry(*l).or_default() += 1;
                }
            }
            // max_by_key keeps the last maximum; iterate reversed so ties go to the first kind
            let label = counts
                .into_iter()
                .rev()
                .max_by_key(|(_, c)| *c)
                .map(|(l, _)| l)
                .unwrap_or(SampleLabel::Background);
            make_segment(w, start, win, Some(label.as_str().to_string()))
        })
        .collect())
}

fn windows(n: usize, win: usize, stride: usize) -> impl Iterator<Item = usize> {
    let count = if n >= win { (n - win) / stride + 1 } else { 0 };
    (0..count).map(move |i| i * stride)
}

fn make_segment<T: Scalar>(w: &Waveform<T>, start: usize, win: usize, label: Option<String>) -> Segment<T> {
    Segment {
        samples: w.samples()[start..start + win].to_vec(),
        sample_rate: w.sample_rate(),
        source_channel: w.channel_id().to_string(),
        offset_s: T::of_usize(start) / w.sample_rate(),
        label,
    }
}
