//! Image-style augmentation of spectrograms: circular time shifts and
//! reflections along either axis. Every transform permutes entries, so the
//! value multiset of a spectrogram is preserved exactly.

use ndarray::{s, Array2, Axis};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::Spectrogram;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentPolicy {
    pub enable_translate: bool,
    pub max_shift_frames: usize,
    /// Reflection about the vertical axis (reverses time).
    pub enable_reflect_time: bool,
    /// Reflection about the horizontal axis (reverses channels).
    pub enable_reflect_freq: bool,
    pub copies_per_item: usize,
    pub seed: u64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            enable_translate: true,
            max_shift_frames: 4,
            enable_reflect_time: true,
            enable_reflect_freq: true,
            copies_per_item: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Transform {
    Translate,
    ReflectTime,
    ReflectFreq,
}

impl AugmentPolicy {
    fn enabled(&self) -> Vec<Transform> {
        let mut t = Vec::new();
        if self.enable_translate && self.max_shift_frames > 0 {
            t.push(Transform::Translate);
        }
        if self.enable_reflect_time {
            t.push(Transform::ReflectTime);
        }
        if self.enable_reflect_freq {
            t.push(Transform::ReflectFreq);
        }
        t
    }
}

/// Rotates frames so that output frame `t` is input frame `t - shift (mod n)`.
/// `|shift|` may not exceed the frame count; a shift of exactly `n` is the identity.
pub fn translate<T: Scalar>(s: &Spectrogram<T>, shift: isize) -> Result<Spectrogram<T>> {
    let n = s.n_frames();
    if shift.unsigned_abs() > n {
        return Err(Error::invalid(format!(
            "shift of {shift} frames exceeds the {n}-frame spectrogram"
        )));
    }
    let k = shift.rem_euclid(n as isize) as usize;
    let v = s.values();
    let mut out = Array2::zeros(v.dim());
    out.slice_mut(s![k.., ..]).assign(&v.slice(s![..n - k, ..]));
    out.slice_mut(s![..k, ..]).assign(&v.slice(s![n - k.., ..]));
    Ok(Spectrogram::with_parts(
        out,
        s.frame_times_s().to_vec(),
        s.channel_centers_hz().to_vec(),
        s.scale(),
    ))
}

/// Reverses frame order.
pub fn reflect_time<T: Scalar>(s: &Spectrogram<T>) -> Spectrogram<T> {
    let mut v = s.values().clone();
    v.invert_axis(Axis(0));
    Spectrogram::with_parts(
        v.as_standard_layout().into_owned(),
        s.frame_times_s().to_vec(),
        s.channel_centers_hz().to_vec(),
        s.scale(),
    )
}

/// Reverses channel order, carrying the channel centre metadata along.
pub fn reflect_freq<T: Scalar>(s: &Spectrogram<T>) -> Spectrogram<T> {
    let mut v = s.values().clone();
    v.invert_axis(Axis(1));
    let mut centers = s.channel_centers_hz().to_vec();
    centers.reverse();
    Spectrogram::with_parts(
        v.as_standard_layout().into_owned(),
        s.frame_times_s().to_vec(),
        centers,
        s.scale(),
    )
}

/// Originals first (in order), then `copies_per_item` variants per item.
/// Each variant applies each enabled transform with probability 1/2, and at
/// least one of them.
pub fn augment_dataset<T: Scalar>(items: &[Spectrogram<T>], policy: &AugmentPolicy) -> Result<Vec<Spectrogram<T>>> {
    let mut out = items.to_vec();
    if policy.copies_per_item == 0 {
        return Ok(out);
    }
    let enabled = policy.enabled();
    if enabled.is_empty() {
        return Err(Error::invalid(
            "copies_per_item > 0 but no augmentation transform is enabled",
        ));
    }
    if policy.enable_translate {
        if let Some(s) = items.iter().find(|s| policy.max_shift_frames >= s.n_frames()) {
            return Err(Error::invalid(format!(
                "max_shift_frames {} must be below the frame count {}",
                policy.max_shift_frames,
                s.n_frames()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    out.reserve(items.len() * policy.copies_per_item);
    for item in items {
        for _ in 0..policy.copies_per_item {
            let mut chosen: Vec<Transform> = enabled.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
            if chosen.is_empty() {
                chosen.push(*enabled.choose(&mut rng).expect("non-empty"));
            }
            let mut cur = item.clone();
            for t in chosen {
                cur = match t {
                    Transform::Translate => {
                        let mag = rng.random_range(1..=policy.max_shift_frames) as isize;
                        let shift = if rng.random_bool(0.5) { mag } else { -mag };
                        translate(&cur, shift)?
                    }
                    Transform::ReflectTime => reflect_time(&cur),
                    Transform::ReflectFreq => reflect_freq(&cur),
                };
            }
            out.push(cur);
        }
    }
    Ok(out)
}
