//! Logarithmic frequency warps `f' = c1 * log10(1 + f / c2)`.
//!
//! The Mel scale is the member with `c1 = 2595`, `c2 = 700 Hz`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MEL_C1: f64 = 2595.0;
pub const MEL_C2_HZ: f64 = 700.0;

/// Frequency axis used for filter placement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrequencyScale<T> {
    Linear,
    Warped { c1: T, c2: T },
}

impl<T: Scalar> FrequencyScale<T> {
    pub fn warped(c1: T, c2: T) -> Result<Self> {
        if !(c1 > T::zero() && c1.is_finite() && c2 > T::zero() && c2.is_finite()) {
            return Err(Error::invalid(format!(
                "warp constants must be positive and finite, got c1={c1}, c2={c2}"
            )));
        }
        Ok(Self::Warped { c1, c2 })
    }

    pub fn mel() -> Self {
        Self::Warped {
            c1: T::of(MEL_C1),
            c2: T::of(MEL_C2_HZ),
        }
    }

    /// Maps a non-negative frequency onto this scale.
    pub fn to_scale(&self, f: T) -> T {
        match *self {
            Self::Linear => f,
            Self::Warped { c1, c2 } => warp(f, c1, c2),
        }
    }

    pub fn from_scale(&self, v: T) -> T {
        match *self {
            Self::Linear => v,
            Self::Warped { c1, c2 } => unwarp(v, c1, c2),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Self::Linear)
    }

    /// Short tag used in file names: `linear`, `mel` or `warped_<c1>_<c2>`.
    pub fn tag(&self) -> String {
        match *self {
            Self::Linear => "linear".into(),
            Self::Warped { c1, c2 } if c1 == T::of(MEL_C1) && c2 == T::of(MEL_C2_HZ) => "mel".into(),
            Self::Warped { c1, c2 } => format!("warped_{c1}_{c2}"),
        }
    }
}

impl<T: Scalar> fmt::Display for FrequencyScale<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear => write!(f, "linear"),
            Self::Warped { c1, c2 } => write!(f, "warped:{c1},{c2}"),
        }
    }
}

impl<T: Scalar> FromStr for FrequencyScale<T> {
    type Err = Error;

    /// Accepts `linear`, `mel` or `warped:<c1>,<c2>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "linear" => return Ok(Self::Linear),
            "mel" => return Ok(Self::mel()),
            _ => {}
        }
        let bad = || Error::invalid(format!("cannot parse scale `{s}` (linear|mel|warped:<c1>,<c2>)"));
        let params = s.strip_prefix("warped:").ok_or_else(bad)?;
        let (a, b) = params.split_once(',').ok_or_else(bad)?;
        let c1: T = a.trim().parse().map_err(|_| bad())?;
        let c2: T = b.trim().parse().map_err(|_| bad())?;
        Self::warped(c1, c2)
    }
}

#[inline]
fn warp<T: Scalar>(f: T, c1: T, c2: T) -> T {
    // ln_1p keeps precision when f << c2
    c1 * (f / c2).ln_1p() / T::LN_10()
}

#[inline]
fn unwarp<T: Scalar>(v: T, c1: T, c2: T) -> T {
    c2 * (v * T::LN_10() / c1).exp_m1()
}

fn check_constants<T: Scalar>(c1: T, c2: T) -> Result<()> {
    FrequencyScale::warped(c1, c2).map(|_| ())
}

/// `c1 * log10(1 + f / c2)`.
pub fn hz_to_warped<T: Scalar>(f: T, c1: T, c2: T) -> Result<T> {
    check_constants(c1, c2)?;
    if !(f >= T::zero()) {
        return Err(Error::invalid(format!("frequency must be >= 0, got {f}")));
    }
    Ok(warp(f, c1, c2))
}

/// `c2 * (10^(v / c1) - 1)`, the inverse of [`hz_to_warped`].
pub fn warped_to_hz<T: Scalar>(v: T, c1: T, c2: T) -> Result<T> {
    check_constants(c1, c2)?;
    if !(v >= T::zero()) {
        return Err(Error::invalid(format!("warped value must be >= 0, got {v}")));
    }
    Ok(unwarp(v, c1, c2))
}
