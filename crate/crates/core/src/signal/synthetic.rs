//! Labelled synthetic seismic-like records.
//!
//! Three event kinds are summed over a Gaussian noise floor:
//! * tremor: band-limited Gaussian noise (FFT brick-wall band, Tukey taper),
//!   RMS `amplitude / sqrt(2)`;
//! * burst: `amplitude * exp(-t / tau) * cos(2 pi f t)` with `tau = 1 / (pi * bandwidth)`;
//! * noise: white Gaussian noise with standard deviation `amplitude`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{Segment, Waveform};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Tremor,
    Burst,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SampleLabel {
    Background,
    Tremor,
    Burst,
    Noise,
}

impl SampleLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SampleLabel::Background => "background",
            SampleLabel::Tremor => "tremor",
            SampleLabel::Burst => "burst",
            SampleLabel::Noise => "noise",
        }
    }
}

impl std::str::FromStr for SampleLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "background" => Ok(SampleLabel::Background),
            "tremor" => Ok(SampleLabel::Tremor),
            "burst" => Ok(SampleLabel::Burst),
            "noise" => Ok(SampleLabel::Noise),
            other => Err(Error::invalid(format!("unknown sample label `{other}`"))),
        }
    }
}

impl From<EventKind> for SampleLabel {
    fn from(k: EventKind) -> Self {
        match k {
            EventKind::Tremor => SampleLabel::Tremor,
            EventKind::Burst => SampleLabel::Burst,
            EventKind::Noise => SampleLabel::Noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticEvent {
    pub kind: EventKind,
    pub onset_s: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub center_freq_hz: f64,
    #[serde(default)]
    pub bandwidth_hz: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub duration_s: f64,
    pub sample_rate: f64,
    #[serde(default)]
    pub events: Vec<SyntheticEvent>,
    #[serde(default)]
    pub noise_floor: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_channel")]
    pub channel_id: String,
}

fn default_channel() -> String {
    "SYN".to_string()
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(Error::invalid(format!(
                "sample_rate {} must be positive",
                self.sample_rate
            )));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::invalid(format!(
                "duration_s {} must be positive",
                self.duration_s
            )));
        }
        if !(self.noise_floor >= 0.0) || !self.noise_floor.is_finite() {
            return Err(Error::invalid(format!("noise_floor {} must be >= 0", self.noise_floor)));
        }
        let nyquist = self.sample_rate / 2.0;
        for (index, ev) in self.events.iter().enumerate() {
            let bad = |reason: String| Error::InvalidEvent { index, reason };
            if !(ev.onset_s >= 0.0) || !(ev.duration_s > 0.0) {
                return Err(bad("onset must be >= 0 and duration > 0".into()));
            }
            // tolerate rounding when the event is meant to end exactly at the record end
            if ev.onset_s + ev.duration_s > self.duration_s * (1.0 + 1e-12) {
                return Err(bad(format!(
                    "ends at {} s, after the record end {} s",
                    ev.onset_s + ev.duration_s,
                    self.duration_s
                )));
            }
            if !(ev.center_freq_hz >= 0.0) || ev.center_freq_hz >= nyquist {
                return Err(bad(format!(
                    "center frequency {} Hz not in [0, Nyquist = {nyquist} Hz)",
                    ev.center_freq_hz
                )));
            }
            if !(ev.amplitude >= 0.0) || !ev.amplitude.is_finite() {
                return Err(bad(format!("amplitude {} must be >= 0", ev.amplitude)));
            }
            if matches!(ev.kind, EventKind::Tremor | EventKind::Burst) && !(ev.bandwidth_hz > 0.0) {
                return Err(bad("tremor and burst events need bandwidth_hz > 0".into()));
            }
        }
        Ok(())
    }
}

/// Renders `spec` into a waveform and a per-sample dominant-event label array.
/// Pure function of `spec` (including its seed).
pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<(Waveform<T>, Vec<SampleLabel>)> {
    spec.validate()?;
    let sr = spec.sample_rate;
    let n = ((spec.duration_s * sr).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut signal = vec![0.0f64; n];
    if spec.noise_floor > 0.0 {
        for s in signal.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *s = spec.noise_floor * z;
        }
    }

    let mut labels = vec![SampleLabel::Background; n];
    let mut dominance = vec![0.0f64; n];

    for ev in &spec.events {
        let start = ((ev.onset_s * sr).round() as usize).min(n - 1);
        let len = ((ev.duration_s * sr).round() as usize).clamp(1, n - start);
        let (values, envelope) = match ev.kind {
            EventKind::Tremor => tremor(&mut rng, len, sr, ev),
            EventKind::Burst => burst(len, sr, ev),
            EventKind::Noise => {
                let v: Vec<f64> = (0..len)
                    .map(|_| ev.amplitude * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                    .collect();
                (v, vec![ev.amplitude; len])
            }
        };
        for i in 0..len {
            signal[start + i] += values[i];
            if envelope[i] > dominance[start + i] {
                dominance[start + i] = envelope[i];
                labels[start + i] = ev.kind.into();
            }
        }
    }

    let samples = signal.into_iter().map(T::of).collect();
    let w = Waveform::new(samples, T::of(sr), spec.channel_id.clone())?;
    Ok((w, labels))
}

fn tukey(len: usize, i: usize) -> f64 {
    let ramp = ((len as f64) * 0.1).floor() as usize;
    if ramp == 0 {
        return 1.0;
    }
    let d = i.min(len - 1 - i);
    if d >= ramp {
        1.0
    } else {
        0.5 * (1.0 - (std::f64::consts::PI * d as f64 / ramp as f64).cos())
    }
}

fn tremor(rng: &mut ChaCha8Rng, len: usize, sr: f64, ev: &SyntheticEvent) -> (Vec<f64>, Vec<f64>) {
    let mut buf: Vec<Complex<f64>> = (0..len)
        .map(|_| Complex::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(&mut buf);

    let lo = (ev.center_freq_hz - ev.bandwidth_hz / 2.0).max(0.0);
    let hi = ev.center_freq_hz + ev.bandwidth_hz / 2.0;
    let df = sr / len as f64;
    let in_band = |k: usize| {
        let f = k.min(len - k) as f64 * df;
        f >= lo && f <= hi
    };
    let any = (0..len).any(in_band);
    let nearest = ((ev.center_freq_hz / df).round() as usize).min(len / 2);
    for (k, c) in buf.iter_mut().enumerate() {
        let keep = if any { in_band(k) } else { k.min(len - k) == nearest };
        if !keep {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);

    let mut values: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let rms = (values.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    let target = ev.amplitude / std::f64::consts::SQRT_2;
    let envelope: Vec<f64> = (0..len).map(|i| ev.amplitude * tukey(len, i)).collect();
    for (i, v) in values.iter_mut().enumerate() {
        *v = if rms > 0.0 { *v * target / rms } else { 0.0 } * tukey(len, i);
    }
    (values, envelope)
}

fn burst(len: usize, sr: f64, ev: &SyntheticEvent) -> (Vec<f64>, Vec<f64>) {
    let tau = 1.0 / (std::f64::consts::PI * ev.bandwidth_hz);
    let w = 2.0 * std::f64::consts::PI * ev.center_freq_hz;
    let envelope: Vec<f64> = (0..len)
        .map(|i| ev.amplitude * (-(i as f64 / sr) / tau).exp())
        .collect();
    let values = envelope
        .iter()
        .enumerate()
        .map(|(i, e)| e * (w * i as f64 / sr).cos())
        .collect();
    (values, envelope)
}

/// Two-class dataset whose classes differ only in the frequency of a sub-2 Hz
/// tremor. Every item carries that tremor at random amplitude, a higher
/// frequency nuisance tremor (center drawn from a range, fixed by default) of
/// random amplitude, and a noise floor, so total low-band energy alone does not
/// separate the classes. On a linear frequency axis both class bands fall into
/// the lowest filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowFrequencyTwoClass {
    pub n_per_class: usize,
    pub sample_rate: f64,
    pub window_s: f64,
    /// Tremor centre frequencies of the two classes, both below 2 Hz.
    pub class_freqs_hz: [f64; 2],
    pub class_bandwidth_hz: f64,
    /// Low tremor amplitude is drawn log-uniformly from this range.
    pub amplitude_range: [f64; 2],
    pub nuisance_freq_range_hz: [f64; 2],
    pub nuisance_amplitude_range: [f64; 2],
    pub noise_floor: f64,
    pub seed: u64,
}

impl Default for LowFrequencyTwoClass {
    fn default() -> Self {
        Self {
            n_per_class: 60,
            sample_rate: 100.0,
            window_s: 12.8,
            class_freqs_hz: [0.6, 1.5],
            class_bandwidth_hz: 0.3,
            amplitude_range: [0.5, 2.0],
            nuisance_freq_range_hz: [15.0, 15.0],
            nuisance_amplitude_range: [0.2, 1.0],
            noise_floor: 0.02,
            seed: 0,
        }
    }
}

pub const CLASS_LABELS: [&str; 2] = ["class_a", "class_b"];

/// Builds the dataset described by `cfg`. Items alternate between the two classes.
pub fn low_frequency_two_class<T: Scalar>(cfg: &LowFrequencyTwoClass) -> Result<Vec<Segment<T>>> {
    if cfg.n_per_class == 0 {
        return Err(Error::invalid("n_per_class must be >= 1"));
    }
    if cfg.class_freqs_hz.iter().any(|&f| !(f > 0.0 && f < 2.0)) {
        return Err(Error::invalid("class frequencies must lie in (0, 2) Hz"));
    }
    for (name, [lo, hi]) in [
        ("amplitude_range", cfg.amplitude_range),
        ("nuisance_amplitude_range", cfg.nuisance_amplitude_range),
        ("nuisance_freq_range_hz", cfg.nuisance_freq_range_hz),
    ] {
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::invalid(format!(
                "{name} must satisfy 0 < low <= high, got [{lo}, {hi}]"
            )));
        }
    }
    let log_uniform = |rng: &mut ChaCha8Rng, r: [f64; 2]| -> f64 {
        let (lo, hi) = (r[0].ln(), r[1].ln());
        (lo + (hi - lo) * rng.random::<f64>()).exp()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(2 * cfg.n_per_class);
    for item in 0..2 * cfg.n_per_class {
        let class = item % 2;
        let nuisance_f = cfg.nuisance_freq_range_hz[0]
            + (cfg.nuisance_freq_range_hz[1] - cfg.nuisance_freq_range_hz[0]) * rng.random::<f64>();
        let spec = SyntheticSpec {
            duration_s: cfg.window_s,
            sample_rate: cfg.sample_rate,
            events: vec![
                SyntheticEvent {
                    kind: EventKind::Tremor,
                    onset_s: 0.0,
                    duration_s: cfg.window_s,
                    center_freq_hz: cfg.class_freqs_hz[class],
                    bandwidth_hz: cfg.class_bandwidth_hz,
                    amplitude: log_uniform(&mut rng, cfg.amplitude_range),
                },
                SyntheticEvent {
                    kind: EventKind::Tremor,
                    onset_s: 0.0,
                    duration_s: cfg.window_s,
                    center_freq_hz: nuisance_f,
                    bandwidth_hz: 2.0,
                    amplitude: log_uniform(&mut rng, cfg.nuisance_amplitude_range),
                },
            ],
            noise_floor: cfg.noise_floor,
            seed: rng.random(),
            channel_id: format!("LF{item:04}"),
        };
        let (w, _) = generate_synthetic::<T>(&spec)?;
        out.push(Segment {
            samples: w.samples().to_vec(),
            sample_rate: w.sample_rate(),
            source_channel: w.channel_id().to_string(),
            offset_s: T::zero(),
            label: Some(CLASS_LABELS[class].to_string()),
        });
    }
    Ok(out)
}
