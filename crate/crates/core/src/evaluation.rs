//! Measurement harnesses: denoising TP/FP rates and threshold sweeps, spike
//! statistics, first-layer computation cost and recognition accuracy.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{mix_streams, EventError, EventStream, Geometry, Label, Polarity};
use crate::network::{LayerKind, LayerSpec};
use crate::sste::{encode_stream, SsteConfig, SsteError};
use crate::synth::{synth_noise, synth_signal, NoiseKind, Pattern};

pub use crate::training::accuracy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("input event {0:?} has no signal/noise label")]
    UnlabeledEvent((u64, u16, u16, Polarity)),
    #[error("retained event {0:?} is not in the input stream")]
    NotASubset((u64, u16, u16, Polarity)),
    #[error("theta sweep must be non-empty and ascending")]
    BadSweep,
    #[error(transparent)]
    Stream(#[from] EventError),
    #[error(transparent)]
    Encoder(#[from] SsteError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiseMetrics {
    /// Retained signal / total signal.
    pub tp_rate: f64,
    /// Retained noise / total noise.
    pub fp_rate: f64,
    pub snr: f64,
    pub theta: f64,
    pub n_signal: usize,
    pub n_noise: usize,
    pub kept_signal: usize,
    pub kept_noise: usize,
    /// Set when a class had no events and its rate was reported as 1.0.
    pub empty_class: bool,
}

pub fn denoise_metrics(input: &EventStream, retained: &EventStream) -> Result<DenoiseMetrics, EvalError> {
    let mut pool: HashMap<(u64, u16, u16, Polarity), Vec<Label>> = HashMap::new();
    let (mut n_signal, mut n_noise) = (0, 0);
    for e in input.events() {
        let label = e.label.ok_or(EvalError::UnlabeledEvent(e.key()))?;
        match label {
            Label::Signal => n_signal += 1,
            Label::Noise => n_noise += 1,
        }
        pool.entry(e.key()).or_default().push(label);
    }
    let (mut kept_signal, mut kept_noise) = (0, 0);
    for e in retained.events() {
        let labels = pool.get_mut(&e.key()).ok_or(EvalError::NotASubset(e.key()))?;
        let pos = match e.label {
            Some(l) => labels.iter().position(|&x| x == l),
            None => (!labels.is_empty()).then_some(0),
        }
        .ok_or(EvalError::NotASubset(e.key()))?;
        match labels.swap_remove(pos) {
            Label::Signal => kept_signal += 1,
            Label::Noise => kept_noise += 1,
        }
    }
    let rate = |kept: usize, total: usize| if total == 0 { 1.0 } else { kept as f64 / total as f64 };
    let total = n_signal + n_noise;
    Ok(DenoiseMetrics {
        tp_rate: rate(kept_signal, n_signal),
        fp_rate: rate(kept_noise, n_noise),
        snr: if total == 0 { 1.0 } else { n_signal as f64 / total as f64 },
        theta: f64::NAN,
        n_signal,
        n_noise,
        kept_signal,
        kept_noise,
        empty_class: n_signal == 0 || n_noise == 0,
    })
}

/// Encodes `mixed` once per threshold and scores each result.
pub fn roc_sweep(
    base: &SsteConfig,
    thetas: &[f64],
    mixed: &EventStream,
) -> Result<Vec<DenoiseMetrics>, EvalError> {
    if thetas.is_empty() || !thetas.windows(2).all(|w| w[0] < w[1]) {
        return Err(EvalError::BadSweep);
    }
    let run = |&theta: &f64| -> Result<DenoiseMetrics, EvalError> {
        let cfg = SsteConfig { theta, ..*base };
        let kept = encode_stream(&cfg, mixed)?;
        Ok(DenoiseMetrics { theta, ..denoise_metrics(mixed, &kept)? })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        thetas.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        thetas.iter().map(run).collect()
    }
}

/// Recipe for the synthetic signal-plus-noise streams used by the
/// denoising benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureSpec {
    pub pattern: Pattern,
    pub width: u16,
    pub height: u16,
    pub duration_us: u64,
    /// Signal events per second.
    pub signal_rate: f64,
    /// Self-correlation window of the noise generators.
    pub noise_window_us: u64,
    /// Share of the noise budget spent on type II bursts.
    pub type_two_fraction: f64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec {
            pattern: Pattern::MovingBar,
            width: 34,
            height: 34,
            duration_us: 100_000,
            signal_rate: 11_560.0,
            noise_window_us: 10_000,
            type_two_fraction: 0.5,
        }
    }
}

/// Signal plus enough type I / type II noise to land near `snr`. Noise
/// arrival is random, so the realised snr (returned) differs slightly.
pub fn synth_mixture(spec: &MixtureSpec, snr: f64, seed: u64) -> Result<(EventStream, f64), EventError> {
    if !(snr > 0.0 && snr <= 1.0) {
        return Err(EventError::InvalidParameter("snr must be in (0, 1]"));
    }
    if !(0.0..=1.0).contains(&spec.type_two_fraction) {
        return Err(EventError::InvalidParameter("type_two_fraction must be in [0, 1]"));
    }
    let g = Geometry::new(spec.width, spec.height);
    let signal = synth_signal(spec.pattern, g, spec.duration_us, spec.signal_rate, seed)?;
    let noise_rate = signal.len() as f64 * (1.0 - snr) / snr / (spec.duration_us as f64 / 1e6);
    let mut noise = EventStream::empty(g);
    let parts = [(NoiseKind::TypeI, 1.0 - spec.type_two_fraction), (NoiseKind::TypeII, spec.type_two_fraction)];
    for (i, (kind, share)) in parts.into_iter().enumerate() {
        let rate = noise_rate * share;
        if rate > 0.0 {
            let seed = seed.wrapping_mul(3).wrapping_add(i as u64 + 1);
            let part = synth_noise(kind, g, spec.duration_us, rate, spec.noise_window_us, seed)?;
            noise = mix_streams(&noise, &part)?.0;
        }
    }
    mix_streams(&signal, &noise)
}

pub const DENOISE_CSV_HEADER: &str =
    "snr_target,snr,theta,tp_rate,fp_rate,n_signal,n_noise,kept_signal,kept_noise";

pub fn denoise_csv_row(snr_target: f64, m: &DenoiseMetrics) -> String {
    format!(
        "{},{:.6},{},{:.6},{:.6},{},{},{},{}",
        snr_target, m.snr, m.theta, m.tp_rate, m.fp_rate, m.n_signal, m.n_noise, m.kept_signal, m.kept_noise
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeStats {
    /// Mean raw events per pixel that has at least one raw event.
    pub n_s_raw: f64,
    /// Mean encoded events per pixel that has at least one encoded event.
    pub n_s_encoded: f64,
    pub active_raw: usize,
    pub active_encoded: usize,
}

fn mean_per_active(stream: &EventStream) -> (f64, usize) {
    let counts = stream.pixel_counts();
    let active = counts.iter().filter(|&&c| c > 0).count();
    let mean = if active == 0 { 0.0 } else { stream.len() as f64 / active as f64 };
    (mean, active)
}

pub fn spike_stats(raw: &EventStream, encoded: &EventStream) -> Result<SpikeStats, EvalError> {
    if raw.geometry() != encoded.geometry() {
        return Err(EventError::GeometryMismatch(raw.geometry(), encoded.geometry()).into());
    }
    let (n_s_raw, active_raw) = mean_per_active(raw);
    let (n_s_encoded, active_encoded) = mean_per_active(encoded);
    Ok(SpikeStats { n_s_raw, n_s_encoded, active_raw, active_encoded })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// Events entering the first layer (a dataset mean may be fractional).
    pub n_e: f64,
    /// Multiplications per event.
    pub n_c: u64,
    pub total: f64,
}

/// Cost of the first layer assuming every event sits in a dense
/// neighbourhood: a conv event touches `k * k` weights per output channel, a
/// dense event one weight per output.
pub fn compute_cost(n_e: f64, first_layer: &LayerSpec) -> CostReport {
    let n_c = match first_layer.kind {
        LayerKind::Conv { kernel, .. } => (kernel * kernel * first_layer.out_channels) as u64,
        LayerKind::Dense => first_layer.out_channels as u64,
    };
    CostReport { n_e, n_c, total: n_e * n_c as f64 }
}
