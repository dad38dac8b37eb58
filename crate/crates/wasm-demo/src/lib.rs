//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a JSON string; the page parses it and draws. The
//! `*_json` functions hold the logic so they can be tested natively.

use eventf2s::evaluation::{denoise_metrics, roc_sweep, synth_mixture, MixtureSpec};
use eventf2s::network::neuron_first_spike;
use eventf2s::{encode_stream, EventStream, Label, SsteConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Trace samples drawn for the neuron plot.
const TRACE_POINTS: usize = 240;

fn sste(theta: f64, tau_us: f64, beta: u16) -> SsteConfig {
    SsteConfig { theta, tau_c: tau_us, beta, ..Default::default() }
}

fn points(s: &EventStream) -> Vec<[u32; 3]> {
    s.events()
        .iter()
        .map(|e| [e.x as u32, e.y as u32, (e.label == Some(Label::Signal)) as u32])
        .collect()
}

pub fn encode_json(snr: f64, theta: f64, tau_us: f64, beta: u16, seed: u64) -> Result<Value, String> {
    let spec = MixtureSpec::default();
    let (mixed, realized) = synth_mixture(&spec, snr, seed).map_err(|e| e.to_string())?;
    let kept = encode_stream(&sste(theta, tau_us, beta), &mixed).map_err(|e| e.to_string())?;
    let m = denoise_metrics(&mixed, &kept).map_err(|e| e.to_string())?;
    Ok(json!({
        "width": spec.width,
        "height": spec.height,
        "snr": realized,
        "tp_rate": m.tp_rate,
        "fp_rate": m.fp_rate,
        "input": points(&mixed),
        "kept": points(&kept),
    }))
}

pub fn roc_json(snr: f64, tau_us: f64, beta: u16, seed: u64, thetas: &[f64]) -> Result<Value, String> {
    let (mixed, realized) = synth_mixture(&MixtureSpec::default(), snr, seed).map_err(|e| e.to_string())?;
    let rows = roc_sweep(&sste(1.0, tau_us, beta), thetas, &mixed).map_err(|e| e.to_string())?;
    Ok(json!({ "snr": realized, "rows": rows }))
}

/// Membrane potential: each input adds `w (1 - exp(-(t - t_i)))` once it
/// has arrived. The threshold is 1.
fn potential(weights: &[f64], times: &[f64], t: f64) -> f64 {
    weights.iter().zip(times).filter(|(_, &ti)| ti <= t).map(|(&w, &ti)| w * (1.0 - (ti - t).exp())).sum()
}

pub fn neuron_json(weights: &[f64], times: &[f64]) -> Result<Value, String> {
    if weights.is_empty() {
        return Err("need at least one input".into());
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err("input times must be finite".into());
    }
    let z: Vec<f64> = times.iter().map(|t| t.exp()).collect();
    let (z_out, causal) = neuron_first_spike(weights, &z).map_err(|e| e.to_string())?;
    let t_out = z_out.is_finite().then(|| z_out.ln());
    let t0 = times.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let last = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t1 = t_out.unwrap_or(last).max(last) + 1.0;
    let trace: Vec<[f64; 2]> = (0..=TRACE_POINTS)
        .map(|k| {
            let t = t0 + (t1 - t0) * k as f64 / TRACE_POINTS as f64;
            [t, potential(weights, times, t)]
        })
        .collect();
    Ok(json!({ "t_out": t_out, "causal": causal, "trace": trace }))
}

fn to_js(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

/// Encodes a synthetic signal-plus-noise mixture and reports what was kept.
#[wasm_bindgen]
pub fn encode(snr: f64, theta: f64, tau_us: f64, beta: u16, seed: u32) -> Result<String, JsError> {
    to_js(encode_json(snr, theta, tau_us, beta, seed as u64))
}

/// TP/FP rate at each threshold (ascending) on one mixture.
#[wasm_bindgen]
pub fn roc(snr: f64, tau_us: f64, beta: u16, seed: u32, thetas: Vec<f64>) -> Result<String, JsError> {
    to_js(roc_json(snr, tau_us, beta, seed as u64, &thetas))
}

/// First spike time, causal inputs and membrane trace of one neuron.
#[wasm_bindgen]
pub fn neuron(weights: Vec<f64>, times: Vec<f64>) -> Result<String, JsError> {
    to_js(neuron_json(&weights, &times))
}
