//! First-to-spike layers of non-leaky integrate-and-fire neurons with
//! exponentially decaying synaptic currents.
//!
//! Spike times are handled in the `z = exp(t)` domain, where a neuron with
//! causal input set `C` fires at
//!
//! ```text
//! z_out = sum_C(w_i z_i) / (sum_C(w_i) - 1)
//! ```
//!
//! with threshold 1 and synaptic time constant 1 (normalised time). Silent
//! neurons carry `f64::INFINITY`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{Geometry, NormalizedEvent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("negative spike time {0}")]
    NegativeTime(f64),
    #[error("length mismatch: {0} weights vs {1} inputs")]
    LengthMismatch(usize, usize),
    #[error("non-finite weight at index {0}")]
    NonFiniteWeight(usize),
    #[error("input map {got:?} does not match layer input {expected:?}")]
    GeometryMismatch { expected: (usize, usize, usize), got: (usize, usize, usize) },
    #[error("cache does not match gradient: {0}")]
    StaleCache(String),
    #[error("invalid layer spec: {0}")]
    InvalidSpec(String),
}

pub fn to_z(t_norm: f64) -> Result<f64, NetError> {
    if t_norm < 0.0 || t_norm.is_nan() {
        return Err(NetError::NegativeTime(t_norm));
    }
    Ok(t_norm.exp())
}

pub fn from_z(z: f64) -> f64 {
    z.ln()
}

/// Channel-major map of transformed spike times.
#[derive(Debug, Clone, PartialEq)]
pub struct ZMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl ZMap {
    pub fn silent(channels: usize, height: usize, width: usize) -> Self {
        ZMap { channels, height, width, data: vec![f64::INFINITY; channels * height * width] }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), channels * height * width);
        ZMap { channels, height, width, data }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    /// Single-channel map holding the earliest spike of each pixel.
    pub fn from_events(events: &[NormalizedEvent], geometry: Geometry) -> Self {
        let mut map = ZMap::silent(1, geometry.height as usize, geometry.width as usize);
        for e in events {
            let i = geometry.index(e.x, e.y);
            let z = e.t.max(0.0).exp();
            if z < map.data[i] {
                map.data[i] = z;
            }
        }
        map
    }

    pub fn spiking(&self) -> usize {
        self.data.iter().filter(|z| z.is_finite()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerKind {
    Conv { kernel: usize, stride: usize },
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub in_height: usize,
    pub in_width: usize,
    pub out_channels: usize,
}

impl LayerSpec {
    pub fn conv(in_shape: (usize, usize, usize), out_channels: usize, kernel: usize, stride: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Conv { kernel, stride },
            in_channels: in_shape.0,
            in_height: in_shape.1,
            in_width: in_shape.2,
            out_channels,
        }
    }

    pub fn dense(in_shape: (usize, usize, usize), out_channels: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Dense,
            in_channels: in_shape.0,
            in_height: in_shape.1,
            in_width: in_shape.2,
            out_channels,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.in_channels == 0 || self.in_height == 0 || self.in_width == 0 || self.out_channels == 0 {
            return Err(NetError::InvalidSpec("zero-sized dimension".into()));
        }
        if let LayerKind::Conv { kernel, stride } = self.kind {
            if kernel == 0 || stride == 0 {
                return Err(NetError::InvalidSpec("kernel and stride must be positive".into()));
            }
            if kernel > self.in_height || kernel > self.in_width {
                return Err(NetError::InvalidSpec(format!(
                    "kernel {kernel} larger than input {}x{}",
                    self.in_height, self.in_width
                )));
            }
        }
        Ok(())
    }

    pub fn in_shape(&self) -> (usize, usize, usize) {
        (self.in_channels, self.in_height, self.in_width)
    }

    /// `(channels, height, width)` of the output map.
    pub fn out_shape(&self) -> (usize, usize, usize) {
        match self.kind {
            LayerKind::Conv { kernel, stride } => (
                self.out_channels,
                (self.in_height.saturating_sub(kernel)) / stride + 1,
                (self.in_width.saturating_sub(kernel)) / stride + 1,
            ),
            LayerKind::Dense => (self.out_channels, 1, 1),
        }
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.in_height * self.in_width
    }

    pub fn output_len(&self) -> usize {
        let (c, h, w) = self.out_shape();
        c * h * w
    }

    /// Incoming weights per output neuron (per filter for conv).
    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv { kernel, .. } => self.in_channels * kernel * kernel,
            LayerKind::Dense => self.input_len(),
        }
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.fan_in()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
}

/// One afferent of a spiking neuron's causal set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausalInput {
    pub input: u32,
    pub weight: u32,
    pub w: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronTrace {
    pub z_out: f64,
    pub weight_sum: f64,
    pub causal: Vec<CausalInput>,
    /// Distance to the nearest perturbation that would change the causal set.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCache {
    pub spec: LayerSpec,
    pub neurons: Vec<NeuronTrace>,
}

impl LayerCache {
    pub fn margin(&self) -> f64 {
        self.neurons.iter().map(|n| n.margin).fold(f64::INFINITY, f64::min)
    }
}

/// Sorted-prefix causal-set search over `(input, weight, w, z)` afferents
/// with finite `z`. Ties in `z` are broken by input index.
fn first_spike(mut afferents: Vec<CausalInput>) -> NeuronTrace {
    afferents.sort_by(|a, b| a.z.total_cmp(&b.z).then(a.input.cmp(&b.input)));
    let mut sum_w = 0.0;
    let mut sum_wz = 0.0;
    let mut margin = f64::INFINITY;
    for (k, a) in afferents.iter().enumerate() {
        sum_w += a.w;
        sum_wz += a.w * a.z;
        let z_next = afferents.get(k + 1).map_or(f64::INFINITY, |n| n.z);
        margin = margin.min((sum_w - 1.0).abs());
        if z_next.is_finite() {
            margin = margin.min(z_next - a.z);
        }
        if sum_w > 1.0 {
            let cand = sum_wz / (sum_w - 1.0);
            if cand >= a.z && cand <= z_next {
                margin = margin.min(cand - a.z).min(z_next - cand);
                afferents.truncate(k + 1);
                return NeuronTrace { z_out: cand, weight_sum: sum_w, causal: afferents, margin };
            }
            margin = margin.min((cand - z_next).abs()).min((cand - a.z).abs());
        }
    }
    NeuronTrace { z_out: f64::INFINITY, weight_sum: sum_w, causal: Vec::new(), margin }
}

/// First spike of a single neuron. Infinite inputs are silent afferents.
/// Returns `(z_out, causal indices in firing order)`; `(inf, [])` if the
/// neuron never crosses threshold.
pub fn neuron_first_spike(weights: &[f64], inputs: &[f64]) -> Result<(f64, Vec<usize>), NetError> {
    if weights.len() != inputs.len() {
        return Err(NetError::LengthMismatch(weights.len(), inputs.len()));
    }
    if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
        return Err(NetError::NonFiniteWeight(i));
    }
    let afferents = weights
        .iter()
        .zip(inputs)
        .enumerate()
        .filter(|(_, (_, z))| z.is_finite())
        .map(|(i, (&w, &z))| CausalInput { input: i as u32, weight: i as u32, w, z })
        .collect();
    let trace = first_spike(afferents);
    Ok((trace.z_out, trace.causal.iter().map(|c| c.input as usize).collect()))
}

impl Layer {
    pub fn new(spec: LayerSpec) -> Result<Self, NetError> {
        spec.validate()?;
        Ok(Layer { spec, weights: vec![0.0; spec.weight_len()] })
    }

    pub fn forward(&self, input: &ZMap) -> Result<(ZMap, LayerCache), NetError> {
        if input.shape() != self.spec.in_shape() {
            return Err(NetError::GeometryMismatch { expected: self.spec.in_shape(), got: input.shape() });
        }
        let (oc, oh, ow) = self.spec.out_shape();
        let fan_in = self.spec.fan_in();
        let mut neurons = Vec::with_capacity(oc * oh * ow);
        match self.spec.kind {
            LayerKind::Dense => {
                let live: Vec<(usize, f64)> =
                    input.data.iter().copied().enumerate().filter(|(_, z)| z.is_finite()).collect();
                for o in 0..oc {
                    let base = o * fan_in;
                    let aff = live
                        .iter()
                        .map(|&(i, z)| CausalInput {
                            input: i as u32,
                            weight: (base + i) as u32,
                            w: self.weights[base + i],
                            z,
                        })
                        .collect();
                    neurons.push(first_spike(aff));
                }
            }
            LayerKind::Conv { kernel, stride } => {
                let (ic, ih, iw) = self.spec.in_shape();
                for c in 0..oc {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut aff = Vec::new();
                            for ci in 0..ic {
                                for ky in 0..kernel {
                                    let row = (ci * ih + oy * stride + ky) * iw + ox * stride;
                                    let wrow = ((c * ic + ci) * kernel + ky) * kernel;
                                    for kx in 0..kernel {
                                        let z = input.data[row + kx];
                                        if z.is_finite() {
                                            aff.push(CausalInput {
                                                input: (row + kx) as u32,
                                                weight: (wrow + kx) as u32,
                                                w: self.weights[wrow + kx],
                                                z,
                                            });
                                        }
                                    }
                                }
                            }
                            neurons.push(first_spike(aff));
                        }
                    }
                }
            }
        }
        let out = ZMap::from_vec(oc, oh, ow, neurons.iter().map(|n| n.z_out).collect());
        Ok((out, LayerCache { spec: self.spec, neurons }))
    }
}

/// Gradients of one layer: `(dL/dW, dL/dz_in)`.
///
/// For a spiking neuron with causal set `C` and `S = sum_C w`:
/// `dz_out/dw_i = (z_i - z_out) / (S - 1)` and `dz_out/dz_i = w_i / (S - 1)`.
pub fn layer_backward(cache: &LayerCache, upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NetError> {
    if upstream.len() != cache.neurons.len() || cache.neurons.len() != cache.spec.output_len() {
        return Err(NetError::StaleCache(format!(
            "{} upstream gradients for {} cached neurons",
            upstream.len(),
            cache.neurons.len()
        )));
    }
    let mut dw = vec![0.0; cache.spec.weight_len()];
    let mut dz = vec![0.0; cache.spec.input_len()];
    for (n, &g) in cache.neurons.iter().zip(upstream) {
        if g == 0.0 || !n.z_out.is_finite() {
            continue;
        }
        let scale = g / (n.weight_sum - 1.0);
        for c in &n.causal {
            dw[c.weight as usize] += scale * (c.z - n.z_out);
            dz[c.input as usize] += scale * c.w;
        }
    }
    Ok((dw, dz))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F2sNetwork {
    pub layers: Vec<Layer>,
}

impl F2sNetwork {
    /// Builds zero-weight layers, checking that consecutive shapes chain.
    pub fn new(specs: &[LayerSpec]) -> Result<Self, NetError> {
        if specs.is_empty() {
            return Err(NetError::InvalidSpec("network has no layers".into()));
        }
        for pair in specs.windows(2) {
            if pair[0].out_shape() != pair[1].in_shape() {
                return Err(NetError::InvalidSpec(format!(
                    "layer output {:?} does not feed next input {:?}",
                    pair[0].out_shape(),
                    pair[1].in_shape()
                )));
            }
        }
        Ok(F2sNetwork { layers: specs.iter().map(|&s| Layer::new(s)).collect::<Result<_, _>>()? })
    }

    /// Conv stack followed by a dense classifier.
    pub fn conv_stack(
        input: (usize, usize, usize),
        convs: &[(usize, usize, usize)],
        classes: usize,
    ) -> Result<Self, NetError> {
        let mut specs = Vec::new();
        let mut shape = input;
        for &(channels, kernel, stride) in convs {
            let s = LayerSpec::conv(shape, channels, kernel, stride);
            s.validate()?;
            shape = s.out_shape();
            specs.push(s);
        }
        specs.push(LayerSpec::dense(shape, classes));
        Self::new(&specs)
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.layers[0].spec.in_shape()
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.spec.output_len())
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }

    pub fn check_weights(&self) -> Result<(), NetError> {
        let mut offset = 0;
        for l in &self.layers {
            if l.weights.len() != l.spec.weight_len() {
                return Err(NetError::InvalidSpec(format!(
                    "{} weights for a layer expecting {}",
                    l.weights.len(),
                    l.spec.weight_len()
                )));
            }
            if let Some(i) = l.weights.iter().position(|w| !w.is_finite()) {
                return Err(NetError::NonFiniteWeight(offset + i));
            }
            offset += l.weights.len();
        }
        Ok(())
    }

    /// Output z per class plus per-layer caches for the backward pass.
    pub fn forward(&self, input: &ZMap) -> Result<(Vec<f64>, Vec<LayerCache>), NetError> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut map = input.clone();
        for layer in &self.layers {
            let (next, cache) = layer.forward(&map)?;
            caches.push(cache);
            map = next;
        }
        Ok((map.data, caches))
    }

    /// Weight gradients for every layer given `dL/dz` at the output.
    pub fn backward(&self, caches: &[LayerCache], grad_out: &[f64]) -> Result<Vec<Vec<f64>>, NetError> {
        if caches.len() != self.layers.len() {
            return Err(NetError::StaleCache(format!(
                "{} caches for {} layers",
                caches.len(),
                self.layers.len()
            )));
        }
        let mut grads = vec![Vec::new(); self.layers.len()];
        let mut upstream = grad_out.to_vec();
        for (i, cache) in caches.iter().enumerate().rev() {
            if cache.spec != self.layers[i].spec {
                return Err(NetError::StaleCache(format!("layer {i} spec changed")));
            }
            let (dw, dz) = layer_backward(cache, &upstream)?;
            grads[i] = dw;
            upstream = dz;
        }
        Ok(grads)
    }
}

/// Hinge penalty `K * max(0, 1 - sum w)` per neuron (per filter for conv
/// layers), with subgradient `-K` on every incoming weight where active.
pub fn weight_sum_penalty(net: &F2sNetwork, k: f64) -> (f64, Vec<Vec<f64>>) {
    let mut total = 0.0;
    let grads = net
        .layers
        .iter()
        .map(|l| {
            let mut g = vec![0.0; l.weights.len()];
            if k == 0.0 {
                return g;
            }
            let fan_in = l.spec.fan_in();
            for (ws, gs) in l.weights.chunks(fan_in).zip(g.chunks_mut(fan_in)) {
                let deficit = 1.0 - ws.iter().sum::<f64>();
                if deficit > 0.0 {
                    total += k * deficit;
                    gs.fill(-k);
                }
            }
            g
        })
        .collect();
    (total, grads)
}
