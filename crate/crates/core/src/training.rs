//! Temporal cross-entropy loss, plain gradient descent with a two-phase
//! learning-rate schedule, and the training loop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{weight_sum_penalty, F2sNetwork, NetError, ZMap};
use crate::synth::rng_from_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("non-finite network output")]
    NonFiniteInput,
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    /// Raised by the per-epoch callback, e.g. when a checkpoint cannot be written.
    #[error("epoch callback failed: {0}")]
    Callback(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// `L = -ln(exp(-z_label) / sum_i exp(-z_i))`, shifted by `min z`.
pub fn loss(z: &[f64], label: usize) -> Result<f64, TrainError> {
    check_outputs(z, label)?;
    let m = z.iter().copied().fold(f64::INFINITY, f64::min);
    let log_sum = z.iter().map(|&zi| (-(zi - m)).exp()).sum::<f64>().ln();
    Ok(((z[label] - m) + log_sum).max(0.0))
}

/// `dL/dz_k = 1[k = label] - p_k` with `p = softmax(-z)`.
pub fn loss_grad(z: &[f64], label: usize) -> Result<Vec<f64>, TrainError> {
    check_outputs(z, label)?;
    let p = softmax_neg(z);
    Ok(p.iter()
        .enumerate()
        .map(|(k, &pk)| if k == label { 1.0 - pk } else { -pk })
        .collect())
}

fn check_outputs(z: &[f64], label: usize) -> Result<(), TrainError> {
    if label >= z.len() {
        return Err(TrainError::BadLabel { label, classes: z.len() });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(TrainError::NonFiniteInput);
    }
    Ok(())
}

fn softmax_neg(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = z.iter().map(|&zi| (-(zi - m)).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Earliest-spiking class; `None` when every output is silent.
pub fn predict(z: &[f64]) -> Option<usize> {
    z.iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
}

/// Silent outputs are replaced by a constant later than every finite output
/// (`max finite + 1`). The substitute carries no gradient.
pub fn decision_vector(z: &[f64]) -> Option<(Vec<f64>, Vec<bool>)> {
    let latest = z.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if latest == f64::NEG_INFINITY {
        return None;
    }
    let live = z.iter().map(|v| v.is_finite()).collect();
    Some((z.iter().map(|&v| if v.is_finite() { v } else { latest + 1.0 }).collect(), live))
}

pub fn sgd_step(weights: &mut [f64], grads: &[f64], lr: f64) -> Result<(), TrainError> {
    if weights.len() != grads.len() {
        return Err(TrainError::ShapeMismatch(format!(
            "{} weights vs {} gradients",
            weights.len(),
            grads.len()
        )));
    }
    for (w, g) in weights.iter_mut().zip(grads) {
        *w -= lr * g;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs_total: usize,
    /// Epochs trained at `lr_phase1` before switching to `lr_phase2`.
    pub phase1_epochs: usize,
    pub lr_phase1: f64,
    pub lr_phase2: f64,
    pub batch_size: usize,
    pub penalty_k: f64,
    pub rng_seed: u64,
    /// Expected sum of a neuron's incoming weights after initialisation.
    pub init_weight_sum: f64,
    /// Standard deviation of the zero-mean init jitter, in units of
    /// `init_weight_sum / sqrt(fan_in)`.
    pub init_spread: f64,
    /// Each batch update is rescaled so its global L2 norm is at most this.
    /// `inf` disables clipping.
    pub max_grad_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs_total: 100,
            phase1_epochs: 50,
            lr_phase1: 1e-2,
            lr_phase2: 1e-3,
            batch_size: 32,
            penalty_k: 100.0,
            rng_seed: 0,
            init_weight_sum: 1.5,
            init_spread: 0.5,
            max_grad_norm: 100.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs_total < 1 {
            return Err(TrainError::InvalidConfig("epochs_total must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1"));
        }
        if !(self.lr_phase1 >= 0.0 && self.lr_phase2 >= 0.0) {
            return Err(TrainError::InvalidConfig("learning rates must be >= 0"));
        }
        if !(self.penalty_k >= 0.0) {
            return Err(TrainError::InvalidConfig("penalty_k must be >= 0"));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(TrainError::InvalidConfig("max_grad_norm must be > 0"));
        }
        Ok(())
    }

    /// Learning rate for a zero-based epoch index.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch < self.phase1_epochs {
            self.lr_phase1
        } else {
            self.lr_phase2
        }
    }
}

/// Per-neuron weights: mean `target / fan_in` plus zero-mean gaussian jitter.
pub fn init_weights(net: &mut F2sNetwork, seed: u64, target_sum: f64, spread: f64) {
    let mut rng = rng_from_seed(seed);
    for layer in &mut net.layers {
        let fan_in = layer.spec.fan_in() as f64;
        let mean = target_sum / fan_in;
        let std = spread * target_sum / fan_in.sqrt();
        for w in &mut layer.weights {
            let n: f64 = StandardNormal.sample(&mut rng);
            *w = mean + std * n;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// One-based epoch number.
    pub epoch: usize,
    pub lr: f64,
    /// Mean cross-entropy over samples that produced a decision.
    pub train_loss: f64,
    /// Weight-sum penalty at the end of the epoch.
    pub penalty: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub no_decision: usize,
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    /// CSV without wall-clock time so reruns compare byte-for-byte.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,train_loss,penalty,train_accuracy,test_accuracy,no_decision\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{:.9},{:.9},{:.6},{},{}\n",
                e.epoch,
                e.lr,
                e.train_loss,
                e.penalty,
                e.train_accuracy,
                e.test_accuracy.map_or(String::new(), |a| format!("{a:.6}")),
                e.no_decision
            ));
        }
        out
    }
}

fn clip_global_norm(grads: &mut [Vec<f64>], max: f64) {
    let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max {
        let scale = max / norm;
        grads.iter_mut().flatten().for_each(|g| *g *= scale);
    }
}

pub type Dataset = [(ZMap, usize)];

struct SampleResult {
    loss: f64,
    correct: bool,
    grads: Vec<Vec<f64>>,
}

fn sample_step(net: &F2sNetwork, input: &ZMap, label: usize) -> Result<Option<SampleResult>, TrainError> {
    let (z, caches) = net.forward(input)?;
    let Some((z_eff, live)) = decision_vector(&z) else {
        return Ok(None);
    };
    let l = loss(&z_eff, label)?;
    let mut g = loss_grad(&z_eff, label)?;
    for (gk, &alive) in g.iter_mut().zip(&live) {
        if !alive {
            *gk = 0.0;
        }
    }
    let grads = net.backward(&caches, &g)?;
    Ok(Some(SampleResult { loss: l, correct: predict(&z) == Some(label), grads }))
}

#[cfg(feature = "parallel")]
fn run_batch(net: &F2sNetwork, batch: &[&(ZMap, usize)]) -> Result<Vec<Option<SampleResult>>, TrainError> {
    use rayon::prelude::*;
    batch.par_iter().map(|(x, y)| sample_step(net, x, *y)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_batch(net: &F2sNetwork, batch: &[&(ZMap, usize)]) -> Result<Vec<Option<SampleResult>>, TrainError> {
    batch.iter().map(|(x, y)| sample_step(net, x, *y)).collect()
}

/// Fraction of samples whose earliest output matches the label; abstentions
/// count as wrong.
pub fn accuracy(net: &F2sNetwork, data: &Dataset) -> Result<f64, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    #[cfg(feature = "parallel")]
    let hits: Result<Vec<bool>, NetError> = {
        use rayon::prelude::*;
        data.par_iter().map(|(x, y)| Ok(predict(&net.forward(x)?.0) == Some(*y))).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let hits: Result<Vec<bool>, NetError> =
        data.iter().map(|(x, y)| Ok(predict(&net.forward(x)?.0) == Some(*y))).collect();
    Ok(hits?.into_iter().filter(|&h| h).count() as f64 / data.len() as f64)
}

/// Trains `net` in place from epoch `start_epoch` (zero-based) up to
/// `config.epochs_total`. `on_epoch` runs after every completed epoch, e.g.
/// to write a checkpoint.
pub fn train<F>(
    net: &mut F2sNetwork,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
    config: &TrainConfig,
    start_epoch: usize,
    mut on_epoch: F,
) -> Result<TrainReport, TrainError>
where
    F: FnMut(&EpochStats, &F2sNetwork) -> Result<(), TrainError>,
{
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let classes = net.classes();
    if let Some((_, bad)) = train_set.iter().find(|(_, y)| *y >= classes) {
        return Err(TrainError::BadLabel { label: *bad, classes });
    }
    net.check_weights()?;
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in start_epoch..config.epochs_total {
        let started = Instant::now();
        let lr = config.lr_at(epoch);
        let mut rng = rng_from_seed(config.rng_seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        order.sort_unstable();
        order.shuffle(&mut rng);

        let (mut loss_sum, mut decided, mut correct, mut no_decision) = (0.0, 0usize, 0usize, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&(ZMap, usize)> = chunk.iter().map(|&i| &train_set[i]).collect();
            let results = run_batch(net, &batch)?;
            let mut acc: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
            let mut n = 0usize;
            for r in results {
                let Some(r) = r else {
                    no_decision += 1;
                    continue;
                };
                n += 1;
                loss_sum += r.loss;
                correct += r.correct as usize;
                for (a, g) in acc.iter_mut().zip(&r.grads) {
                    for (ai, gi) in a.iter_mut().zip(g) {
                        *ai += gi;
                    }
                }
            }
            decided += n;
            let (_, pgrads) = weight_sum_penalty(net, config.penalty_k);
            let inv = if n > 0 { 1.0 / n as f64 } else { 0.0 };
            let mut grads: Vec<Vec<f64>> = acc
                .iter()
                .zip(&pgrads)
                .map(|(a, p)| a.iter().zip(p).map(|(ai, pi)| ai * inv + pi).collect())
                .collect();
            clip_global_norm(&mut grads, config.max_grad_norm);
            for (layer, g) in net.layers.iter_mut().zip(&grads) {
                sgd_step(&mut layer.weights, g, lr)?;
            }
        }

        let (penalty, _) = weight_sum_penalty(net, config.penalty_k);
        let test_accuracy = match test_set {
            Some(t) if !t.is_empty() => Some(accuracy(net, t)?),
            _ => None,
        };
        let stats = EpochStats {
            epoch: epoch + 1,
            lr,
            train_loss: if decided > 0 { loss_sum / decided as f64 } else { f64::NAN },
            penalty,
            train_accuracy: correct as f64 / train_set.len() as f64,
            test_accuracy,
            no_decision,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        on_epoch(&stats, net)?;
        report.epochs.push(stats);
    }
    Ok(report)
}
