//! Test-only oracles, independent of the closed-form forward/backward code.
#![allow(dead_code)]

use eventf2s::network::{F2sNetwork, LayerCache, LayerSpec, ZMap};
use eventf2s::training::{init_weights, loss};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// First threshold crossing of a non-leaky IF neuron driven by exponential
/// synaptic currents, found by stepping `V(t) = sum_{t_i <= t} w_i (1 - exp(-(t - t_i)))`
/// forward with a fixed step and refining the last step linearly.
pub fn simulate_first_crossing(weights: &[f64], times: &[f64], step: f64, t_end: f64) -> Option<f64> {
    let v = |t: f64| -> f64 {
        weights
            .iter()
            .zip(times)
            .filter(|(_, &ti)| ti <= t)
            .map(|(&w, &ti)| w * (1.0 - (-(t - ti)).exp()))
            .sum()
    };
    let t0 = times.iter().copied().fold(f64::INFINITY, f64::min);
    let mut t_prev = t0;
    let mut v_prev = v(t0);
    let mut k = 1u64;
    loop {
        let t = t0 + k as f64 * step;
        if t > t_end {
            return None;
        }
        let vt = v(t);
        if vt >= 1.0 {
            let frac = (1.0 - v_prev) / (vt - v_prev);
            return Some(t_prev + frac * step);
        }
        t_prev = t;
        v_prev = vt;
        k += 1;
    }
}

/// Loss used by the gradient checks: cross-entropy on the output z plus the
/// weight-sum penalty, both written out directly.
pub fn objective(net: &F2sNetwork, input: &ZMap, label: usize, k: f64) -> Option<f64> {
    let (z, _) = net.forward(input).ok()?;
    if z.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut penalty = 0.0;
    for l in &net.layers {
        for ws in l.weights.chunks(l.spec.fan_in()) {
            penalty += k * (1.0 - ws.iter().sum::<f64>()).max(0.0);
        }
    }
    Some(loss(&z, label).ok()? + penalty)
}

pub fn causal_signature(caches: &[LayerCache]) -> Vec<Vec<Vec<u32>>> {
    caches
        .iter()
        .map(|c| c.neurons.iter().map(|n| n.causal.iter().map(|a| a.input).collect()).collect())
        .collect()
}

pub fn hinge_margin(net: &F2sNetwork) -> f64 {
    net.layers
        .iter()
        .flat_map(|l| l.weights.chunks(l.spec.fan_in()).map(|ws| (1.0 - ws.iter().sum::<f64>()).abs()))
        .fold(f64::INFINITY, f64::min)
}

pub struct RandomCase {
    pub net: F2sNetwork,
    pub input: ZMap,
    pub label: usize,
}

/// Small random network (<= 3 layers, <= 50 neurons per layer) with a random
/// input map. Roughly a quarter of the inputs are silent.
pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = rng.random_range(2..=4);
    let net = match rng.random_range(0..3) {
        0 => {
            let n_in = rng.random_range(4..=12);
            let hidden = rng.random_range(3..=10);
            F2sNetwork::new(&[
                LayerSpec::dense((1, 1, n_in), hidden),
                LayerSpec::dense((hidden, 1, 1), classes),
            ])
            .unwrap()
        }
        1 => {
            let side = rng.random_range(5..=7);
            F2sNetwork::conv_stack((1, side, side), &[(rng.random_range(1..=3), 3, rng.random_range(1..=2))], classes)
                .unwrap()
        }
        _ => {
            let side = rng.random_range(6..=8);
            F2sNetwork::conv_stack((1, side, side), &[(2, 3, 1), (2, 2, 1)], classes).unwrap()
        }
    };
    let mut net = net;
    init_weights(&mut net, rng.random(), rng.random_range(2.0..4.0), 0.5);
    let (c, h, w) = net.input_shape();
    let data = (0..c * h * w)
        .map(|_| if rng.random::<f64>() < 0.25 { f64::INFINITY } else { rng.random_range(0.0f64..1.0).exp() })
        .collect();
    RandomCase { input: ZMap::from_vec(c, h, w, data), label: rng.random_range(0..classes), net }
}

pub enum GradCheck {
    /// Worst relative error over all weights.
    Checked(f64),
    Skipped(&'static str),
}

pub const FD_STEP: f64 = 1e-6;
pub const BOUNDARY: f64 = 1e-5;

/// Central-difference check of `analytic` against the objective. Points
/// whose perturbation changes any causal set, or that sit within
/// `BOUNDARY` of one, are skipped.
pub fn check_gradients(case: &RandomCase, k: f64, analytic: &[Vec<f64>]) -> GradCheck {
    let Ok((z, caches)) = case.net.forward(&case.input) else {
        return GradCheck::Skipped("forward failed");
    };
    if z.iter().any(|v| !v.is_finite()) {
        return GradCheck::Skipped("silent output");
    }
    if caches.iter().map(|c| c.margin()).fold(f64::INFINITY, f64::min) < BOUNDARY
        || (k > 0.0 && hinge_margin(&case.net) < BOUNDARY)
    {
        return GradCheck::Skipped("near boundary");
    }
    let sig = causal_signature(&caches);
    let mut worst: f64 = 0.0;
    let mut net = case.net.clone();
    for li in 0..net.layers.len() {
        for wi in 0..net.layers[li].weights.len() {
            let w0 = net.layers[li].weights[wi];
            let mut eval = |w: f64| {
                net.layers[li].weights[wi] = w;
                let f = objective(&net, &case.input, case.label, k);
                let s = net.forward(&case.input).ok().map(|(_, c)| causal_signature(&c));
                (f, s)
            };
            let (fp, sp) = eval(w0 + FD_STEP);
            let (fm, sm) = eval(w0 - FD_STEP);
            net.layers[li].weights[wi] = w0;
            let (Some(fp), Some(fm)) = (fp, fm) else {
                return GradCheck::Skipped("perturbation silenced an output");
            };
            if sp.as_ref() != Some(&sig) || sm.as_ref() != Some(&sig) {
                return GradCheck::Skipped("perturbation crosses a causal boundary");
            }
            let fd = (fp - fm) / (2.0 * FD_STEP);
            let a = analytic[li][wi];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-5);
            worst = worst.max(rel);
        }
    }
    GradCheck::Checked(worst)
}
