//! Turning labeled recordings into network inputs, and the bundled
//! synthetic moving-edge classification set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::event::{normalize_timestamps, EventStream, Geometry, Polarity, Sample};
use crate::network::ZMap;
use crate::sste::{encode_stream, SsteConfig, SsteError};
use crate::synth::{edge_sweep, rng_from_seed, synth_noise, Direction, NoiseKind};

/// Encodes a raw stream and maps each pixel's first passed spike to `z`.
/// A stream with nothing passed yields an all-silent map.
pub fn encode_to_zmap(config: &SsteConfig, stream: &EventStream, t_max_norm: f64) -> Result<ZMap, SsteError> {
    let encoded = encode_stream(config, stream)?;
    let g = stream.geometry();
    if encoded.is_empty() {
        return Ok(ZMap::silent(1, g.height as usize, g.width as usize));
    }
    let events = normalize_timestamps(&encoded, t_max_norm)?;
    Ok(ZMap::from_events(&events, g))
}

pub fn encode_samples(
    config: &SsteConfig,
    samples: &[Sample],
    t_max_norm: f64,
) -> Result<Vec<(ZMap, usize)>, SsteError> {
    let one = |s: &Sample| Ok((encode_to_zmap(config, &s.stream, t_max_norm)?, s.class_label));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        samples.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        samples.iter().map(one).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySpec {
    pub width: u16,
    pub height: u16,
    pub per_class: usize,
    /// Mean time the edge spends on one row/column, in microseconds.
    pub line_us: f64,
    /// Type I noise rate in events per second.
    pub noise_rate: f64,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec { width: 16, height: 16, per_class: 60, line_us: 2_000.0, noise_rate: 400.0 }
    }
}

pub const TOY_CLASSES: [Direction; 3] = [Direction::Right, Direction::Left, Direction::Down];

/// Three classes of single edge sweeps (rightward, leftward, downward) with
/// jittered speed and onset plus uniform background noise. Samples are
/// interleaved by class.
pub fn toy_edges(spec: &ToySpec, seed: u64) -> Vec<Sample> {
    let g = Geometry::new(spec.width, spec.height);
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(spec.per_class * TOY_CLASSES.len());
    for _ in 0..spec.per_class {
        for (label, &dir) in TOY_CLASSES.iter().enumerate() {
            let line_us = spec.line_us * rng.random_range(0.7..1.3);
            let start = rng.random_range(0.0..5.0 * spec.line_us);
            let lines = match dir {
                Direction::Right | Direction::Left => g.width,
                Direction::Down | Direction::Up => g.height,
            };
            let duration = (start + line_us * lines as f64).ceil() as u64 + 1;
            let pol = if rng.random::<bool>() { Polarity::On } else { Polarity::Off };
            let mut events = Vec::new();
            edge_sweep(g, dir, start, line_us, pol, &mut rng, &mut events);
            if spec.noise_rate > 0.0 {
                let noise = synth_noise(NoiseKind::TypeI, g, duration, spec.noise_rate, 10_000, rng.random())
                    .expect("positive rate and window");
                events.extend(noise.into_events().into_iter().map(|mut e| {
                    e.label = None;
                    e
                }));
            }
            let stream = EventStream::new(g, events).expect("generated in bounds");
            out.push(Sample { stream, class_label: label });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_set_is_seeded_and_balanced() {
        let spec = ToySpec { per_class: 4, ..Default::default() };
        let a = toy_edges(&spec, 9);
        assert_eq!(a, toy_edges(&spec, 9));
        assert_ne!(a, toy_edges(&spec, 10));
        assert_eq!(a.len(), 12);
        for c in 0..3 {
            assert_eq!(a.iter().filter(|s| s.class_label == c).count(), 4);
        }
    }

    #[test]
    fn encoded_maps_are_single_channel() {
        let spec = ToySpec { per_class: 1, ..Default::default() };
        let data = encode_samples(&SsteConfig::default(), &toy_edges(&spec, 1), 1.0).unwrap();
        for (m, _) in &data {
            assert_eq!(m.shape(), (1, 16, 16));
            assert!(m.spiking() > 100, "edge sweep should light most pixels");
            assert!(m.data.iter().filter(|z| z.is_finite()).all(|&z| (1.0..=1.0f64.exp() + 1e-12).contains(&z)));
        }
    }
}
