//! Single-spike temporal encoder: a bank of asynchronous per-pixel LIF
//! filters that pass at most `max_spikes_per_pixel` spatiotemporally
//! supported events per pixel.
//!
//! Each incoming event at pixel `i` and time `t`:
//!
//! 1. decays `V_i` to `t` with `exp(-(t - last_update) / tau_c)`;
//! 2. is emitted if `V_i >= theta` and pixel `i` still has spikes left;
//! 3. adds `w_self` to `V_i`;
//! 4. adds `w_neigh` to every other pixel in the `(2 beta - 1)^2` square
//!    around `i`, decaying each to `t` first.
//!
//! Membranes decay lazily, so work per event is `O(beta^2)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{Event, EventError, EventStream, Geometry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SsteError {
    #[error("invalid encoder config: {0}")]
    InvalidConfig(&'static str),
    #[error("event at t={t} arrived after t={last}")]
    OutOfOrderEvent { t: u64, last: u64 },
    #[error("event at ({x}, {y}) outside the encoder grid")]
    OutOfBounds { x: u16, y: u16 },
    #[error(transparent)]
    Stream(#[from] EventError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsteConfig {
    /// Leak time constant in microseconds.
    pub tau_c: f64,
    /// Half-width of the square neighbourhood: neighbours satisfy `|du| < beta, |dv| < beta`.
    pub beta: u16,
    pub theta: f64,
    pub w_neigh: f64,
    pub w_self: f64,
    pub max_spikes_per_pixel: u32,
}

impl Default for SsteConfig {
    fn default() -> Self {
        SsteConfig {
            tau_c: 10_000.0,
            beta: 2,
            theta: 2.0,
            w_neigh: 1.0,
            w_self: -1.0,
            max_spikes_per_pixel: 1,
        }
    }
}

impl SsteConfig {
    pub fn validate(&self) -> Result<(), SsteError> {
        if !(self.tau_c > 0.0 && self.tau_c.is_finite()) {
            return Err(SsteError::InvalidConfig("tau_c must be > 0"));
        }
        if self.beta < 1 {
            return Err(SsteError::InvalidConfig("beta must be >= 1"));
        }
        if !(self.theta > 0.0) {
            return Err(SsteError::InvalidConfig("theta must be > 0"));
        }
        if !(self.w_neigh > 0.0 && self.w_neigh.is_finite()) {
            return Err(SsteError::InvalidConfig("w_neigh must be > 0"));
        }
        if !(self.w_self <= 0.0 && self.w_self.is_finite()) {
            return Err(SsteError::InvalidConfig("w_self must be <= 0"));
        }
        if self.max_spikes_per_pixel < 1 {
            return Err(SsteError::InvalidConfig("max_spikes_per_pixel must be >= 1"));
        }
        Ok(())
    }
}

/// Result of feeding one event: the membrane value seen by the threshold
/// test and the passed event, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub potential: f64,
    pub emitted: Option<Event>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsteState {
    config: SsteConfig,
    geometry: Geometry,
    membrane: Vec<f64>,
    last_update: Vec<u64>,
    fired_count: Vec<u32>,
    last_t: u64,
}

impl SsteState {
    pub fn new(config: SsteConfig, geometry: Geometry) -> Result<Self, SsteError> {
        config.validate()?;
        let n = geometry.pixel_count();
        Ok(SsteState {
            config,
            geometry,
            membrane: vec![0.0; n],
            last_update: vec![0; n],
            fired_count: vec![0; n],
            last_t: 0,
        })
    }

    pub fn config(&self) -> &SsteConfig {
        &self.config
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    /// Re-arms every pixel; equivalent to a fresh state.
    pub fn reset(&mut self) {
        self.membrane.fill(0.0);
        self.last_update.fill(0);
        self.fired_count.fill(0);
        self.last_t = 0;
    }

    /// Membrane at its last update time (not decayed to "now").
    pub fn membrane(&self, x: u16, y: u16) -> f64 {
        self.membrane[self.geometry.index(x, y)]
    }

    pub fn membrane_at(&self, x: u16, y: u16, t: u64) -> f64 {
        let i = self.geometry.index(x, y);
        let dt = t.saturating_sub(self.last_update[i]) as f64;
        self.membrane[i] * (-dt / self.config.tau_c).exp()
    }

    pub fn fired_count(&self, x: u16, y: u16) -> u32 {
        self.fired_count[self.geometry.index(x, y)]
    }

    #[inline]
    fn decay_to(&mut self, i: usize, t: u64) {
        let dt = t - self.last_update[i];
        if dt > 0 {
            self.membrane[i] *= (-(dt as f64) / self.config.tau_c).exp();
            self.last_update[i] = t;
        }
    }

    pub fn process_event(&mut self, event: &Event) -> Result<Option<Event>, SsteError> {
        self.process_event_traced(event).map(|o| o.emitted)
    }

    pub fn process_event_traced(&mut self, event: &Event) -> Result<Outcome, SsteError> {
        if event.t < self.last_t {
            return Err(SsteError::OutOfOrderEvent { t: event.t, last: self.last_t });
        }
        if !self.geometry.contains(event.x as u32, event.y as u32) {
            return Err(SsteError::OutOfBounds { x: event.x, y: event.y });
        }
        self.last_t = event.t;
        let t = event.t;
        let i = self.geometry.index(event.x, event.y);

        self.decay_to(i, t);
        let potential = self.membrane[i];
        let emitted = if self.fired_count[i] < self.config.max_spikes_per_pixel
            && potential >= self.config.theta
        {
            self.fired_count[i] += 1;
            Some(*event)
        } else {
            None
        };
        self.membrane[i] += self.config.w_self;

        let reach = self.config.beta as i32 - 1;
        let (w, h) = (self.geometry.width as i32, self.geometry.height as i32);
        let (cx, cy) = (event.x as i32, event.y as i32);
        for y in (cy - reach).max(0)..=(cy + reach).min(h - 1) {
            for x in (cx - reach).max(0)..=(cx + reach).min(w - 1) {
                if x == cx && y == cy {
                    continue;
                }
                let j = y as usize * w as usize + x as usize;
                self.decay_to(j, t);
                self.membrane[j] += self.config.w_neigh;
            }
        }
        Ok(Outcome { potential, emitted })
    }

    /// Feeds a whole stream through this state without resetting it first.
    pub fn encode(&mut self, stream: &EventStream) -> Result<EventStream, SsteError> {
        if stream.geometry() != self.geometry {
            return Err(SsteError::Stream(EventError::GeometryMismatch(
                stream.geometry(),
                self.geometry,
            )));
        }
        let mut out = Vec::new();
        for e in stream.events() {
            if let Some(kept) = self.process_event(e)? {
                out.push(kept);
            }
        }
        Ok(EventStream::new(self.geometry, out)?.with_duration(stream.duration_us()))
    }
}

/// Encodes a stream on a fresh state.
pub fn encode_stream(config: &SsteConfig, stream: &EventStream) -> Result<EventStream, SsteError> {
    SsteState::new(*config, stream.geometry())?.encode(stream)
}
