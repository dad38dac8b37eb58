//! Address-event types shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error("byte length {0} is not a multiple of the 5-byte record size")]
    TruncatedRecord(usize),
    #[error("event at ({x}, {y}) lies outside the {width}x{height} sensor")]
    OutOfBounds { x: u32, y: u32, width: u16, height: u16 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("stream geometries differ: {0:?} vs {1:?}")]
    GeometryMismatch(Geometry, Geometry),
    #[error("stream is empty")]
    EmptyStream,
    #[error("timestamp {0} does not fit in 23 bits")]
    TimestampOverflow(u64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Sensor size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geometry {
    pub width: u16,
    pub height: u16,
}

impl Geometry {
    pub const NMNIST: Geometry = Geometry { width: 34, height: 34 };

    pub fn new(width: u16, height: u16) -> Self {
        Geometry { width, height }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.width as u32 && y < self.height as u32
    }

    /// Row-major pixel index.
    #[inline]
    pub fn index(&self, x: u16, y: u16) -> usize {
        y as usize * self.width as usize + x as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    On,
    Off,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::On => 1,
            Polarity::Off => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Polarity::On),
            -1 => Some(Polarity::Off),
            _ => None,
        }
    }
}

/// Ground-truth tag used by the denoising benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Signal,
    Noise,
}

/// One AER spike. `t` is in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
    pub label: Option<Label>,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, p: Polarity) -> Self {
        Event { t, x, y, p, label: None }
    }

    pub fn labeled(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    /// Identity of an event for subset checks; labels are not part of it.
    pub fn key(&self) -> (u64, u16, u16, Polarity) {
        (self.t, self.x, self.y, self.p)
    }
}

/// A time-ordered event sequence bound to a sensor geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    events: Vec<Event>,
    geometry: Geometry,
    duration_us: u64,
}

impl EventStream {
    /// Validates bounds and stable-sorts by timestamp. The duration is the
    /// last timestamp (recordings start at t = 0).
    pub fn new(geometry: Geometry, mut events: Vec<Event>) -> Result<Self, EventError> {
        for e in &events {
            if !geometry.contains(e.x as u32, e.y as u32) {
                return Err(EventError::OutOfBounds {
                    x: e.x as u32,
                    y: e.y as u32,
                    width: geometry.width,
                    height: geometry.height,
                });
            }
        }
        if !events.windows(2).all(|w| w[0].t <= w[1].t) {
            events.sort_by_key(|e| e.t);
        }
        let duration_us = events.last().map_or(0, |e| e.t);
        Ok(EventStream { events, geometry, duration_us })
    }

    pub fn empty(geometry: Geometry) -> Self {
        EventStream { events: Vec::new(), geometry, duration_us: 0 }
    }

    /// Extends the nominal recording span; never shrinks below the last timestamp.
    pub fn with_duration(mut self, duration_us: u64) -> Self {
        self.duration_us = self.duration_us.max(duration_us);
        self
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn duration_us(&self) -> u64 {
        self.duration_us
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.events.iter().filter(|e| e.label == Some(label)).count()
    }

    /// Per-pixel event counts, row-major.
    pub fn pixel_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.geometry.pixel_count()];
        for e in &self.events {
            counts[self.geometry.index(e.x, e.y)] += 1;
        }
        counts
    }
}

/// A labeled recording for classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub stream: EventStream,
    pub class_label: usize,
}

/// Event with its timestamp mapped to the network's dimensionless time axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedEvent {
    pub t: f64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

/// Affine map of `[t_first, t_last]` onto `[0, t_max_norm]`. A zero span maps
/// every event to 0.
pub fn normalize_timestamps(
    stream: &EventStream,
    t_max_norm: f64,
) -> Result<Vec<NormalizedEvent>, EventError> {
    let events = stream.events();
    let (first, last) = match (events.first(), events.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => return Err(EventError::EmptyStream),
    };
    let span = (last - first) as f64;
    Ok(events
        .iter()
        .map(|e| {
            let t = if span > 0.0 {
                (e.t - first) as f64 / span * t_max_norm
            } else {
                0.0
            };
            NormalizedEvent { t, x: e.x, y: e.y, p: e.p }
        })
        .collect())
}

/// Merges a signal stream and a noise stream. Returns the merged stream and
/// `snr = |signal| / (|signal| + |noise|)`; an empty merge reports 1.0.
pub fn mix_streams(
    signal: &EventStream,
    noise: &EventStream,
) -> Result<(EventStream, f64), EventError> {
    if signal.geometry() != noise.geometry() {
        return Err(EventError::GeometryMismatch(signal.geometry(), noise.geometry()));
    }
    let mut events = Vec::with_capacity(signal.len() + noise.len());
    events.extend_from_slice(signal.events());
    events.extend_from_slice(noise.events());
    let total = events.len();
    let snr = if total == 0 { 1.0 } else { signal.len() as f64 / total as f64 };
    let duration = signal.duration_us().max(noise.duration_us());
    let merged = EventStream::new(signal.geometry(), events)?.with_duration(duration);
    Ok((merged, snr))
}
