//! Synthetic signal and noise generators.
//!
//! Signal events come from ideal moving edges: every pixel the edge crosses
//! emits exactly one event, jittered inside the interval the edge spends on
//! that pixel row/column. Noise events come in two flavours: isolated
//! uniform events (type I) and short self-bursts at one pixel (type II).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::event::{Event, EventError, EventStream, Geometry, Label, Polarity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// Vertical edge bouncing left-right across the sensor.
    MovingBar,
    /// Disk drifting along a Lissajous path; events at its leading rim.
    MovingBlob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseKind {
    TypeI,
    TypeII,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Right,
    Left,
    Down,
    Up,
}

/// Minimum number of events in a type II burst.
pub const MIN_BURST: usize = 3;
const MAX_BURST: usize = 5;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Column of the bouncing bar at time `t_us` for a given event rate. One
/// column is crossed every `height / rate` seconds.
pub fn bar_column(geometry: Geometry, event_rate: f64, t_us: f64) -> u16 {
    let cols_per_us = event_rate / geometry.height as f64 / 1e6;
    let pos = cols_per_us * t_us;
    let w = geometry.width as f64;
    let sweep = (pos / w).floor();
    let within = (pos - sweep * w).floor().min(w - 1.0) as u16;
    if sweep as u64 % 2 == 0 {
        within
    } else {
        geometry.width - 1 - within
    }
}

/// One pass of a straight edge across the sensor. Every pixel emits one
/// event while the edge is on its line.
pub fn edge_sweep<R: Rng>(
    geometry: Geometry,
    direction: Direction,
    start_us: f64,
    line_us: f64,
    polarity: Polarity,
    rng: &mut R,
    out: &mut Vec<Event>,
) {
    let (lines, span) = match direction {
        Direction::Right | Direction::Left => (geometry.width, geometry.height),
        Direction::Down | Direction::Up => (geometry.height, geometry.width),
    };
    for step in 0..lines {
        let line = match direction {
            Direction::Right | Direction::Down => step,
            Direction::Left | Direction::Up => lines - 1 - step,
        };
        let t0 = start_us + step as f64 * line_us;
        for k in 0..span {
            let t = (t0 + rng.random::<f64>() * line_us).floor() as u64;
            let (x, y) = match direction {
                Direction::Right | Direction::Left => (line, k),
                Direction::Down | Direction::Up => (k, line),
            };
            out.push(Event::new(t, x, y, polarity));
        }
    }
}

pub fn synth_signal(
    pattern: Pattern,
    geometry: Geometry,
    duration_us: u64,
    event_rate: f64,
    seed: u64,
) -> Result<EventStream, EventError> {
    if !(event_rate > 0.0) {
        return Err(EventError::InvalidParameter("event_rate must be > 0"));
    }
    let mut rng = rng_from_seed(seed);
    let mut events = Vec::new();
    match pattern {
        Pattern::MovingBar => {
            let line_us = geometry.height as f64 / event_rate * 1e6;
            let sweep_us = line_us * geometry.width as f64;
            let mut start = 0.0;
            let mut rightward = true;
            while start < duration_us as f64 {
                let dir = if rightward { Direction::Right } else { Direction::Left };
                edge_sweep(geometry, dir, start, line_us, Polarity::On, &mut rng, &mut events);
                start += sweep_us;
                rightward = !rightward;
            }
        }
        Pattern::MovingBlob => blob_events(geometry, duration_us, event_rate, &mut rng, &mut events),
    }
    events.retain(|e| e.t < duration_us);
    let events = events.into_iter().map(|e| e.labeled(Label::Signal)).collect();
    Ok(EventStream::new(geometry, events)?.with_duration(duration_us))
}

fn blob_events<R: Rng>(
    geometry: Geometry,
    duration_us: u64,
    event_rate: f64,
    rng: &mut R,
    out: &mut Vec<Event>,
) {
    let (w, h) = (geometry.width as f64, geometry.height as f64);
    let radius = (w.min(h) / 6.0).max(1.5);
    // A rim of ~2r pixels enters per pixel of travel.
    let px_per_us = event_rate / (2.0 * radius) / 1e6;
    let dt = (0.25 / px_per_us).max(1.0);
    let (ax, ay) = ((w / 2.0 - radius - 0.5).max(0.0), (h / 2.0 - radius - 0.5).max(0.0));
    // Path length per radian is roughly the mean amplitude.
    let omega = px_per_us / ((ax + ay) / 2.0).max(1.0);
    let center = |t: f64| (w / 2.0 + ax * (omega * t).sin(), h / 2.0 + ay * (2.0 * omega * t).sin());
    let mut inside = vec![false; geometry.pixel_count()];
    let mut t = 0.0;
    while t < duration_us as f64 {
        let (cx, cy) = center(t);
        for y in 0..geometry.height {
            for x in 0..geometry.width {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                let now = dx * dx + dy * dy <= radius * radius;
                let idx = geometry.index(x, y);
                if now && !inside[idx] {
                    let te = (t + rng.random::<f64>() * dt).floor() as u64;
                    out.push(Event::new(te, x, y, Polarity::On));
                }
                inside[idx] = now;
            }
        }
        t += dt;
    }
}

/// Noise generator. `correlation_us` is the self-correlation window: type I
/// draws that would land on a pixel already hit within the window are
/// redrawn, and type II bursts span strictly less than the window.
pub fn synth_noise(
    kind: NoiseKind,
    geometry: Geometry,
    duration_us: u64,
    rate: f64,
    correlation_us: u64,
    seed: u64,
) -> Result<EventStream, EventError> {
    if !(rate > 0.0) {
        return Err(EventError::InvalidParameter("noise rate must be > 0"));
    }
    if correlation_us < MAX_BURST as u64 {
        return Err(EventError::InvalidParameter("correlation window too short"));
    }
    let mut rng = rng_from_seed(seed);
    let n_pix = geometry.pixel_count();
    let pick = |rng: &mut ChaCha8Rng| {
        let i = rng.random_range(0..n_pix);
        ((i % geometry.width as usize) as u16, (i / geometry.width as usize) as u16)
    };
    let pol = |rng: &mut ChaCha8Rng| if rng.random::<bool>() { Polarity::On } else { Polarity::Off };
    let mut events = Vec::new();
    match kind {
        NoiseKind::TypeI => {
            let gaps = Exp::new(rate / 1e6).expect("rate checked above");
            let mut last_hit: Vec<Option<u64>> = vec![None; n_pix];
            let mut t = gaps.sample(&mut rng);
            while t < duration_us as f64 {
                let tu = t as u64;
                for _ in 0..64 {
                    let (x, y) = pick(&mut rng);
                    let idx = geometry.index(x, y);
                    if last_hit[idx].is_some_and(|prev| tu - prev < correlation_us) {
                        continue;
                    }
                    last_hit[idx] = Some(tu);
                    events.push(Event::new(tu, x, y, pol(&mut rng)));
                    break;
                }
                t += gaps.sample(&mut rng);
            }
        }
        NoiseKind::TypeII => {
            let mean_burst = (MIN_BURST + MAX_BURST) as f64 / 2.0;
            // Bursts start early enough to finish inside the stream; the
            // start rate is raised so the overall event rate is still `rate`.
            let span = duration_us.saturating_sub(correlation_us).max(1) as f64;
            let start_rate = rate / mean_burst * duration_us as f64 / span;
            let gaps = Exp::new(start_rate / 1e6).expect("rate checked above");
            let max_gap = (correlation_us - 1) / MAX_BURST as u64;
            let mut t = gaps.sample(&mut rng);
            while t + (correlation_us as f64) < duration_us as f64 {
                let (x, y) = pick(&mut rng);
                let p = pol(&mut rng);
                let k = rng.random_range(MIN_BURST..=MAX_BURST);
                let mut tb = t as u64;
                for _ in 0..k {
                    events.push(Event::new(tb, x, y, p));
                    tb += rng.random_range(1..=max_gap.max(1));
                }
                t += gaps.sample(&mut rng);
            }
        }
    }
    let events = events.into_iter().map(|e| e.labeled(Label::Noise)).collect();
    Ok(EventStream::new(geometry, events)?.with_duration(duration_us))
}
