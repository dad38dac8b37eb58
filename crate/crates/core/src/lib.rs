//! Event-camera recognition with single-spike temporal encoding and a
//! first-to-spike spiking network.
//!
//! The pipeline runs raw address events through [`sste`], a bank of per-pixel
//! leaky integrate-and-fire filters that passes at most one supported spike
//! per pixel, then classifies the resulting spike-time map with a
//! [`network::F2sNetwork`] whose output spike times have a closed form and
//! exact gradients.

pub mod checkpoint;
pub mod dataset;
pub mod evaluation;
pub mod event;
pub mod io;
pub mod network;
pub mod sste;
pub mod synth;
pub mod training;

pub use event::{Event, EventStream, Geometry, Label, Polarity, Sample};
pub use network::{F2sNetwork, LayerSpec, ZMap};
pub use sste::{encode_stream, SsteConfig, SsteState};
pub use training::{TrainConfig, TrainReport};
