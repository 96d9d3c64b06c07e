//! Spiking autoencoders trained with membrane-potential backpropagation.
//!
//! The crate is organised bottom-up:
//!
//! * [`encoding`] and [`lif`] hold the Poisson rate encoder and the leaky
//!   integrate-and-fire layer dynamics.
//! * [`backprop`] implements the masked membrane-potential loss, the
//!   eligibility-trace gradients and the per-timestep Adam update.
//! * [`network`] composes layers into the autoencoder, the audiocoder and the
//!   stacked audio-to-image synthesizer.
//! * [`data`] reads and writes IDX images, `SPC1` spectrograms, `SAEC`
//!   checkpoints and PGM images, and generates synthetic spectrograms.
//! * [`metrics`] scores reconstructions.
//! * [`pipeline`] runs the audio-to-image experiment end to end.

pub mod backprop;
pub mod data;
pub mod encoding;
mod error;
pub mod lif;
pub mod metrics;
pub mod network;
pub mod pipeline;
mod raster;
pub mod rng;
mod tensor;

pub use backprop::{AdamTimeState, EligibilityTrace, Hyperparams, StepLoss};
pub use error::{Error, Result};
pub use lif::{LifLayer, LifLayerState, NeuronConfig};
pub use metrics::EvalReport;
pub use network::{HiddenStateMap, SpikingNetwork, TrainConfig};
pub use raster::{BitMatrix, SpikeRaster};
pub use tensor::Matrix;
