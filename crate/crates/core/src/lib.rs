//! Link-level simulation of coded MIMO transmission over frequency-selective
//! channels, received with a factor-graph LMMSE turbo equalizer.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix it to double precision, which is what the simulation
//! harness uses.

// `!(x > 0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod coding;
pub mod constellation;
pub mod error;
pub mod gmp;
pub mod llr_bridge;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod turbo;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Alphabet64 = constellation::Alphabet<f64>;
pub type SymbolMoments64 = constellation::SymbolMoments<f64>;
pub type Channel64 = channel::ChannelRealization<f64>;
pub type StateSpace64 = gmp::StateSpace<f64>;
pub type PosteriorBlock64 = gmp::PosteriorBlock<f64>;
pub type WpParams64 = llr_bridge::WpParams<f64>;
pub type TurboConfig64 = turbo::TurboConfig<f64>;
pub type TurboReceiver64 = turbo::TurboReceiver<f64>;
