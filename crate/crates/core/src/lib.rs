//! Hybrid digital-analog transmission of neural-network parameters for
//! federated learning over noisy wireless links.
//!
//! A parameter vector is quantized and entropy-coded into a bitstream,
//! protected by a rate-1/2 convolutional code and sent as BPSK on the I
//! component; the quantization residual rides on the Q component as scaled
//! analog values. Digital-only and analog-only baselines share the same
//! interface (see [`schemes`]), and [`federation`] runs the round-robin
//! learner loop on top of them.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the type
//! aliases below fix the precision used for model parameters.

pub mod channel_code;
pub mod codec;
pub mod error;
pub mod federation;
pub mod model;
pub mod phy;
pub mod scalar;
pub mod schemes;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Parameters are stored and transmitted in single precision.
pub type Real = f32;
pub type Params = model::ParameterVector<Real>;
pub type Shard = model::DataShard<Real>;
pub type Frame = phy::SymbolFrame<Real>;
pub type Federation = federation::FederationState<Real>;

/// Double-precision variants, used where tight numerical tolerances matter.
pub type ParamsF64 = model::ParameterVector<f64>;
pub type FrameF64 = phy::SymbolFrame<f64>;
