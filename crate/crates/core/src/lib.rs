//! Ensemble-averaged atmospheric-turbulence channel on orbital-angular-momentum
//! photon modes: superoperator assembly, Kraus extraction, transpose-channel
//! recovery and channel fidelity.
//!
//! Numerical routines are generic over [`scalar::Real`] (`f32` or `f64`);
//! the pipeline, cache and CLI work in `f64`, exposed through the aliases below.

// `!(x > 0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aqec;
pub mod beam;
pub mod error;
pub mod field;
pub mod kraus;
pub mod pipeline;
pub mod quadrature;
pub mod scalar;
pub mod special;
pub mod superop;
pub mod turbulence;
pub mod util;
pub mod verify;

pub use error::{Error, Result};

pub type Geometry = beam::BeamGeometry<f64>;
pub type Turbulence = turbulence::TurbulenceParams<f64>;
pub type Superop = superop::SuperopMatrix<f64>;
pub type Kraus = kraus::KrausSet<f64>;
pub type Code = aqec::CodeSpec<f64>;
