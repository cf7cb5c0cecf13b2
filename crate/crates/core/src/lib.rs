//! Feed-forward quantum reservoir computing on a simulated Gaussian boson
//! sampler, an extreme-learning-machine baseline, and memory-capacity
//! measurement (`C = max_N N log2(1/eps(N))`) with `C <= W` accounting.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod elm;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod interferometer;
pub mod learner;
pub mod readout;
pub mod reservoir;
pub mod scalar;
pub mod seed;
pub mod tasks;

pub use error::{Error, Result};
pub use scalar::Real;

pub type PureState64 = fock::PureState<f64>;
pub type PureState32 = fock::PureState<f32>;
pub type DensityOperator64 = fock::DensityOperator<f64>;
pub type DensityOperator32 = fock::DensityOperator<f32>;
pub type Ensemble64 = fock::Ensemble<f64>;
pub type Ensemble32 = fock::Ensemble<f32>;
pub type ModeUnitary64 = interferometer::ModeUnitary<f64>;
pub type ModeUnitary32 = interferometer::ModeUnitary<f32>;
pub type Reservoir64 = reservoir::Reservoir<f64>;
pub type Reservoir32 = reservoir::Reservoir<f32>;
pub type FqrcLearner64 = learner::FqrcLearner<f64>;
pub type FqrcLearner32 = learner::FqrcLearner<f32>;
pub type Elm64 = elm::Elm<f64>;
pub type Elm32 = elm::Elm<f32>;
