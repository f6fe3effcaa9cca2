//! Phase retrieval by feasible point pursuit and its baselines.
//!
//! Every numerical type is generic over the working precision
//! ([`scalar::Real`], implemented for `f32` and `f64`). The aliases below fix
//! it to `f64`, which is what the experiment harness uses.

// `!(a > b)` checks deliberately treat NaN as failing.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod conic;
pub mod crb;
pub mod error;
pub mod fpp;
pub mod linalg;
pub mod measurements;
pub mod rng;
pub mod scalar;
pub mod signal;
pub mod trace;

pub use error::{Error, Result};
pub use scalar::Real;
pub use trace::{Trace, TraceRecord};

pub type C64 = scalar::Cplx<f64>;
pub type Signal = signal::ComplexSignal<f64>;
pub type Ensemble = signal::MeasurementEnsemble<f64>;
pub type Instance = signal::RetrievalInstance<f64>;
pub type Config = fpp::FppConfig<f64>;
pub type Baseline = baselines::BaselineConfig<f64>;
pub type Init = baselines::InitStrategy<f64>;
pub type Harmonics = measurements::HarmonicModel<f64>;
pub type Dict = measurements::Dictionary<f64>;
pub type Fim = crb::FimResult<f64>;
pub type Program = conic::ConicProgram<f64>;
