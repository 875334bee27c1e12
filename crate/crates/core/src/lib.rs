//! Nursing-home resident flow, care demand and staffing cost simulation.
//!
//! Length of stay follows a latent competing-risks lognormal model; arrivals
//! are negative binomial or Poisson; each resident is classified into a
//! service-need group that sets hypoexponential daily staff minutes.

// `!(x > 0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod census;
pub mod defaults;
pub mod error;
pub mod normal;
pub mod real;
pub mod sampler;
pub mod service_need;
pub mod sim;
pub mod staffing;
pub mod survival;
pub mod validate;

pub use error::{Error, Result};
pub use real::Real;

/// Double-precision LOS model, used by the sampler and simulation.
pub type LosModel = survival::FittedLosModel<f64>;
pub type LosModel32 = survival::FittedLosModel<f32>;
pub type LosParams = survival::LognormalDispositionParams<f64>;
pub type LosData = survival::LosDataset<f64>;
