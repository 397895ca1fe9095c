//! Entropy production rate of stationary d-dimensional Ornstein–Uhlenbeck
//! processes `dξ = Bξ dt + Σ dW`: closed-form rate, pathwise Girsanov
//! functional, and Monte Carlo harnesses for its Gaussian fluctuations,
//! moderate-deviation tails and iterated-logarithm envelope.

// Guards are written `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod parallel;
pub mod simulate;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{build_model, Constants, InitialLaw, ModelFile, OUModel};
pub use simulate::{EprSample, PathTrace, RngStream};
