//! Ground-truth traffic density from the LWR conservation law, a
//! from-scratch neural density estimator, and physics-based certification
//! of that estimator in environments it was not trained on.

pub mod certify;
mod codec;
pub mod error;
pub mod lwr;
pub mod nn;
pub mod pipeline;

pub use codec::format_sig;
pub use error::{Error, Result};
