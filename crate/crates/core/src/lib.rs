//! One-class data descriptors (NND, LNND, LOF, ALP and a Gaussian ν-SVM),
//! efficient validation of their hyperparameters, budget-limited
//! derivative-free optimisers, and the statistics used to compare them.

pub mod dataset;
pub mod descriptors;
pub mod error;
pub mod harness;
pub mod neighbors;
pub mod optim;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};
