//! Functional and architectural simulator for optical XNOR-bitcount BNN accelerators.

pub mod archsim;
pub mod bnn;
pub mod error;
pub mod link_budget;
pub mod mapping;
pub mod pca;
pub mod units;
pub mod workloads;

pub use error::{Error, Result};
