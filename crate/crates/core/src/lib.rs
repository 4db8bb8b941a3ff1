//! Auditing a fixed classifier for multi-group fairness.
//!
//! The crate computes max-gap and CVaR fairness of known populations, runs
//! the ε-test on samples collected by weighted or attribute-specific
//! sampling, and evaluates the achievability and converse bounds that govern
//! how many samples such an audit needs.

pub mod adversarial;
pub mod bounds;
pub mod cli;
pub mod domain;
pub mod error;
pub mod estimator;
pub mod metrics;
pub mod sampling;
pub mod simulator;

pub use error::{Error, Result};
