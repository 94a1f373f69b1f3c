//! Transient stability assessment from a single post-fault PMU voltage
//! sample: a classical-model swing-equation simulator for labeled data
//! generation, a stack of conditional GANs built on GRU cores that predict
//! subsequent voltage samples and vote on stability, and an evaluation
//! harness with noise/placement sweeps and a decision-tree baseline.

pub mod error;
pub mod eval;
pub mod gan;
pub mod gridsim;
pub mod hgan;
pub mod nn;
pub mod seed;

#[cfg(test)]
pub(crate) mod test_support;

pub use error::{CoreError, Result};
