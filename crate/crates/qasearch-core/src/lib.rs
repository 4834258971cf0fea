//! Problem-specific quantum data-encoding circuit search.
//!
//! The crate builds encoding circuits for quantum kernel models by
//! model-based reinforcement-learning search, scores candidates with
//! projected-quantum-kernel models under fixed-fold cross-validation, and
//! benchmarks the found circuits against random, genetic and
//! literature-reference baselines.

pub mod baselines;
pub mod circuit;
pub mod data;
pub mod env;
pub mod error;
pub mod evaluate;
pub mod learners;
pub mod muzero;
pub mod nnet;
pub mod pqk;
pub mod simulator;

pub use error::{Error, Result};
