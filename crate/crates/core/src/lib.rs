//! Stress-testing of driving policies with cooperative multi-agent RL and a
//! rule-based online fuzzer.

pub mod arena;
pub mod baselines;
pub mod error;
pub mod fuzzer;
pub mod harness;
pub mod marl;
pub mod sim;
pub mod sut;

pub use error::{Error, Result};
