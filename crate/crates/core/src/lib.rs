//! Online caching with predictions: optimistic FTRL/FTPL policies, their
//! rounding and projection primitives, request traces, prediction oracles,
//! hindsight benchmarks and an experiment harness.

pub mod benchmark;
pub mod harness;
pub mod model;
pub mod oracles;
pub mod policies;
pub mod projections;
pub mod rounding;
pub mod traces;
