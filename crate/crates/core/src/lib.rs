//! Deterministic CONGEST-model simulation of distributed heat kernel pagerank
//! estimation and sweep-based local cluster detection.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: the network topology, edge-list ingestion and exact cut statistics.
//! - [`hkpr`]: the exact truncated-series oracle, Poisson sampling, walk parameters
//!   and a serial Monte Carlo estimator.
//! - [`congest`]: the round-synchronous message-passing engine with bandwidth ledgers.
//! - [`phkpr`]: token-passing heat kernel pagerank estimation as a CONGEST protocol.
//! - [`sweep`]: exact, tree-based and chain sweeps over an ordering by `ρ(v)/d_v`.
//! - [`cluster`]: local clustering, the `φ`-halving driver and sparse-cut sampling.
//! - [`kmachine`]: k-machine round estimates from measured complexities.
//! - [`report`]: the structured text report shared with the command-line tool.
//!
//! Randomness always flows from an explicit `u64` seed through [`rng::stream`].

pub mod cluster;
pub mod congest;
pub mod generators;
pub mod graph;
pub mod hkpr;
pub mod kmachine;
pub mod phkpr;
pub mod report;
pub mod rng;
pub mod sweep;

pub use graph::{Graph, GraphError, NodeId, NodeSet, Rational};
pub use hkpr::{PhkprVector, VectorKind, WalkParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sim(#[from] congest::SimError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sweep over an empty vector")]
    EmptyVector,
    #[error("sweep has no proper prefix to evaluate")]
    NoProperPrefix,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
