//! Distributed SINR-constrained link scheduling in which every link sees
//! its neighborhood exactly and summarizes the interference from outside it
//! with either a deterministic mean-field value or a normal random variable.
//!
//! Module map:
//! - [`net`]: geometry, channel gains, inverse SINR, energy, objective, outage.
//! - [`oracle`]: exhaustive enumeration and exact Boltzmann optimization.
//! - [`meanfield`]: mean-field fixed point for the residual interference.
//! - [`clt`]: frontier model, closed-form moments, Lyapunov ratio, Monte Carlo.
//! - [`scheduler`]: factor graph and the randomized message-passing scheduler.
//! - [`harness`]: parameter sweeps, replication statistics, CSV/JSON output.

// `!(x > 0.0)` is how validation rejects NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clt;
pub mod error;
pub mod exec;
pub mod harness;
pub mod meanfield;
pub mod net;
pub mod oracle;
pub mod rng;
pub mod scheduler;

pub use error::{Error, Result};
pub use exec::Execution;
pub use net::{Configuration, NeighborhoodSystem, Network, SchedulingParams};
