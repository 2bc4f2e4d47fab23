//! Decentralized protection games against SIS epidemics.
//!
//! Steady states come from the N-intertwined mean-field approximation
//! ([`nimfa`]). On top of them sit the investment games on complete
//! ([`complete`]), complete bipartite ([`bipartite`]) and multi-community
//! ([`multicomm`]) networks, and the decentralized learning dynamics
//! ([`rla`]). Batch work goes through [`Execution`], which uses rayon when
//! the `parallel` feature is on.

// `!(x > 0.0)` is deliberate: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bipartite;
pub mod cli;
pub mod complete;
pub mod error;
pub mod exec;
pub mod multicomm;
pub mod nimfa;
pub mod report;
pub mod rla;
pub mod sweep;

pub use error::{Error, Result};
pub use exec::Execution;
