//! Loop-erased random walk in Z^3.
//!
//! Samplers for simple random walk and its loop-erasure, exact linear-algebra
//! oracles on small domains, loop insertion, and Monte Carlo estimators for
//! escape probabilities, the one-point function and LERW length.

pub mod estimators;
pub mod exact_oracle;
pub mod lattice;
pub mod loop_erase;
pub mod loop_soup;
pub mod rng;
pub mod stats;
pub mod validation;
pub mod walk;

pub use exact_oracle::{FiniteDomain, GreenTable, Oracle, OracleError};
pub use lattice::{Ball, LatticePoint};
pub use loop_erase::{LoopEraser, SelfAvoidingPath};
pub use rng::RngStream;
pub use walk::Path;
