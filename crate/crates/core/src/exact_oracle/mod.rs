//! Exact linear algebra on small finite domains.
//!
//! Green's matrices of SRW killed on leaving a domain, escape probabilities,
//! the exact law of the loop-erased walk, hitting tables for conditioned
//! walks, SRW exit laws and loop-measure masses. Every operation refuses
//! domains larger than the configured site cap.

mod domain;
mod enumerate;
mod export;
mod green;
mod laws;
mod loops;
pub(crate) mod solver;

pub use domain::FiniteDomain;
pub use enumerate::{Descend, ExitLeaf, InteriorNode, SapEnumerator, SapVisitor};
pub use export::{read_green_table, write_green_table, GREEN_TABLE_MAGIC};
pub use green::{GreenSolver, GreenTable};
pub use laws::{EscapeTable, ExitLaw, HittingTable};
pub use solver::{CG_MAX_ITERATIONS, CG_TOLERANCE, DENSE_SOLVE_LIMIT};

use crate::lattice::LatticePoint;
use crate::loop_erase::SapError;

/// Default largest domain accepted by any oracle call.
pub const DEFAULT_CAP_SITES: usize = 1_500_000;
/// Environment variable overriding [`DEFAULT_CAP_SITES`].
pub const CAP_ENV: &str = "LERWLAB_CAP_SITES";
/// Tolerance on `|(I - P_D) G - I|_inf` for every produced table.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("domain has {sites} sites, above the cap of {cap}")]
    CapExceeded { sites: usize, cap: usize },
    #[error("linear solve failed (residual {residual:e}): {detail}")]
    SolveFailure { residual: f64, detail: String },
    #[error("site {0:?} listed twice")]
    DuplicateSite(LatticePoint),
    #[error("point {0:?} is not in the domain")]
    NotInDomain(LatticePoint),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error(transparent)]
    Sap(#[from] SapError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("malformed green table file: {0}")]
    Format(String),
}

/// Entry point carrying the site cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Oracle {
    cap_sites: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle { cap_sites: DEFAULT_CAP_SITES }
    }
}

impl Oracle {
    pub fn with_cap(cap_sites: usize) -> Self {
        Oracle { cap_sites }
    }

    /// Reads the cap from `LERWLAB_CAP_SITES`, falling back to the default.
    pub fn from_env() -> Self {
        let cap = std::env::var(CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_CAP_SITES);
        Oracle { cap_sites: cap }
    }

    pub fn cap_sites(&self) -> usize {
        self.cap_sites
    }

    pub(crate) fn check(&self, domain: &FiniteDomain) -> Result<(), OracleError> {
        if domain.len() > self.cap_sites {
            Err(OracleError::CapExceeded { sites: domain.len(), cap: self.cap_sites })
        } else {
            Ok(())
        }
    }
}
