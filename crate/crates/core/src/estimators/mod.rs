//! Monte Carlo estimators for escape probabilities, the one-point function
//! and LERW length, with the exponent fit that ties them together.
//!
//! Samples are drawn in fixed-size blocks; block `b` always uses stream
//! `stream_base + b` and block results are merged in block order, so a run
//! is a pure function of its [`SamplingPlan`] whatever the worker count.

mod exact;
mod fit;
mod plan;
mod sampling;

pub use exact::{radius_two_reference, RadiusTwoReference};
pub use fit::{fit_alpha, ratio_result, scaling_rows, AlphaFit, ScalingRow, SeriesPoint};
pub use plan::{SamplingPlan, SeedManifest, Tally, BLOCK_SIZE, STREAM_STRIDE};
pub use sampling::{
    es_and_length, es_annulus_paired, estimate_bn, estimate_es, estimate_es_annulus,
    estimate_length, estimate_one_point_direct, estimate_one_point_factored, one_point_ratios,
    scaling_table, summarize_lengths, AnnulusRun, EsRun, FACTORED_MAX_EXP,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::exact_oracle::OracleError;
use crate::lattice::{LatticeError, LatticePoint};
use crate::walk::WalkError;

/// Recorded with every result; results under different conventions are
/// not comparable.
pub const CONVENTION: &str = "radius-exit; Es counts S2[1,T] including its exit point; \
annulus s = last erased index on the outer boundary of B(m), u = erased endpoint; \
x_n = nearest lattice point to 2^n x, lexicographic ties";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub label: String,
    pub estimate: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub params: BTreeMap<String, f64>,
    pub seed_manifest: SeedManifest,
    pub convention: String,
}

impl EstimatorResult {
    pub fn bernoulli(label: &str, hits: u64, n: u64, seed_manifest: SeedManifest) -> Self {
        let p = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        let stderr = if n == 0 { 0.0 } else { (p * (1.0 - p) / n as f64).sqrt() };
        EstimatorResult {
            label: label.to_string(),
            estimate: p,
            stderr,
            n_samples: n,
            params: BTreeMap::new(),
            seed_manifest,
            convention: CONVENTION.to_string(),
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EstimatorError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("x scales to the origin at level {0}")]
    DegeneratePoint(u32),
    #[error("denominator {estimate} is within 5 standard errors ({stderr}) of zero")]
    UnstableRatio { estimate: f64, stderr: f64 },
    #[error("fit needs at least 3 points with positive estimate and finite positive stderr, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

pub(crate) fn point_param(r: EstimatorResult, p: LatticePoint) -> EstimatorResult {
    r.with_param("x_n.x", p.x as f64).with_param("x_n.y", p.y as f64).with_param("x_n.z", p.z as f64)
}
