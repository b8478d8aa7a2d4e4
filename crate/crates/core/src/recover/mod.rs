//! Column recovery from a clustering: sign-consistent averaging or the top
//! eigenvector of each cluster's second-moment matrix.

mod average;
mod svd;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cluster::OverlapClustering;
use crate::error::Result;
use crate::model::{Dictionary, SampleSet};
use crate::registry::{Named, Registry};

pub use average::{average_recover, find_relative_signs, AverageRecover, SignedCluster};
pub use svd::{
    empirical_covariance, svd_recover, top_singular_vector, zeta, ClusterOperator,
    CovarianceEstimate, PowerResult, SvdRecover, SvdRecovery, SymmetricOperator,
};

/// Knobs shared by the recovery strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoverConfig {
    /// Power-iteration stopping tolerance on the sine of successive iterates.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Reported in per-column diagnostics when known.
    pub zeta: Option<f64>,
    /// Number of intermediate members used for sign paths per cluster.
    pub label_cap: usize,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            seed: 0,
            zeta: None,
            label_cap: 500,
        }
    }
}

/// Per-column diagnostics line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDiagnostics {
    pub cluster: usize,
    pub size: usize,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub zeta: Option<f64>,
}

/// Output of a recovery strategy: one column per cluster, in cluster order.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub dictionary: Dictionary,
    pub columns: Vec<ColumnDiagnostics>,
    pub signed: Option<Vec<SignedCluster>>,
}

pub trait RecoverStrategy: Named + Send + Sync {
    fn recover(
        &self,
        set: &SampleSet,
        clustering: &OverlapClustering,
        cfg: &RecoverConfig,
    ) -> Result<Recovery>;
}

/// Registry with `average` and `svd`.
pub fn recover_registry() -> Registry<dyn RecoverStrategy> {
    let mut r: Registry<dyn RecoverStrategy> = Registry::new();
    r.register(Arc::new(AverageRecover));
    r.register(Arc::new(SvdRecover));
    r
}
