//! JSON report schema written by the subcommands. The schema is versioned;
//! bump `SCHEMA_VERSION` on breaking changes.

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct ParamsSection {
    pub k: usize,
    pub lambda: f64,
    pub delta: f64,
    pub pca_energy: Option<f64>,
    pub embed_energy: f64,
    pub normalize: bool,
    pub in_sample: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CountsSection {
    pub in_sample: usize,
    pub out_sample: Option<usize>,
    pub feature_dim: usize,
    pub reduced_dim: usize,
    pub embed_dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsSection {
    pub accuracy: Option<f64>,
    pub nmi: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TimingsSection {
    pub sparse_coding_s: f64,
    pub eigendecomposition_s: f64,
    pub kmeans_s: f64,
    pub projection_s: f64,
    pub extension_s: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolverSection {
    pub converged_columns: usize,
    pub total_columns: usize,
}

/// Report written by `fit`.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub command: String,
    pub params: ParamsSection,
    pub counts: CountsSection,
    pub in_sample: MetricsSection,
    pub timings: TimingsSection,
    pub solver: SolverSection,
}

/// Report written by `extend`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ExtendReport {
    pub schema_version: u32,
    pub command: String,
    pub points: usize,
    pub extension_s: f64,
    pub points_per_second: Option<f64>,
    pub out_sample: MetricsSection,
}

/// One grid cell (or the baseline row) of `bench`.
#[derive(Debug, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
    pub in_accuracy: Option<f64>,
    pub in_nmi: Option<f64>,
    pub out_accuracy: Option<f64>,
    pub out_nmi: Option<f64>,
    pub seconds: Option<f64>,
    pub best: bool,
    pub error: Option<String>,
}

/// Report written by `bench`.
#[derive(Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub command: String,
    pub k: usize,
    pub lambdas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub in_sample: usize,
    pub out_sample: usize,
    pub seed: u64,
    pub rows: Vec<BenchRow>,
}
