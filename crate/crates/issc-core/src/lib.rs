//! Inductive sparse subspace clustering.
//!
//! In-sample points are clustered by normalized spectral clustering over an
//! l1-graph: each point is sparse-coded over the remaining points, the code
//! magnitudes become edge weights, and k-means runs on the Laplacian
//! eigenvectors. A linear projection learned from the same codes embeds the
//! data so that out-of-sample points can be labeled by their nearest
//! in-sample neighbor, at cost linear in the number of new points.
//!
//! Module map:
//!
//! - [`dataset`] — ingestion, PCA, splitting, synthetic generators
//! - [`l1solver`] — homotopy LASSO-path solver and the basis-pursuit LP oracle
//! - [`graph`] — sparse code matrix, affinity, normalized Laplacian
//! - [`spectral`] — Laplacian eigenvectors and k-means
//! - [`npe`] — projection learning from the generalized eigenproblem
//! - [`extend`] — out-of-sample nearest-neighbor assignment
//! - [`metrics`] — best-map Accuracy and NMI
//! - [`pipeline`] — end-to-end orchestration with stage timings
//! - [`model_io`] — deterministic model persistence

pub mod dataset;
pub mod error;
pub mod extend;
pub mod graph;
pub mod l1solver;
pub mod metrics;
pub mod model_io;
pub mod npe;
pub mod pipeline;
pub mod spectral;

pub use nalgebra;

pub use dataset::{
    gen_trefoil_knots, gen_union_of_subspaces, load_matrix, pca_reduce, split, CsvFormat,
    DataMatrix, LabeledDataset, PcaBasis, SplitSpec,
};
pub use error::{Error, Result};
pub use extend::{extend, ExtensionResult};
pub use graph::{build_affinity, build_codes, AffinityGraph, SparseCodeMatrix};
pub use l1solver::{lp_oracle, solve_l1, L1Config, SparseCode};
pub use metrics::{accuracy, nmi, ContingencyTable};
pub use model_io::{read_model, write_model};
pub use npe::{build_m, learn_projection, ProjectionModel};
pub use pipeline::{
    extend_fitted, fit, kmeans_baseline, FitArtifacts, FittedModel, PipelineConfig, Preprocessor,
    StageTimings,
};
pub use spectral::{
    cluster_in_sample, kmeans, spectral_embed, ClusterAssignment, KMeansConfig, SpectralEmbedding,
};
