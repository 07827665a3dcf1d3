//! End-to-end orchestration: preprocessing (PCA + column normalization),
//! the in-sample clustering stages, projection learning, and out-of-sample
//! extension, with wall-clock timings per stage. Also the plain k-means
//! baseline used by the benchmark command.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::dataset::{pca_reduce, DataMatrix, PcaBasis};
use crate::error::{Error, Result};
use crate::extend::{extend, ExtensionResult};
use crate::graph::{build_affinity, build_codes, AffinityGraph, SparseCodeMatrix};
use crate::l1solver::L1Config;
use crate::npe::{build_m, learn_projection, ProjectionModel};
use crate::spectral::{kmeans, spectral_embed, ClusterAssignment, KMeansConfig, SpectralEmbedding};

/// Everything the pipeline needs to fit a model.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub k: usize,
    /// Sparsity parameter of the l1 solver.
    pub lambda: f64,
    /// Error tolerance of the l1 solver.
    pub delta: f64,
    /// Homotopy iteration cap; `None` picks the default of 4x dictionary size.
    pub max_iters: Option<usize>,
    /// PCA energy fraction; `None` skips PCA entirely.
    pub pca_energy: Option<f64>,
    /// Energy fraction for choosing the embedding dimension.
    pub embed_energy: f64,
    /// Unit-normalize columns after PCA, before sparse coding.
    pub normalize: bool,
    pub seed: u64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
}

impl PipelineConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            lambda: 1e-6,
            delta: 1e-2,
            max_iters: None,
            pca_energy: Some(0.98),
            embed_energy: 0.98,
            normalize: true,
            seed: 0,
            kmeans_restarts: 10,
            kmeans_max_iters: 100,
        }
    }

    fn l1_config(&self, dict_size: usize) -> Result<L1Config> {
        match self.max_iters {
            Some(iters) => L1Config::new(self.lambda, self.delta, iters),
            None => L1Config::with_default_iters(self.lambda, self.delta, dict_size),
        }
    }

    fn kmeans_config(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.k,
            max_iters: self.kmeans_max_iters,
            restarts: self.kmeans_restarts,
            seed: self.seed,
        }
    }
}

/// The preprocessing fitted on in-sample data and replayed verbatim on
/// out-of-sample data: center/project with the in-sample PCA, then scale
/// columns to unit norm.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pca: Option<PcaBasis>,
    normalize: bool,
}

impl Preprocessor {
    pub fn fit(
        y: &DataMatrix,
        pca_energy: Option<f64>,
        normalize: bool,
    ) -> Result<(Self, DataMatrix)> {
        let (pca, reduced) = match pca_energy {
            Some(energy) => {
                let (reduced, basis) = pca_reduce(y, energy)?;
                (Some(basis), reduced)
            }
            None => (None, y.clone()),
        };
        let out = if normalize {
            reduced.normalize_columns()
        } else {
            reduced
        };
        Ok((Self { pca, normalize }, out))
    }

    pub fn apply(&self, x: &DataMatrix) -> Result<DataMatrix> {
        let reduced = match &self.pca {
            Some(basis) => basis.apply(x)?,
            None => x.clone(),
        };
        Ok(if self.normalize {
            reduced.normalize_columns()
        } else {
            reduced
        })
    }

    pub fn pca(&self) -> Option<&PcaBasis> {
        self.pca.as_ref()
    }

    pub fn normalize(&self) -> bool {
        self.normalize
    }

    pub fn from_parts(pca: Option<PcaBasis>, normalize: bool) -> Self {
        Self { pca, normalize }
    }
}

/// Wall-clock seconds per pipeline stage; file I/O is excluded.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    pub sparse_coding: f64,
    pub eigendecomposition: f64,
    pub kmeans: f64,
    pub projection: f64,
}

/// A fitted pipeline: the preprocessing replayed on new data plus the
/// learned projection with its embedded in-sample points and labels.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub preprocess: Preprocessor,
    pub projection: ProjectionModel,
}

/// Intermediates of a fit, kept for inspection, reporting and tests.
#[derive(Debug)]
pub struct FitArtifacts {
    pub assignment: ClusterAssignment,
    pub codes: SparseCodeMatrix,
    pub graph: AffinityGraph,
    pub embedding: SpectralEmbedding,
    /// The preprocessed in-sample matrix actually fed to the solver.
    pub preprocessed: DataMatrix,
    pub timings: StageTimings,
}

/// Runs the full in-sample pipeline: preprocess, sparse codes, affinity and
/// Laplacian eigenvectors, k-means, projection learning.
pub fn fit(y_raw: &DataMatrix, config: &PipelineConfig) -> Result<(FittedModel, FitArtifacts)> {
    if config.k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    if config.k > y_raw.count() {
        return Err(Error::Parameter(format!(
            "k = {} exceeds the point count {}",
            config.k,
            y_raw.count()
        )));
    }

    let (preprocess, y) = Preprocessor::fit(y_raw, config.pca_energy, config.normalize)?;
    let l1 = config.l1_config(y.count())?;

    let start = Instant::now();
    let codes = build_codes(&y, &l1)?;
    let sparse_coding = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let graph = build_affinity(&codes);
    let embedding = spectral_embed(&graph, config.k)?;
    let eigendecomposition = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let assignment = kmeans(embedding.row_normalized(), &config.kmeans_config())?;
    let kmeans_time = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let m = build_m(&codes);
    let projection = learn_projection(&y, &m, config.embed_energy, &assignment)?;
    let projection_time = start.elapsed().as_secs_f64();

    let model = FittedModel {
        preprocess,
        projection,
    };
    let artifacts = FitArtifacts {
        assignment,
        codes,
        graph,
        embedding,
        preprocessed: y,
        timings: StageTimings {
            sparse_coding,
            eigendecomposition,
            kmeans: kmeans_time,
            projection: projection_time,
        },
    };
    Ok((model, artifacts))
}

/// Preprocesses raw out-of-sample data with the model's stored transform
/// and assigns labels by nearest in-sample neighbor. Returns the result and
/// the extension wall time in seconds.
pub fn extend_fitted(model: &FittedModel, x_raw: &DataMatrix) -> Result<(ExtensionResult, f64)> {
    let x = model.preprocess.apply(x_raw)?;
    let start = Instant::now();
    let result = extend(&model.projection, &x)?;
    Ok((result, start.elapsed().as_secs_f64()))
}

/// Plain k-means over the same preprocessed features, with out-of-sample
/// points labeled by their nearest centroid.
#[derive(Debug, Clone)]
pub struct KMeansBaseline {
    pub in_labels: Vec<usize>,
    pub out_labels: Option<Vec<usize>>,
    pub seconds: f64,
}

pub fn kmeans_baseline(
    y_raw: &DataMatrix,
    x_raw: Option<&DataMatrix>,
    config: &PipelineConfig,
) -> Result<KMeansBaseline> {
    if config.k == 0 || config.k > y_raw.count() {
        return Err(Error::Parameter(format!(
            "k = {} out of range for {} points",
            config.k,
            y_raw.count()
        )));
    }
    let (preprocess, y) = Preprocessor::fit(y_raw, config.pca_energy, config.normalize)?;

    let start = Instant::now();
    let points = y.matrix().transpose();
    let assignment = kmeans(&points, &config.kmeans_config())?;

    // centroids recomputed from the final labels
    let k = config.k;
    let dim = points.ncols();
    let mut centroids: DMatrix<f64> = DMatrix::zeros(k, dim);
    let mut counts = vec![0usize; k];
    for (i, &label) in assignment.labels.iter().enumerate() {
        counts[label] += 1;
        for j in 0..dim {
            centroids[(label, j)] += points[(i, j)];
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..dim {
                centroids[(c, j)] /= counts[c] as f64;
            }
        }
    }

    let out_labels = match x_raw {
        Some(x_raw) => {
            let x = preprocess.apply(x_raw)?;
            let labels = (0..x.count())
                .map(|i| {
                    let col = x.matrix().column(i);
                    let mut best = 0;
                    let mut best_d = f64::INFINITY;
                    for c in 0..k {
                        let d: f64 = (0..dim)
                            .map(|j| {
                                let diff = col[j] - centroids[(c, j)];
                                diff * diff
                            })
                            .sum();
                        if d < best_d {
                            best_d = d;
                            best = c;
                        }
                    }
                    best
                })
                .collect();
            Some(labels)
        }
        None => None,
    };

    Ok(KMeansBaseline {
        in_labels: assignment.labels,
        out_labels,
        seconds: start.elapsed().as_secs_f64(),
    })
}
