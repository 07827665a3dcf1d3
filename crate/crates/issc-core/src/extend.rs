//! Out-of-sample extension: project new points with `W^T X` and copy the
//! cluster label of the nearest embedded in-sample point.
//!
//! The neighbor search is a deliberate brute-force scan: cost is exactly
//! `O(d p n)` for n out-of-sample points against p in-sample points in d
//! dimensions, matching the complexity contract of the extension stage.

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::npe::ProjectionModel;

/// Labels assigned to out-of-sample points, with the matched in-sample
/// neighbor and its embedding-space distance.
#[derive(Debug, Clone)]
pub struct ExtensionResult {
    pub labels: Vec<usize>,
    pub neighbor_indices: Vec<usize>,
    pub distances: Vec<f64>,
}

/// Assigns every column of `x` (already preprocessed like the training
/// data) to the cluster of its nearest in-sample neighbor in the embedding
/// space. Distance ties resolve to the lowest in-sample index.
pub fn extend(model: &ProjectionModel, x: &DataMatrix) -> Result<ExtensionResult> {
    if x.feature_dim() != model.feature_dim() {
        return Err(Error::Dimension(format!(
            "model expects {} features, data has {}",
            model.feature_dim(),
            x.feature_dim()
        )));
    }

    let wt = model.projection().transpose();
    let anchors = model.embedded_in_sample();
    let in_labels = &model.in_sample_labels().labels;
    let d = anchors.nrows();
    let p = anchors.ncols();
    let n = x.count();

    let mut labels = Vec::with_capacity(n);
    let mut neighbor_indices = Vec::with_capacity(n);
    let mut distances = Vec::with_capacity(n);

    // one point at a time, so results are bit-identical however the input
    // is batched
    for col in 0..n {
        let z = &wt * x.matrix().column(col);
        let mut best = 0usize;
        let mut best_sq = f64::INFINITY;
        for j in 0..p {
            let mut dist_sq = 0.0;
            for row in 0..d {
                let diff = z[row] - anchors[(row, j)];
                dist_sq += diff * diff;
            }
            if dist_sq < best_sq {
                best_sq = dist_sq;
                best = j;
            }
        }
        labels.push(in_labels[best]);
        neighbor_indices.push(best);
        distances.push(best_sq.sqrt());
    }

    Ok(ExtensionResult {
        labels,
        neighbor_indices,
        distances,
    })
}
