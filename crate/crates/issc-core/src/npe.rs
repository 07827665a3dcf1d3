//! Linear embedding learned from the sparse codes: solves the generalized
//! symmetric eigenproblem `(Y M Y^T) w = lambda (Y Y^T + eps I) w` with
//! `M = C + C^T - C^T C`, keeps the directions of the largest eigenvalues,
//! and stores the embedded in-sample points for the extension stage.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::graph::SparseCodeMatrix;
use crate::spectral::ClusterAssignment;

/// Fraction of the mean diagonal mass of `Y Y^T` used as the ridge.
const RIDGE_FRACTION: f64 = 1e-8;

/// Fitted projection: `W` maps ambient space to the embedding space, where
/// the in-sample points and their cluster labels live.
#[derive(Debug, Clone)]
pub struct ProjectionModel {
    w: DMatrix<f64>,
    /// Kept generalized eigenvalues, descending.
    eigenvalues: DVector<f64>,
    /// `W^T Y`, one embedded in-sample point per column.
    embedded_in_sample: DMatrix<f64>,
    in_sample_labels: ClusterAssignment,
}

impl ProjectionModel {
    /// m x d projection matrix.
    pub fn projection(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn feature_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn embedded_in_sample(&self) -> &DMatrix<f64> {
        &self.embedded_in_sample
    }

    pub fn in_sample_labels(&self) -> &ClusterAssignment {
        &self.in_sample_labels
    }

    /// Reassembles a model from stored parts, validating the dimensions.
    pub fn from_parts(
        w: DMatrix<f64>,
        eigenvalues: DVector<f64>,
        embedded_in_sample: DMatrix<f64>,
        in_sample_labels: ClusterAssignment,
    ) -> Result<Self> {
        let d = w.ncols();
        if eigenvalues.len() != d
            || embedded_in_sample.nrows() != d
            || embedded_in_sample.ncols() != in_sample_labels.labels.len()
        {
            return Err(Error::Dimension(
                "projection model parts have inconsistent shapes".into(),
            ));
        }
        Ok(Self {
            w,
            eigenvalues,
            embedded_in_sample,
            in_sample_labels,
        })
    }
}

/// `M = C + C^T - C^T C`, symmetrized to absorb roundoff.
pub fn build_m(codes: &SparseCodeMatrix) -> DMatrix<f64> {
    let c = codes.coefficients();
    let m = c + c.transpose() - c.transpose() * c;
    symmetrize(m)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Ridge added to `Y Y^T` so the right-hand side of the generalized
/// eigenproblem is positive definite: `1e-8 * trace(Y Y^T) / m`.
pub fn ridge_epsilon(y: &DataMatrix) -> f64 {
    let fro_sq: f64 = y.matrix().iter().map(|v| v * v).sum();
    RIDGE_FRACTION * fro_sq / y.feature_dim() as f64
}

/// Learns the projection by reducing the generalized problem to a standard
/// symmetric one with the Cholesky factor of `Y Y^T + eps I`. The embedding
/// dimension is the smallest count whose positive-eigenvalue mass reaches
/// `energy` of the total positive mass, floored at the number of clusters.
pub fn learn_projection(
    y: &DataMatrix,
    m_matrix: &DMatrix<f64>,
    energy: f64,
    labels: &ClusterAssignment,
) -> Result<ProjectionModel> {
    if !(energy > 0.0 && energy <= 1.0) {
        return Err(Error::Parameter(format!(
            "embedding energy must lie in (0, 1], got {energy}"
        )));
    }
    let p = y.count();
    if m_matrix.nrows() != p || m_matrix.ncols() != p {
        return Err(Error::Dimension(format!(
            "M is {}x{}, expected {p}x{p}",
            m_matrix.nrows(),
            m_matrix.ncols()
        )));
    }
    if labels.labels.len() != p {
        return Err(Error::Dimension(format!(
            "{} labels for {p} points",
            labels.labels.len()
        )));
    }

    let m_feat = y.feature_dim();
    let eps = ridge_epsilon(y);
    if eps <= 0.0 {
        return Err(Error::Numerical("Y is identically zero".into()));
    }

    let ym = y.matrix();
    let mut rhs = ym * ym.transpose();
    for i in 0..m_feat {
        rhs[(i, i)] += eps;
    }
    let lhs = symmetrize(ym * m_matrix * ym.transpose());

    let chol = Cholesky::new(rhs.clone())
        .ok_or_else(|| Error::Numerical("Y Y^T + eps I is not positive definite".into()))?;
    let l = chol.l();

    // reduce to a standard symmetric problem: S = L^-1 A L^-T
    let linv_a = l
        .solve_lower_triangular(&lhs)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let s = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let eig = symmetrize(s).symmetric_eigen();

    let mut order: Vec<usize> = (0..m_feat).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });

    let positive_total: f64 = eig.eigenvalues.iter().filter(|&&v| v > 0.0).sum();
    if positive_total <= 0.0 {
        return Err(Error::Numerical(
            "degenerate embedding: no positive generalized eigenvalues".into(),
        ));
    }

    let target = energy * positive_total * (1.0 - 1e-12);
    let mut cumulative = 0.0;
    let mut d_energy = 1;
    for (count, &idx) in order.iter().enumerate() {
        cumulative += eig.eigenvalues[idx].max(0.0);
        if cumulative >= target {
            d_energy = count + 1;
            break;
        }
    }

    let k_floor = labels.cluster_count().max(1);
    let d = d_energy.max(k_floor).min(m_feat);

    let mut u = DMatrix::zeros(m_feat, d);
    let mut eigenvalues = DVector::zeros(d);
    for (slot, &idx) in order.iter().take(d).enumerate() {
        u.set_column(slot, &eig.eigenvectors.column(idx));
        eigenvalues[slot] = eig.eigenvalues[idx];
    }

    // back-substitute: w = L^-T u, so that W^T (Y Y^T + eps I) W = I
    let w = l
        .transpose()
        .solve_upper_triangular(&u)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;

    let embedded_in_sample = w.transpose() * ym;
    Ok(ProjectionModel {
        w,
        eigenvalues,
        embedded_in_sample,
        in_sample_labels: labels.clone(),
    })
}
