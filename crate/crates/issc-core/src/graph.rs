//! l1-graph construction: the sparse coefficient matrix C (one column per
//! point, coded over all the other points), the affinity A = |C| + |C|^T,
//! and the symmetric normalized Laplacian.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::l1solver::{solve_l1, L1Config};

/// Sparse self-representation of a dataset: column i codes point i over the
/// dictionary of all points with column i zeroed out, so the diagonal is
/// exactly zero.
#[derive(Debug, Clone)]
pub struct SparseCodeMatrix {
    c: DMatrix<f64>,
    convergence_flags: Vec<bool>,
    residual_norms: Vec<f64>,
}

impl SparseCodeMatrix {
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn convergence_flags(&self) -> &[bool] {
        &self.convergence_flags
    }

    pub fn residual_norms(&self) -> &[f64] {
        &self.residual_norms
    }

    pub fn point_count(&self) -> usize {
        self.c.ncols()
    }

    /// Wraps an externally built coefficient matrix. The diagonal must be
    /// zero and all entries finite.
    pub fn from_coefficients(c: DMatrix<f64>) -> Result<Self> {
        if c.nrows() != c.ncols() {
            return Err(Error::Dimension(format!(
                "code matrix must be square, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Value("code matrix contains NaN or Inf".into()));
        }
        if (0..c.nrows()).any(|i| c[(i, i)] != 0.0) {
            return Err(Error::Value("code matrix diagonal must be zero".into()));
        }
        let p = c.ncols();
        Ok(Self {
            c,
            convergence_flags: vec![true; p],
            residual_norms: vec![0.0; p],
        })
    }
}

/// Undirected weighted graph over the in-sample points, with degrees and the
/// symmetric normalized Laplacian `I - S^{-1/2} A S^{-1/2}`.
#[derive(Debug, Clone)]
pub struct AffinityGraph {
    a: DMatrix<f64>,
    degrees: DVector<f64>,
    l_norm: DMatrix<f64>,
}

impl AffinityGraph {
    pub fn affinity(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn degrees(&self) -> &DVector<f64> {
        &self.degrees
    }

    pub fn normalized_laplacian(&self) -> &DMatrix<f64> {
        &self.l_norm
    }

    pub fn vertex_count(&self) -> usize {
        self.a.nrows()
    }

    /// Builds the graph from an explicit affinity matrix: symmetric,
    /// elementwise nonnegative, zero diagonal.
    pub fn from_affinity(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "affinity must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let p = a.nrows();
        for i in 0..p {
            if a[(i, i)] != 0.0 {
                return Err(Error::Value("affinity diagonal must be zero".into()));
            }
            for j in 0..p {
                let v = a[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Value(format!(
                        "affinity entry ({i}, {j}) = {v} is negative or non-finite"
                    )));
                }
                if v != a[(j, i)] {
                    return Err(Error::Value(format!(
                        "affinity is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_affinity_unchecked(a))
    }

    fn from_affinity_unchecked(a: DMatrix<f64>) -> Self {
        let p = a.nrows();
        let degrees = DVector::from_fn(p, |i, _| a.row(i).sum());
        // Isolated vertices get a zero scaling, which turns their Laplacian
        // row into the identity row: the vertex becomes its own component.
        let scale = DVector::from_fn(p, |i, _| {
            if degrees[i] > 0.0 {
                1.0 / degrees[i].sqrt()
            } else {
                0.0
            }
        });

        let mut l_norm = DMatrix::zeros(p, p);
        for i in 0..p {
            l_norm[(i, i)] = 1.0 - a[(i, i)] * scale[i] * scale[i];
            for j in (i + 1)..p {
                let w = -(a[(i, j)] * scale[i] * scale[j]);
                l_norm[(i, j)] = w;
                l_norm[(j, i)] = w;
            }
        }
        Self { a, degrees, l_norm }
    }
}

/// Codes every point over the dictionary of all other points (its own
/// column zeroed so indices stay aligned). Columns are solved in parallel;
/// the result does not depend on the scheduling.
pub fn build_codes(y: &DataMatrix, config: &L1Config) -> Result<SparseCodeMatrix> {
    config.validate()?;
    let p = y.count();
    if p < 2 {
        return Err(Error::Parameter(format!(
            "self-representation needs at least 2 points, got {p}"
        )));
    }

    let columns: Vec<_> = (0..p)
        .into_par_iter()
        .map(|i| {
            let mut dict = y.matrix().clone();
            dict.column_mut(i).fill(0.0);
            let target = y.point(i);
            solve_l1(&target, &dict, config)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut c = DMatrix::zeros(p, p);
    let mut convergence_flags = Vec::with_capacity(p);
    let mut residual_norms = Vec::with_capacity(p);
    for (i, code) in columns.into_iter().enumerate() {
        c.set_column(i, &code.coefficients);
        c[(i, i)] = 0.0;
        convergence_flags.push(code.converged);
        residual_norms.push(code.residual_norm);
    }

    Ok(SparseCodeMatrix {
        c,
        convergence_flags,
        residual_norms,
    })
}

/// Affinity and normalized Laplacian from the sparse codes:
/// `A = |C| + |C|^T`, exactly symmetric by construction.
pub fn build_affinity(codes: &SparseCodeMatrix) -> AffinityGraph {
    let p = codes.point_count();
    let c = codes.coefficients();
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            let w = c[(i, j)].abs() + c[(j, i)].abs();
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
    }
    AffinityGraph::from_affinity_unchecked(a)
}
