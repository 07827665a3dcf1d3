//! Data ingestion, PCA preprocessing, in/out-of-sample splitting and
//! synthetic benchmark generators.
//!
//! Points are stored column-major throughout: a `DataMatrix` holds one
//! m-dimensional point per column. CSV files on disk use the transposed
//! layout (one point per row) and are transposed on load.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense column-major collection of points: m feature rows, q point columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    data: DMatrix<f64>,
}

impl DataMatrix {
    /// Wraps a matrix, rejecting empty shapes and non-finite entries.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "data matrix must be at least 1x1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Value("data matrix contains NaN or Inf".into()));
        }
        Ok(Self { data })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn feature_dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn count(&self) -> usize {
        self.data.ncols()
    }

    pub fn point(&self, i: usize) -> DVector<f64> {
        self.data.column(i).into_owned()
    }

    /// Subset of columns, in the order given.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Parameter("column selection is empty".into()));
        }
        Self::new(self.data.select_columns(indices.iter()))
    }

    /// Returns a copy with every column scaled to unit l2-norm.
    /// Columns with norm below `1e-12` are left untouched.
    pub fn normalize_columns(&self) -> Self {
        let mut data = self.data.clone();
        for mut col in data.column_iter_mut() {
            let norm = col.norm();
            if norm > 1e-12 {
                col /= norm;
            }
        }
        Self { data }
    }
}

/// A `DataMatrix` together with integer class labels in `[0, k)`.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub points: DataMatrix,
    pub labels: Vec<usize>,
    pub k: usize,
}

impl LabeledDataset {
    /// Builds a dataset where every class in `[0, k)` must occur at least once;
    /// `k` is inferred as `max(labels) + 1`.
    pub fn new(points: DataMatrix, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != points.count() {
            return Err(Error::Dimension(format!(
                "{} labels for {} points",
                labels.len(),
                points.count()
            )));
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; k];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Value(format!(
                "class {missing} has no members; labels must cover [0, {k})"
            )));
        }
        Ok(Self { points, labels, k })
    }

    /// Builds a dataset that keeps a caller-supplied class count; classes may
    /// be empty. Used for split halves, which inherit `k` from their parent.
    fn with_class_count(points: DataMatrix, labels: Vec<usize>, k: usize) -> Result<Self> {
        if labels.len() != points.count() {
            return Err(Error::Dimension(format!(
                "{} labels for {} points",
                labels.len(),
                points.count()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Value(format!("label {bad} out of range [0, {k})")));
        }
        Ok(Self { points, labels, k })
    }

    pub fn count(&self) -> usize {
        self.points.count()
    }
}

/// How to partition a dataset into in-sample and out-of-sample halves.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub in_sample_count: usize,
    pub seed: u64,
}

/// CSV layout expected by [`load_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvFormat {
    /// Every column is a feature.
    Plain,
    /// The last column is an integer class label.
    Labeled,
}

/// Loads a CSV file of one point per row; see [`CsvFormat`] for the label
/// convention. A non-numeric first row is treated as a header and skipped.
/// Labels are remapped to contiguous `[0, k)` in sorted order of the raw
/// values. `Plain` files come back with `k = 1` and all labels zero.
pub fn load_matrix(path: &Path, format: CsvFormat) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, format)
}

fn parse_csv(text: &str, format: CsvFormat) -> Result<LabeledDataset> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    let mut width: Option<usize> = None;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();

        // Header detection: a first row with any non-numeric field is skipped.
        if rows.is_empty() && width.is_none() && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            width = Some(fields.len());
            continue;
        }

        match width {
            Some(w) if fields.len() != w => {
                return Err(Error::Dimension(format!(
                    "ragged row at line {line_no}: expected {w} fields, found {}",
                    fields.len()
                )));
            }
            None => width = Some(fields.len()),
            _ => {}
        }

        let feature_count = match format {
            CsvFormat::Plain => fields.len(),
            CsvFormat::Labeled => {
                if fields.len() < 2 {
                    return Err(Error::Format {
                        line: line_no,
                        msg: "labeled rows need at least one feature and a label".into(),
                    });
                }
                fields.len() - 1
            }
        };

        let mut row = Vec::with_capacity(feature_count);
        for field in &fields[..feature_count] {
            let v: f64 = field.parse().map_err(|_| Error::Format {
                line: line_no,
                msg: format!("cannot parse '{field}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Value(format!(
                    "non-finite value '{field}' at line {line_no}"
                )));
            }
            row.push(v);
        }
        if format == CsvFormat::Labeled {
            let field = fields[feature_count];
            let label: i64 = field.parse().map_err(|_| Error::Format {
                line: line_no,
                msg: format!("cannot parse '{field}' as an integer label"),
            })?;
            raw_labels.push(label);
        }
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::Format {
            line: 0,
            msg: "no data rows".into(),
        });
    }

    let m = rows[0].len();
    let q = rows.len();
    // One disk row per point -> one matrix column per point.
    let data = DMatrix::from_fn(m, q, |r, c| rows[c][r]);
    let points = DataMatrix::new(data)?;

    let labels = match format {
        CsvFormat::Plain => vec![0; q],
        CsvFormat::Labeled => remap_labels(&raw_labels),
    };
    LabeledDataset::new(points, labels)
}

/// Remaps arbitrary integer labels onto contiguous `[0, k)`, ordered by the
/// sorted raw values.
fn remap_labels(raw: &[i64]) -> Vec<usize> {
    let mut uniq: Vec<i64> = raw.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    raw.iter()
        .map(|v| uniq.binary_search(v).expect("value present") )
        .collect()
}

/// Mean and orthonormal basis of a fitted PCA; applies the same transform to
/// out-of-sample data.
#[derive(Debug, Clone)]
pub struct PcaBasis {
    mean: DVector<f64>,
    basis: DMatrix<f64>,
}

impl PcaBasis {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// m x r matrix with orthonormal columns.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn reduced_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub(crate) fn from_parts(mean: DVector<f64>, basis: DMatrix<f64>) -> Self {
        Self { mean, basis }
    }

    /// Projects `data` onto the principal directions: `basis^T (X - mean)`.
    pub fn apply(&self, data: &DataMatrix) -> Result<DataMatrix> {
        if data.feature_dim() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "PCA basis expects {} features, data has {}",
                self.mean.len(),
                data.feature_dim()
            )));
        }
        let mut centered = data.matrix().clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        DataMatrix::new(self.basis.transpose() * centered)
    }
}

/// Projects the data onto the smallest number of principal directions whose
/// eigenvalue mass reaches `energy` of the total. Returns the reduced data
/// (mean-centered, r x q) and the fitted basis.
pub fn pca_reduce(data: &DataMatrix, energy: f64) -> Result<(DataMatrix, PcaBasis)> {
    if !(energy > 0.0 && energy <= 1.0) {
        return Err(Error::Parameter(format!(
            "PCA energy must lie in (0, 1], got {energy}"
        )));
    }
    if data.count() < 2 {
        return Err(Error::Parameter("PCA needs at least 2 points".into()));
    }

    let mean = data.matrix().column_mean();
    let mut centered = data.matrix().clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }

    let svd = centered.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    // nalgebra returns singular values in descending order.
    let sigma = &svd.singular_values;
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if total <= f64::MIN_POSITIVE {
        return Err(Error::Numerical(
            "PCA on zero-variance data is degenerate".into(),
        ));
    }

    let target = energy * total * (1.0 - 1e-12);
    let mut cumulative = 0.0;
    let mut r = sigma.len();
    for (i, s) in sigma.iter().enumerate() {
        cumulative += s * s;
        if cumulative >= target {
            r = i + 1;
            break;
        }
    }

    let basis = u.columns(0, r).into_owned();
    let reduced = DataMatrix::new(basis.transpose() * centered)?;
    Ok((reduced, PcaBasis::from_parts(mean, basis)))
}

/// Deterministically partitions a dataset into disjoint in-sample and
/// out-of-sample halves. Both halves keep the parent's class count.
pub fn split(dataset: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    let total = dataset.count();
    if spec.in_sample_count == 0 || spec.in_sample_count >= total {
        return Err(Error::Parameter(format!(
            "in_sample_count must lie in [1, {total}), got {}",
            spec.in_sample_count
        )));
    }

    let mut indices: Vec<usize> = (0..total).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    indices.shuffle(&mut rng);

    let (mut in_idx, mut out_idx): (Vec<usize>, Vec<usize>) = {
        let (a, b) = indices.split_at(spec.in_sample_count);
        (a.to_vec(), b.to_vec())
    };
    // Keep the original point order within each half.
    in_idx.sort_unstable();
    out_idx.sort_unstable();

    let take = |idx: &[usize]| -> Result<LabeledDataset> {
        LabeledDataset::with_class_count(
            dataset.points.select_columns(idx)?,
            idx.iter().map(|&i| dataset.labels[i]).collect(),
            dataset.k,
        )
    };
    Ok((take(&in_idx)?, take(&out_idx)?))
}

/// Samples `per_cluster` points from each of `k` random `dim_sub`-dimensional
/// linear subspaces of `R^dim_ambient`, adds isotropic Gaussian noise of scale
/// `noise_sigma`, and scales every point to unit l2-norm.
pub fn gen_union_of_subspaces(
    k: usize,
    dim_ambient: usize,
    dim_sub: usize,
    per_cluster: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if k == 0 {
        return Err(Error::Parameter("cluster count must be positive".into()));
    }
    if dim_sub == 0 || dim_sub >= dim_ambient {
        return Err(Error::Parameter(format!(
            "subspace dimension must lie in [1, {dim_ambient}), got {dim_sub}"
        )));
    }
    if per_cluster < dim_sub + 1 {
        return Err(Error::Parameter(format!(
            "per_cluster must be at least dim_sub + 1 = {}",
            dim_sub + 1
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Parameter("noise_sigma must be finite and >= 0".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = k * per_cluster;
    let mut data = DMatrix::zeros(dim_ambient, total);
    let mut labels = Vec::with_capacity(total);

    for cluster in 0..k {
        let basis = random_orthonormal(dim_ambient, dim_sub, &mut rng);
        for j in 0..per_cluster {
            let coeffs = DVector::from_fn(dim_sub, |_, _| sample_normal(&mut rng));
            let mut point = &basis * coeffs;
            if noise_sigma > 0.0 {
                for v in point.iter_mut() {
                    *v += noise_sigma * sample_normal(&mut rng);
                }
            }
            let norm = point.norm();
            if norm <= 1e-12 {
                return Err(Error::Numerical(
                    "generated a near-zero point; retry with another seed".into(),
                ));
            }
            point /= norm;
            data.set_column(cluster * per_cluster + j, &point);
            labels.push(cluster);
        }
    }

    LabeledDataset::new(DataMatrix::new(data)?, labels)
}

/// Orthonormal basis of a random `r`-dimensional subspace, via QR of a
/// Gaussian matrix.
fn random_orthonormal(m: usize, r: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let gauss = DMatrix::from_fn(m, r, |_, _| sample_normal(rng));
    let qr = gauss.qr();
    let q = qr.q();
    q.columns(0, r).into_owned()
}

fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Position on the trefoil knot for parameter `t`.
fn trefoil_point(t: f64) -> [f64; 3] {
    [
        t.sin() + 2.0 * (2.0 * t).sin(),
        t.cos() - 2.0 * (2.0 * t).cos(),
        -(3.0 * t).sin(),
    ]
}

/// Maximum distance of the first (larger) knot from its own center:
/// `max ||p(t)|| = 3`.
pub const TREFOIL_RADIUS: f64 = 3.0;

/// Scale of the second knot relative to the first.
///
/// The two curves must stay in general position once columns are centered
/// and normalized: equal-size translated copies are near point-reflections
/// of each other through the midpoint, so their normalized images cross and
/// the l1 graph gains cross-knot edges. Offsetting along the knots' thin
/// axis (z) and shrinking the second knot keeps the two normalized curves
/// in disjoint polar bands around the offset axis.
pub const SECOND_KNOT_SCALE: f64 = 0.25;

/// Samples two trefoil-knot curves in `R^3`: the first in its standard
/// size, the second scaled by [`SECOND_KNOT_SCALE`] and offset by
/// `separation` along the z-axis. Labels are 0 and 1.
pub fn gen_trefoil_knots(
    per_knot: usize,
    separation: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if per_knot < 10 {
        return Err(Error::Parameter(format!(
            "per_knot must be at least 10, got {per_knot}"
        )));
    }
    if !separation.is_finite() || !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Parameter(
            "separation and noise_sigma must be finite, noise_sigma >= 0".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = 2 * per_knot;
    let mut data = DMatrix::zeros(3, total);
    let mut labels = Vec::with_capacity(total);

    for knot in 0..2usize {
        let offset = knot as f64 * separation;
        let scale = if knot == 0 { 1.0 } else { SECOND_KNOT_SCALE };
        for j in 0..per_knot {
            let t = rng.gen::<f64>() * std::f64::consts::TAU;
            let p = trefoil_point(t);
            let col = knot * per_knot + j;
            data[(0, col)] = scale * p[0];
            data[(1, col)] = scale * p[1];
            data[(2, col)] = scale * p[2] + offset;
            if noise_sigma > 0.0 {
                for row in 0..3 {
                    data[(row, col)] += noise_sigma * sample_normal(&mut rng);
                }
            }
            labels.push(knot);
        }
    }

    LabeledDataset::new(DataMatrix::new(data)?, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str, format: CsvFormat) -> Result<LabeledDataset> {
        parse_csv(text, format)
    }

    #[test]
    fn labeled_csv_remaps_labels() {
        let ds = parse("1.0,2.0,5\n3.0,4.0,5\n5.0,6.0,9\n", CsvFormat::Labeled).unwrap();
        assert_eq!(ds.k, 2);
        assert_eq!(ds.labels, vec![0, 0, 1]);
        assert_eq!(ds.points.feature_dim(), 2);
        assert_eq!(ds.points.count(), 3);
        // column-major: first point is the first disk row
        assert_eq!(ds.points.point(0).as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn empty_file_is_a_format_error() {
        match parse("", CsvFormat::Plain) {
            Err(Error::Format { .. }) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn nan_token_is_rejected() {
        match parse("1.0,NaN\n2.0,3.0\n", CsvFormat::Plain) {
            Err(Error::Value(_)) => {}
            other => panic!("expected value error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_are_a_dimension_error() {
        match parse("1.0,2.0\n3.0\n", CsvFormat::Plain) {
            Err(Error::Dimension(msg)) => assert!(msg.contains("line 2")),
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn header_row_is_detected_and_skipped() {
        let ds = parse("x,y,label\n1.0,2.0,7\n3.0,4.0,8\n", CsvFormat::Labeled).unwrap();
        assert_eq!(ds.count(), 2);
        assert_eq!(ds.labels, vec![0, 1]);
    }

    #[test]
    fn pca_full_energy_keeps_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = 6;
        let q = 40;
        let data = DataMatrix::new(DMatrix::from_fn(m, q, |_, _| {
            sample_normal(&mut rng)
        }))
        .unwrap();

        let (reduced, basis) = pca_reduce(&data, 1.0).unwrap();
        assert_eq!(reduced.feature_dim(), m.min(q - 1));

        // reconstruction: basis * reduced + mean == original
        let recon = basis.basis() * reduced.matrix();
        for j in 0..q {
            for i in 0..m {
                let v = recon[(i, j)] + basis.mean()[i];
                assert!((v - data.matrix()[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pca_recovers_planar_rank() {
        // points on a 2-dim plane in R^10: covariance rank is 2 by construction
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let basis = random_orthonormal(10, 2, &mut rng);
        let coeffs = DMatrix::from_fn(2, 50, |_, _| sample_normal(&mut rng));
        let data = DataMatrix::new(&basis * coeffs).unwrap();

        let (reduced, pca) = pca_reduce(&data, 0.98).unwrap();
        assert_eq!(reduced.feature_dim(), 2);
        assert_eq!(pca.reduced_dim(), 2);
    }

    #[test]
    fn pca_rejects_bad_energy() {
        let data = DataMatrix::new(DMatrix::from_fn(2, 3, |i, j| (i + j) as f64)).unwrap();
        assert!(matches!(pca_reduce(&data, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(pca_reduce(&data, 1.5), Err(Error::Parameter(_))));
    }

    #[test]
    fn pca_output_is_decorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = DataMatrix::new(DMatrix::from_fn(5, 60, |_, _| {
            sample_normal(&mut rng)
        }))
        .unwrap();
        let (reduced, _) = pca_reduce(&data, 1.0).unwrap();

        let x = reduced.matrix();
        let cov = x * x.transpose() / (x.ncols() as f64 - 1.0);
        let max_diag = (0..cov.nrows()).map(|i| cov[(i, i)]).fold(0.0, f64::max);
        for i in 0..cov.nrows() {
            for j in 0..cov.ncols() {
                if i != j {
                    assert!(cov[(i, j)].abs() <= 1e-8 * max_diag);
                }
            }
        }
    }

    #[test]
    fn split_is_a_deterministic_partition() {
        let ds = gen_union_of_subspaces(2, 6, 2, 5, 0.0, 42).unwrap();
        let spec = SplitSpec { in_sample_count: 5, seed: 9 };
        let (a1, b1) = split(&ds, &spec).unwrap();
        let (a2, b2) = split(&ds, &spec).unwrap();

        assert_eq!(a1.count(), 5);
        assert_eq!(b1.count(), 5);
        assert_eq!(a1.points, a2.points);
        assert_eq!(b1.points, b2.points);
        assert_eq!(a1.labels, a2.labels);

        // disjoint union equals the input as a multiset of columns
        let mut seen = vec![0usize; ds.count()];
        for half in [&a1, &b1] {
            for j in 0..half.count() {
                let col = half.points.point(j);
                let pos = (0..ds.count())
                    .find(|&i| ds.points.point(i) == col)
                    .expect("column must come from the input");
                seen[pos] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn split_boundary_leaves_one_point() {
        let ds = gen_union_of_subspaces(1, 5, 2, 10, 0.0, 1).unwrap();
        let spec = SplitSpec { in_sample_count: 9, seed: 0 };
        let (a, b) = split(&ds, &spec).unwrap();
        assert_eq!(a.count(), 9);
        assert_eq!(b.count(), 1);

        let bad = SplitSpec { in_sample_count: 10, seed: 0 };
        assert!(matches!(split(&ds, &bad), Err(Error::Parameter(_))));
    }

    #[test]
    fn subspace_generator_has_expected_rank() {
        let k = 3;
        let r = 4;
        let ds = gen_union_of_subspaces(k, 30, r, 50, 0.0, 5).unwrap();
        assert_eq!(ds.count(), 150);

        for cluster in 0..k {
            let idx: Vec<usize> = (0..ds.count())
                .filter(|&i| ds.labels[i] == cluster)
                .collect();
            let block = ds.points.select_columns(&idx).unwrap();
            let svd = block.matrix().clone().svd(false, false);
            let sv = svd.singular_values;
            // singular value r+1 vanishes: each block lies in an r-dim subspace
            assert!(sv[r] < 1e-10 * sv[0], "sigma_{} = {}", r + 1, sv[r]);
            assert!(sv[r - 1] > 1e-6 * sv[0]);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let a = gen_union_of_subspaces(2, 8, 3, 6, 0.1, 77).unwrap();
        let b = gen_union_of_subspaces(2, 8, 3, 6, 0.1, 77).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.labels, b.labels);

        let t1 = gen_trefoil_knots(12, 5.0, 0.05, 13).unwrap();
        let t2 = gen_trefoil_knots(12, 5.0, 0.05, 13).unwrap();
        assert_eq!(t1.points, t2.points);
    }

    #[test]
    fn subspace_generator_rejects_bad_dims() {
        assert!(matches!(
            gen_union_of_subspaces(2, 4, 4, 10, 0.0, 0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            gen_union_of_subspaces(2, 4, 2, 2, 0.0, 0),
            Err(Error::Parameter(_))
        ));
    }

    // Points on the trefoil satisfy z^2 + ((5 - x^2 - y^2)/4)^2 = 1: derived
    // from the parametrization via cos(3t) = (5 - x^2 - y^2)/4, z = -sin(3t).
    // Knot 1 is checked after undoing its offset and scale.
    #[test]
    fn noiseless_trefoil_points_lie_on_the_curve() {
        let sep = 11.0;
        let ds = gen_trefoil_knots(40, sep, 0.0, 3).unwrap();
        for j in 0..ds.count() {
            let mut p = ds.points.point(j);
            if ds.labels[j] == 1 {
                p[2] -= sep;
                p /= SECOND_KNOT_SCALE;
            }
            let c3t = (5.0 - p[0] * p[0] - p[1] * p[1]) / 4.0;
            let residual = (p[2] * p[2] + c3t * c3t - 1.0).abs();
            assert!(residual < 1e-12, "off-curve point, residual {residual}");
        }
    }

    #[test]
    fn trefoil_labels_are_balanced() {
        let ds = gen_trefoil_knots(25, 4.0, 0.0, 8).unwrap();
        assert_eq!(ds.labels.iter().filter(|&&l| l == 0).count(), 25);
        assert_eq!(ds.labels.iter().filter(|&&l| l == 1).count(), 25);
        assert!(matches!(
            gen_trefoil_knots(9, 4.0, 0.0, 8),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn widely_separated_knots_are_farther_apart_than_their_sampling_gaps() {
        let ds = gen_trefoil_knots(60, 30.0, 0.0, 21).unwrap();
        let points: Vec<DVector<f64>> = (0..ds.count()).map(|i| ds.points.point(i)).collect();

        let mut min_inter = f64::INFINITY;
        let mut max_intra_nn = 0.0f64;
        for i in 0..points.len() {
            let mut nn = f64::INFINITY;
            for j in 0..points.len() {
                if i == j {
                    continue;
                }
                let d = (&points[i] - &points[j]).norm();
                if ds.labels[i] == ds.labels[j] {
                    nn = nn.min(d);
                } else {
                    min_inter = min_inter.min(d);
                }
            }
            max_intra_nn = max_intra_nn.max(nn);
        }
        assert!(
            min_inter > max_intra_nn,
            "inter {min_inter} vs intra-NN {max_intra_nn}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn split_partitions_any_dataset(total in 4usize..40, seed in any::<u64>(), frac in 1usize..99) {
            let ds = gen_union_of_subspaces(1, 5, 2, total, 0.0, seed).unwrap();
            let in_count = (ds.count() * frac / 100).clamp(1, ds.count() - 1);
            let (a, b) = split(&ds, &SplitSpec { in_sample_count: in_count, seed }).unwrap();
            prop_assert_eq!(a.count() + b.count(), ds.count());
            prop_assert_eq!(a.count(), in_count);
        }

        #[test]
        fn pca_retains_requested_variance(seed in any::<u64>(), energy in 0.5f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = DataMatrix::new(DMatrix::from_fn(6, 30, |_, _| {
                sample_normal(&mut rng)
            })).unwrap();

            let total: f64 = {
                let mean = data.matrix().column_mean();
                let mut c = data.matrix().clone();
                for mut col in c.column_iter_mut() { col -= &mean; }
                c.iter().map(|v| v * v).sum()
            };
            let (reduced, _) = pca_reduce(&data, energy).unwrap();
            let kept: f64 = reduced.matrix().iter().map(|v| v * v).sum();
            prop_assert!(kept >= energy * total * (1.0 - 1e-10));
        }
    }
}
