//! In-sample clustering: eigenvectors of the normalized Laplacian, then
//! k-means over their (row-normalized) rows.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::graph::{build_affinity, build_codes, AffinityGraph, SparseCodeMatrix};
use crate::l1solver::L1Config;

/// Eigenvectors of the k smallest Laplacian eigenvalues, plus the
/// row-normalized copy fed to k-means.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// p x k, orthonormal columns, ordered by ascending eigenvalue.
    vectors: DMatrix<f64>,
    /// `vectors` with every row scaled to unit norm; rows with norm below
    /// 1e-12 are left as they are.
    row_normalized: DMatrix<f64>,
    /// Ascending, length k.
    eigenvalues: DVector<f64>,
}

impl SpectralEmbedding {
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn row_normalized(&self) -> &DMatrix<f64> {
        &self.row_normalized
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }
}

/// k-means options. `restarts` independent runs are performed and the one
/// with the lowest inertia wins.
#[derive(Debug, Clone, Copy)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl KMeansConfig {
    /// Defaults: 100 Lloyd iterations, 10 restarts.
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iters: 100,
            restarts: 10,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if self.max_iters == 0 || self.restarts == 0 {
            return Err(Error::Parameter(
                "max_iters and restarts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Cluster labels plus the total within-cluster squared distance.
#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub inertia: f64,
}

impl ClusterAssignment {
    /// Number of distinct clusters, `max(labels) + 1`.
    pub fn cluster_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }
}

/// Eigenvectors of the `k` smallest eigenvalues of the normalized Laplacian.
pub fn spectral_embed(graph: &AffinityGraph, k: usize) -> Result<SpectralEmbedding> {
    let p = graph.vertex_count();
    if k == 0 || k > p {
        return Err(Error::Parameter(format!(
            "embedding size k must lie in [1, {p}], got {k}"
        )));
    }

    let eig = graph.normalized_laplacian().clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "eigendecomposition of the Laplacian produced non-finite values".into(),
        ));
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });

    let mut vectors = DMatrix::zeros(p, k);
    let mut eigenvalues = DVector::zeros(k);
    for (slot, &idx) in order.iter().take(k).enumerate() {
        vectors.set_column(slot, &eig.eigenvectors.column(idx));
        eigenvalues[slot] = eig.eigenvalues[idx];
    }

    let mut row_normalized = vectors.clone();
    for mut row in row_normalized.row_iter_mut() {
        let norm = row.norm();
        if norm > 1e-12 {
            row /= norm;
        }
    }

    Ok(SpectralEmbedding {
        vectors,
        row_normalized,
        eigenvalues,
    })
}

/// Lloyd's algorithm with k-means++ seeding over the rows of `points`,
/// best of `config.restarts` runs. Deterministic for a fixed seed. An
/// empty cluster is re-seeded from the point farthest from its centroid.
pub fn kmeans(points: &DMatrix<f64>, config: &KMeansConfig) -> Result<ClusterAssignment> {
    config.validate()?;
    let n = points.nrows();
    if n < config.k {
        return Err(Error::Parameter(format!(
            "cannot form {} clusters from {n} points",
            config.k
        )));
    }

    let mut best: Option<ClusterAssignment> = None;
    for restart in 0..config.restarts {
        // distinct, reproducible stream per restart
        let mut rng =
            ChaCha8Rng::seed_from_u64(config.seed ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let run = lloyd_run(points, config, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn lloyd_run(points: &DMatrix<f64>, config: &KMeansConfig, rng: &mut ChaCha8Rng) -> ClusterAssignment {
    let n = points.nrows();
    let k = config.k;
    let mut centroids = plus_plus_seeds(points, k, rng);
    let mut labels = vec![0usize; n];

    for _ in 0..config.max_iters {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let nearest = nearest_centroid(points, i, &centroids);
            if *label != nearest {
                *label = nearest;
                changed = true;
            }
        }

        // means of each cluster; empty clusters steal the farthest point
        let mut counts = vec![0usize; k];
        let mut sums: DMatrix<f64> = DMatrix::zeros(k, points.ncols());
        for i in 0..n {
            counts[labels[i]] += 1;
            for j in 0..points.ncols() {
                sums[(labels[i], j)] += points[(i, j)];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..points.ncols() {
                    centroids[(c, j)] = sums[(c, j)] / counts[c] as f64;
                }
            } else {
                let far = farthest_point(points, &labels, &centroids);
                centroids.set_row(c, &points.row(far));
                labels[far] = c;
                changed = true;
            }
        }

        if !changed {
            break;
        }
    }

    // final tightening pass so labels match the last centroids
    let mut inertia = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let nearest = nearest_centroid(points, i, &centroids);
        *label = nearest;
        inertia += row_distance_sq(points, i, &centroids, nearest);
    }
    ClusterAssignment { labels, inertia }
}

/// k-means++ seeding: first centroid uniform, then proportional to the
/// squared distance from the nearest chosen centroid.
fn plus_plus_seeds(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = points.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.gen_range(0..n));

    let mut dist_sq: Vec<f64> = (0..n)
        .map(|i| point_distance_sq(points, i, chosen[0]))
        .collect();

    while chosen.len() < k {
        let total: f64 = dist_sq.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut picked = n - 1;
            for (i, &d) in dist_sq.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    picked = i;
                    break;
                }
            }
            picked
        } else {
            // all remaining points coincide with a centroid
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, d) in dist_sq.iter_mut().enumerate() {
            *d = d.min(point_distance_sq(points, i, next));
        }
    }

    let mut centroids = DMatrix::zeros(k, points.ncols());
    for (c, &i) in chosen.iter().enumerate() {
        centroids.set_row(c, &points.row(i));
    }
    centroids
}

fn point_distance_sq(points: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    (0..points.ncols())
        .map(|j| {
            let d = points[(a, j)] - points[(b, j)];
            d * d
        })
        .sum()
}

fn row_distance_sq(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    (0..points.ncols())
        .map(|j| {
            let d = points[(i, j)] - centroids[(c, j)];
            d * d
        })
        .sum()
}

fn nearest_centroid(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for c in 0..centroids.nrows() {
        let d = row_distance_sq(points, i, centroids, c);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn farthest_point(points: &DMatrix<f64>, labels: &[usize], centroids: &DMatrix<f64>) -> usize {
    let mut far = 0;
    let mut far_d = -1.0;
    for (i, &label) in labels.iter().enumerate() {
        let d = row_distance_sq(points, i, centroids, label);
        if d > far_d {
            far_d = d;
            far = i;
        }
    }
    far
}

/// The in-sample half of the pipeline: sparse codes, affinity graph,
/// spectral embedding and k-means labels, with all intermediates returned
/// for the projection stage.
pub fn cluster_in_sample(
    y: &DataMatrix,
    l1: &L1Config,
    km: &KMeansConfig,
) -> Result<(ClusterAssignment, SparseCodeMatrix, AffinityGraph, SpectralEmbedding)> {
    let codes = build_codes(y, l1)?;
    let graph = build_affinity(&codes);
    let embedding = spectral_embed(&graph, km.k)?;
    let assignment = kmeans(embedding.row_normalized(), km)?;
    Ok((assignment, codes, graph, embedding))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::gen_union_of_subspaces;
    use crate::graph::AffinityGraph;
    use crate::metrics;

    fn clique_pair_affinity(sizes: [usize; 2]) -> AffinityGraph {
        let p = sizes[0] + sizes[1];
        let mut a = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                let same = (i < sizes[0]) == (j < sizes[0]);
                if i != j && same {
                    a[(i, j)] = 1.0;
                }
            }
        }
        AffinityGraph::from_affinity(a).unwrap()
    }

    #[test]
    fn two_components_give_two_zero_eigenvalues() {
        let g = clique_pair_affinity([4, 3]);
        let emb = spectral_embed(&g, 2).unwrap();
        assert!(emb.eigenvalues()[0].abs() < 1e-8);
        assert!(emb.eigenvalues()[1].abs() < 1e-8);

        // after row normalization rows agree within each component
        let rows = emb.row_normalized();
        for block in [0..4usize, 4..7usize] {
            let first = block.start;
            for i in block {
                for j in 0..2 {
                    assert!((rows[(i, j)] - rows[(first, j)]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn full_eigenbasis_is_orthogonal() {
        let g = clique_pair_affinity([3, 3]);
        let emb = spectral_embed(&g, 6).unwrap();
        let v = emb.vectors();
        let gram = v.transpose() * v;
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn eigenpairs_satisfy_the_laplacian() {
        let g = clique_pair_affinity([4, 5]);
        let emb = spectral_embed(&g, 4).unwrap();
        let l = g.normalized_laplacian();
        for j in 0..4 {
            let v = emb.vectors().column(j);
            let residual = (l * v) - emb.eigenvalues()[j] * v;
            assert!(residual.norm() < 1e-7);
        }
    }

    #[test]
    fn single_edge_kernel_vector_is_uniform() {
        // affinity [[0,1],[1,0]]: Laplacian [[1,-1],[-1,1]], kernel (1,1)/sqrt(2)
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let g = AffinityGraph::from_affinity(a).unwrap();
        let emb = spectral_embed(&g, 1).unwrap();
        assert!(emb.eigenvalues()[0].abs() < 1e-12);
        let expected = 1.0 / 2.0f64.sqrt();
        assert!((emb.vectors()[(0, 0)].abs() - expected).abs() < 1e-8);
        assert!((emb.vectors()[(1, 0)].abs() - expected).abs() < 1e-8);
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        let g = clique_pair_affinity([2, 2]);
        assert!(matches!(spectral_embed(&g, 0), Err(Error::Parameter(_))));
        assert!(matches!(spectral_embed(&g, 5), Err(Error::Parameter(_))));
    }

    #[test]
    fn single_cluster_centroid_is_the_mean() {
        let pts = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let got = kmeans(&pts, &KMeansConfig::new(1, 0)).unwrap();
        assert!(got.labels.iter().all(|&l| l == 0));
        // inertia = sum of squared distances to the mean (0.5, 0.5)
        assert!((got.inertia - 4.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn well_separated_groups_are_split_perfectly() {
        let mut rows = Vec::new();
        for i in 0..6 {
            rows.push(0.01 * i as f64);
            rows.push(0.0);
        }
        for i in 0..6 {
            rows.push(100.0 + 0.01 * i as f64);
            rows.push(5.0);
        }
        let pts = DMatrix::from_row_slice(12, 2, &rows);
        let got = kmeans(&pts, &KMeansConfig::new(2, 7)).unwrap();

        let first = got.labels[0];
        assert!(got.labels[..6].iter().all(|&l| l == first));
        assert!(got.labels[6..].iter().all(|&l| l == 1 - first));

        // inertia equals the sum of the two within-group scatters
        let scatter = |range: std::ops::Range<usize>| -> f64 {
            let n = range.len() as f64;
            let mean: Vec<f64> = (0..2)
                .map(|j| range.clone().map(|i| pts[(i, j)]).sum::<f64>() / n)
                .collect();
            range
                .map(|i| (0..2).map(|j| (pts[(i, j)] - mean[j]).powi(2)).sum::<f64>())
                .sum()
        };
        let expected = scatter(0..6) + scatter(6..12);
        assert!((got.inertia - expected).abs() < 1e-9);
    }

    #[test]
    fn distinct_points_get_their_own_clusters() {
        let pts = DMatrix::from_row_slice(3, 1, &[0.0, 10.0, 20.0]);
        let got = kmeans(&pts, &KMeansConfig::new(3, 1)).unwrap();
        assert!(got.inertia < 1e-12);
        let mut sorted = got.labels.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn kmeans_is_deterministic_per_seed() {
        let ds = gen_union_of_subspaces(3, 8, 2, 20, 0.05, 5).unwrap();
        let pts = ds.points.matrix().transpose();
        let a = kmeans(&pts, &KMeansConfig::new(3, 11)).unwrap();
        let b = kmeans(&pts, &KMeansConfig::new(3, 11)).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.inertia, b.inertia);
        assert!(
            (metrics::accuracy(&a.labels, &b.labels).unwrap() - 1.0).abs() < 1e-12
        );
    }

    #[test]
    fn end_to_end_subspace_clustering_recovers_ground_truth() {
        let ds = gen_union_of_subspaces(3, 30, 4, 50, 0.0, 2).unwrap();
        let l1 = L1Config::with_default_iters(1e-6, 1e-3, ds.count()).unwrap();
        let km = KMeansConfig::new(3, 0);
        let (assignment, _, _, _) = cluster_in_sample(&ds.points, &l1, &km).unwrap();
        let acc = metrics::accuracy(&assignment.labels, &ds.labels).unwrap();
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn single_cluster_pipeline_degenerates_gracefully() {
        let ds = gen_union_of_subspaces(1, 10, 3, 12, 0.0, 9).unwrap();
        let l1 = L1Config::with_default_iters(1e-6, 1e-3, ds.count()).unwrap();
        let km = KMeansConfig::new(1, 0);
        let (assignment, _, _, _) = cluster_in_sample(&ds.points, &l1, &km).unwrap();
        assert!(assignment.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn duplicated_clouds_reach_high_nmi() {
        let ds = gen_union_of_subspaces(2, 16, 3, 40, 0.0, 31).unwrap();
        let l1 = L1Config::with_default_iters(1e-6, 1e-3, ds.count()).unwrap();
        let km = KMeansConfig::new(2, 3);
        let (assignment, _, _, _) = cluster_in_sample(&ds.points, &l1, &km).unwrap();
        let nmi = metrics::nmi(&assignment.labels, &ds.labels).unwrap();
        assert!(nmi >= 0.9, "nmi {nmi}");
    }

    #[test]
    fn lloyd_inertia_never_increases() {
        // truncating the same run after t iterations gives a non-increasing
        // inertia sequence in t
        let ds = gen_union_of_subspaces(3, 6, 2, 25, 0.15, 77).unwrap();
        let pts = ds.points.matrix().transpose();
        let mut previous = f64::INFINITY;
        for iters in 1..=12 {
            let got = kmeans(
                &pts,
                &KMeansConfig {
                    k: 3,
                    max_iters: iters,
                    restarts: 1,
                    seed: 3,
                },
            )
            .unwrap();
            assert!(
                got.inertia <= previous + 1e-12,
                "inertia grew at iteration {iters}: {} -> {}",
                previous,
                got.inertia
            );
            previous = got.inertia;
        }

        // more restarts can only improve the best inertia
        let single = kmeans(&pts, &KMeansConfig { k: 3, max_iters: 100, restarts: 1, seed: 3 }).unwrap();
        let multi = kmeans(&pts, &KMeansConfig { k: 3, max_iters: 100, restarts: 8, seed: 3 }).unwrap();
        assert!(multi.inertia <= single.inertia + 1e-12);
    }
}
