//! Clustering quality metrics: best-map Accuracy via optimal assignment,
//! and Normalized Mutual Information.
//!
//! Both metrics compare two labelings of the same points, are invariant
//! under renaming of the cluster ids on either side, and live in [0, 1]
//! with 1 meaning the partitions agree up to relabeling.

use crate::error::{Error, Result};

/// Joint counts of (predicted cluster, true cluster) pairs.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    /// `counts[i][j]` = points with predicted label i and true label j.
    counts: Vec<Vec<usize>>,
    n: usize,
}

impl ContingencyTable {
    pub fn from_labels(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::Dimension(format!(
                "label vectors differ in length: {} vs {}",
                pred.len(),
                truth.len()
            )));
        }
        if pred.is_empty() {
            return Err(Error::Dimension("label vectors are empty".into()));
        }
        let k_pred = pred.iter().max().unwrap() + 1;
        let k_true = truth.iter().max().unwrap() + 1;
        let mut counts = vec![vec![0usize; k_true]; k_pred];
        for (&p, &t) in pred.iter().zip(truth) {
            counts[p][t] += 1;
        }
        Ok(Self {
            counts,
            n: pred.len(),
        })
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.n
    }

    fn pred_marginals(&self) -> Vec<usize> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    fn true_marginals(&self) -> Vec<usize> {
        let k_true = self.counts[0].len();
        (0..k_true)
            .map(|j| self.counts.iter().map(|row| row[j]).sum())
            .collect()
    }
}

/// Best-map accuracy: the fraction of points that agree under the optimal
/// one-to-one matching of predicted clusters onto true clusters.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::from_labels(pred, truth)?;
    let k_pred = table.counts.len();
    let k_true = table.counts[0].len();
    let size = k_pred.max(k_true);

    // pad to square and convert the maximization into a min-cost assignment
    let max_count = table
        .counts
        .iter()
        .flat_map(|row| row.iter())
        .copied()
        .max()
        .unwrap_or(0) as i64;
    let mut cost = vec![vec![max_count; size]; size];
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            cost[i][j] = max_count - c as i64;
        }
    }

    let assignment = hungarian_min(&cost);
    let matched: usize = assignment
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < k_pred && j < k_true)
        .map(|(i, &j)| table.counts[i][j])
        .sum();
    Ok(matched as f64 / table.n as f64)
}

/// Normalized Mutual Information with geometric-mean normalization
/// `I(pred; truth) / sqrt(H(pred) H(truth))`, natural logarithms.
/// Two single-cluster partitions score 1; if exactly one side has zero
/// entropy the score is 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::from_labels(pred, truth)?;
    let n = table.n as f64;
    let pred_m = table.pred_marginals();
    let true_m = table.true_marginals();

    let entropy = |marginals: &[usize]| -> f64 {
        marginals
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let h_pred = entropy(&pred_m);
    let h_true = entropy(&true_m);

    if h_pred == 0.0 && h_true == 0.0 {
        return Ok(1.0);
    }
    if h_pred == 0.0 || h_true == 0.0 {
        return Ok(0.0);
    }

    let mut info = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let joint = c as f64 / n;
                info += joint * ((n * c as f64) / (pred_m[i] as f64 * true_m[j] as f64)).ln();
            }
        }
    }

    Ok((info / (h_pred * h_true).sqrt()).clamp(0.0, 1.0))
}

/// Hungarian algorithm (Kuhn-Munkres with potentials) for a square cost
/// matrix; returns the column assigned to each row. O(n^3), deterministic.
fn hungarian_min(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    const INF: i64 = i64::MAX / 4;

    // 1-based potentials and matching, column 0 is the virtual source
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];

        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }

        // augment along the found path
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if row_of_col[j] > 0 {
            assignment[row_of_col[j] - 1] = j - 1;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_labelings_score_one() {
        let labels = vec![0, 0, 1, 1];
        assert_eq!(accuracy(&labels, &labels).unwrap(), 1.0);
        assert_eq!(nmi(&labels, &labels).unwrap(), 1.0);
    }

    #[test]
    fn relabeling_scores_one() {
        let pred = vec![1, 1, 0, 0];
        let truth = vec![0, 0, 1, 1];
        assert_eq!(accuracy(&pred, &truth).unwrap(), 1.0);
        assert!((nmi(&pred, &truth).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_matching_scores_half() {
        // both bijections match exactly 2 of the 4 points
        let pred = vec![0, 1, 0, 1];
        let truth = vec![0, 0, 1, 1];
        assert_eq!(accuracy(&pred, &truth).unwrap(), 0.5);
    }

    #[test]
    fn independent_partitions_have_zero_information() {
        let pred = vec![0, 0, 1, 1];
        let truth = vec![0, 1, 0, 1];
        assert_eq!(nmi(&pred, &truth).unwrap(), 0.0);
    }

    #[test]
    fn nmi_matches_the_frozen_oracle_value() {
        // contingency [[2,1],[0,1]]; value computed independently from the
        // definition: I / sqrt(Hp * Ht)
        let pred = vec![0, 0, 0, 1];
        let truth = vec![0, 0, 1, 1];
        let got = nmi(&pred, &truth).unwrap();
        assert!((got - 0.345_592_029_944_211_3).abs() < 1e-12, "nmi {got}");
    }

    #[test]
    fn single_cluster_conventions() {
        assert_eq!(nmi(&[0, 0, 0], &[0, 0, 0]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(nmi(&[0, 1, 2], &[0, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(matches!(
            accuracy(&[0, 1], &[0, 1, 1]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(nmi(&[], &[]), Err(Error::Dimension(_))));
    }

    #[test]
    fn rectangular_tables_are_handled() {
        // more predicted clusters than true ones and vice versa
        let pred = vec![0, 1, 2, 3];
        let truth = vec![0, 0, 1, 1];
        let acc = accuracy(&pred, &truth).unwrap();
        assert!((acc - 0.5).abs() < 1e-12);

        let acc_t = accuracy(&truth, &pred).unwrap();
        assert!((acc_t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_one_cluster_prediction_scores_the_largest_class() {
        let truth = vec![0, 0, 0, 1, 1, 2];
        let pred = vec![0; 6];
        let acc = accuracy(&pred, &truth).unwrap();
        assert!((acc - 3.0 / 6.0).abs() < 1e-12);
    }

    fn permute(labels: &[usize], perm: &[usize]) -> Vec<usize> {
        labels.iter().map(|&l| perm[l]).collect()
    }

    /// Exhaustive best-map: max matched count over all bijections of the
    /// padded square table.
    fn brute_force_accuracy(pred: &[usize], truth: &[usize]) -> f64 {
        let table = ContingencyTable::from_labels(pred, truth).unwrap();
        let k_pred = table.counts().len();
        let k_true = table.counts()[0].len();
        let size = k_pred.max(k_true);

        let mut cols: Vec<usize> = (0..size).collect();
        let mut best = 0usize;
        permute_all(&mut cols, 0, &mut |assignment| {
            let matched: usize = assignment
                .iter()
                .enumerate()
                .filter(|&(i, &j)| i < k_pred && j < k_true)
                .map(|(i, &j)| table.counts()[i][j])
                .sum();
            best = best.max(matched);
        });
        best as f64 / pred.len() as f64
    }

    fn permute_all(items: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
        if start == items.len() {
            visit(items);
            return;
        }
        for i in start..items.len() {
            items.swap(start, i);
            permute_all(items, start + 1, visit);
            items.swap(start, i);
        }
    }

    #[test]
    fn hungarian_matches_exhaustive_search() {
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move |bound: usize| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % bound as u64) as usize
        };

        for _ in 0..60 {
            let n = 5 + next(40);
            let kp = 1 + next(5);
            let kt = 1 + next(5);
            let pred: Vec<usize> = (0..n).map(|_| next(kp)).collect();
            let truth: Vec<usize> = (0..n).map(|_| next(kt)).collect();

            let fast = accuracy(&pred, &truth).unwrap();
            let slow = brute_force_accuracy(&pred, &truth);
            assert!(
                (fast - slow).abs() < 1e-12,
                "hungarian {fast} vs exhaustive {slow} on pred={pred:?} truth={truth:?}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn metrics_are_invariant_under_label_renaming(
            labels in prop::collection::vec(0usize..4, 2..40),
            other in prop::collection::vec(0usize..4, 2..40),
            shift in 1usize..4,
        ) {
            let n = labels.len().min(other.len());
            let pred = &labels[..n];
            let truth = &other[..n];

            // a cyclic permutation of the predicted names
            let perm: Vec<usize> = (0..4).map(|i| (i + shift) % 4).collect();
            let renamed = permute(pred, &perm);

            let acc_a = accuracy(pred, truth).unwrap();
            let acc_b = accuracy(&renamed, truth).unwrap();
            prop_assert!((acc_a - acc_b).abs() < 1e-12);

            let nmi_a = nmi(pred, truth).unwrap();
            let nmi_b = nmi(&renamed, truth).unwrap();
            prop_assert!((nmi_a - nmi_b).abs() < 1e-12);
        }

        #[test]
        fn metrics_are_symmetric_and_bounded(
            labels in prop::collection::vec(0usize..5, 2..40),
            other in prop::collection::vec(0usize..5, 2..40),
        ) {
            let n = labels.len().min(other.len());
            let pred = &labels[..n];
            let truth = &other[..n];

            let acc = accuracy(pred, truth).unwrap();
            prop_assert!((0.0..=1.0).contains(&acc));
            prop_assert!((acc - accuracy(truth, pred).unwrap()).abs() < 1e-12);

            let score = nmi(pred, truth).unwrap();
            prop_assert!((0.0..=1.0).contains(&score));
            prop_assert!((score - nmi(truth, pred).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn identical_up_to_relabeling_scores_one(
            labels in prop::collection::vec(0usize..4, 2..40),
            shift in 1usize..4,
        ) {
            let perm: Vec<usize> = (0..4).map(|i| (i + shift) % 4).collect();
            let renamed = permute(&labels, &perm);
            prop_assert!((accuracy(&renamed, &labels).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((nmi(&renamed, &labels).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
