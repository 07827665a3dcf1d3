//! Per-point l1 sparse coding.
//!
//! [`solve_l1`] traces the LASSO regularization path with the homotopy
//! method: starting from the empty model at `lambda_max = ||D^T y||_inf`,
//! the solution moves piecewise-linearly in the regularization weight, and
//! one coordinate joins or leaves the active set at every breakpoint. The
//! path stops at the first point where the residual drops below the error
//! tolerance `delta`, or when the weight reaches the sparsity parameter
//! `lambda`, whichever comes first.
//!
//! [`lp_oracle`] solves the equality-constrained basis-pursuit program
//! exactly via variable splitting and a dense two-phase simplex. It shares
//! no code with the homotopy path and exists to verify it on small
//! instances.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Diagonal ridge applied when an active-set Gram matrix is rank deficient.
const ACTIVE_SET_RIDGE: f64 = 1e-12;

/// Parameters of the l1 solver.
#[derive(Debug, Clone, Copy)]
pub struct L1Config {
    /// Sparsity parameter: the path terminates once the regularization
    /// weight reaches this value.
    pub lambda: f64,
    /// Error tolerance on the l2 residual norm.
    pub delta: f64,
    /// Cap on homotopy breakpoints.
    pub max_iters: usize,
}

impl L1Config {
    pub fn new(lambda: f64, delta: f64, max_iters: usize) -> Result<Self> {
        let config = Self {
            lambda,
            delta,
            max_iters,
        };
        config.validate()?;
        Ok(config)
    }

    /// Config with the default iteration cap of `4 * dict_size`.
    pub fn with_default_iters(lambda: f64, delta: f64, dict_size: usize) -> Result<Self> {
        Self::new(lambda, delta, (4 * dict_size).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Parameter(format!(
                "delta must be nonnegative and finite, got {}",
                self.delta
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Solution of one l1 sparse-coding problem.
#[derive(Debug, Clone)]
pub struct SparseCode {
    pub coefficients: DVector<f64>,
    /// `||y - D c||_2`, recomputed from the returned coefficients.
    pub residual_norm: f64,
    /// Homotopy breakpoints processed.
    pub iterations: usize,
    /// Whether the residual tolerance `delta` was met strictly.
    pub converged: bool,
}

/// One breakpoint of the traced path; only tests read it.
#[derive(Debug, Clone, Copy)]
#[allow(dead_code)]
pub(crate) struct PathPoint {
    pub lambda: f64,
    pub l1_norm: f64,
    pub residual_norm: f64,
}

enum Event {
    /// Path reached the terminal regularization weight.
    Terminal,
    /// Inactive coordinate joins with the given sign.
    Add(usize, f64),
    /// Active-set position leaves (coefficient crossed zero).
    Remove(usize),
}

/// Minimizes `||c||_1` subject to `||y - D c||_2 < delta`, by walking the
/// LASSO path downward from `lambda_max` until the residual tolerance or
/// the terminal weight `config.lambda` is hit. Ties in breakpoint selection
/// resolve to the lowest coordinate index.
pub fn solve_l1(y: &DVector<f64>, dictionary: &DMatrix<f64>, config: &L1Config) -> Result<SparseCode> {
    Ok(solve_l1_traced(y, dictionary, config)?.0)
}

pub(crate) fn solve_l1_traced(
    y: &DVector<f64>,
    dictionary: &DMatrix<f64>,
    config: &L1Config,
) -> Result<(SparseCode, Vec<PathPoint>)> {
    config.validate()?;
    let m = dictionary.nrows();
    let p = dictionary.ncols();
    if m == 0 || p == 0 {
        return Err(Error::Dimension("dictionary must be at least 1x1".into()));
    }
    if y.len() != m {
        return Err(Error::Dimension(format!(
            "y has {} rows, dictionary has {m}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) || dictionary.iter().any(|v| !v.is_finite()) {
        return Err(Error::Value("solve_l1 inputs must be finite".into()));
    }

    let mut trace = Vec::new();
    let y_norm = y.norm();

    // The zero vector is l1-minimal whenever it is feasible.
    if y_norm < config.delta || y_norm == 0.0 {
        let code = SparseCode {
            coefficients: DVector::zeros(p),
            residual_norm: y_norm,
            iterations: 0,
            converged: y_norm < config.delta,
        };
        return Ok((code, trace));
    }

    let correlations = dictionary.transpose() * y;
    let (first, lambda_max) = argmax_abs(&correlations);
    if lambda_max <= config.lambda {
        let code = SparseCode {
            coefficients: DVector::zeros(p),
            residual_norm: y_norm,
            iterations: 0,
            converged: false,
        };
        return Ok((code, trace));
    }

    // Aim slightly inside the delta-ball so that the recomputed residual
    // satisfies the strict inequality of the feasibility contract.
    let delta_target = config.delta * (1.0 - 1e-9);
    let target_sq = delta_target * delta_target;

    let mut lam = lambda_max;
    let mut active: Vec<usize> = vec![first];
    let mut signs: Vec<f64> = vec![correlations[first].signum()];
    let mut is_active = vec![false; p];
    is_active[first] = true;
    let mut iterations = 0usize;

    loop {
        iterations += 1;
        let width = active.len();
        let d_active = dictionary.select_columns(active.iter());
        let gram = d_active.transpose() * &d_active;
        let rhs = d_active.transpose() * y;
        let sign_vec = DVector::from_iterator(width, signs.iter().copied());

        let chol = cholesky_with_ridge(gram)?;
        // On the current segment: c_A(t) = u - t v, r(t) = r1 + t r2.
        let u = chol.solve(&rhs);
        let v = chol.solve(&sign_vec);
        let r1 = y - &d_active * &u;
        let r2 = &d_active * &v;
        let q0 = r1.norm_squared();
        let q1 = 2.0 * r1.dot(&r2);
        let q2 = r2.norm_squared();
        let residual_at = |t: f64| (q2 * t * t + q1 * t + q0).max(0.0).sqrt();
        let l1_at = |t: f64| -> f64 { (0..width).map(|i| (u[i] - t * v[i]).abs()).sum() };

        trace.push(PathPoint {
            lambda: lam,
            l1_norm: l1_at(lam),
            residual_norm: residual_at(lam),
        });

        // Next breakpoint: the largest valid event weight below `lam`.
        // Removals are scanned first so an exact tie resolves to removal.
        let guard = lam * (1.0 - 1e-12);
        let mut next_lam = config.lambda;
        let mut event = Event::Terminal;

        for pos in 0..width {
            if v[pos].abs() > 1e-14 {
                let t = u[pos] / v[pos];
                if t > next_lam && t < guard {
                    next_lam = t;
                    event = Event::Remove(pos);
                }
            }
        }

        let inactive_r1 = dictionary.transpose() * &r1;
        let inactive_r2 = dictionary.transpose() * &r2;
        for j in 0..p {
            if is_active[j] {
                continue;
            }
            let aj = inactive_r1[j];
            let bj = inactive_r2[j];
            // correlation of j along the segment: phi_j(t) = aj + t bj;
            // activation when |phi_j(t)| = t
            for (numer, denom, sign) in [(aj, 1.0 - bj, 1.0), (-aj, 1.0 + bj, -1.0)] {
                if denom.abs() > 1e-14 {
                    let t = numer / denom;
                    if t > next_lam && t < guard {
                        next_lam = t;
                        event = Event::Add(j, sign);
                    }
                }
            }
        }

        // Residual tolerance reached inside this segment?
        if config.delta > 0.0 && residual_at(next_lam) <= delta_target {
            let t_star = crossing_weight(q2, q1, q0 - target_sq, next_lam, lam);
            let code = finish(dictionary, y, &active, &u, &v, t_star, iterations, config);
            trace.push(PathPoint {
                lambda: t_star,
                l1_norm: l1_at(t_star),
                residual_norm: code.residual_norm,
            });
            return Ok((code, trace));
        }

        let terminal = matches!(event, Event::Terminal);
        if terminal || iterations >= config.max_iters {
            let code = finish(dictionary, y, &active, &u, &v, next_lam, iterations, config);
            trace.push(PathPoint {
                lambda: next_lam,
                l1_norm: l1_at(next_lam),
                residual_norm: code.residual_norm,
            });
            return Ok((code, trace));
        }

        match event {
            Event::Add(j, sign) => {
                active.push(j);
                signs.push(sign);
                is_active[j] = true;
            }
            Event::Remove(pos) => {
                is_active[active[pos]] = false;
                active.remove(pos);
                signs.remove(pos);
            }
            Event::Terminal => unreachable!(),
        }
        lam = next_lam;
    }
}

fn argmax_abs(values: &DVector<f64>) -> (usize, f64) {
    let mut best = 0;
    let mut best_val = 0.0;
    for (j, v) in values.iter().enumerate() {
        if v.abs() > best_val {
            best_val = v.abs();
            best = j;
        }
    }
    (best, best_val)
}

fn cholesky_with_ridge(gram: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let n = gram.nrows();
    if let Some(chol) = Cholesky::new(gram.clone()) {
        return Ok(chol);
    }
    let mut ridged = gram;
    for i in 0..n {
        ridged[(i, i)] += ACTIVE_SET_RIDGE;
    }
    Cholesky::new(ridged)
        .ok_or_else(|| Error::Numerical("active-set Gram matrix is not positive definite".into()))
}

/// Evaluates the path at weight `t` and packages the result.
#[allow(clippy::too_many_arguments)]
fn finish(
    dictionary: &DMatrix<f64>,
    y: &DVector<f64>,
    active: &[usize],
    u: &DVector<f64>,
    v: &DVector<f64>,
    t: f64,
    iterations: usize,
    config: &L1Config,
) -> SparseCode {
    let mut coefficients = DVector::zeros(dictionary.ncols());
    for (pos, &idx) in active.iter().enumerate() {
        coefficients[idx] = u[pos] - t * v[pos];
    }
    let residual_norm = (y - dictionary * &coefficients).norm();
    SparseCode {
        converged: residual_norm < config.delta,
        coefficients,
        residual_norm,
        iterations,
    }
}

/// Root of `q2 t^2 + q1 t + c0 = 0` inside `[lo, hi]`; the polynomial is
/// nonnegative at `hi` and nonpositive at `lo`. Falls back to bisection if
/// the closed form misbehaves.
fn crossing_weight(q2: f64, q1: f64, c0: f64, lo: f64, hi: f64) -> f64 {
    let eval = |t: f64| q2 * t * t + q1 * t + c0;
    if q2.abs() > 1e-300 {
        let disc = q1 * q1 - 4.0 * q2 * c0;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for root in [(-q1 + sq) / (2.0 * q2), (-q1 - sq) / (2.0 * q2)] {
                if root >= lo - 1e-12 && root <= hi + 1e-12 {
                    return root.clamp(lo, hi);
                }
            }
        }
    } else if q1.abs() > 1e-300 {
        let root = -c0 / q1;
        if root >= lo - 1e-12 && root <= hi + 1e-12 {
            return root.clamp(lo, hi);
        }
    }

    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Exact basis-pursuit oracle: minimizes `sum(c+ + c-)` subject to
/// `D (c+ - c-) = y`, `c+, c- >= 0`, with a two-phase simplex under
/// Bland's rule. Returns the coefficient vector and the optimal l1 norm.
/// Meant for small verification instances.
pub fn lp_oracle(y: &DVector<f64>, dictionary: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
    let m = dictionary.nrows();
    let p = dictionary.ncols();
    if m == 0 || p == 0 || y.len() != m {
        return Err(Error::Dimension(format!(
            "dictionary {m}x{p} incompatible with y of length {}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) || dictionary.iter().any(|v| !v.is_finite()) {
        return Err(Error::Value("lp_oracle inputs must be finite".into()));
    }

    // Standard form with variable splitting: A = [D, -D], x >= 0.
    let n = 2 * p;
    let mut a = DMatrix::zeros(m, n);
    a.view_mut((0, 0), (m, p)).copy_from(dictionary);
    a.view_mut((0, p), (m, p)).copy_from(&(-dictionary));
    let cost = DVector::from_element(n, 1.0);

    let x = simplex::solve(a, y.clone(), cost)?;

    let coefficients = DVector::from_fn(p, |i, _| x[i] - x[i + p]);
    let feas = (dictionary * &coefficients - y).norm();
    if feas > 1e-8 * (1.0 + y.norm()) {
        return Err(Error::Numerical(format!(
            "simplex solution violates the equality constraints by {feas}"
        )));
    }
    let objective = x.sum();
    Ok((coefficients, objective))
}

mod simplex {
    //! Dense two-phase tableau simplex with Bland's rule. Small instances
    //! only; every pivot touches the full tableau.

    use nalgebra::{DMatrix, DVector};

    use crate::error::{Error, Result};

    const PIVOT_TOL: f64 = 1e-9;
    const RATIO_TOL: f64 = 1e-11;
    const MAX_PIVOTS: usize = 20_000;

    /// Minimizes `cost^T x` subject to `a x = b`, `x >= 0`.
    pub fn solve(a: DMatrix<f64>, b: DVector<f64>, cost: DVector<f64>) -> Result<DVector<f64>> {
        let m = a.nrows();
        let n = a.ncols();

        // tableau = [A | I_artificial | rhs], rhs made nonnegative
        let mut tab = DMatrix::zeros(m, n + m + 1);
        for i in 0..m {
            let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n {
                tab[(i, j)] = flip * a[(i, j)];
            }
            tab[(i, n + i)] = 1.0;
            tab[(i, n + m)] = flip * b[i];
        }
        let mut basis: Vec<usize> = (n..n + m).collect();

        // Phase 1: minimize the sum of artificials.
        let mut phase1_cost = DVector::zeros(n + m);
        for j in n..n + m {
            phase1_cost[j] = 1.0;
        }
        run(&mut tab, &mut basis, &phase1_cost, n + m)?;
        let infeasibility: f64 = basis
            .iter()
            .enumerate()
            .filter(|(_, &col)| col >= n)
            .map(|(row, _)| tab[(row, n + m)])
            .sum();
        if infeasibility > 1e-7 {
            return Err(Error::Infeasible(format!(
                "phase-1 objective {infeasibility} > 0: right-hand side not in the column span"
            )));
        }

        // Drive any degenerate artificials out of the basis.
        for row in 0..m {
            if basis[row] >= n {
                if let Some(col) = (0..n).find(|&j| tab[(row, j)].abs() > PIVOT_TOL) {
                    pivot(&mut tab, &mut basis, row, col);
                }
                // A row still basic in an artificial is redundant; its rhs is
                // zero, so leaving it in place is harmless.
            }
        }

        // Phase 2: original objective; artificial columns are barred.
        let mut phase2_cost = DVector::zeros(n + m);
        phase2_cost.rows_mut(0, n).copy_from(&cost);
        run(&mut tab, &mut basis, &phase2_cost, n)?;

        let mut x = DVector::zeros(n);
        for (row, &col) in basis.iter().enumerate() {
            if col < n {
                x[col] = tab[(row, n + m)];
            }
        }
        Ok(x)
    }

    /// Simplex iterations with Bland's rule: entering = lowest-index column
    /// with negative reduced cost, leaving = lowest-numbered basic variable
    /// among the minimum ratios.
    fn run(
        tab: &mut DMatrix<f64>,
        basis: &mut [usize],
        cost: &DVector<f64>,
        enterable_cols: usize,
    ) -> Result<()> {
        let m = tab.nrows();
        let rhs_col = tab.ncols() - 1;

        for _ in 0..MAX_PIVOTS {
            let entering = (0..enterable_cols).find(|&j| {
                if basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j]
                    - (0..m)
                        .map(|i| cost[basis[i]] * tab[(i, j)])
                        .sum::<f64>();
                reduced < -PIVOT_TOL
            });
            let Some(col) = entering else {
                return Ok(());
            };

            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..m {
                if tab[(i, col)] > RATIO_TOL {
                    let ratio = tab[(i, rhs_col)] / tab[(i, col)];
                    let better = ratio < best_ratio - 1e-12
                        || (ratio < best_ratio + 1e-12
                            && leave.is_some_and(|l| basis[i] < basis[l]));
                    if better {
                        best_ratio = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(row) = leave else {
                return Err(Error::Numerical(
                    "linear program is unbounded; objective has no minimum".into(),
                ));
            };
            pivot(tab, basis, row, col);
        }
        Err(Error::Numerical("simplex exceeded the pivot budget".into()))
    }

    fn pivot(tab: &mut DMatrix<f64>, basis: &mut [usize], row: usize, col: usize) {
        let m = tab.nrows();
        let cols = tab.ncols();
        let p = tab[(row, col)];
        for j in 0..cols {
            tab[(row, j)] /= p;
        }
        for i in 0..m {
            if i != row {
                let factor = tab[(i, col)];
                if factor != 0.0 {
                    for j in 0..cols {
                        tab[(i, j)] -= factor * tab[(row, j)];
                    }
                }
            }
        }
        basis[row] = col;
    }
}
