//! Small dense linear algebra: growing Cholesky factors and pivoted
//! least squares. Sizes here are the number of control variates or the
//! cardinality of a fundamental set, so O(n^3) with tiny constants is fine.

/// Lower-triangular Cholesky factor grown one row at a time.
///
/// Used by the greedy fundamental-set construction and the DPP chain rule,
/// both of which extend a Gram matrix point by point and need the Schur
/// complement of each candidate before committing it.
#[derive(Debug, Clone, Default)]
pub struct GrowingCholesky {
    rows: Vec<Vec<f64>>,
}

impl GrowingCholesky {
    pub fn new() -> Self {
        GrowingCholesky { rows: Vec::new() }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    /// Forward-substitute L y = v for the current factor; `v` has length `size()`.
    pub fn forward(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows.len());
        let mut y = vec![0.0; v.len()];
        for (i, row) in self.rows.iter().enumerate() {
            let mut s = v[i];
            for j in 0..i {
                s -= row[j] * y[j];
            }
            y[i] = s / row[i];
        }
        y
    }

    /// Schur complement of a candidate with diagonal `diag` and cross vector
    /// solved as `y = forward(v)`: diag - |y|^2.
    pub fn schur_complement(diag: f64, y: &[f64]) -> f64 {
        diag - y.iter().map(|t| t * t).sum::<f64>()
    }

    /// Append the row for a committed point: `y` from [`Self::forward`] and
    /// its Schur complement `s > 0`.
    pub fn push(&mut self, mut y: Vec<f64>, s: f64) {
        debug_assert!(s > 0.0, "cannot push a non-positive pivot {s}");
        y.push(s.sqrt());
        self.rows.push(y);
    }

    /// Diagonal entries (the pivots' square roots).
    pub fn pivots(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().enumerate().map(|(i, r)| r[i])
    }

    /// Consume the factor, returning its rows.
    pub fn rows_owned(self) -> Vec<Vec<f64>> {
        self.rows
    }
}

/// Full Cholesky of a symmetric positive-definite matrix (row-major n x n).
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solution of a pivoted least-squares problem.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    /// Coefficients in the original column order; dropped columns get 0.
    pub beta: Vec<f64>,
    /// Indices of columns dropped as numerically dependent.
    pub dropped: Vec<usize>,
    /// Ratio of the largest to the smallest kept R diagonal.
    pub condition: f64,
    pub rank: usize,
}

/// Minimize |y - X beta| by Householder QR with column pivoting.
///
/// `design` is row-major n x m. When `pin_first` is set, column 0 is
/// processed first regardless of pivoting (it is the intercept of a
/// control-variate regression and must never be dropped). Columns whose
/// residual norm falls below `rank_tol` times the largest R diagonal are
/// dropped and reported.
pub fn least_squares_pivoted(
    design: &[f64],
    n: usize,
    m: usize,
    y: &[f64],
    rank_tol: f64,
    pin_first: bool,
) -> LeastSquares {
    assert_eq!(design.len(), n * m);
    assert_eq!(y.len(), n);
    assert!(n >= 1 && m >= 1);

    // Column-major working copy.
    let mut cols: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..n).map(|i| design[i * m + j]).collect())
        .collect();
    let mut rhs = y.to_vec();
    let mut perm: Vec<usize> = (0..m).collect();
    let kmax = n.min(m);
    let mut rdiag: Vec<f64> = Vec::with_capacity(kmax);
    let mut rank = 0;

    for k in 0..kmax {
        // Pivot: largest residual norm among columns k..m (column 0 pinned).
        let pivot_from = if pin_first && k == 0 { 0 } else { k.max(usize::from(pin_first)) };
        let mut best = k.max(pivot_from);
        let mut best_norm = -1.0;
        for j in k.max(pivot_from)..m {
            let nrm: f64 = cols[j][k..].iter().map(|t| t * t).sum();
            if nrm > best_norm {
                best_norm = nrm;
                best = j;
            }
        }
        if pin_first && k == 0 {
            best = 0;
        }
        cols.swap(k, best);
        perm.swap(k, best);

        let alpha: f64 = cols[k][k..].iter().map(|t| t * t).sum::<f64>().sqrt();
        let max_diag = rdiag.iter().cloned().fold(alpha, f64::max);
        if alpha < rank_tol * max_diag || alpha == 0.0 {
            break;
        }

        // Householder vector v = x + sign(x0) |x| e1, stored in place.
        let sign = if cols[k][k] >= 0.0 { 1.0 } else { -1.0 };
        cols[k][k] += sign * alpha;
        let vnorm2: f64 = cols[k][k..].iter().map(|t| t * t).sum();

        // Apply reflector to remaining columns and the rhs.
        let (head, tail) = cols.split_at_mut(k + 1);
        let v = &head[k][k..];
        for col in tail.iter_mut() {
            let dot: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
            let scale = 2.0 * dot / vnorm2;
            for (vi, ci) in v.iter().zip(col[k..].iter_mut()) {
                *ci -= scale * vi;
            }
        }
        let dot: f64 = v.iter().zip(&rhs[k..]).map(|(a, b)| a * b).sum();
        let scale = 2.0 * dot / vnorm2;
        for (vi, ri) in v.iter().zip(rhs[k..].iter_mut()) {
            *ri -= scale * vi;
        }

        rdiag.push(alpha);
        rank += 1;
        // R entry on the diagonal is -sign*alpha; store the signed value in
        // the column head so back substitution can read row k of R from the
        // transformed columns.
        cols[k][k] = -sign * alpha;
    }

    // Back substitution on the rank x rank upper triangle.
    let mut beta_perm = vec![0.0; m];
    for i in (0..rank).rev() {
        let mut s = rhs[i];
        for j in (i + 1)..rank {
            s -= cols[j][i] * beta_perm[j];
        }
        beta_perm[i] = s / cols[i][i];
    }

    let mut beta = vec![0.0; m];
    for (slot, &orig) in perm.iter().enumerate().take(rank) {
        beta[orig] = beta_perm[slot];
    }
    let dropped: Vec<usize> = perm[rank..].to_vec();
    let condition = if rank > 0 {
        let mx = rdiag.iter().cloned().fold(f64::MIN, f64::max);
        let mn = rdiag.iter().cloned().fold(f64::MAX, f64::min);
        mx / mn
    } else {
        f64::INFINITY
    };

    LeastSquares {
        beta,
        dropped,
        condition,
        rank,
    }
}
