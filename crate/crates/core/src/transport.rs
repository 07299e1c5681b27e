//! Discrete measures, one-dimensional optimal transport, and the sliced
//! Wasserstein integrand.
//!
//! The 1-D p-Wasserstein distance between discrete measures is computed by
//! the quantile coupling: sort both supports, merge the cumulative-weight
//! breakpoints, and accumulate segment mass times |quantile gap|^p. For
//! equal-size equal-weight inputs this reduces to the sorted pairing and is
//! exact; the merge form is exact for arbitrary weighted discrete measures.

use crate::error::{Error, Result};
use crate::geom::UnitVector;
use crate::quadrature::QuadratureNodes;
use std::time::Instant;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A weighted atom cloud in R^d.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    /// Row-major M x d storage.
    atoms: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
}

impl DiscreteMeasure {
    /// Atoms with explicit weights; weights must be nonnegative and sum to 1
    /// within 1e-12.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty);
        }
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if weights.len() != atoms.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                got: weights.len(),
            });
        }
        let sum = crate::numeric::compensated_sum(weights.iter().copied());
        if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::BadWeights(sum));
        }
        let mut flat = Vec::with_capacity(atoms.len() * dim);
        for a in &atoms {
            if a.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.len(),
                });
            }
            flat.extend_from_slice(a);
        }
        Ok(DiscreteMeasure {
            atoms: flat,
            weights,
            dim,
        })
    }

    /// Uniformly weighted atoms.
    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let m = atoms.len();
        if m == 0 {
            return Err(Error::Empty);
        }
        Self::new(atoms, vec![1.0 / m as f64; m])
    }

    /// Renormalize arbitrary nonnegative weights to total mass 1.
    pub fn with_normalized_weights(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) || sum <= 0.0 {
            return Err(Error::BadWeights(sum));
        }
        Self::new(atoms, weights.iter().map(|w| w / sum).collect())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms_flat(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when every weight equals 1/M.
    pub fn is_uniformly_weighted(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|&x| (x - w).abs() <= WEIGHT_SUM_TOL)
    }

    /// Weighted mean vector.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for i in 0..self.len() {
            let w = self.weights[i];
            for (mj, aj) in m.iter_mut().zip(self.atom(i)) {
                *mj += w * aj;
            }
        }
        m
    }

    /// p-th moment: sum of w_i |x_i|^p.
    pub fn moment_p(&self, p: f64) -> f64 {
        (0..self.len())
            .map(|i| {
                let n: f64 = self.atom(i).iter().map(|c| c * c).sum::<f64>().sqrt();
                self.weights[i] * n.powf(p)
            })
            .sum()
    }

    pub fn moments(&self) -> MeasureMoments {
        let mean = self.mean();
        let d = self.dim;
        let mut cov = vec![0.0; d * d];
        for i in 0..self.len() {
            let w = self.weights[i];
            let a = self.atom(i);
            for r in 0..d {
                let dr = a[r] - mean[r];
                for c in 0..d {
                    cov[r * d + c] += w * dr * (a[c] - mean[c]);
                }
            }
        }
        let trace = (0..d).map(|r| cov[r * d + r]).sum();
        MeasureMoments {
            mean,
            covariance: cov,
            trace,
            dim: d,
        }
    }
}

/// First and second moments of a measure.
#[derive(Debug, Clone)]
pub struct MeasureMoments {
    pub mean: Vec<f64>,
    /// Row-major d x d.
    pub covariance: Vec<f64>,
    pub trace: f64,
    pub dim: usize,
}

impl MeasureMoments {
    /// Quadratic form theta^T Sigma theta.
    pub fn quad_form(&self, theta: &UnitVector) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for r in 0..d {
            let mut row = 0.0;
            for c in 0..d {
                row += self.covariance[r * d + c] * theta[c];
            }
            acc += theta[r] * row;
        }
        acc
    }
}

/// A projected measure on the line: positions with the parent's weights.
#[derive(Debug, Clone)]
pub struct Projected1D {
    pub positions: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Push a measure forward along theta: positions_i = <theta, x_i>.
pub fn project_measure(m: &DiscreteMeasure, theta: &UnitVector) -> Result<Projected1D> {
    if theta.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: theta.dim(),
        });
    }
    let positions = (0..m.len())
        .map(|i| theta.dot_slice(m.atom(i)))
        .collect();
    Ok(Projected1D {
        positions,
        weights: m.weights().to_vec(),
    })
}

/// W_p(a, b)^p between 1-D discrete measures by the quantile coupling.
pub fn wasserstein_1d(a: &Projected1D, b: &Projected1D, p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::InvalidOrder(p));
    }
    if a.positions.is_empty() || b.positions.is_empty() {
        return Err(Error::Empty);
    }
    let na = a.positions.len();
    let nb = b.positions.len();
    let uniform = |w: &[f64]| {
        let t = 1.0 / w.len() as f64;
        w.iter().all(|&x| (x - t).abs() <= WEIGHT_SUM_TOL)
    };
    if na == nb && uniform(&a.weights) && uniform(&b.weights) {
        let mut xs = a.positions.clone();
        let mut ys = b.positions.clone();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let sum: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| pow_abs(x - y, p))
            .sum();
        return Ok(sum / na as f64);
    }
    Ok(wasserstein_1d_merge(a, b, p))
}

fn pow_abs(t: f64, p: f64) -> f64 {
    let a = t.abs();
    if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else {
        a.powf(p)
    }
}

/// General quantile-breakpoint merge; exact for discrete measures.
fn wasserstein_1d_merge(a: &Projected1D, b: &Projected1D, p: f64) -> f64 {
    // Ties broken by the stable sort on input index, so results are
    // deterministic for repeated atoms.
    let order = |m: &Projected1D| {
        let mut idx: Vec<usize> = (0..m.positions.len()).collect();
        idx.sort_by(|&i, &j| m.positions[i].total_cmp(&m.positions[j]));
        idx
    };
    let ia = order(a);
    let ib = order(b);

    let mut total = 0.0;
    let (mut ka, mut kb) = (0usize, 0usize);
    let mut mass_a = a.weights[ia[0]];
    let mut mass_b = b.weights[ib[0]];
    let mut consumed = 0.0_f64;
    while consumed < 1.0 - 1e-15 {
        // Skip zero-weight atoms.
        while mass_a <= 0.0 && ka + 1 < ia.len() {
            ka += 1;
            mass_a = a.weights[ia[ka]];
        }
        while mass_b <= 0.0 && kb + 1 < ib.len() {
            kb += 1;
            mass_b = b.weights[ib[kb]];
        }
        let step = mass_a.min(mass_b).min(1.0 - consumed);
        if step <= 0.0 {
            break;
        }
        let qa = a.positions[ia[ka]];
        let qb = b.positions[ib[kb]];
        total += step * pow_abs(qa - qb, p);
        mass_a -= step;
        mass_b -= step;
        consumed += step;
    }
    total
}

/// The sliced Wasserstein integrand theta -> W_p^p(theta_# mu, theta_# nu).
///
/// The closure owns references to both measures; each evaluation projects
/// and runs the 1-D transport, costing O(M log M + M d).
pub struct SwIntegrand<'a> {
    mu: &'a DiscreteMeasure,
    nu: &'a DiscreteMeasure,
    p: f64,
}

impl<'a> SwIntegrand<'a> {
    pub fn new(mu: &'a DiscreteMeasure, nu: &'a DiscreteMeasure, p: f64) -> Result<Self> {
        if p < 1.0 {
            return Err(Error::InvalidOrder(p));
        }
        if mu.dim() != nu.dim() {
            return Err(Error::DimensionMismatch {
                expected: mu.dim(),
                got: nu.dim(),
            });
        }
        Ok(SwIntegrand { mu, nu, p })
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn order(&self) -> f64 {
        self.p
    }

    pub fn eval(&self, theta: &UnitVector) -> f64 {
        let pa = project_measure(self.mu, theta).expect("dimension checked at construction");
        let pb = project_measure(self.nu, theta).expect("dimension checked at construction");
        wasserstein_1d(&pa, &pb, self.p).expect("order checked at construction")
    }
}

/// Result of one integral estimate.
#[derive(Debug, Clone)]
pub struct EstimatorResult {
    /// Estimate of the sphere integral of W_p^p (may be negative for
    /// control-variate estimators before clipping).
    pub value: f64,
    /// max(value, 0)^{1/p}.
    pub sw_value: f64,
    /// Number of distinct integrand evaluations consumed.
    pub evaluations: usize,
    pub wall_time: std::time::Duration,
    pub diagnostics: EstimatorDiagnostics,
}

/// Optional estimator-layer diagnostics.
#[derive(Debug, Clone, Default)]
pub struct EstimatorDiagnostics {
    /// Fitted control-variate coefficients, when any.
    pub beta: Vec<f64>,
    /// Number of control variates used.
    pub controls: usize,
    /// Condition number of the regression design, when any.
    pub condition: Option<f64>,
    /// Control columns dropped as numerically dependent.
    pub dropped_controls: Vec<usize>,
    /// Raw value was negative and clipped to zero for the p-th root.
    pub clipped_negative: bool,
    /// More controls than N/2; consistency is at risk.
    pub control_overload: bool,
}

impl EstimatorResult {
    pub(crate) fn from_value(value: f64, p: f64, evaluations: usize, start: Instant) -> Self {
        let clipped = value < 0.0;
        let sw_value = value.max(0.0).powf(1.0 / p);
        EstimatorResult {
            value,
            sw_value,
            evaluations,
            wall_time: start.elapsed(),
            diagnostics: EstimatorDiagnostics {
                clipped_negative: clipped,
                ..Default::default()
            },
        }
    }
}

/// Quadrature estimate of SW_p: returns both the raw mean of W_p^p over the
/// nodes and its p-th root.
pub fn estimate_sw(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    nodes: &QuadratureNodes,
) -> Result<EstimatorResult> {
    let f = SwIntegrand::new(mu, nu, p)?;
    let start = Instant::now();
    let mean = nodes.weighted_mean(|theta| f.eval(theta))?;
    Ok(EstimatorResult::from_value(
        mean,
        p,
        nodes.len(),
        start,
    ))
}
