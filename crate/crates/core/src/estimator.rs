//! Estimator layers over node sets: plain means, importance weighting,
//! and ordinary-least-squares control variates.
//!
//! The OLS estimator solves
//! min over (alpha, beta) of sum_i (f(theta_i) - alpha - sum_j beta_j phi_j(theta_i))^2
//! and returns alpha as the integral estimate. Controls are centered
//! functions, so alpha estimates the sphere integral of f with reduced
//! variance when the controls explain the integrand.

use crate::error::{Error, Result};
use crate::geom::UnitVector;
use crate::harmonics::HarmonicBasis;
use crate::numeric::linalg::least_squares_pivoted;
use crate::quadrature::{BaseProcess, QuadratureNodes};
use crate::transport::{DiscreteMeasure, EstimatorResult};
use std::sync::Arc;
use std::time::Instant;

const UNIFORM_WEIGHT_TOL: f64 = 1e-12;
const OLS_RANK_TOL: f64 = 1e-10;

/// Plain weighted mean of the integrand over the nodes.
pub fn mc_mean(
    f: impl FnMut(&UnitVector) -> f64,
    nodes: &QuadratureNodes,
) -> Result<EstimatorResult> {
    let start = Instant::now();
    let value = nodes.weighted_mean(f)?;
    Ok(EstimatorResult::from_value(value, 1.0, nodes.len(), start))
}

/// Importance-sampling estimate (1/N) sum f(theta_i)/g(theta_i), including
/// the two-phase combination when pilot metadata is present.
///
/// The node weights of an importance-sampled set already implement this
/// combination, so the accumulation is identical to [`mc_mean`]; this entry
/// point additionally validates the proposal densities.
pub fn is_estimate(
    f: impl FnMut(&UnitVector) -> f64,
    nodes: &QuadratureNodes,
) -> Result<EstimatorResult> {
    let meta = nodes
        .provenance
        .importance
        .as_ref()
        .ok_or_else(|| Error::Importance("nodes carry no proposal densities".into()))?;
    if let Some(&bad) = meta.densities.iter().find(|&&g| !(g > 0.0)) {
        return Err(Error::Importance(format!(
            "proposal density {bad} is not strictly positive"
        )));
    }
    mc_mean(f, nodes)
}

/// Normalization for configurations produced by [`crate::quadrature::repel`]:
/// (1/N) sum f for binomial initial processes, (1/rho) sum f for Poisson.
pub fn repelled_estimate(
    mut f: impl FnMut(&UnitVector) -> f64,
    nodes: &QuadratureNodes,
) -> Result<EstimatorResult> {
    if !nodes.provenance.method.starts_with("repelled:") {
        return Err(Error::Estimator(
            "repelled_estimate expects nodes produced by repel".into(),
        ));
    }
    let start = Instant::now();
    let value = match nodes.provenance.base {
        BaseProcess::Binomial(_) => nodes.weighted_mean(&mut f)?,
        BaseProcess::Poisson(rho) => {
            if !(rho > 0.0) {
                return Err(Error::Estimator(format!(
                    "Poisson intensity {rho} is not positive"
                )));
            }
            nodes.nodes.iter().map(&mut f).sum::<f64>() / rho
        }
    };
    Ok(EstimatorResult::from_value(value, 1.0, nodes.len(), start))
}

/// A family of centered control functions.
pub enum ControlFamily {
    /// Explicit closures (the up/low moment controls).
    Functions {
        tag: String,
        controls: Vec<Arc<dyn Fn(&UnitVector) -> f64 + Send + Sync>>,
    },
    /// All spherical harmonics of degree 1..=max_degree, lexicographic.
    Harmonics {
        basis: Arc<HarmonicBasis>,
        max_degree: usize,
    },
}

impl ControlFamily {
    pub fn len(&self) -> usize {
        match self {
            ControlFamily::Functions { controls, .. } => controls.len(),
            ControlFamily::Harmonics { basis, max_degree } => basis.count_up_to(*max_degree),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tag(&self) -> String {
        match self {
            ControlFamily::Functions { tag, .. } => tag.clone(),
            ControlFamily::Harmonics { max_degree, .. } => format!("sh:{max_degree}"),
        }
    }

    pub fn eval(&self, x: &UnitVector) -> Vec<f64> {
        match self {
            ControlFamily::Functions { controls, .. } => {
                controls.iter().map(|c| c(x)).collect()
            }
            ControlFamily::Harmonics { basis, max_degree } => basis
                .eval_up_to(*max_degree, x)
                .expect("basis covers max_degree by construction"),
        }
    }
}

/// First-moment control from the translation identity:
/// phi_low(theta) = (theta^T (m_mu - m_nu))^2 - |m_mu - m_nu|^2 / d.
pub fn cv_low(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<ControlFamily> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    let d = mu.dim() as f64;
    let delta: Vec<f64> = mu
        .mean()
        .iter()
        .zip(nu.mean())
        .map(|(a, b)| a - b)
        .collect();
    let norm2: f64 = delta.iter().map(|t| t * t).sum();
    let control = move |theta: &UnitVector| {
        let dot = theta.dot_slice(&delta);
        dot * dot - norm2 / d
    };
    Ok(ControlFamily::Functions {
        tag: "low".into(),
        controls: vec![Arc::new(control)],
    })
}

/// Second-moment control: phi_low plus the Gaussian upper-bound quadratic
/// theta^T Sigma_mu theta + theta^T Sigma_nu theta, centered by
/// (tr Sigma_mu + tr Sigma_nu)/d.
pub fn cv_up(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<ControlFamily> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    let d = mu.dim() as f64;
    let delta: Vec<f64> = mu
        .mean()
        .iter()
        .zip(nu.mean())
        .map(|(a, b)| a - b)
        .collect();
    let norm2: f64 = delta.iter().map(|t| t * t).sum();
    let mom_mu = mu.moments();
    let mom_nu = nu.moments();
    let trace_term = (mom_mu.trace + mom_nu.trace) / d;
    let control = move |theta: &UnitVector| {
        let dot = theta.dot_slice(&delta);
        dot * dot - norm2 / d + mom_mu.quad_form(theta) + mom_nu.quad_form(theta) - trace_term
    };
    Ok(ControlFamily::Functions {
        tag: "up".into(),
        controls: vec![Arc::new(control)],
    })
}

/// Spherical-harmonics control family: all Y_k^l for 1 <= l <= max_degree.
pub fn shcv_controls(basis: &Arc<HarmonicBasis>, max_degree: usize) -> Result<ControlFamily> {
    if max_degree > basis.max_degree() {
        return Err(Error::DegreeOutOfRange(max_degree, basis.max_degree()));
    }
    Ok(ControlFamily::Harmonics {
        basis: basis.clone(),
        max_degree,
    })
}

/// SHCV degree defaults: 4 up to d = 10, 2 beyond.
pub fn shcv_default_degree(d: usize) -> usize {
    if d <= 10 {
        4
    } else {
        2
    }
}

/// OLS control-variate estimate on uniformly weighted nodes.
pub fn ols_cv_estimate(
    mut f: impl FnMut(&UnitVector) -> f64,
    nodes: &QuadratureNodes,
    controls: &ControlFamily,
) -> Result<EstimatorResult> {
    let n = nodes.len();
    let s = controls.len();
    if n <= s + 1 {
        return Err(Error::Estimator(format!(
            "OLS needs N > s + 1 controls, got N = {n}, s = {s}"
        )));
    }
    let w = 1.0 / n as f64;
    if nodes
        .weights
        .iter()
        .any(|&x| (x - w).abs() > UNIFORM_WEIGHT_TOL)
    {
        return Err(Error::Estimator(
            "control variates assume uniformly weighted nodes".into(),
        ));
    }
    let start = Instant::now();
    let m = s + 1;
    let mut design = vec![0.0; n * m];
    let mut rhs = vec![0.0; n];
    for (i, theta) in nodes.nodes.iter().enumerate() {
        design[i * m] = 1.0;
        let row = controls.eval(theta);
        design[i * m + 1..i * m + m].copy_from_slice(&row);
        rhs[i] = f(theta);
    }
    let sol = least_squares_pivoted(&design, n, m, &rhs, OLS_RANK_TOL, true);
    let value = sol.beta[0];
    let mut result = EstimatorResult::from_value(value, 1.0, n, start);
    result.diagnostics.beta = sol.beta[1..].to_vec();
    result.diagnostics.controls = s;
    result.diagnostics.condition = Some(sol.condition);
    result.diagnostics.dropped_controls = sol
        .dropped
        .iter()
        .map(|&c| c - 1) // design column -> control index
        .collect();
    result.diagnostics.control_overload = s > n / 2;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean_var;
    use crate::quadrature::{nodes_iid, repel};
    use crate::rng::Seed;
    use crate::transport::SwIntegrand;

    fn gaussian_pair(d: usize, m: usize, seed: Seed) -> (DiscreteMeasure, DiscreteMeasure) {
        crate::harness::gen_gaussian_pair(d, m, seed).unwrap()
    }

    #[test]
    fn mc_mean_of_one_is_one() {
        let nodes = nodes_iid(3, 100, Seed::new(120)).unwrap();
        let est = mc_mean(|_| 1.0, &nodes).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.evaluations, 100);
    }

    #[test]
    fn mc_mean_on_symmetric_grid_cancels_odd_integrands() {
        let nodes = crate::quadrature::nodes_grid_circle(8, Seed::new(121)).unwrap();
        let est = mc_mean(|t| t[0], &nodes).unwrap();
        assert!(est.value.abs() < 1e-14);
    }

    #[test]
    fn is_estimate_requires_and_checks_densities() {
        let nodes = nodes_iid(3, 10, Seed::new(122)).unwrap();
        assert!(is_estimate(|_| 1.0, &nodes).is_err());
    }

    #[test]
    fn is_estimate_matches_mc_mean_bitwise_on_isvmf_nodes() {
        let f = |x: &UnitVector| 1.0 + x[0] * x[0];
        let nodes =
            crate::quadrature::nodes_isvmf(&f, 3, 40, 0.25, Seed::new(123)).unwrap();
        let a = mc_mean(f, &nodes).unwrap();
        let b = is_estimate(f, &nodes).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn is_estimate_exact_when_integrand_equals_proposal() {
        // f proportional to the proposal density gives a zero-variance
        // estimator: here f = g via the stored densities.
        let shape = |x: &UnitVector| (3.0 * x[2]).exp();
        let nodes = crate::quadrature::nodes_isvmf(&shape, 3, 60, 0.3, Seed::new(124)).unwrap();
        let meta = nodes.provenance.importance.as_ref().unwrap();
        let densities = meta.densities.clone();
        let pilot_count = meta.pilot_count;
        let r = meta.budget_fraction;
        // Evaluate "f = g" through the phase-2 weights only: the phase-2
        // part of the estimator is (1-r)/m sum g/g = 1 - r exactly.
        let phase2: f64 = nodes
            .weights
            .iter()
            .zip(&densities)
            .skip(pilot_count)
            .map(|(w, g)| w * g)
            .sum();
        assert!((phase2 - (1.0 - r)).abs() < 1e-12);
    }

    #[test]
    fn cv_low_is_zero_for_equal_means() {
        let atoms = vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]];
        let mu = DiscreteMeasure::uniform(atoms.clone()).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![0.0, 1.0, 0.0], vec![0.0, -1.0, 0.0]]).unwrap();
        let fam = cv_low(&mu, &nu).unwrap();
        let mut rng = Seed::new(125).phase(0);
        for x in crate::geom::sample_uniform_sphere(3, 20, &mut rng).unwrap() {
            assert!(fam.eval(&x)[0].abs() < 1e-14);
        }
    }

    #[test]
    fn controls_are_centered_under_monte_carlo() {
        let (mu, nu) = gaussian_pair(3, 40, Seed::new(126));
        let mut rng = Seed::new(127).phase(0);
        let nodes = crate::geom::sample_uniform_sphere(3, 100_000, &mut rng).unwrap();
        for fam in [cv_low(&mu, &nu).unwrap(), cv_up(&mu, &nu).unwrap()] {
            let vals: Vec<f64> = nodes.iter().map(|x| fam.eval(x)[0]).collect();
            let (mean, var) = mean_var(&vals);
            let se = (var / vals.len() as f64).sqrt();
            assert!(
                mean.abs() <= 4.0 * se.max(1e-12),
                "{}: mean {mean}, se {se}",
                fam.tag()
            );
        }
    }

    #[test]
    fn cv_up_quadratic_part_vanishes_for_identity_covariances() {
        // Four unit atoms along +-e1, +-e2 have covariance I/2 in 2d; any
        // equal pair of covariance matrices cancels against its trace term.
        let atoms = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let mu = DiscreteMeasure::uniform(atoms.clone()).unwrap();
        let nu = DiscreteMeasure::uniform(atoms).unwrap();
        let up = cv_up(&mu, &nu).unwrap();
        let low = cv_low(&mu, &nu).unwrap();
        let mut rng = Seed::new(128).phase(0);
        for x in crate::geom::sample_uniform_sphere(2, 20, &mut rng).unwrap() {
            assert!((up.eval(&x)[0] - low.eval(&x)[0]).abs() < 1e-13);
        }
    }

    #[test]
    fn ols_with_no_controls_is_the_plain_mean() {
        let nodes = nodes_iid(3, 50, Seed::new(129)).unwrap();
        let f = |x: &UnitVector| 0.3 + x[1];
        let fam = ControlFamily::Functions {
            tag: "empty".into(),
            controls: vec![],
        };
        let ols = ols_cv_estimate(f, &nodes, &fam).unwrap();
        let mean = mc_mean(f, &nodes).unwrap();
        assert!((ols.value - mean.value).abs() < 1e-13);
    }

    #[test]
    fn ols_recovers_exact_combinations() {
        // f = c + sum beta_j phi_j is reproduced exactly: alpha = c.
        let (mu, nu) = gaussian_pair(3, 30, Seed::new(130));
        let take = |fam: ControlFamily| match fam {
            ControlFamily::Functions { controls, .. } => controls[0].clone(),
            _ => unreachable!(),
        };
        let low = take(cv_low(&mu, &nu).unwrap());
        let up = take(cv_up(&mu, &nu).unwrap());
        let nodes = nodes_iid(3, 60, Seed::new(131)).unwrap();
        let c = 1.7;
        let (low_f, up_f) = (low.clone(), up.clone());
        let f = move |x: &UnitVector| c + 2.0 * low_f(x) - 0.4 * up_f(x);
        let fam = ControlFamily::Functions {
            tag: "both".into(),
            controls: vec![low, up],
        };
        let est = ols_cv_estimate(f, &nodes, &fam).unwrap();
        assert!((est.value - c).abs() < 1e-10, "alpha = {}", est.value);
        assert!((est.diagnostics.beta[0] - 2.0).abs() < 1e-9);
        assert!((est.diagnostics.beta[1] + 0.4).abs() < 1e-9);
    }

    #[test]
    fn ols_is_invariant_to_control_rescaling() {
        let (mu, nu) = gaussian_pair(3, 30, Seed::new(132));
        let nodes = nodes_iid(3, 80, Seed::new(133)).unwrap();
        let f = SwIntegrand::new(&mu, &nu, 2.0).unwrap();
        let fam = cv_up(&mu, &nu).unwrap();
        let base = ols_cv_estimate(|x| f.eval(x), &nodes, &fam).unwrap();
        let scaled = match fam {
            ControlFamily::Functions { controls, .. } => {
                let inner = controls[0].clone();
                ControlFamily::Functions {
                    tag: "scaled".into(),
                    controls: vec![Arc::new(move |x: &UnitVector| -137.0 * inner(x))],
                }
            }
            _ => unreachable!(),
        };
        let rescaled = ols_cv_estimate(|x| f.eval(x), &nodes, &scaled).unwrap();
        assert!(
            (base.value - rescaled.value).abs() < 1e-10,
            "{} vs {}",
            base.value,
            rescaled.value
        );
    }

    #[test]
    fn ols_drops_dependent_controls_without_changing_alpha() {
        let (mu, nu) = gaussian_pair(3, 30, Seed::new(134));
        let nodes = nodes_iid(3, 80, Seed::new(135)).unwrap();
        let f = SwIntegrand::new(&mu, &nu, 2.0).unwrap();
        let fam = cv_low(&mu, &nu).unwrap();
        let base = ols_cv_estimate(|x| f.eval(x), &nodes, &fam).unwrap();
        let doubled = match fam {
            ControlFamily::Functions { controls, .. } => {
                let a = controls[0].clone();
                let b = controls[0].clone();
                ControlFamily::Functions {
                    tag: "dup".into(),
                    controls: vec![a, Arc::new(move |x: &UnitVector| 2.0 * b(x))],
                }
            }
            _ => unreachable!(),
        };
        let dup = ols_cv_estimate(|x| f.eval(x), &nodes, &doubled).unwrap();
        assert_eq!(dup.diagnostics.dropped_controls.len(), 1);
        assert!((base.value - dup.value).abs() < 1e-8);
    }

    #[test]
    fn ols_refuses_too_many_controls_and_flags_overload() {
        let nodes = nodes_iid(3, 10, Seed::new(136)).unwrap();
        let mk = |count: usize| ControlFamily::Functions {
            tag: "many".into(),
            controls: (0..count)
                .map(|k| {
                    let k = k + 1;
                    Arc::new(move |x: &UnitVector| x[0].powi(k as i32) - 0.5)
                        as Arc<dyn Fn(&UnitVector) -> f64 + Send + Sync>
                })
                .collect(),
        };
        assert!(ols_cv_estimate(|_| 1.0, &nodes, &mk(9)).is_err());
        let est = ols_cv_estimate(|_| 1.0, &nodes, &mk(6)).unwrap();
        assert!(est.diagnostics.control_overload);
    }

    #[test]
    fn ols_rejects_importance_weighted_nodes() {
        let f = |x: &UnitVector| 1.0 + x[0] * x[0];
        let nodes = crate::quadrature::nodes_isvmf(&f, 3, 30, 0.3, Seed::new(137)).unwrap();
        let fam = ControlFamily::Functions {
            tag: "empty".into(),
            controls: vec![],
        };
        assert!(ols_cv_estimate(f, &nodes, &fam).is_err());
    }

    #[test]
    fn shcv_family_size_and_odd_degree_parity() {
        use crate::harmonics::HarmonicBasis;
        use std::sync::Arc;
        let basis = Arc::new(HarmonicBasis::build(3, 4, Seed::new(143)).unwrap());
        let fam = shcv_controls(&basis, 4).unwrap();
        // sum of 3 + 5 + 7 + 9 harmonics above degree zero.
        assert_eq!(fam.len(), 24);
        assert_eq!(fam.tag(), "sh:4");
        assert!(shcv_controls(&basis, 5).is_err());

        // Even integrands load no weight on odd-degree controls beyond
        // regression noise.
        let nodes = nodes_iid(3, 4000, Seed::new(144)).unwrap();
        let f = |x: &UnitVector| x[0] * x[0] + 0.3 * (x[1] * x[2]).abs();
        let est = ols_cv_estimate(f, &nodes, &fam).unwrap();
        let beta = &est.diagnostics.beta;
        let odd_max = beta[..3]
            .iter()
            .chain(&beta[8..15]) // degrees 1 and 3
            .fold(0.0_f64, |m, b| m.max(b.abs()));
        let even_max = beta[3..8]
            .iter()
            .chain(&beta[15..24])
            .fold(0.0_f64, |m, b| m.max(b.abs()));
        assert!(
            odd_max < 0.1 * even_max,
            "odd-degree coefficients {odd_max} vs even {even_max}"
        );
    }

    #[test]
    fn cv_up_reduces_mse_on_the_gaussian_toy() {
        let (mu, nu) = gaussian_pair(3, 64, Seed::new(138));
        let f = SwIntegrand::new(&mu, &nu, 2.0).unwrap();
        // Long-run reference.
        let reference = mc_mean(|x| f.eval(x), &nodes_iid(3, 200_000, Seed::new(139)).unwrap())
            .unwrap()
            .value;
        let fam = cv_up(&mu, &nu).unwrap();
        let reps = 200;
        let n = 500;
        let mut plain = Vec::with_capacity(reps);
        let mut cv = Vec::with_capacity(reps);
        for rep in 0..reps {
            let nodes = nodes_iid(3, n, Seed::new(140).child(rep as u64)).unwrap();
            plain.push(mc_mean(|x| f.eval(x), &nodes).unwrap().value);
            cv.push(ols_cv_estimate(|x| f.eval(x), &nodes, &fam).unwrap().value);
        }
        let mse = |vals: &[f64]| {
            vals.iter().map(|v| (v - reference) * (v - reference)).sum::<f64>() / vals.len() as f64
        };
        let (mse_plain, mse_cv) = (mse(&plain), mse(&cv));
        assert!(
            mse_cv < mse_plain,
            "control variates should reduce MSE: {mse_cv} vs {mse_plain}"
        );
    }

    #[test]
    fn repelled_estimate_normalizations() {
        let base = nodes_iid(3, 50, Seed::new(141)).unwrap();
        assert!(repelled_estimate(|_| 1.0, &base).is_err());
        let repelled = repel(&base, 0.0, 3.0).unwrap();
        let est = repelled_estimate(|_| 1.0, &repelled).unwrap();
        assert_eq!(est.value, 1.0);
        // Zero step reduces to the base-process mean for any integrand.
        let f = |x: &UnitVector| x[2].powi(2);
        let a = repelled_estimate(f, &repelled).unwrap();
        let b = mc_mean(f, &base).unwrap();
        assert_eq!(a.value, b.value);

        // Poisson normalization: weights 1/rho, estimator K/rho for f = 1.
        let rho = 40.0;
        let mut rng = Seed::new(142).phase(0);
        let k = 37; // a fixed realization size
        let pts = crate::geom::sample_uniform_sphere(3, k, &mut rng).unwrap();
        let poisson = QuadratureNodes::poisson(pts, rho, Seed::new(142));
        let repelled = repel(&poisson, 1.0 / rho, 3.0).unwrap();
        let est = repelled_estimate(|_| 1.0, &repelled).unwrap();
        assert!((est.value - k as f64 / rho).abs() < 1e-12);
    }
}
