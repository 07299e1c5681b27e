//! Importance sampling with a fitted symmetrized von Mises-Fisher proposal.
//!
//! Phase 1 spends a fraction r of the evaluation budget on uniform pilots,
//! folds them onto the hemisphere of the largest pilot value, and fits the
//! vMF mean direction and concentration by the moment rule
//! kappa = R (d - R^2) / (1 - R^2). Phase 2 draws the remaining budget from
//! the symmetrized proposal. The two phases are combined with weights
//! r/|pilots| and (1-r)/(|phase2| g(theta)), which keeps the combined
//! estimator unbiased for any fit.

use super::{GenDiagnostics, ImportanceMeta, Provenance, QuadratureNodes};
use crate::error::{Error, Result};
use crate::geom::{uniform_unit, UnitVector};
use crate::numeric::quadrule::GaussLegendre;
use crate::numeric::special::ln_gamma;
use crate::rng::{phase, Seed};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Beta, Distribution};
use std::time::Instant;

/// Concentration cap; beyond this the proposal is numerically a point mass.
pub const KAPPA_MAX: f64 = 1e4;

/// Moment rule for the vMF concentration given the mean resultant ratio R.
pub fn vmf_concentration_rule(r_ratio: f64, d: usize) -> f64 {
    let d = d as f64;
    let kappa = r_ratio * (d - r_ratio * r_ratio) / (1.0 - r_ratio * r_ratio);
    kappa.min(KAPPA_MAX)
}

/// log E[exp(kappa <eps, X>)] for X uniform on S^{d-1}.
///
/// This is the log normalizer of the vMF density relative to the uniform
/// probability measure. Computed by Gauss-Legendre panels after the
/// substitution t = 1 - y^2 (and its mirror), which removes the endpoint
/// singularity of the (1 - t^2)^{(d-3)/2} weight on the circle and resolves
/// the exp(kappa t) boundary layer on geometrically refined panels.
pub fn log_uniform_tilt(d: usize, kappa: f64) -> f64 {
    assert!(d >= 2 && kappa >= 0.0);
    if kappa == 0.0 {
        return 0.0;
    }
    let gl = GaussLegendre::new(48);
    let d_f = d as f64;
    // Density of t = <eps, X>: c_d (1 - t^2)^{(d-3)/2} on [-1, 1].
    let log_cd = ln_gamma(d_f / 2.0) - 0.5 * std::f64::consts::PI.ln() - ln_gamma((d_f - 1.0) / 2.0);
    let cd = log_cd.exp();
    let power = (d_f - 3.0) / 2.0;

    // I_a = int_0^1 2 c_d exp(-kappa y^2) y^{d-2} (2 - y^2)^power dy,
    // boundary layer at y = 0 of width 1/sqrt(kappa).
    let integrand_a = |y: f64| {
        if y == 0.0 {
            return 0.0;
        }
        2.0 * cd * (-kappa * y * y).exp() * y.powi(d as i32 - 2) * (2.0 - y * y).powf(power)
    };
    let ia = panel_integrate(&gl, integrand_a, 1.0 / kappa.sqrt().max(1.0), true);

    // I_b = int_0^1 2 c_d exp(kappa (u^2 - 1)) u^{d-2} (2 - u^2)^power du,
    // boundary layer at u = 1 of width 1/kappa.
    let integrand_b = |u: f64| {
        if u == 0.0 {
            return 0.0;
        }
        2.0 * cd * (kappa * (u * u - 1.0)).exp() * u.powi(d as i32 - 2) * (2.0 - u * u).powf(power)
    };
    let ib = panel_integrate(&gl, integrand_b, 1.0 / kappa.max(1.0), false);

    kappa + (ia + (-kappa).exp() * ib).ln()
}

/// Integrate on [0, 1] with panels geometrically refined toward 0
/// (`toward_zero`) or toward 1.
fn panel_integrate(
    gl: &GaussLegendre,
    f: impl Fn(f64) -> f64,
    layer: f64,
    toward_zero: bool,
) -> f64 {
    let mut breaks = vec![0.0, 1.0];
    let mut w = layer.min(0.5);
    while w < 0.5 {
        breaks.push(if toward_zero { w } else { 1.0 - w });
        w *= 2.0;
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
        .windows(2)
        .map(|seg| gl.integrate(seg[0], seg[1], &f))
        .sum()
}

/// log cosh with no overflow.
fn log_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Log density of the symmetrized vMF mixture relative to the uniform
/// probability measure: log cosh(kappa t) - log tilt.
pub fn log_symmetrized_vmf_density(t: f64, kappa: f64, log_tilt: f64) -> f64 {
    log_cosh(kappa * t) - log_tilt
}

/// One draw from vMF(direction, kappa) by the tangent-normal decomposition
/// with Wood's rejection sampler for the cosine component.
pub fn sample_vmf(direction: &UnitVector, kappa: f64, rng: &mut ChaCha12Rng) -> UnitVector {
    let d = direction.dim();
    if kappa < 1e-12 {
        return uniform_unit(d, rng);
    }
    let t = sample_vmf_cosine(d, kappa, rng);
    // Uniform tangent direction orthogonal to the mean.
    let v = loop {
        let g = uniform_unit(d, rng);
        let proj = g.dot(direction);
        let coords: Vec<f64> = g
            .coords()
            .iter()
            .zip(direction.coords())
            .map(|(gi, mi)| gi - proj * mi)
            .collect();
        let norm: f64 = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-12 {
            break coords.into_iter().map(|c| c / norm).collect::<Vec<f64>>();
        }
    };
    let sin_part = (1.0 - t * t).max(0.0).sqrt();
    let coords: Vec<f64> = direction
        .coords()
        .iter()
        .zip(&v)
        .map(|(mi, vi)| t * mi + sin_part * vi)
        .collect();
    UnitVector::from_unnormalized(coords).expect("tangent-normal combination is unit")
}

fn sample_vmf_cosine(d: usize, kappa: f64, rng: &mut ChaCha12Rng) -> f64 {
    let dm1 = (d - 1) as f64;
    let b = (-2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt()) / dm1;
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + dm1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(dm1 / 2.0, dm1 / 2.0).expect("valid Beta parameters");
    loop {
        let z: f64 = beta.sample(rng);
        let u: f64 = rng.gen();
        let t = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        if kappa * t + dm1 * (1.0 - x0 * t).ln() - c >= u.ln() {
            return t.clamp(-1.0, 1.0);
        }
    }
}

/// Two-phase fitted importance sampler (cross-entropy moment fit).
///
/// The returned weights implement the final unbiased combination, so
/// `weighted_mean` of the integrand is the importance-sampling estimate.
/// Pilot integrand values are stored and reused.
pub fn nodes_isvmf(
    f: &(dyn Fn(&UnitVector) -> f64 + Sync),
    d: usize,
    n: usize,
    budget_fraction: f64,
    seed: Seed,
) -> Result<QuadratureNodes> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if n < 2 {
        return Err(Error::InvalidCount(n, 2));
    }
    if !(0.0 < budget_fraction && budget_fraction < 1.0) {
        return Err(Error::OutOfDomain("budget_fraction", budget_fraction));
    }
    let start = Instant::now();
    let pilot_count = ((budget_fraction * n as f64).floor() as usize).max(1).min(n - 1);
    let mut rng = seed.phase(phase::NODES);

    let mut nodes: Vec<UnitVector> = Vec::with_capacity(n);
    let mut pilot_values = Vec::with_capacity(pilot_count);
    for _ in 0..pilot_count {
        let x = uniform_unit(d, &mut rng);
        let v = f(&x);
        if v < 0.0 {
            return Err(Error::Importance(format!(
                "integrand must be nonnegative, got {v}"
            )));
        }
        pilot_values.push(v);
        nodes.push(x);
    }

    // Fold by the hemisphere of the best pilot and fit the proposal.
    let total: f64 = pilot_values.iter().sum();
    let fallback = total <= 0.0;
    let (kappa, mean_direction) = if fallback {
        (0.0, None)
    } else {
        let imax = pilot_values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("nonempty pilots");
        let anchor = nodes[imax].clone();
        let mut resultant = vec![0.0; d];
        let mut folded_sum = 0.0;
        for (x, &v) in nodes.iter().zip(&pilot_values) {
            if anchor.dot(x) > 0.0 {
                folded_sum += v;
                for (racc, xi) in resultant.iter_mut().zip(x.coords()) {
                    *racc += v * xi;
                }
            }
        }
        let resultant_norm: f64 = resultant.iter().map(|c| c * c).sum::<f64>().sqrt();
        if folded_sum <= 0.0 || resultant_norm <= 1e-300 {
            (0.0, None)
        } else {
            let ratio = resultant_norm / folded_sum;
            let kappa = if ratio >= 1.0 - 1e-9 {
                KAPPA_MAX
            } else {
                vmf_concentration_rule(ratio, d)
            };
            let eps_hat = UnitVector::from_unnormalized(resultant)?;
            (kappa, Some(eps_hat))
        }
    };

    // Phase 2: symmetrized vMF draws (or uniform fallback).
    let log_tilt = if kappa > 0.0 {
        log_uniform_tilt(d, kappa)
    } else {
        0.0
    };
    let phase2 = n - pilot_count;
    let mut densities = vec![1.0; pilot_count];
    for _ in 0..phase2 {
        let x = match &mean_direction {
            Some(eps_hat) if kappa > 0.0 => {
                let mut x = sample_vmf(eps_hat, kappa, &mut rng);
                if rng.gen::<bool>() {
                    x = x.negated();
                }
                let t = eps_hat.dot(&x);
                let g = log_symmetrized_vmf_density(t, kappa, log_tilt).exp();
                densities.push(g);
                x
            }
            _ => {
                densities.push(1.0);
                uniform_unit(d, &mut rng)
            }
        };
        nodes.push(x);
    }

    // Unbiased two-phase combination.
    let mut weights = vec![budget_fraction / pilot_count as f64; pilot_count];
    for &g in &densities[pilot_count..] {
        if !(g > 0.0) {
            return Err(Error::Importance(format!("proposal density {g} at a node")));
        }
        weights.push((1.0 - budget_fraction) / (phase2 as f64 * g));
    }

    Ok(QuadratureNodes {
        nodes,
        weights,
        provenance: Provenance {
            method: "isvmf".into(),
            seed_root: seed.root(),
            params: vec![("r".into(), budget_fraction), ("kappa".into(), kappa)],
            gen_time: start.elapsed(),
            base: super::BaseProcess::Binomial(n),
            weights_sum_to_one: false,
            importance: Some(ImportanceMeta {
                densities,
                pilot_count,
                pilot_values,
                budget_fraction,
                kappa,
                mean_direction,
                fallback_uniform: fallback,
            }),
            diagnostics: GenDiagnostics::default(),
        },
    })
}
