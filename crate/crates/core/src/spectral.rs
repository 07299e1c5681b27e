//! Spectral analysis of the orthogonal-frame (UnifOrtho) estimator.
//!
//! For a Haar orthogonal frame (X_1 | .. | X_d), the variance of the
//! frame mean (1/d) sum f(X_i) decomposes over the spherical spectrum of f:
//!
//! Var = (1/d) Var f(X_1) - ((d-1)/d) sum_{l >= 1} (-1)^{l-1} lambda_{2l} mu_{2l}(f)
//!
//! where mu_l(f) is the degree-l energy (sum of squared harmonic
//! coefficients) and lambda_{2l} are the Funk-transform eigenvalues on even
//! degrees. Odd degrees drop out entirely: conditionally on X_1, the other
//! columns are uniform on the equator X_1-perp, which is exactly the Funk
//! transform's average.

use crate::error::{Error, Result};
use crate::geom::UnitVector;
use crate::harmonics::HarmonicBasis;
use crate::numeric::special::ln_gamma;
use crate::quadrature::QuadratureNodes;
use crate::rng::Seed;
use std::f64::consts::PI;

/// Funk eigenvalue magnitude on degree 2l:
/// lambda_{2l} = Gamma((d-1)/2) Gamma((2l+1)/2) / (sqrt(pi) Gamma((2l+d-1)/2)).
pub fn lambda_coeff(d: usize, l: usize) -> f64 {
    assert!(d >= 2, "lambda_coeff needs d >= 2");
    let d = d as f64;
    let l = l as f64;
    (ln_gamma((d - 1.0) / 2.0) + ln_gamma(l + 0.5)
        - 0.5 * PI.ln()
        - ln_gamma((2.0 * l + d - 1.0) / 2.0))
    .exp()
}

/// Ratio alpha_l = (2l + 1) / (2l + d - 1); satisfies
/// lambda_{2(l+1)} = alpha_l lambda_{2l}.
pub fn alpha_coeff(d: usize, l: usize) -> f64 {
    assert!(d >= 2, "alpha_coeff needs d >= 2");
    (2.0 * l as f64 + 1.0) / (2.0 * l as f64 + d as f64 - 1.0)
}

/// Numerical Funk transform: the average of f over the great subsphere
/// orthogonal to u. On S^2 this is a trapezoidal rule on the great circle
/// (exact for band-limited integrands once the resolution exceeds the
/// bandwidth); in higher dimension it is Monte Carlo on the subsphere.
pub fn funk_transform_numeric(
    f: &dyn Fn(&UnitVector) -> f64,
    u: &UnitVector,
    resolution: usize,
    seed: Seed,
) -> Result<f64> {
    let d = u.dim();
    if d < 3 {
        return Err(Error::InvalidDimension(d));
    }
    if resolution < 8 {
        return Err(Error::InvalidCount(resolution, 8));
    }
    let tangent = tangent_frame(u);
    if d == 3 {
        let (v, w) = (&tangent[0], &tangent[1]);
        let mut acc = 0.0;
        for j in 0..resolution {
            let angle = 2.0 * PI * j as f64 / resolution as f64;
            let coords: Vec<f64> = v
                .iter()
                .zip(w)
                .map(|(a, b)| a * angle.cos() + b * angle.sin())
                .collect();
            acc += f(&UnitVector::from_unnormalized(coords)?);
        }
        return Ok(acc / resolution as f64);
    }
    // d > 3: uniform points on the (d-2)-subsphere spanned by the tangent
    // frame.
    let mut rng = seed.phase(crate::rng::phase::NODES);
    let mut acc = 0.0;
    for _ in 0..resolution {
        let z = crate::geom::sample_uniform_sphere(d - 1, 1, &mut rng)?.remove(0);
        let mut coords = vec![0.0; d];
        for (k, basis_vec) in tangent.iter().enumerate() {
            for (c, b) in coords.iter_mut().zip(basis_vec) {
                *c += z[k] * b;
            }
        }
        acc += f(&UnitVector::from_unnormalized(coords)?);
    }
    Ok(acc / resolution as f64)
}

/// Orthonormal basis of u-perp via Gram-Schmidt on the standard basis.
fn tangent_frame(u: &UnitVector) -> Vec<Vec<f64>> {
    let d = u.dim();
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    let mut axis_order: Vec<usize> = (0..d).collect();
    // Start from the axis least aligned with u.
    axis_order.sort_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()));
    for &axis in &axis_order {
        if frame.len() == d - 1 {
            break;
        }
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        let proj = u[axis];
        for (vi, ui) in v.iter_mut().zip(u.coords()) {
            *vi -= proj * ui;
        }
        for prev in &frame {
            let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (vi, pi) in v.iter_mut().zip(prev) {
                *vi -= dot * pi;
            }
        }
        let norm: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            frame.push(v);
        }
    }
    debug_assert_eq!(frame.len(), d - 1);
    frame
}

/// Per-degree energies of an integrand plus the eigenvalue tables feeding
/// the UnifOrtho variance formula.
#[derive(Debug, Clone)]
pub struct SpectralProfile {
    pub d: usize,
    pub max_degree: usize,
    /// Estimated coefficients f_hat(l, k), one vector per degree.
    pub coefficients: Vec<Vec<f64>>,
    /// mu_l = sum_k f_hat(l,k)^2.
    pub energies: Vec<f64>,
    /// lambda_{2l} for l = 0..=max_degree.
    pub lambdas: Vec<f64>,
    /// alpha_l for l = 0..=max_degree.
    pub alphas: Vec<f64>,
    /// Estimate of Var f under the uniform measure.
    pub variance: f64,
}

impl SpectralProfile {
    /// CSV rows (degree, energy, lambda).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("l,mu_l,lambda_2l\n");
        for l in 0..=self.max_degree {
            out.push_str(&format!("{l},{:.17e},{:.17e}\n", self.energies[l], self.lambdas[l]));
        }
        out
    }
}

/// Estimate the spectral profile of `f` with a fixed integration rule:
/// f_hat(l, k) = sum_i w_i f(theta_i) Y_k^l(theta_i).
pub fn spectral_profile(
    f: &dyn Fn(&UnitVector) -> f64,
    basis: &HarmonicBasis,
    max_degree: usize,
    nodes: &QuadratureNodes,
) -> Result<SpectralProfile> {
    if max_degree > basis.max_degree() {
        return Err(Error::DegreeOutOfRange(max_degree, basis.max_degree()));
    }
    if nodes.is_empty() {
        return Err(Error::Empty);
    }
    let d = basis.dim();
    let mut coefficients: Vec<Vec<f64>> = (0..=max_degree)
        .map(|l| vec![0.0; basis.degree_dim(l)])
        .collect();
    let mut mean = 0.0;
    let mut second = 0.0;
    for (theta, &w) in nodes.nodes.iter().zip(&nodes.weights) {
        let fv = f(theta);
        mean += w * fv;
        second += w * fv * fv;
        for (l, coeff) in coefficients.iter_mut().enumerate() {
            let basis_vals = basis.eval_degree(l, theta)?;
            for (c, y) in coeff.iter_mut().zip(&basis_vals) {
                *c += w * fv * y;
            }
        }
    }
    let energies: Vec<f64> = coefficients
        .iter()
        .map(|row| row.iter().map(|c| c * c).sum())
        .collect();
    let variance = (second - mean * mean).max(0.0);
    let lambdas = (0..=max_degree).map(|l| lambda_coeff(d, l)).collect();
    let alphas = (0..=max_degree).map(|l| alpha_coeff(d, l)).collect();
    Ok(SpectralProfile {
        d,
        max_degree,
        coefficients,
        energies,
        lambdas,
        alphas,
        variance,
    })
}

/// UnifOrtho variance prediction from a spectral profile.
#[derive(Debug, Clone)]
pub struct VariancePrediction {
    /// Variance of the mean over one orthogonal frame (d nodes).
    pub per_frame: f64,
    /// Variance of the full estimator: per-frame / number of frames.
    pub full_estimator: f64,
    /// Bound on the neglected spectral tail.
    pub tail_bound: f64,
    /// Tail bound exceeds 1% of the crude Monte Carlo variance.
    pub tail_warning: bool,
}

/// Evaluate the frame-variance formula, cross-checking its two algebraic
/// forms; `n` is the total node count (a whole number of frames).
pub fn unifortho_variance_predict(profile: &SpectralProfile, n: usize) -> Result<VariancePrediction> {
    let d = profile.d;
    if n == 0 || n % d != 0 {
        return Err(Error::Config(format!(
            "UnifOrtho prediction needs n to be a whole number of frames (n = {n}, d = {d})"
        )));
    }
    let mu = |l: usize| -> f64 {
        if l <= profile.max_degree {
            profile.energies[l]
        } else {
            0.0
        }
    };
    let d_f = d as f64;
    // Alternating form.
    let mut correction_one = 0.0;
    let mut l = 1;
    while 2 * l <= profile.max_degree {
        let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
        correction_one += sign * lambda_coeff(d, l) * mu(2 * l);
        l += 1;
    }
    // Paired form: sum over m of lambda_{4m-2} (mu_{4m-2} - alpha_{2m-1} mu_{4m}).
    let mut correction_two = 0.0;
    let mut m = 1;
    while 4 * m - 2 <= profile.max_degree {
        correction_two += lambda_coeff(d, 2 * m - 1)
            * (mu(4 * m - 2) - alpha_coeff(d, 2 * m - 1) * mu(4 * m));
        m += 1;
    }
    let scale = correction_one.abs().max(profile.variance).max(1e-300);
    if (correction_one - correction_two).abs() > 1e-10 * scale {
        return Err(Error::Estimator(format!(
            "variance-formula cross-check failed: {correction_one} vs {correction_two}"
        )));
    }
    let per_frame = profile.variance / d_f - (d_f - 1.0) / d_f * correction_one;
    // Energy not captured by the profile, damped by the next eigenvalue.
    let captured: f64 = profile.energies[1..].iter().sum();
    let residual = (profile.variance - captured).max(0.0);
    let next_even = if profile.max_degree % 2 == 0 {
        profile.max_degree + 2
    } else {
        profile.max_degree + 1
    };
    let tail_bound = lambda_coeff(d, next_even / 2) * residual;
    let crude = profile.variance / d_f;
    let frames = (n / d) as f64;
    Ok(VariancePrediction {
        per_frame,
        full_estimator: per_frame / frames,
        tail_bound,
        tail_warning: tail_bound > 0.01 * crude.max(1e-300),
    })
}
