//! Stereographic projection and hyperspherical coordinates.

use crate::error::{Error, Result};
use crate::geom::UnitVector;
use crate::numeric::quadrule::GaussLegendre;
use std::f64::consts::PI;

/// Stereographic projection from the North pole (0, 0, 1):
/// (x, y, w) on S^2 maps to (x + i y) / (1 - w), returned as (re, im).
pub fn stereographic(p: &UnitVector) -> Result<(f64, f64)> {
    if p.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: p.dim(),
        });
    }
    let denom = 1.0 - p[2];
    Ok((p[0] / denom, p[1] / denom))
}

/// Inverse stereographic projection: z = re + i im maps to
/// (2 re, 2 im, |z|^2 - 1) / (|z|^2 + 1) on S^2.
pub fn stereographic_inverse(re: f64, im: f64) -> UnitVector {
    let r2 = re * re + im * im;
    let denom = r2 + 1.0;
    UnitVector::from_unnormalized(vec![2.0 * re / denom, 2.0 * im / denom, (r2 - 1.0) / denom])
        .expect("stereographic image is on the sphere")
}

/// Coordinate box for S^{d-1}: one azimuth in [0, 2pi], then d-2 polar
/// angles in [0, pi]. Returns (lo, hi) per coordinate.
pub fn box_bounds(d: usize) -> Vec<(f64, f64)> {
    assert!(d >= 2);
    let mut b = vec![(0.0, 2.0 * PI)];
    b.extend(std::iter::repeat((0.0, PI)).take(d - 2));
    b
}

/// Hyperspherical embedding of a box point, with the density of the sphere's
/// uniform measure relative to the uniform measure on the box.
///
/// `u = (phi, theta_1, .., theta_{d-2})`. The point is built recursively from
/// the circle: (cos phi, sin phi) for d = 2, then each polar angle theta_k
/// wraps the previous sphere as (y sin theta_k, cos theta_k). The returned
/// jacobian is normalized so its mean over the uniform box measure is 1, so
/// integral of f over the sphere = E_box[f(point(u)) * jacobian(u)].
pub fn spherical_coords_map(u: &[f64]) -> Result<(UnitVector, f64)> {
    let d = u.len() + 1;
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let bounds = box_bounds(d);
    for (i, (&ui, &(lo, hi))) in u.iter().zip(&bounds).enumerate() {
        if !(lo..=hi).contains(&ui) {
            return Err(Error::OutsideBox {
                index: i,
                value: ui,
                lo,
                hi,
            });
        }
    }
    let mut coords = vec![u[0].cos(), u[0].sin()];
    let mut log_w = 0.0;
    let mut degenerate = false;
    for (k, &theta) in u.iter().enumerate().skip(1) {
        let s = theta.sin();
        let c = theta.cos();
        for x in coords.iter_mut() {
            *x *= s;
        }
        coords.push(c);
        // sin^k factor of the surface element for the k-th polar angle.
        if s <= 0.0 {
            degenerate = true;
        } else {
            log_w += k as f64 * s.ln();
        }
    }
    let jac = if degenerate {
        0.0
    } else {
        (log_w - log_mean_sine_powers(d)).exp()
    };
    Ok((UnitVector::from_raw_unchecked_or_fallback(coords), jac))
}

impl UnitVector {
    fn from_raw_unchecked_or_fallback(coords: Vec<f64>) -> UnitVector {
        UnitVector::from_unnormalized(coords).expect("spherical coordinates are unit norm")
    }
}

/// log of E_box[ prod_k sin^k(theta_k) ], the jacobian normalizer.
fn log_mean_sine_powers(d: usize) -> f64 {
    use crate::numeric::special::ln_gamma;
    // (1/pi) Int_0^pi sin^k = Gamma((k+1)/2) / (sqrt(pi) Gamma(k/2 + 1)).
    let mut acc = 0.0;
    for k in 1..=(d - 2) {
        let k = k as f64;
        acc += ln_gamma((k + 1.0) / 2.0) - 0.5 * PI.ln() - ln_gamma(k / 2.0 + 1.0);
    }
    acc
}

/// Mean of the jacobian over the box by a tensor Gauss-Legendre rule;
/// test oracle for the normalization.
pub fn jacobian_box_mean(d: usize, points_per_axis: usize) -> f64 {
    let gl = GaussLegendre::new(points_per_axis);
    let bounds = box_bounds(d);
    // Tensor product over the polar angles only: the azimuth integrates to 1.
    let mut mean = 0.0;
    let mut stack = vec![(1usize, 1.0_f64, Vec::<f64>::new())];
    while let Some((axis, weight, partial)) = stack.pop() {
        if axis == d - 1 {
            let mut u = vec![PI; d - 1];
            u[0] = PI; // any interior azimuth works; jacobian ignores it
            u[1..].copy_from_slice(&partial);
            let (_, jac) = spherical_coords_map(&u).unwrap();
            mean += weight * jac;
            continue;
        }
        let (lo, hi) = bounds[axis];
        for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
            let t = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x;
            let mut next = partial.clone();
            next.push(t);
            // w/2 is the weight under the uniform probability on [lo, hi].
            stack.push((axis + 1, weight * w * 0.5, next));
        }
    }
    mean
}
