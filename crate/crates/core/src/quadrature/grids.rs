//! i.i.d. nodes, randomized grids and spirals, and orthogonal frames.

use super::{Provenance, QuadratureNodes};
use crate::error::{Error, Result};
use crate::geom::{
    apply_random_rotation, sample_haar_orthogonal, sample_uniform_sphere, spherical_coords_map,
    UnitVector,
};
use crate::rng::{phase, Seed};
use rand::Rng;
use std::time::Instant;

/// n i.i.d. uniform nodes with weights 1/n.
pub fn nodes_iid(d: usize, n: usize, seed: Seed) -> Result<QuadratureNodes> {
    let start = Instant::now();
    let mut rng = seed.phase(phase::NODES);
    let nodes = sample_uniform_sphere(d, n, &mut rng)?;
    let mut prov = Provenance::plain("iid", seed, n);
    prov.gen_time = start.elapsed();
    Ok(QuadratureNodes::uniform_weights(nodes, prov))
}

/// Regular grid on the circle with one shared uniform rotation.
///
/// Angles -pi + 2 pi k / n + U with U uniform on [-pi, pi); unbiased for any
/// integrand because the rotated grid's single-node marginal is uniform.
pub fn nodes_grid_circle(n: usize, seed: Seed) -> Result<QuadratureNodes> {
    if n < 1 {
        return Err(Error::InvalidCount(n, 1));
    }
    let start = Instant::now();
    let mut rng = seed.phase(phase::NODES);
    let shift: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let nodes = (0..n)
        .map(|k| {
            let angle = -std::f64::consts::PI
                + 2.0 * std::f64::consts::PI * k as f64 / n as f64
                + shift;
            UnitVector::new(vec![angle.cos(), angle.sin()]).expect("unit by construction")
        })
        .collect();
    let mut prov = Provenance::plain("grid2d", seed, n);
    prov.gen_time = start.elapsed();
    Ok(QuadratureNodes::uniform_weights(nodes, prov))
}

/// Generalized spiral points on S^2 with one shared Haar rotation.
///
/// Heights z_i = 1 - (2i - 1)/n, polar angle acos(z_i), azimuth
/// 1.8 sqrt(n) acos(z_i) mod 2 pi. The constant 1.8 matches the usual
/// experimental setting for spiral quadratures.
pub fn nodes_spiral_sphere(n: usize, seed: Seed) -> Result<QuadratureNodes> {
    if n < 1 {
        return Err(Error::InvalidCount(n, 1));
    }
    let start = Instant::now();
    let raw = spiral_points_unrotated(n);
    let mut rng = seed.phase(phase::ROTATION);
    let nodes = apply_random_rotation(&raw, &mut rng)?;
    let mut prov = Provenance::plain("spiral3d", seed, n);
    prov.gen_time = start.elapsed();
    Ok(QuadratureNodes::uniform_weights(nodes, prov))
}

/// Spiral points before the randomizing rotation; used by tests.
pub(crate) fn spiral_points_unrotated(n: usize) -> Vec<UnitVector> {
    (1..=n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 - 1.0) / n as f64;
            let polar = z.clamp(-1.0, 1.0).acos();
            let azimuth = (1.8 * (n as f64).sqrt() * polar) % (2.0 * std::f64::consts::PI);
            let (p, _) = spherical_coords_map(&[azimuth, polar]).expect("inside the box");
            p
        })
        .collect()
}

/// Union of independent Haar orthogonal frames (UnifOrtho).
///
/// floor(n/d) full frames plus the first n mod d columns of one extra
/// independent frame; every node is marginally uniform.
pub fn nodes_unifortho(d: usize, n: usize, seed: Seed) -> Result<QuadratureNodes> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if n < 1 {
        return Err(Error::InvalidCount(n, 1));
    }
    let start = Instant::now();
    let mut rng = seed.phase(phase::NODES);
    let mut nodes = Vec::with_capacity(n);
    let full = n / d;
    for _ in 0..full {
        let q = sample_haar_orthogonal(d, &mut rng)?;
        for j in 0..d {
            nodes.push(q.column_unit(j));
        }
    }
    let rem = n % d;
    if rem > 0 {
        let q = sample_haar_orthogonal(d, &mut rng)?;
        for j in 0..rem {
            nodes.push(q.column_unit(j));
        }
    }
    let mut prov = Provenance::plain("unifortho", seed, n);
    prov.gen_time = start.elapsed();
    Ok(QuadratureNodes::uniform_weights(nodes, prov))
}
