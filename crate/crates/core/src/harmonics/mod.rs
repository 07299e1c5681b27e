//! Spherical harmonics: dimension counts, zonal kernels, and an evaluable
//! orthonormal basis built from fundamental point sets.

mod basis;
mod poly;

pub use basis::{basis_cache_get_or_build, FundamentalSet, HarmonicBasis};
pub use poly::{chebyshev_t, gegenbauer_eval, jacobi_eval};

use crate::error::{Error, Result};
use crate::geom::UnitVector;

/// Dimension of the space of degree-l spherical harmonics on S^{d-1}.
pub fn harmonic_dim(d: usize, l: usize) -> usize {
    assert!(d >= 2);
    if l == 0 {
        return 1;
    }
    if d == 2 {
        return 2;
    }
    binom_usize(d + l - 1, l) - if l >= 2 { binom_usize(d + l - 3, l - 2) } else { 0 }
}

/// (h_0, .., h_L) and their sum pi_L = dim of harmonics up to degree L.
pub fn harmonic_dims(d: usize, max_degree: usize) -> (Vec<usize>, usize) {
    let dims: Vec<usize> = (0..=max_degree).map(|l| harmonic_dim(d, l)).collect();
    let pi = dims.iter().sum();
    (dims, pi)
}

/// pi_L by the closed form (2L + d - 1)/(d - 1) * binom(d + L - 2, L).
pub fn pi_closed_form(d: usize, max_degree: usize) -> f64 {
    let l = max_degree as f64;
    let d = d as f64;
    (2.0 * l + d - 1.0) / (d - 1.0) * crate::numeric::special::binomial_real(d + l - 2.0, max_degree)
}

fn binom_usize(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Zonal kernel Z_l(x, y) = sum_k Y_k^l(x) Y_k^l(y), reduced to one
/// Gegenbauer evaluation by the addition formula:
/// Z_l(x, y) = ((l + lambda)/lambda) C_l^lambda(<x, y>) with
/// lambda = (d-2)/2, and the Chebyshev limit 2 T_l(<x, y>) on the circle.
pub fn zonal_kernel(d: usize, l: usize, x: &UnitVector, y: &UnitVector) -> Result<f64> {
    if x.dim() != d || y.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if x.dim() != d { x.dim() } else { y.dim() },
        });
    }
    let t = x.dot(y).clamp(-1.0, 1.0);
    zonal_kernel_t(d, l, t)
}

/// Zonal kernel as a function of the inner product t.
pub fn zonal_kernel_t(d: usize, l: usize, t: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if l == 0 {
        return Ok(1.0);
    }
    if d == 2 {
        return Ok(2.0 * chebyshev_t(l, t.clamp(-1.0, 1.0)));
    }
    let lambda = (d as f64 - 2.0) / 2.0;
    Ok((l as f64 + lambda) / lambda * gegenbauer_eval(l, lambda, t)?)
}
