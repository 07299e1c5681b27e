//! Unit vectors, Haar orthogonal frames and random rotations.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

const UNIT_NORM_TOL: f64 = 1e-12;

/// A point of S^{d-1}: a d-vector of unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector {
    coords: Vec<f64>,
}

impl UnitVector {
    /// Wrap coordinates that must already be unit-norm (within 1e-12).
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidDimension(coords.len()));
        }
        let norm = norm(&coords);
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::NotUnitNorm((norm - 1.0).abs()));
        }
        Ok(UnitVector { coords })
    }

    /// Normalize arbitrary coordinates onto the sphere.
    pub fn from_unnormalized(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidDimension(coords.len()));
        }
        let norm = norm(&coords);
        if norm < 1e-300 {
            return Err(Error::ZeroNorm(norm));
        }
        let coords = coords.into_iter().map(|c| c / norm).collect();
        Ok(UnitVector { coords })
    }

    /// Standard basis vector e_axis in dimension d.
    pub fn axis(d: usize, axis: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        assert!(axis < d, "axis {axis} out of range for dimension {d}");
        let mut coords = vec![0.0; d];
        coords[axis] = 1.0;
        Ok(UnitVector { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.coords, other.coords())
    }

    pub fn dot_slice(&self, other: &[f64]) -> f64 {
        dot(&self.coords, other)
    }

    /// The antipode -x.
    pub fn negated(&self) -> UnitVector {
        UnitVector {
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }

    pub(crate) fn from_raw_unchecked(coords: Vec<f64>) -> UnitVector {
        debug_assert!((norm(&coords) - 1.0).abs() <= 1e-9);
        UnitVector { coords }
    }
}

impl std::ops::Index<usize> for UnitVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A d x d orthogonal matrix stored as unit-norm columns.
#[derive(Debug, Clone)]
pub struct OrthogonalFrame {
    dim: usize,
    /// Column-major entries.
    cols: Vec<f64>,
}

impl OrthogonalFrame {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j * self.dim..(j + 1) * self.dim]
    }

    pub fn column_unit(&self, j: usize) -> UnitVector {
        UnitVector::from_raw_unchecked(self.column(j).to_vec())
    }

    /// Matrix-vector product Q x.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        debug_assert_eq!(x.len(), d);
        let mut out = vec![0.0; d];
        for j in 0..d {
            let col = self.column(j);
            let xj = x[j];
            for (o, c) in out.iter_mut().zip(col) {
                *o += c * xj;
            }
        }
        out
    }

    /// Largest deviation of Q^T Q from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                let g = dot(self.column(i), self.column(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// n independent draws from the uniform measure on S^{d-1}.
///
/// A standard Gaussian vector, normalized.
pub fn sample_uniform_sphere(d: usize, n: usize, rng: &mut impl Rng) -> Result<Vec<UnitVector>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if n < 1 {
        return Err(Error::InvalidCount(n, 1));
    }
    Ok((0..n).map(|_| uniform_unit(d, rng)).collect())
}

pub(crate) fn uniform_unit(d: usize, rng: &mut impl Rng) -> UnitVector {
    loop {
        let coords: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&coords);
        if n > 1e-12 {
            return UnitVector {
                coords: coords.into_iter().map(|c| c / n).collect(),
            };
        }
    }
}

/// Haar-distributed orthogonal matrix.
///
/// Orthonormalizes a d x d standard Gaussian matrix. Modified Gram-Schmidt
/// with a re-orthogonalization pass leaves the triangular factor's diagonal
/// positive, which is exactly the sign convention that makes the QR
/// factorization unique and the Q factor Haar-distributed.
pub fn sample_haar_orthogonal(d: usize, rng: &mut impl Rng) -> Result<OrthogonalFrame> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let mut cols: Vec<f64> = (0..d * d).map(|_| rng.sample(StandardNormal)).collect();
    for j in 0..d {
        for _pass in 0..2 {
            for i in 0..j {
                let (left, right) = cols.split_at_mut(j * d);
                let qi = &left[i * d..(i + 1) * d];
                let cj = &mut right[..d];
                let r = dot(qi, cj);
                for (c, q) in cj.iter_mut().zip(qi) {
                    *c -= r * q;
                }
            }
        }
        let cj = &mut cols[j * d..(j + 1) * d];
        let n = norm(cj);
        debug_assert!(n > 1e-12, "Gaussian matrix numerically singular");
        for c in cj.iter_mut() {
            *c /= n;
        }
    }
    Ok(OrthogonalFrame { dim: d, cols })
}

/// Rotate every node by one shared Haar rotation.
pub fn apply_random_rotation(nodes: &[UnitVector], rng: &mut impl Rng) -> Result<Vec<UnitVector>> {
    let Some(first) = nodes.first() else {
        return Err(Error::Empty);
    };
    let d = first.dim();
    for v in nodes {
        if v.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.dim(),
            });
        }
    }
    let q = sample_haar_orthogonal(d, rng)?;
    Ok(rotate_all(nodes, &q))
}

/// Rotate every node by a given frame.
pub fn rotate_all(nodes: &[UnitVector], q: &OrthogonalFrame) -> Vec<UnitVector> {
    nodes
        .iter()
        .map(|v| UnitVector::from_raw_unchecked(q.apply(v.coords())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;

    #[test]
    fn unit_vector_validates_norm_and_dim() {
        assert!(UnitVector::new(vec![1.0]).is_err());
        assert!(UnitVector::new(vec![1.0, 1.0]).is_err());
        assert!(UnitVector::new(vec![0.6, 0.8]).is_ok());
        let v = UnitVector::from_unnormalized(vec![3.0, 4.0]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        assert!(UnitVector::from_unnormalized(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn uniform_sampler_rejects_bad_arguments() {
        let mut rng = Seed::new(0).phase(0);
        assert!(sample_uniform_sphere(1, 5, &mut rng).is_err());
        assert!(sample_uniform_sphere(3, 0, &mut rng).is_err());
    }

    #[test]
    fn uniform_sampler_norms_and_determinism() {
        let pts = sample_uniform_sphere(3, 5, &mut Seed::new(9).phase(0)).unwrap();
        for p in &pts {
            let n: f64 = p.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        let again = sample_uniform_sphere(3, 5, &mut Seed::new(9).phase(0)).unwrap();
        assert_eq!(pts, again);
    }

    #[test]
    fn uniform_second_moment_is_one_over_d() {
        // E[x_1^2] = 1/3 on S^2 by symmetry.
        let n = 100_000;
        let pts = sample_uniform_sphere(3, n, &mut Seed::new(1).phase(0)).unwrap();
        let m2: f64 = pts.iter().map(|p| p[0] * p[0]).sum::<f64>() / n as f64;
        assert!((m2 - 1.0 / 3.0).abs() < 0.01, "m2 = {m2}");
        let pts2 = sample_uniform_sphere(2, n, &mut Seed::new(2).phase(0)).unwrap();
        let mx: f64 = pts2.iter().map(|p| p[0]).sum::<f64>() / n as f64;
        let my: f64 = pts2.iter().map(|p| p[1]).sum::<f64>() / n as f64;
        assert!(mx.abs() < 0.01 && my.abs() < 0.01);
    }

    #[test]
    fn haar_frame_is_orthogonal() {
        let q = sample_haar_orthogonal(4, &mut Seed::new(3).phase(0)).unwrap();
        assert!(q.orthogonality_defect() < 1e-10);
    }

    #[test]
    fn haar_two_by_two_is_rotation_or_reflection() {
        let q = sample_haar_orthogonal(2, &mut Seed::new(4).phase(0)).unwrap();
        let (c, s) = (q.column(0)[0], q.column(0)[1]);
        assert!((c * c + s * s - 1.0).abs() < 1e-12);
        // Second column is (-s, c) or (s, -c).
        let c1 = q.column(1);
        let det = c * c1[1] - s * c1[0];
        assert!((det.abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn haar_first_column_marginally_uniform() {
        let reps = 100_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for r in 0..reps {
            let q = sample_haar_orthogonal(3, &mut Seed::new(5).stream(r, 0)).unwrap();
            let x = q.column(0)[0];
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / reps as f64;
        let m2 = sum2 / reps as f64;
        assert!(mean.abs() < 0.01, "mean = {mean}");
        assert!((m2 - 1.0 / 3.0).abs() < 0.01, "m2 = {m2}");
    }

    #[test]
    fn haar_column_second_moment_matrix_is_isotropic() {
        // E[theta theta^T] = I/3 entrywise within 0.02 over 1e4 frames.
        let reps = 10_000;
        let mut m = [0.0; 9];
        for r in 0..reps {
            let q = sample_haar_orthogonal(3, &mut Seed::new(12).stream(r, 0)).unwrap();
            let c = q.column(1);
            for i in 0..3 {
                for j in 0..3 {
                    m[i * 3 + j] += c[i] * c[j] / reps as f64;
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert!(
                    (m[i * 3 + j] - target).abs() < 0.02,
                    "E[t t^T][{i}][{j}] = {}",
                    m[i * 3 + j]
                );
            }
        }
    }

    #[test]
    fn rotation_preserves_gram_matrix() {
        let nodes = sample_uniform_sphere(4, 8, &mut Seed::new(6).phase(0)).unwrap();
        let rotated = apply_random_rotation(&nodes, &mut Seed::new(6).phase(1)).unwrap();
        for i in 0..nodes.len() {
            for j in 0..nodes.len() {
                let before = nodes[i].dot(&nodes[j]);
                let after = rotated[i].dot(&rotated[j]);
                assert!((before - after).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_stream_is_deterministic() {
        let nodes = sample_uniform_sphere(3, 4, &mut Seed::new(7).phase(0)).unwrap();
        let a = apply_random_rotation(&nodes, &mut Seed::new(7).phase(1)).unwrap();
        let b = apply_random_rotation(&nodes, &mut Seed::new(7).phase(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rotated_point_is_uniform() {
        // Haar invariance: a fixed point under random rotation is uniform.
        let e = UnitVector::axis(3, 2).unwrap();
        let reps = 100_000;
        let mut m2 = 0.0;
        for r in 0..reps {
            let rot = apply_random_rotation(
                std::slice::from_ref(&e),
                &mut Seed::new(8).stream(r, 0),
            )
            .unwrap();
            m2 += rot[0][0] * rot[0][0];
        }
        m2 /= reps as f64;
        assert!((m2 - 1.0 / 3.0).abs() < 0.01, "m2 = {m2}");
    }

    #[test]
    fn rotation_rejects_mixed_dimensions() {
        let a = UnitVector::axis(3, 0).unwrap();
        let b = UnitVector::axis(4, 0).unwrap();
        assert!(apply_random_rotation(&[a, b], &mut Seed::new(0).phase(0)).is_err());
    }
}
