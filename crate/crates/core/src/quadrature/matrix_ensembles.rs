//! Random-matrix DPP samplers: the spherical ensemble on S^2 and the
//! circular unitary ensemble on S^1.
//!
//! The spherical ensemble lifts the generalized eigenvalues of a pair of
//! complex Ginibre matrices to the sphere by inverse stereographic
//! projection. The pencil is reduced by a pivot-checked LU solve of
//! A X = B rather than an explicit inverse; the eigenvalues of X come from
//! a dense complex eigensolver.

use super::{GenDiagnostics, Provenance, QuadratureNodes};
use crate::error::{Error, Result};
use crate::geom::{stereographic_inverse, UnitVector};
use crate::rng::{phase, Seed};
use faer::complex_native::c64;
use faer::Mat;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use std::time::Instant;

const SINGULAR_TOL: f64 = 1e-12;
const MAX_RESAMPLES: u32 = 3;

fn cabs2(z: c64) -> f64 {
    z.re * z.re + z.im * z.im
}

/// Standard complex Gaussian entry: real and imaginary parts N(0, 1/2).
fn ginibre_entry(rng: &mut ChaCha12Rng) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
}

fn ginibre_matrix(n: usize, rng: &mut ChaCha12Rng) -> Vec<c64> {
    (0..n * n).map(|_| ginibre_entry(rng)).collect()
}

/// LU with partial pivoting in place; returns the pivot row order or the
/// offending pivot magnitude when the matrix is numerically singular
/// relative to its Frobenius norm.
fn lu_factor(a: &mut [c64], n: usize) -> std::result::Result<Vec<usize>, f64> {
    let norm = a.iter().map(|&z| cabs2(z)).sum::<f64>().sqrt();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut best, mut best_mag) = (k, cabs2(a[k * n + k]));
        for i in (k + 1)..n {
            let mag = cabs2(a[i * n + k]);
            if mag > best_mag {
                best = i;
                best_mag = mag;
            }
        }
        let pivot_mag = best_mag.sqrt();
        if pivot_mag < SINGULAR_TOL * norm {
            return Err(pivot_mag);
        }
        if best != k {
            perm.swap(k, best);
            for j in 0..n {
                a.swap(k * n + j, best * n + j);
            }
        }
        let pivot = a[k * n + k];
        for i in (k + 1)..n {
            let factor = a[i * n + k] / pivot;
            a[i * n + k] = factor;
            for j in (k + 1)..n {
                let t = a[k * n + j];
                a[i * n + j] = a[i * n + j] - factor * t;
            }
        }
    }
    Ok(perm)
}

/// Solve A X = B given the LU factorization of A.
fn lu_solve(lu: &[c64], perm: &[usize], n: usize, b: &[c64]) -> Vec<c64> {
    let mut x = vec![c64::new(0.0, 0.0); n * n];
    for col in 0..n {
        // Forward: L y = P b.
        let mut y = vec![c64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut s = b[perm[i] * n + col];
            for j in 0..i {
                s = s - lu[i * n + j] * y[j];
            }
            y[i] = s;
        }
        // Backward: U x = y.
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in (i + 1)..n {
                s = s - lu[i * n + j] * x[j * n + col];
            }
            x[i * n + col] = s / lu[i * n + i];
        }
    }
    x
}

fn complex_eigenvalues(m: &[c64], n: usize) -> Vec<c64> {
    let mat = Mat::<c64>::from_fn(n, n, |i, j| m[i * n + j]);
    mat.eigenvalues::<c64>()
}

/// Spherical ensemble on S^2: inverse stereographic projection of the
/// generalized eigenvalues of a complex Ginibre pencil. Cardinality is
/// exactly n almost surely.
pub fn sample_spherical_ensemble(n: usize, seed: Seed) -> Result<QuadratureNodes> {
    if n < 1 {
        return Err(Error::InvalidCount(n, 1));
    }
    let start = Instant::now();
    let mut resamples = 0u32;
    let eigenvalues = loop {
        let mut rng = seed.child(resamples as u64).phase(phase::NODES);
        let mut a = ginibre_matrix(n, &mut rng);
        let b = ginibre_matrix(n, &mut rng);
        match lu_factor(&mut a, n) {
            Ok(perm) => {
                let x = lu_solve(&a, &perm, n, &b);
                break complex_eigenvalues(&x, n);
            }
            Err(_pivot) => {
                resamples += 1;
                if resamples > MAX_RESAMPLES {
                    return Err(Error::DppSampling(format!(
                        "Ginibre matrix numerically singular {MAX_RESAMPLES} times in a row"
                    )));
                }
            }
        }
    };
    let nodes: Vec<UnitVector> = eigenvalues
        .iter()
        .map(|z| stereographic_inverse(z.re, z.im))
        .collect();
    let mut prov = Provenance::plain("spherical", seed, n);
    prov.diagnostics = GenDiagnostics {
        resamples,
        ..Default::default()
    };
    prov.gen_time = start.elapsed();
    Ok(QuadratureNodes::uniform_weights(nodes, prov))
}

/// Circular unitary ensemble on S^1: eigenvalue phases of a Haar unitary,
/// obtained by orthonormalizing a complex Ginibre matrix (the triangular
/// factor's diagonal is kept positive real, which is the phase convention
/// that makes Q Haar-distributed).
pub fn sample_cue_circle(n: usize, seed: Seed) -> Result<QuadratureNodes> {
    if n < 1 {
        return Err(Error::InvalidCount(n, 1));
    }
    let start = Instant::now();
    let mut rng = seed.phase(phase::NODES);
    let mut q = ginibre_matrix(n, &mut rng);
    // Modified Gram-Schmidt on columns, two passes.
    for j in 0..n {
        for _pass in 0..2 {
            for i in 0..j {
                // r = q_i^H q_j
                let mut r = c64::new(0.0, 0.0);
                for row in 0..n {
                    let qi = q[row * n + i];
                    r = r + c64::new(qi.re, -qi.im) * q[row * n + j];
                }
                for row in 0..n {
                    let t = q[row * n + i];
                    q[row * n + j] = q[row * n + j] - r * t;
                }
            }
        }
        let norm: f64 = (0..n).map(|row| cabs2(q[row * n + j])).sum::<f64>().sqrt();
        debug_assert!(norm > 1e-12);
        for row in 0..n {
            q[row * n + j] = q[row * n + j] * c64::new(1.0 / norm, 0.0);
        }
    }
    let eigenvalues = complex_eigenvalues(&q, n);
    let nodes: Vec<UnitVector> = eigenvalues
        .iter()
        .map(|z| {
            let mag = cabs2(*z).sqrt();
            UnitVector::new(vec![z.re / mag, z.im / mag]).expect("unit modulus")
        })
        .collect();
    // Unitarity puts eigenvalues on the circle; anything else is a solver
    // failure worth surfacing.
    for z in &eigenvalues {
        let mag = cabs2(*z).sqrt();
        if (mag - 1.0).abs() > 1e-8 {
            return Err(Error::DppSampling(format!(
                "CUE eigenvalue modulus {mag} deviates from 1"
            )));
        }
    }
    let mut prov = Provenance::plain("cue", seed, n);
    prov.gen_time = start.elapsed();
    Ok(QuadratureNodes::uniform_weights(nodes, prov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean_var;
    use crate::quadrature::nodes_iid;

    #[test]
    fn lu_solve_matches_direct_multiplication() {
        let n = 5;
        let mut rng = Seed::new(110).phase(0);
        let a = ginibre_matrix(n, &mut rng);
        let x_true = ginibre_matrix(n, &mut rng);
        // b = a x_true
        let mut b = vec![c64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = c64::new(0.0, 0.0);
                for k in 0..n {
                    s = s + a[i * n + k] * x_true[k * n + j];
                }
                b[i * n + j] = s;
            }
        }
        let mut lu = a.clone();
        let perm = lu_factor(&mut lu, n).unwrap();
        let x = lu_solve(&lu, &perm, n, &b);
        for (got, want) in x.iter().zip(&x_true) {
            assert!(cabs2(*got - *want).sqrt() < 1e-10);
        }
    }

    #[test]
    fn lu_detects_singular_matrices() {
        // Rank-one 3 x 3 matrix: elimination hits a zero pivot.
        let n = 3;
        let mut a = vec![c64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = c64::new((i + 1) as f64 * (j as f64 + 0.5), 0.0);
            }
        }
        assert!(lu_factor(&mut a, n).is_err());
    }

    #[test]
    fn eigenvalues_of_diagonal_matrix() {
        let n = 4;
        let mut m = vec![c64::new(0.0, 0.0); n * n];
        let expect = [
            c64::new(1.0, 0.0),
            c64::new(-2.0, 0.5),
            c64::new(0.0, -1.0),
            c64::new(3.0, 3.0),
        ];
        for (i, &z) in expect.iter().enumerate() {
            m[i * n + i] = z;
        }
        let mut evs = complex_eigenvalues(&m, n);
        evs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let mut want = expect.to_vec();
        want.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        for (g, w) in evs.iter().zip(&want) {
            assert!(cabs2(*g - *w).sqrt() < 1e-12);
        }
    }

    #[test]
    fn spherical_ensemble_cardinality() {
        for n in [1usize, 5, 40] {
            let nodes = sample_spherical_ensemble(n, Seed::new(111)).unwrap();
            assert_eq!(nodes.len(), n);
            for p in &nodes.nodes {
                let norm: f64 = p.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spherical_ensemble_single_point_is_uniform() {
        // N = 1: b/a mapped stereographically is uniform on S^2.
        let reps = 100_000;
        let mut m2 = [0.0; 3];
        for rep in 0..reps {
            let nodes = sample_spherical_ensemble(1, Seed::new(112).child(rep)).unwrap();
            for k in 0..3 {
                m2[k] += nodes.nodes[0][k] * nodes.nodes[0][k] / reps as f64;
            }
        }
        for v in m2 {
            assert!((v - 1.0 / 3.0).abs() < 0.01, "second moment {v}");
        }
    }

    #[test]
    fn spherical_ensemble_repels_nearest_neighbors() {
        // Mean nearest-neighbor geodesic distance beats i.i.d. at N = 200.
        let n = 200;
        let reps = 60;
        let nn_mean = |nodes: &QuadratureNodes| -> f64 {
            let mut acc = 0.0;
            for i in 0..nodes.len() {
                let mut best = f64::INFINITY;
                for j in 0..nodes.len() {
                    if i != j {
                        let dot = nodes.nodes[i].dot(&nodes.nodes[j]).clamp(-1.0, 1.0);
                        best = best.min(dot.acos());
                    }
                }
                acc += best;
            }
            acc / nodes.len() as f64
        };
        let mut sph = Vec::new();
        let mut iid = Vec::new();
        for rep in 0..reps {
            sph.push(nn_mean(
                &sample_spherical_ensemble(n, Seed::new(113).child(rep)).unwrap(),
            ));
            iid.push(nn_mean(&nodes_iid(3, n, Seed::new(114).child(rep)).unwrap()));
        }
        let (m_sph, _) = mean_var(&sph);
        let (m_iid, _) = mean_var(&iid);
        assert!(
            m_sph > m_iid,
            "spherical nn distance {m_sph} should exceed i.i.d. {m_iid}"
        );
    }

    #[test]
    fn cue_eigenvalues_sit_on_the_circle() {
        let nodes = sample_cue_circle(24, Seed::new(115)).unwrap();
        assert_eq!(nodes.len(), 24);
        assert!((nodes.weighted_mean(|_| 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cue_pair_gap_beats_iid() {
        // Level repulsion: with two eigenvalues the minimal arc gap is
        // stochastically larger than for two uniform angles.
        let reps = 10_000;
        let arc_gap = |nodes: &QuadratureNodes| -> f64 {
            let a = nodes.nodes[0][1].atan2(nodes.nodes[0][0]);
            let b = nodes.nodes[1][1].atan2(nodes.nodes[1][0]);
            let raw = (a - b).rem_euclid(2.0 * std::f64::consts::PI);
            raw.min(2.0 * std::f64::consts::PI - raw)
        };
        let mut cue_sum = 0.0;
        let mut iid_sum = 0.0;
        for rep in 0..reps {
            cue_sum += arc_gap(&sample_cue_circle(2, Seed::new(116).child(rep)).unwrap());
            iid_sum += arc_gap(&nodes_iid(2, 2, Seed::new(117).child(rep)).unwrap());
        }
        let (cue_mean, iid_mean) = (cue_sum / reps as f64, iid_sum / reps as f64);
        assert!(
            cue_mean > iid_mean,
            "CUE mean gap {cue_mean} should exceed i.i.d. {iid_mean}"
        );
    }
}
