//! Projection DPPs sampled exactly by the chain rule.
//!
//! A projection DPP of rank N is sampled sequentially: node k comes from the
//! conditional density (K(x,x) - K(x, x_{1:k-1}) K_{k-1}^{-1} K(x_{1:k-1}, x))
//! / (N - k + 1) relative to the reference measure. The Schur complement is
//! maintained through a growing Cholesky factor of the kernel Gram matrix,
//! and each conditional is simulated by rejection from the reference measure
//! with the exact envelope sup_x K(x,x) / (N - k + 1).

use super::{GenDiagnostics, Provenance, QuadratureNodes};
use crate::error::{Error, Result};
use crate::geom::{box_bounds, spherical_coords_map, uniform_unit, UnitVector};
use crate::harmonics::{harmonic_dims, jacobi_eval};
use crate::numeric::linalg::GrowingCholesky;
use crate::numeric::quadrule::legendre;
use crate::numeric::special::binomial_real;
use crate::rng::{phase, Seed};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

/// Proposals allowed per node before aborting.
const REJECTION_BUDGET: u64 = 1_000_000;
/// Largest supported kernel rank.
const MAX_RANK: usize = 4096;
/// A conditional density this far below zero is numerical degeneracy.
const NEGATIVE_DENSITY_TOL: f64 = 1e-8;
/// Envelope slack for the per-proposal assertion.
const ENVELOPE_TOL: f64 = 1e-10;

/// An N-dimensional projection kernel with a reference-measure sampler.
pub trait ProjectionKernel: Send + Sync {
    fn rank(&self) -> usize;
    /// Dimension of reference-domain points.
    fn domain_dim(&self) -> usize;
    fn eval(&self, x: &[f64], y: &[f64]) -> f64;
    fn diag(&self, x: &[f64]) -> f64;
    /// Exact upper bound of the diagonal over the domain.
    fn diag_bound(&self) -> f64;
    fn sample_reference(&self, rng: &mut ChaCha12Rng) -> Vec<f64>;
    /// Eigenfunction evaluations, when available in closed form.
    fn eigenfunctions(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Exact chain-rule sample: `rank` points in the reference domain, plus the
/// number of proposals consumed.
pub fn sample_projection_dpp(
    kernel: &dyn ProjectionKernel,
    seed: Seed,
) -> Result<(Vec<Vec<f64>>, u64)> {
    let n = kernel.rank();
    if n < 1 {
        return Err(Error::InvalidCount(n, 1));
    }
    let mut rng = seed.phase(phase::NODES);
    let bound = kernel.diag_bound();
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut features: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut chol = GrowingCholesky::new();
    let mut proposals_total = 0u64;

    for k in 0..n {
        let remaining = (n - k) as f64;
        let mut accepted = false;
        for _ in 0..REJECTION_BUDGET {
            proposals_total += 1;
            let x = kernel.sample_reference(&mut rng);
            let phi = kernel.eigenfunctions(&x);
            let diag = match &phi {
                Some(v) => v.iter().map(|t| t * t).sum(),
                None => kernel.diag(&x),
            };
            let cross: Vec<f64> = match &phi {
                Some(v) => features
                    .iter()
                    .map(|fj| fj.iter().zip(v).map(|(a, b)| a * b).sum())
                    .collect(),
                None => points.iter().map(|pj| kernel.eval(pj, &x)).collect(),
            };
            let y = chol.forward(&cross);
            let schur = GrowingCholesky::schur_complement(diag, &y);
            // Conditional density is schur / remaining; the envelope
            // K(x,x) / remaining must dominate it.
            if schur > diag + ENVELOPE_TOL * bound {
                return Err(Error::DppSampling(format!(
                    "conditional density exceeded its envelope at node {k}"
                )));
            }
            if schur < -NEGATIVE_DENSITY_TOL * bound {
                return Err(Error::DppSampling(format!(
                    "negative conditional density {schur:e} at node {k}: kernel is degenerate"
                )));
            }
            let u: f64 = rng.gen();
            if u * bound < schur {
                chol.push(y, schur.max(1e-300));
                if let Some(v) = phi {
                    features.push(v);
                }
                points.push(x);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::DppSampling(format!(
                "rejection budget {REJECTION_BUDGET} exhausted at node {k} \
                 (remaining mass {remaining}, envelope {bound})"
            )));
        }
    }
    Ok((points, proposals_total))
}

/// Harmonic-ensemble kernel on S^{d-1}: the projection onto all spherical
/// harmonics of degree at most L,
/// K(x, y) = pi_L / binom(L + (d-1)/2, L) * P_L^{((d-1)/2, (d-1)/2 - 1)}(x^T y).
#[derive(Debug, Clone)]
pub struct HarmonicEnsembleKernel {
    d: usize,
    max_degree: usize,
    rank: usize,
    scale: f64,
}

pub fn harmonic_ensemble_kernel(d: usize, max_degree: usize) -> Result<HarmonicEnsembleKernel> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let (_, pi) = harmonic_dims(d, max_degree);
    if pi > MAX_RANK {
        return Err(Error::DppSampling(format!(
            "harmonic ensemble rank pi_L = {pi} exceeds the maximum {MAX_RANK}"
        )));
    }
    let a = (d as f64 - 1.0) / 2.0;
    let scale = pi as f64 / binomial_real(max_degree as f64 + a, max_degree);
    let kernel = HarmonicEnsembleKernel {
        d,
        max_degree,
        rank: pi,
        scale,
    };
    // Trace property: the diagonal is constant pi_L.
    let mut rng = Seed::new(0x5eed).phase(phase::BASIS);
    for _ in 0..4 {
        let x = uniform_unit(d, &mut rng);
        let diag = kernel.diag(x.coords());
        if (diag - pi as f64).abs() > 1e-8 * pi as f64 {
            return Err(Error::DppSampling(format!(
                "harmonic kernel diagonal {diag} deviates from pi_L = {pi}"
            )));
        }
    }
    Ok(kernel)
}

impl HarmonicEnsembleKernel {
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn eval_inner(&self, t: f64) -> f64 {
        let a = (self.d as f64 - 1.0) / 2.0;
        self.scale
            * jacobi_eval(self.max_degree, a, a - 1.0, t.clamp(-1.0, 1.0))
                .expect("parameters fixed at construction")
    }
}

impl ProjectionKernel for HarmonicEnsembleKernel {
    fn rank(&self) -> usize {
        self.rank
    }

    fn domain_dim(&self) -> usize {
        self.d
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let t: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        self.eval_inner(t)
    }

    fn diag(&self, _x: &[f64]) -> f64 {
        self.rank as f64
    }

    fn diag_bound(&self) -> f64 {
        self.rank as f64
    }

    fn sample_reference(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        uniform_unit(self.d, rng).coords().to_vec()
    }
}

/// Sample the harmonic ensemble; cardinality is exactly pi_L.
pub fn sample_harmonic_ensemble(d: usize, max_degree: usize, seed: Seed) -> Result<QuadratureNodes> {
    let start = Instant::now();
    let kernel = harmonic_ensemble_kernel(d, max_degree)?;
    let (points, proposals) = sample_projection_dpp(&kernel, seed)?;
    let nodes: Vec<UnitVector> = points
        .into_iter()
        .map(UnitVector::from_unnormalized)
        .collect::<Result<_>>()?;
    let n = nodes.len();
    let mut prov = Provenance::plain(format!("harmonic:{max_degree}"), seed, n);
    prov.params.push(("L".into(), max_degree as f64));
    prov.params.push(("rank".into(), n as f64));
    prov.diagnostics = GenDiagnostics {
        proposals,
        ..Default::default()
    };
    prov.gen_time = start.elapsed();
    Ok(QuadratureNodes::uniform_weights(nodes, prov))
}

/// Multivariate Legendre projection kernel on the coordinate box of
/// S^{d-1}, orthonormal for the uniform probability measure on the box.
/// Multi-indices are ordered by graded lexicographic degree.
#[derive(Debug, Clone)]
pub struct OpeKernel {
    d: usize,
    rank: usize,
    indices: Vec<Vec<usize>>,
    bounds: Vec<(f64, f64)>,
    diag_bound: f64,
}

pub fn ope_spherical_kernel(d: usize, rank: usize) -> Result<OpeKernel> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if d > 4 {
        return Err(Error::Config(format!(
            "ope is restricted to d <= 4 (rejection cost grows exponentially), got d = {d}"
        )));
    }
    if rank < 1 || rank > MAX_RANK {
        return Err(Error::InvalidCount(rank, 1));
    }
    let indices = graded_lex_indices(d - 1, rank);
    // The diagonal sup is attained at the box corner where every rescaled
    // Legendre factor hits P_a(1) = 1: sum_k prod_j (2 a_kj + 1).
    let diag_bound = indices
        .iter()
        .map(|alpha| {
            alpha
                .iter()
                .map(|&a| 2.0 * a as f64 + 1.0)
                .product::<f64>()
        })
        .sum();
    Ok(OpeKernel {
        d,
        rank,
        indices,
        bounds: box_bounds(d),
        diag_bound,
    })
}

fn graded_lex_indices(coords: usize, count: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(count);
    let mut degree = 0;
    while out.len() < count {
        let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
        for remaining in (1..=coords).rev() {
            let mut next = Vec::new();
            for partial in stack {
                let used: usize = partial.iter().sum();
                if remaining == 1 {
                    let mut full = partial.clone();
                    full.push(degree - used);
                    next.push(full);
                } else {
                    for v in 0..=(degree - used) {
                        let mut ext = partial.clone();
                        ext.push(v);
                        next.push(ext);
                    }
                }
            }
            stack = next;
        }
        stack.sort();
        for alpha in stack {
            if out.len() == count {
                break;
            }
            out.push(alpha);
        }
        degree += 1;
    }
    out
}

impl OpeKernel {
    /// Orthonormal eigenfunctions: products of rescaled Legendre polynomials.
    pub fn features(&self, u: &[f64]) -> Vec<f64> {
        self.indices
            .iter()
            .map(|alpha| {
                alpha
                    .iter()
                    .zip(u.iter().zip(&self.bounds))
                    .map(|(&a, (&ui, &(lo, hi)))| {
                        let t = 2.0 * (ui - lo) / (hi - lo) - 1.0;
                        ((2 * a + 1) as f64).sqrt() * legendre(a, t)
                    })
                    .product()
            })
            .collect()
    }
}

impl ProjectionKernel for OpeKernel {
    fn rank(&self) -> usize {
        self.rank
    }

    fn domain_dim(&self) -> usize {
        self.d - 1
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.features(x)
            .iter()
            .zip(self.features(y))
            .map(|(a, b)| a * b)
            .sum()
    }

    fn diag(&self, x: &[f64]) -> f64 {
        self.features(x).iter().map(|t| t * t).sum()
    }

    fn diag_bound(&self) -> f64 {
        self.diag_bound
    }

    fn sample_reference(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|&(lo, hi)| rng.gen_range(lo..hi))
            .collect()
    }

    fn eigenfunctions(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(self.features(x))
    }
}

/// Sample the mapped orthogonal polynomial ensemble: DPP points in the
/// coordinate box, pushed to the sphere, with the change-of-variables
/// weights jac(u) / K(u, u) that make the sphere-integral estimator
/// unbiased.
pub fn sample_ope_nodes(d: usize, rank: usize, seed: Seed) -> Result<QuadratureNodes> {
    let start = Instant::now();
    let kernel = ope_spherical_kernel(d, rank)?;
    let (points, proposals) = sample_projection_dpp(&kernel, seed)?;
    let mut nodes = Vec::with_capacity(points.len());
    let mut weights = Vec::with_capacity(points.len());
    for u in &points {
        let (theta, jac) = spherical_coords_map(u)?;
        nodes.push(theta);
        weights.push(jac / kernel.diag(u));
    }
    let mut prov = Provenance::plain("ope", seed, nodes.len());
    prov.params.push(("rank".into(), rank as f64));
    prov.weights_sum_to_one = false;
    prov.diagnostics = GenDiagnostics {
        proposals,
        ..Default::default()
    };
    prov.gen_time = start.elapsed();
    Ok(QuadratureNodes {
        nodes,
        weights,
        provenance: prov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linalg::cholesky;
    use crate::numeric::mean_var;

    /// Rank-1 constant kernel on the sphere: the chain rule degenerates to
    /// one uniform point.
    struct ConstantKernel;

    impl ProjectionKernel for ConstantKernel {
        fn rank(&self) -> usize {
            1
        }
        fn domain_dim(&self) -> usize {
            3
        }
        fn eval(&self, _x: &[f64], _y: &[f64]) -> f64 {
            1.0
        }
        fn diag(&self, _x: &[f64]) -> f64 {
            1.0
        }
        fn diag_bound(&self) -> f64 {
            1.0
        }
        fn sample_reference(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
            uniform_unit(3, rng).coords().to_vec()
        }
    }

    #[test]
    fn constant_kernel_yields_one_uniform_point() {
        let (pts, proposals) = sample_projection_dpp(&ConstantKernel, Seed::new(100)).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(proposals, 1); // acceptance probability is exactly 1
        let norm: f64 = pts[0].iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_kernel_diagonal_and_rank() {
        let k = harmonic_ensemble_kernel(3, 2).unwrap();
        assert_eq!(k.rank(), 9);
        let k0 = harmonic_ensemble_kernel(3, 0).unwrap();
        let mut rng = Seed::new(101).phase(0);
        let x = uniform_unit(3, &mut rng);
        let y = uniform_unit(3, &mut rng);
        assert!((k0.eval(x.coords(), y.coords()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_kernel_rejects_excessive_rank() {
        // pi_L for d = 10, L = 30 dwarfs the configured maximum.
        assert!(harmonic_ensemble_kernel(10, 30).is_err());
    }

    #[test]
    fn harmonic_kernel_matches_zonal_sum() {
        // Dual route: the projection kernel onto harmonics up to L equals
        // the sum of the zonal kernels of each degree.
        use crate::harmonics::zonal_kernel_t;
        for d in [2usize, 3, 4] {
            let max_degree = 3;
            let k = harmonic_ensemble_kernel(d, max_degree).unwrap();
            for i in 0..20 {
                let t = -1.0 + 2.0 * i as f64 / 19.0;
                let jacobi_route = k.eval_inner(t);
                let zonal_route: f64 = (0..=max_degree)
                    .map(|l| zonal_kernel_t(d, l, t).unwrap())
                    .sum();
                assert!(
                    (jacobi_route - zonal_route).abs() < 1e-9 * zonal_route.abs().max(1.0),
                    "d={d} t={t}: {jacobi_route} vs {zonal_route}"
                );
            }
        }
    }

    #[test]
    fn harmonic_kernel_on_circle_is_dirichlet() {
        // d = 2 closed form: sin((2L+1) gap/2) / sin(gap/2).
        let l = 4;
        let k = harmonic_ensemble_kernel(2, l).unwrap();
        for i in 1..20 {
            let gap = 0.3 * i as f64;
            let dirichlet = ((2.0 * l as f64 + 1.0) * gap / 2.0).sin() / (gap / 2.0).sin();
            let got = k.eval_inner(gap.cos());
            assert!(
                (got - dirichlet).abs() < 1e-8 * dirichlet.abs().max(1.0),
                "gap={gap}: {got} vs {dirichlet}"
            );
        }
    }

    #[test]
    fn kernel_gram_matrices_are_psd() {
        let mut rng = Seed::new(102).phase(0);
        let k = harmonic_ensemble_kernel(3, 2).unwrap();
        let pts: Vec<Vec<f64>> = (0..15)
            .map(|_| uniform_unit(3, &mut rng).coords().to_vec())
            .collect();
        let n = pts.len();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                gram[i * n + j] = k.eval(&pts[i], &pts[j]);
            }
        }
        // PSD within 1e-8: a tiny diagonal shift must admit a Cholesky.
        for i in 0..n {
            gram[i * n + i] += 1e-8 * k.diag_bound();
        }
        assert!(cholesky(&gram, n).is_some());
    }

    #[test]
    fn harmonic_ensemble_cardinality_and_symmetry() {
        let nodes = sample_harmonic_ensemble(3, 1, Seed::new(103)).unwrap();
        assert_eq!(nodes.len(), 4);
        // Mean of the node sum over replications vanishes by symmetry.
        let reps = 300;
        let mut mean = [0.0; 3];
        for rep in 0..reps {
            let nodes = sample_harmonic_ensemble(3, 1, Seed::new(104).child(rep)).unwrap();
            for node in &nodes.nodes {
                for (m, c) in mean.iter_mut().zip(node.coords()) {
                    *m += c / reps as f64;
                }
            }
        }
        for m in mean {
            assert!(m.abs() < 0.15, "mean coordinate {m}");
        }
    }

    #[test]
    fn graded_lex_ordering() {
        let idx = graded_lex_indices(2, 7);
        assert_eq!(
            idx,
            vec![
                vec![0, 0],
                vec![0, 1],
                vec![1, 0],
                vec![0, 2],
                vec![1, 1],
                vec![2, 0],
                vec![0, 3],
            ]
        );
        let single = graded_lex_indices(1, 4);
        assert_eq!(single, vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn ope_features_are_orthonormal_on_the_box() {
        // Gram of the first 3 circle eigenfunctions under a fine product
        // Gauss-Legendre rule is the identity.
        let k = ope_spherical_kernel(2, 3).unwrap();
        let gl = crate::numeric::quadrule::GaussLegendre::new(64);
        let (lo, hi) = k.bounds[0];
        let mut gram = [0.0; 9];
        for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
            let u = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x;
            let f = k.features(&[u]);
            for i in 0..3 {
                for j in 0..3 {
                    gram[i * 3 + j] += 0.5 * w * f[i] * f[j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[i * 3 + j] - target).abs() < 1e-6,
                    "gram[{i}][{j}] = {}",
                    gram[i * 3 + j]
                );
            }
        }
    }

    #[test]
    fn ope_rank_one_gives_uniform_box_point() {
        let nodes = sample_ope_nodes(3, 1, Seed::new(105)).unwrap();
        assert_eq!(nodes.len(), 1);
        // Weight is jac/K with K = 1, so the f = 1 estimate is the jacobian.
        assert!(nodes.weights[0] >= 0.0);
    }

    #[test]
    fn ope_estimator_is_unbiased_for_constants() {
        // E[sum_i jac(u_i)/K(u_i,u_i)] = E_box[jac] = 1.
        let reps = 400;
        let mut vals = Vec::with_capacity(reps);
        for rep in 0..reps {
            let nodes = sample_ope_nodes(2, 6, Seed::new(106).child(rep as u64)).unwrap();
            vals.push(nodes.weighted_mean(|_| 1.0).unwrap());
        }
        let (mean, var) = mean_var(&vals);
        let se = (var / reps as f64).sqrt();
        assert!(
            (mean - 1.0).abs() <= 4.0 * se.max(1e-6),
            "mean {mean}, se {se}"
        );
    }

    #[test]
    fn ope_rejects_large_dimensions() {
        assert!(ope_spherical_kernel(5, 10).is_err());
    }
}
