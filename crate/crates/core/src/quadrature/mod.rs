//! Quadrature node generation on the sphere.
//!
//! Every scheme produces a [`QuadratureNodes`]: unit vectors with per-node
//! weights and provenance. Uniform-target methods carry weights 1/N; the
//! importance sampler and the mapped orthogonal polynomial ensemble carry
//! genuine per-node weights and are flagged so that the weight-sum check is
//! skipped.

mod dpp;
mod grids;
mod isvmf;
mod matrix_ensembles;
mod repelled;

pub use dpp::{
    harmonic_ensemble_kernel, ope_spherical_kernel, sample_harmonic_ensemble, sample_ope_nodes,
    sample_projection_dpp, HarmonicEnsembleKernel, OpeKernel, ProjectionKernel,
};
pub use grids::{nodes_grid_circle, nodes_iid, nodes_spiral_sphere, nodes_unifortho};
pub use isvmf::{log_uniform_tilt, nodes_isvmf, sample_vmf, vmf_concentration_rule};
pub use matrix_ensembles::{sample_cue_circle, sample_spherical_ensemble};
pub use repelled::repel;

use crate::error::{Error, Result};
use crate::geom::UnitVector;
use crate::rng::Seed;
use std::time::Duration;

/// How the initial configuration was drawn; fixes the estimator
/// normalization for repelled processes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseProcess {
    /// Fixed number of points.
    Binomial(usize),
    /// Poisson process with expected total intensity rho.
    Poisson(f64),
}

/// Importance-sampling metadata attached by [`nodes_isvmf`].
#[derive(Debug, Clone)]
pub struct ImportanceMeta {
    /// Proposal density at each node, relative to the uniform probability
    /// measure on the sphere (pilots have density 1).
    pub densities: Vec<f64>,
    /// Number of leading nodes that are phase-1 pilots.
    pub pilot_count: usize,
    /// Integrand values already computed at the pilots.
    pub pilot_values: Vec<f64>,
    /// Budget fraction spent on pilots.
    pub budget_fraction: f64,
    /// Fitted concentration.
    pub kappa: f64,
    /// Fitted mean direction.
    pub mean_direction: Option<UnitVector>,
    /// All pilot evaluations were zero; phase 2 fell back to uniform.
    pub fallback_uniform: bool,
}

/// Generation diagnostics.
#[derive(Debug, Clone, Default)]
pub struct GenDiagnostics {
    /// Coincident pairs whose mutual force term was dropped.
    pub dropped_force_pairs: u64,
    /// Rejection-sampling proposals consumed (DPP chain rule, vMF).
    pub proposals: u64,
    /// Retries after numerically singular random matrices.
    pub resamples: u32,
}

/// Where a node set came from.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub method: String,
    pub seed_root: u64,
    pub params: Vec<(String, f64)>,
    pub gen_time: Duration,
    pub base: BaseProcess,
    /// Weights are exactly a probability vector (1/N for plain methods).
    pub weights_sum_to_one: bool,
    pub importance: Option<ImportanceMeta>,
    pub diagnostics: GenDiagnostics,
}

impl Provenance {
    pub(crate) fn plain(method: impl Into<String>, seed: Seed, n: usize) -> Self {
        Provenance {
            method: method.into(),
            seed_root: seed.root(),
            params: Vec::new(),
            gen_time: Duration::ZERO,
            base: BaseProcess::Binomial(n),
            weights_sum_to_one: true,
            importance: None,
            diagnostics: GenDiagnostics::default(),
        }
    }
}

/// A set of unit vectors with per-node weights and provenance.
#[derive(Debug, Clone)]
pub struct QuadratureNodes {
    pub nodes: Vec<UnitVector>,
    pub weights: Vec<f64>,
    pub provenance: Provenance,
}

impl QuadratureNodes {
    pub(crate) fn uniform_weights(
        nodes: Vec<UnitVector>,
        provenance: Provenance,
    ) -> QuadratureNodes {
        let n = nodes.len();
        QuadratureNodes {
            weights: vec![1.0 / n as f64; n],
            nodes,
            provenance,
        }
    }

    /// Wrap a realized Poisson configuration of expected total intensity
    /// rho; weights are 1/rho so that sums over nodes are unbiased.
    pub fn poisson(nodes: Vec<UnitVector>, rho: f64, seed: Seed) -> QuadratureNodes {
        let n = nodes.len();
        let mut prov = Provenance::plain("poisson", seed, n);
        prov.base = BaseProcess::Poisson(rho);
        prov.weights_sum_to_one = false;
        QuadratureNodes {
            weights: vec![1.0 / rho; n],
            nodes,
            provenance: prov,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes.first().map_or(0, |v| v.dim())
    }

    /// Weighted mean of `f` over the nodes; the quadrature estimate of the
    /// sphere integral. Pilot values stored by the importance sampler are
    /// reused rather than re-evaluated. Uniformly weighted sets are averaged
    /// as sum(f)/N, which reproduces constants exactly.
    pub fn weighted_mean(&self, mut f: impl FnMut(&UnitVector) -> f64) -> Result<f64> {
        if self.nodes.is_empty() {
            return Err(Error::Empty);
        }
        if self.provenance.weights_sum_to_one {
            let sum: f64 = self.weights.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::BadWeights(sum));
            }
        }
        let w0 = self.weights[0];
        if self.provenance.importance.is_none() && self.weights.iter().all(|&w| w == w0) {
            let total: f64 = self.nodes.iter().map(&mut f).sum();
            if self.provenance.weights_sum_to_one {
                return Ok(total / self.nodes.len() as f64);
            }
            return Ok(total * w0);
        }
        let pilots = self
            .provenance
            .importance
            .as_ref()
            .map(|m| (m.pilot_count, m.pilot_values.clone()))
            .unwrap_or((0, Vec::new()));
        let mut acc = 0.0;
        for (i, (node, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let value = if i < pilots.0 {
                pilots.1[i]
            } else {
                f(node)
            };
            acc += w * value;
        }
        Ok(acc)
    }

    /// Integrand evaluations a fresh estimate costs (pilot values are free).
    pub fn fresh_evaluations(&self) -> usize {
        let pilots = self
            .provenance
            .importance
            .as_ref()
            .map_or(0, |m| m.pilot_count);
        self.nodes.len() - pilots
    }
}

/// Node-generation context handed to the method registry.
pub struct GenContext<'a> {
    pub d: usize,
    pub n: usize,
    pub seed: Seed,
    /// Required by adaptive methods (ISVMF); ignored by the rest.
    pub integrand: Option<&'a (dyn Fn(&UnitVector) -> f64 + Sync)>,
}

/// Parsed node-generation method, addressable by string name.
///
/// Grammar: `iid | grid2d | spiral3d | unifortho | repelled:<base> | isvmf |
/// isvmf:<r> | spherical | cue | harmonic | harmonic:<L> | ope`.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeMethod {
    Iid,
    Grid2d,
    Spiral3d,
    UnifOrtho,
    Repelled {
        base: Box<NodeMethod>,
        /// Step size; defaults to 1/N.
        eps: Option<f64>,
        /// Force exponent; defaults to d.
        s: Option<f64>,
    },
    Isvmf {
        budget_fraction: f64,
    },
    Spherical,
    Cue,
    Harmonic {
        /// Maximum harmonic degree; the cardinality is pi_L.
        max_degree: Option<usize>,
    },
    Ope,
}

impl NodeMethod {
    pub fn parse(spec: &str) -> Result<NodeMethod> {
        let spec = spec.trim();
        if let Some(rest) = spec.strip_prefix("repelled:") {
            return Ok(NodeMethod::Repelled {
                base: Box::new(NodeMethod::parse(rest)?),
                eps: None,
                s: None,
            });
        }
        if let Some(rest) = spec.strip_prefix("harmonic:") {
            let l: usize = rest
                .parse()
                .map_err(|_| Error::UnknownMethod(spec.to_string()))?;
            return Ok(NodeMethod::Harmonic { max_degree: Some(l) });
        }
        if let Some(rest) = spec.strip_prefix("isvmf:") {
            let r: f64 = rest
                .parse()
                .map_err(|_| Error::UnknownMethod(spec.to_string()))?;
            return Ok(NodeMethod::Isvmf { budget_fraction: r });
        }
        match spec {
            "iid" => Ok(NodeMethod::Iid),
            "grid2d" => Ok(NodeMethod::Grid2d),
            "spiral3d" => Ok(NodeMethod::Spiral3d),
            "unifortho" => Ok(NodeMethod::UnifOrtho),
            "isvmf" => Ok(NodeMethod::Isvmf {
                budget_fraction: 0.2,
            }),
            "spherical" => Ok(NodeMethod::Spherical),
            "cue" => Ok(NodeMethod::Cue),
            "harmonic" => Ok(NodeMethod::Harmonic { max_degree: None }),
            "ope" => Ok(NodeMethod::Ope),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }

    pub fn name(&self) -> String {
        match self {
            NodeMethod::Iid => "iid".into(),
            NodeMethod::Grid2d => "grid2d".into(),
            NodeMethod::Spiral3d => "spiral3d".into(),
            NodeMethod::UnifOrtho => "unifortho".into(),
            NodeMethod::Repelled { base, .. } => format!("repelled:{}", base.name()),
            NodeMethod::Isvmf { .. } => "isvmf".into(),
            NodeMethod::Spherical => "spherical".into(),
            NodeMethod::Cue => "cue".into(),
            NodeMethod::Harmonic {
                max_degree: Some(l),
            } => format!("harmonic:{l}"),
            NodeMethod::Harmonic { max_degree: None } => "harmonic".into(),
            NodeMethod::Ope => "ope".into(),
        }
    }

    /// Requires per-node importance weights (excluded from uniform-target
    /// unbiasedness sweeps with 1/N weights).
    pub fn is_importance_weighted(&self) -> bool {
        match self {
            NodeMethod::Isvmf { .. } | NodeMethod::Ope => true,
            NodeMethod::Repelled { base, .. } => base.is_importance_weighted(),
            _ => false,
        }
    }

    /// Generate nodes; the actual cardinality can differ from `ctx.n` for
    /// DPPs whose rank quantizes the node count (harmonic ensemble).
    pub fn generate(&self, ctx: &GenContext) -> Result<QuadratureNodes> {
        match self {
            NodeMethod::Iid => nodes_iid(ctx.d, ctx.n, ctx.seed),
            NodeMethod::Grid2d => {
                require_dim(ctx.d, 2, "grid2d")?;
                nodes_grid_circle(ctx.n, ctx.seed)
            }
            NodeMethod::Spiral3d => {
                require_dim(ctx.d, 3, "spiral3d")?;
                nodes_spiral_sphere(ctx.n, ctx.seed)
            }
            NodeMethod::UnifOrtho => nodes_unifortho(ctx.d, ctx.n, ctx.seed),
            NodeMethod::Repelled { base, eps, s } => {
                let inner = base.generate(ctx)?;
                let eps = eps.unwrap_or(1.0 / inner.len() as f64);
                let s = s.unwrap_or(ctx.d as f64);
                repel(&inner, eps, s)
            }
            NodeMethod::Isvmf { budget_fraction } => {
                let f = ctx.integrand.ok_or_else(|| {
                    Error::Importance("isvmf needs the integrand at generation time".into())
                })?;
                nodes_isvmf(f, ctx.d, ctx.n, *budget_fraction, ctx.seed)
            }
            NodeMethod::Spherical => {
                require_dim(ctx.d, 3, "spherical")?;
                sample_spherical_ensemble(ctx.n, ctx.seed)
            }
            NodeMethod::Cue => {
                require_dim(ctx.d, 2, "cue")?;
                sample_cue_circle(ctx.n, ctx.seed)
            }
            NodeMethod::Harmonic { max_degree } => {
                let l = max_degree.unwrap_or_else(|| nearest_harmonic_degree(ctx.d, ctx.n));
                sample_harmonic_ensemble(ctx.d, l, ctx.seed)
            }
            NodeMethod::Ope => sample_ope_nodes(ctx.d, ctx.n, ctx.seed),
        }
    }
}

fn require_dim(d: usize, want: usize, method: &str) -> Result<()> {
    if d != want {
        return Err(Error::Config(format!(
            "method {method} is defined for d = {want}, got d = {d}"
        )));
    }
    Ok(())
}

/// Largest degree whose pi_L does not overshoot n (but at least the closest).
fn nearest_harmonic_degree(d: usize, n: usize) -> usize {
    let mut best = 0;
    let mut best_gap = usize::MAX;
    for l in 0..=64 {
        let (_, pi) = crate::harmonics::harmonic_dims(d, l);
        let gap = pi.abs_diff(n);
        if gap < best_gap {
            best_gap = gap;
            best = l;
        }
        if pi > 2 * n {
            break;
        }
    }
    best
}
