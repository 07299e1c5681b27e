//! Experiment harness: problem generation, replication engine, error
//! statistics with corrected confidence intervals, epsilon sweeps, and
//! CSV/JSON report emission.

mod data;
mod stats;

pub use data::{
    banana_map, gaussian_pair_first_covariance, gen_banana_sample, gen_gaussian_pair,
    load_point_cloud, save_point_cloud, LoadedCloud, WeightColumn,
};
pub use stats::{bonferroni, ci_mean_gaussian, ci_variance_chi2};

use crate::error::{Error, Result};
use crate::estimator::{
    cv_low, cv_up, mc_mean, ols_cv_estimate, shcv_controls, shcv_default_degree, ControlFamily,
};
use crate::geom::UnitVector;
use crate::harmonics::basis_cache_get_or_build;
use crate::numeric::mean_var;
use crate::quadrature::{repel, GenContext, NodeMethod};
use crate::rng::{phase, Seed};
use crate::transport::{DiscreteMeasure, SwIntegrand};
use rayon::prelude::*;
use serde::Serialize;
use std::path::PathBuf;

/// Environment variable naming the on-disk cache directory for harmonic
/// bases.
pub const CACHE_DIR_ENV: &str = "SWQUAD_CACHE_DIR";

/// What the estimators integrate.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    /// Two sampled Gaussian clouds with random means and covariances.
    GaussianPair { d: usize, atoms: usize },
    /// Two independent banana-shaped clouds (d even).
    BananaPair { d: usize, atoms_mu: usize, atoms_nu: usize },
    /// Point clouds from CSV files.
    Files {
        mu: PathBuf,
        nu: PathBuf,
        weighted: bool,
    },
    /// Indicator of the half-sphere theta_1 > 0; exact integral 1/2.
    HalfSphere { d: usize },
}

/// Estimator layer applied on top of the generated nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorLayer {
    Mean,
    CvLow,
    CvUp,
    Shcv { degree: Option<usize> },
}

impl EstimatorLayer {
    fn parse(spec: &str) -> Result<EstimatorLayer> {
        if let Some(rest) = spec.strip_prefix("shcv:") {
            let degree: usize = rest
                .parse()
                .map_err(|_| Error::Config(format!("bad shcv degree '{rest}'")))?;
            return Ok(EstimatorLayer::Shcv {
                degree: Some(degree),
            });
        }
        match spec {
            "mean" => Ok(EstimatorLayer::Mean),
            "cvlow" => Ok(EstimatorLayer::CvLow),
            "cvup" => Ok(EstimatorLayer::CvUp),
            "shcv" => Ok(EstimatorLayer::Shcv { degree: None }),
            other => Err(Error::Config(format!("unknown estimator layer '{other}'"))),
        }
    }

    fn name(&self) -> String {
        match self {
            EstimatorLayer::Mean => "mean".into(),
            EstimatorLayer::CvLow => "cvlow".into(),
            EstimatorLayer::CvUp => "cvup".into(),
            EstimatorLayer::Shcv { degree: Some(l) } => format!("shcv:{l}"),
            EstimatorLayer::Shcv { degree: None } => "shcv".into(),
        }
    }
}

/// Node scheme plus estimator layer, parsed from `<nodes>[+<layer>]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub nodes: NodeMethod,
    pub layer: EstimatorLayer,
}

impl MethodSpec {
    pub fn parse(spec: &str) -> Result<MethodSpec> {
        let (node_part, layer) = match spec.split_once('+') {
            Some((n, l)) => (n, EstimatorLayer::parse(l.trim())?),
            None => (spec, EstimatorLayer::Mean),
        };
        Ok(MethodSpec {
            nodes: NodeMethod::parse(node_part)?,
            layer,
        })
    }

    pub fn name(&self) -> String {
        match self.layer {
            EstimatorLayer::Mean => self.nodes.name(),
            _ => format!("{}+{}", self.nodes.name(), self.layer.name()),
        }
    }
}

/// How the reference value is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSpec {
    /// QMC (grid/spiral) with 1e5 nodes for d <= 3, i.i.d. with 1e6 beyond,
    /// scaled up to respect the 10x rule; exact values when known.
    Auto,
    Exact(f64),
    Method { method: NodeMethod, nodes: usize },
}

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub p: f64,
    pub methods: Vec<MethodSpec>,
    pub node_counts: Vec<usize>,
    pub replications: usize,
    pub seed: Seed,
    pub reference: ReferenceSpec,
    /// Simultaneous confidence level before Bonferroni correction.
    pub level: f64,
    /// Step-size grid for epsilon sweeps.
    pub eps_grid: Vec<f64>,
    pub shcv_degree: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(problem: Problem, seed: Seed) -> ExperimentConfig {
        ExperimentConfig {
            problem,
            p: 2.0,
            methods: vec![MethodSpec::parse("iid").expect("valid")],
            node_counts: vec![100],
            replications: 100,
            seed,
            reference: ReferenceSpec::Auto,
            level: 0.95,
            eps_grid: Vec::new(),
            shcv_degree: None,
            cache_dir: None,
        }
    }

    pub fn dimension(&self) -> Result<usize> {
        Ok(match &self.problem {
            Problem::GaussianPair { d, .. }
            | Problem::BananaPair { d, .. }
            | Problem::HalfSphere { d } => *d,
            Problem::Files { mu, .. } => {
                let loaded = load_point_cloud(mu, WeightColumn::None)?;
                loaded.measure.dim()
            }
        })
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.node_counts.is_empty() {
            return Err(Error::Config("methods and node counts must be nonempty".into()));
        }
        if self.replications < 2 {
            return Err(Error::Config(
                "variance statistics need at least 2 replications".into(),
            ));
        }
        if self.p < 1.0 {
            return Err(Error::InvalidOrder(self.p));
        }
        if !(0.0 < self.level && self.level < 1.0) {
            return Err(Error::OutOfDomain("level", self.level));
        }
        let max_n = *self.node_counts.iter().max().expect("nonempty");
        if let ReferenceSpec::Method { nodes, .. } = &self.reference {
            if *nodes < 10 * max_n {
                return Err(Error::Config(format!(
                    "reference node count {nodes} must be at least 10x the largest \
                     experimental node count {max_n}"
                )));
            }
        }
        Ok(())
    }

    /// Parse the `key = value` config format; later keys override earlier
    /// ones, `#` starts a comment.
    pub fn from_key_values(text: &str) -> Result<ExperimentConfig> {
        let mut map = std::collections::BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: "<config>".into(),
                line: idx + 1,
                message: "expected 'key = value'".into(),
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let parse_usize = |k: &str, default: usize| -> Result<usize> {
            match get(k) {
                Some(v) => v
                    .parse()
                    .map_err(|_| Error::Config(format!("bad integer for '{k}': {v}"))),
                None => Ok(default),
            }
        };
        let parse_f64 = |k: &str, default: f64| -> Result<f64> {
            match get(k) {
                Some(v) => v
                    .parse()
                    .map_err(|_| Error::Config(format!("bad number for '{k}': {v}"))),
                None => Ok(default),
            }
        };

        let d = parse_usize("d", 3)?;
        let atoms = parse_usize("atoms", 100)?;
        let problem = match get("problem").unwrap_or("gaussian") {
            "gaussian" => Problem::GaussianPair { d, atoms },
            "banana" => Problem::BananaPair {
                d,
                atoms_mu: atoms,
                atoms_nu: parse_usize("atoms_nu", atoms)?,
            },
            "halfsphere" => Problem::HalfSphere { d },
            "files" => Problem::Files {
                mu: PathBuf::from(
                    get("mu_path")
                        .ok_or_else(|| Error::Config("problem=files needs mu_path".into()))?,
                ),
                nu: PathBuf::from(
                    get("nu_path")
                        .ok_or_else(|| Error::Config("problem=files needs nu_path".into()))?,
                ),
                weighted: get("weighted") == Some("true"),
            },
            other => return Err(Error::Config(format!("unknown problem '{other}'"))),
        };

        let methods = get("methods")
            .unwrap_or("iid")
            .split(',')
            .map(|s| MethodSpec::parse(s.trim()))
            .collect::<Result<Vec<_>>>()?;
        let node_counts = get("nodes")
            .unwrap_or("100")
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad node count '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let eps_grid = match get("eps") {
            Some(text) => text
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad eps '{s}'")))
                })
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        let reference = match get("reference").unwrap_or("auto") {
            "auto" => ReferenceSpec::Auto,
            spec => {
                if let Some(v) = spec.strip_prefix("exact:") {
                    ReferenceSpec::Exact(v.parse().map_err(|_| {
                        Error::Config(format!("bad exact reference '{v}'"))
                    })?)
                } else {
                    let (m, n) = spec.split_once(':').ok_or_else(|| {
                        Error::Config(format!("bad reference '{spec}', want method:count"))
                    })?;
                    ReferenceSpec::Method {
                        method: NodeMethod::parse(m)?,
                        nodes: n
                            .parse()
                            .map_err(|_| Error::Config(format!("bad reference count '{n}'")))?,
                    }
                }
            }
        };

        Ok(ExperimentConfig {
            problem,
            p: parse_f64("p", 2.0)?,
            methods,
            node_counts,
            replications: parse_usize("replications", 100)?,
            seed: Seed::new(parse_usize("seed", 0)? as u64),
            reference,
            level: parse_f64("level", 0.95)?,
            eps_grid,
            shcv_degree: match get("shcv_degree") {
                Some(v) => Some(v.parse().map_err(|_| {
                    Error::Config(format!("bad shcv_degree '{v}'"))
                })?),
                None => None,
            },
            cache_dir: get("cache_dir")
                .map(PathBuf::from)
                .or_else(|| std::env::var(CACHE_DIR_ENV).ok().map(PathBuf::from)),
        })
    }

    /// Full config echo for report provenance.
    pub fn to_json(&self) -> serde_json::Value {
        let problem = match &self.problem {
            Problem::GaussianPair { d, atoms } => serde_json::json!({
                "kind": "gaussian", "d": d, "atoms": atoms,
            }),
            Problem::BananaPair { d, atoms_mu, atoms_nu } => serde_json::json!({
                "kind": "banana", "d": d, "atoms_mu": atoms_mu, "atoms_nu": atoms_nu,
            }),
            Problem::Files { mu, nu, weighted } => serde_json::json!({
                "kind": "files", "mu": mu.display().to_string(),
                "nu": nu.display().to_string(), "weighted": weighted,
            }),
            Problem::HalfSphere { d } => serde_json::json!({
                "kind": "halfsphere", "d": d,
            }),
        };
        let reference = match &self.reference {
            ReferenceSpec::Auto => "auto".to_string(),
            ReferenceSpec::Exact(v) => format!("exact:{v}"),
            ReferenceSpec::Method { method, nodes } => format!("{}:{nodes}", method.name()),
        };
        serde_json::json!({
            "problem": problem,
            "p": self.p,
            "methods": self.methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "nodes": self.node_counts,
            "replications": self.replications,
            "seed": self.seed.root(),
            "reference": reference,
            "level": self.level,
            "eps_grid": self.eps_grid,
            "shcv_degree": self.shcv_degree,
        })
    }
}

/// A built problem: measures (when applicable) and the integrand.
pub struct ProblemInstance {
    pub d: usize,
    pub p: f64,
    pub measures: Option<(DiscreteMeasure, DiscreteMeasure)>,
    /// Analytic value of the sphere integral, when known.
    pub exact: Option<f64>,
}

impl ProblemInstance {
    pub fn build(config: &ExperimentConfig) -> Result<ProblemInstance> {
        let p = config.p;
        Ok(match &config.problem {
            Problem::GaussianPair { d, atoms } => {
                let (mu, nu) = gen_gaussian_pair(*d, *atoms, config.seed)?;
                ProblemInstance {
                    d: *d,
                    p,
                    measures: Some((mu, nu)),
                    exact: None,
                }
            }
            Problem::BananaPair { d, atoms_mu, atoms_nu } => {
                let mu = gen_banana_sample(*d, *atoms_mu, config.seed)?;
                let nu = gen_banana_sample(*d, *atoms_nu, config.seed.child(1))?;
                ProblemInstance {
                    d: *d,
                    p,
                    measures: Some((mu, nu)),
                    exact: None,
                }
            }
            Problem::Files { mu, nu, weighted } => {
                let cols = if *weighted {
                    WeightColumn::Trailing
                } else {
                    WeightColumn::None
                };
                let mu = load_point_cloud(mu, cols)?.measure;
                let nu = load_point_cloud(nu, cols)?.measure;
                if mu.dim() != nu.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: mu.dim(),
                        got: nu.dim(),
                    });
                }
                ProblemInstance {
                    d: mu.dim(),
                    p,
                    measures: Some((mu, nu)),
                    exact: None,
                }
            }
            Problem::HalfSphere { d } => ProblemInstance {
                d: *d,
                p,
                measures: None,
                exact: Some(0.5),
            },
        })
    }

    /// The integrand over the sphere: the sliced Wasserstein integrand
    /// W_p^p of the projected measures, or the synthetic indicator.
    pub fn integrand(&self) -> Result<Box<dyn Fn(&UnitVector) -> f64 + Send + Sync + '_>> {
        match &self.measures {
            Some((mu, nu)) => {
                let f = SwIntegrand::new(mu, nu, self.p)?;
                Ok(Box::new(move |theta: &UnitVector| f.eval(theta)))
            }
            None => Ok(Box::new(|theta: &UnitVector| {
                if theta[0] > 0.0 {
                    1.0
                } else {
                    0.0
                }
            })),
        }
    }
}

/// One (method, node count) result row.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub method: String,
    pub n_requested: usize,
    pub n_actual: usize,
    pub status: String,
    pub stats: Option<RowStats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowStats {
    /// Mean of the integral estimates (the SW_p^p scale).
    pub mean: f64,
    /// Mean of the p-th roots.
    pub mean_sw: f64,
    /// Unbiased sample variance of the integral estimates.
    pub variance: f64,
    /// Mean squared error against the reference.
    pub mse: f64,
    pub bias_squared: f64,
    pub ci_mean: (f64, f64),
    pub ci_variance: (f64, f64),
    /// Bonferroni-adjusted per-interval level.
    pub adjusted_level: f64,
    pub mean_wall_seconds: f64,
    pub mean_evaluations: f64,
}

/// Aggregated experiment output.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: serde_json::Value,
    pub reference: f64,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.status != "ok")
    }

    /// CSV with one row per (method, N, statistic). Timing statistics are
    /// emitted only when `include_timing` is set, so that fixed-seed runs
    /// byte-reproduce the deterministic portion.
    pub fn to_csv(&self, include_timing: bool) -> String {
        let mut out = String::from("method,n_requested,n_actual,statistic,value,lo,hi,status\n");
        for row in &self.rows {
            let mut push = |stat: &str, value: f64, lo: Option<f64>, hi: Option<f64>| {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    row.method,
                    row.n_requested,
                    row.n_actual,
                    stat,
                    fmt(value),
                    lo.map(fmt).unwrap_or_default(),
                    hi.map(fmt).unwrap_or_default(),
                    row.status
                ));
            };
            match &row.stats {
                Some(s) => {
                    push("mean", s.mean, None, None);
                    push("mean_sw", s.mean_sw, None, None);
                    push("variance", s.variance, None, None);
                    push("mse", s.mse, None, None);
                    push("bias_squared", s.bias_squared, None, None);
                    push("ci_mean", s.mean, Some(s.ci_mean.0), Some(s.ci_mean.1));
                    push(
                        "ci_variance",
                        s.variance,
                        Some(s.ci_variance.0),
                        Some(s.ci_variance.1),
                    );
                    push("adjusted_level", s.adjusted_level, None, None);
                    push("mean_evaluations", s.mean_evaluations, None, None);
                    if include_timing {
                        push("mean_wall_seconds", s.mean_wall_seconds, None, None);
                    }
                }
                None => push("failed", f64::NAN, None, None),
            }
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.17e}")
    }
}

/// Deterministic per-replication seed.
fn rep_seed(seed: Seed, method_idx: usize, n_idx: usize, rep: usize) -> Seed {
    seed.child(0x4d45_5448_0000_0000 ^ ((method_idx as u64) << 24) ^ (n_idx as u64))
        .child(rep as u64)
}

/// Reference value for the experiment's integral.
pub fn compute_reference(config: &ExperimentConfig, problem: &ProblemInstance) -> Result<f64> {
    if let Some(exact) = problem.exact {
        if matches!(config.reference, ReferenceSpec::Auto) {
            return Ok(exact);
        }
    }
    if let ReferenceSpec::Exact(v) = config.reference {
        return Ok(v);
    }
    let max_n = *config.node_counts.iter().max().expect("nonempty");
    let (method, count) = match &config.reference {
        ReferenceSpec::Method { method, nodes } => (method.clone(), *nodes),
        _ => {
            // QMC with 1e5 nodes in d <= 3, i.i.d. Monte Carlo with 1e6
            // beyond; never below 10x the largest experimental count.
            let (m, base) = match problem.d {
                2 => (NodeMethod::Grid2d, 100_000),
                3 => (NodeMethod::Spiral3d, 100_000),
                _ => (NodeMethod::Iid, 1_000_000),
            };
            (m, base.max(10 * max_n))
        }
    };
    let f = problem.integrand()?;
    let seed = config.seed.child(0x5245_4600);
    if method == NodeMethod::Iid {
        // Streamed evaluation keeps memory flat for 1e6-node references.
        let mut rng = seed.phase(phase::REFERENCE);
        let mut acc = crate::numeric::compensated_sum(
            (0..count).map(|_| f(&crate::geom::sample_uniform_sphere(problem.d, 1, &mut rng).expect("valid dim").remove(0))),
        );
        acc /= count as f64;
        return Ok(acc);
    }
    let ctx = GenContext {
        d: problem.d,
        n: count,
        seed,
        integrand: Some(&*f),
    };
    let nodes = method.generate(&ctx)?;
    nodes.weighted_mean(|theta| f(theta))
}

/// Run every (method, N) cell with independent replications and aggregate
/// the statistics. Method failures are recorded per row and never abort
/// the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let problem = ProblemInstance::build(config)?;
    let reference = compute_reference(config, &problem)?;
    let row_count = config.methods.len() * config.node_counts.len();
    let adjusted = bonferroni(config.level, row_count);

    // Build harmonic bases up front so replications share them.
    let mut rows = Vec::with_capacity(row_count);
    for (mi, method) in config.methods.iter().enumerate() {
        for (ni, &n) in config.node_counts.iter().enumerate() {
            rows.push(run_row(
                config, &problem, reference, adjusted, method, mi, n, ni,
            ));
        }
    }
    Ok(Report {
        config: config.to_json(),
        reference,
        rows,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_row(
    config: &ExperimentConfig,
    problem: &ProblemInstance,
    reference: f64,
    adjusted_level: f64,
    method: &MethodSpec,
    method_idx: usize,
    n: usize,
    n_idx: usize,
) -> ReportRow {
    let fail = |message: String| ReportRow {
        method: method.name(),
        n_requested: n,
        n_actual: 0,
        status: message,
        stats: None,
    };
    let f = match problem.integrand() {
        Ok(f) => f,
        Err(e) => return fail(e.to_string()),
    };

    // Estimator-layer setup that is shared across replications.
    let controls: Option<ControlFamily> = match &method.layer {
        EstimatorLayer::Mean => None,
        EstimatorLayer::CvLow | EstimatorLayer::CvUp => {
            let Some((mu, nu)) = &problem.measures else {
                return fail("moment control variates need measures".into());
            };
            let built = if matches!(method.layer, EstimatorLayer::CvLow) {
                cv_low(mu, nu)
            } else {
                cv_up(mu, nu)
            };
            match built {
                Ok(c) => Some(c),
                Err(e) => return fail(e.to_string()),
            }
        }
        EstimatorLayer::Shcv { degree } => {
            let degree = degree
                .or(config.shcv_degree)
                .unwrap_or_else(|| shcv_default_degree(problem.d));
            let basis = match basis_cache_get_or_build(
                problem.d,
                degree,
                config.seed.child(0xba515),
                config.cache_dir.as_deref(),
            ) {
                Ok(b) => b,
                Err(e) => return fail(e.to_string()),
            };
            match shcv_controls(&basis, degree) {
                Ok(c) => Some(c),
                Err(e) => return fail(e.to_string()),
            }
        }
    };

    let run_one = |rep: usize| -> Result<(f64, f64, f64, usize)> {
        let seed = rep_seed(config.seed, method_idx, n_idx, rep);
        let ctx = GenContext {
            d: problem.d,
            n,
            seed,
            integrand: Some(&*f),
        };
        let nodes = method.nodes.generate(&ctx)?;
        let est = match &controls {
            None => mc_mean(|t| f(t), &nodes)?,
            Some(family) => ols_cv_estimate(|t| f(t), &nodes, family)?,
        };
        let wall = nodes.provenance.gen_time.as_secs_f64() + est.wall_time.as_secs_f64();
        let sw = est.value.max(0.0).powf(1.0 / problem.p);
        Ok((est.value, sw, wall, nodes.len()))
    };

    let results: Vec<Result<(f64, f64, f64, usize)>> = (0..config.replications)
        .into_par_iter()
        .map(run_one)
        .collect();

    let mut values = Vec::with_capacity(results.len());
    let mut sws = Vec::with_capacity(results.len());
    let mut walls = Vec::with_capacity(results.len());
    let mut n_actual = 0usize;
    for r in results {
        match r {
            Ok((v, sw, wall, len)) => {
                values.push(v);
                sws.push(sw);
                walls.push(wall);
                n_actual = len;
            }
            Err(e) => return fail(e.to_string()),
        }
    }

    let (mean, variance) = mean_var(&values);
    let r = values.len() as f64;
    let mse = values.iter().map(|v| (v - reference) * (v - reference)).sum::<f64>() / r;
    let bias_squared = (mean - reference) * (mean - reference);
    // Decomposition sanity: mse = population variance + bias^2.
    let var_pop = variance * (r - 1.0) / r;
    debug_assert!(
        (mse - var_pop - bias_squared).abs() <= 1e-10 * mse.abs().max(1e-300),
        "MSE decomposition violated"
    );
    let ci_mean = match ci_mean_gaussian(&values, adjusted_level) {
        Ok(ci) => ci,
        Err(e) => return fail(e.to_string()),
    };
    let ci_variance = match ci_variance_chi2(&values, adjusted_level) {
        Ok(ci) => ci,
        Err(e) => return fail(e.to_string()),
    };
    ReportRow {
        method: method.name(),
        n_requested: n,
        n_actual,
        status: "ok".into(),
        stats: Some(RowStats {
            mean,
            mean_sw: sws.iter().sum::<f64>() / r,
            variance,
            mse,
            bias_squared,
            ci_mean,
            ci_variance,
            adjusted_level,
            mean_wall_seconds: walls.iter().sum::<f64>() / r,
            mean_evaluations: n_actual as f64,
        }),
    }
}

/// One epsilon row of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub mean: f64,
    pub variance: f64,
    pub ci_variance: (f64, f64),
    pub mse: f64,
    pub adjusted_level: f64,
}

/// Epsilon-sweep output: one row per step size, chi-square variance
/// intervals Bonferroni-corrected across the grid.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub config: serde_json::Value,
    pub reference: f64,
    pub base_method: String,
    pub n: usize,
    pub force_exponent: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,mean,variance,var_lo,var_hi,mse,adjusted_level\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                fmt(r.eps),
                fmt(r.mean),
                fmt(r.variance),
                fmt(r.ci_variance.0),
                fmt(r.ci_variance.1),
                fmt(r.mse),
                fmt(r.adjusted_level),
            ));
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Sweep the repulsion step size over `config.eps_grid` (an eps = 0
/// reference row is prepended when missing), repelling the first method's
/// node sets. Replication seeds are shared across eps values, so the
/// eps = 0 row reproduces the base process exactly.
pub fn epsilon_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    if config.eps_grid.is_empty() {
        return Err(Error::Config("epsilon sweep needs a nonempty eps grid".into()));
    }
    if config.replications < 30 {
        return Err(Error::Config(
            "epsilon sweep needs at least 30 replications for variance intervals".into(),
        ));
    }
    let mut grid = config.eps_grid.clone();
    if !grid.contains(&0.0) {
        grid.insert(0, 0.0);
    }
    let problem = ProblemInstance::build(config)?;
    let reference = compute_reference(config, &problem)?;
    let f = problem.integrand()?;
    let base = &config.methods[0];
    let n = config.node_counts[0];
    let force_s = problem.d as f64;
    let adjusted = bonferroni(config.level, grid.len());

    // Estimator layer applied after the repulsion step (repelled SHCV
    // sweeps and friends).
    let controls: Option<ControlFamily> = match &base.layer {
        EstimatorLayer::Mean => None,
        EstimatorLayer::CvLow | EstimatorLayer::CvUp => {
            let (mu, nu) = problem.measures.as_ref().ok_or_else(|| {
                Error::Config("moment control variates need measures".into())
            })?;
            Some(if matches!(base.layer, EstimatorLayer::CvLow) {
                cv_low(mu, nu)?
            } else {
                cv_up(mu, nu)?
            })
        }
        EstimatorLayer::Shcv { degree } => {
            let degree = degree
                .or(config.shcv_degree)
                .unwrap_or_else(|| shcv_default_degree(problem.d));
            let basis = basis_cache_get_or_build(
                problem.d,
                degree,
                config.seed.child(0xba515),
                config.cache_dir.as_deref(),
            )?;
            Some(shcv_controls(&basis, degree)?)
        }
    };

    // One base realization per replication, shared across the grid.
    let base_nodes: Vec<_> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let ctx = GenContext {
                d: problem.d,
                n,
                seed: rep_seed(config.seed, 0, 0, rep),
                integrand: Some(&*f),
            };
            base.nodes.generate(&ctx)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(grid.len());
    for &eps in &grid {
        let values: Vec<f64> = base_nodes
            .par_iter()
            .map(|nodes| -> Result<f64> {
                let moved = if eps == 0.0 {
                    nodes.clone()
                } else {
                    repel(nodes, eps, force_s)?
                };
                Ok(match &controls {
                    None => mc_mean(|t| f(t), &moved)?.value,
                    Some(family) => ols_cv_estimate(|t| f(t), &moved, family)?.value,
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let (mean, variance) = mean_var(&values);
        let mse = values
            .iter()
            .map(|v| (v - reference) * (v - reference))
            .sum::<f64>()
            / values.len() as f64;
        rows.push(SweepRow {
            eps,
            mean,
            variance,
            ci_variance: ci_variance_chi2(&values, adjusted)?,
            mse,
            adjusted_level: adjusted,
        });
    }
    Ok(SweepReport {
        config: config.to_json(),
        reference,
        base_method: base.name(),
        n,
        force_exponent: force_s,
        rows,
    })
}
