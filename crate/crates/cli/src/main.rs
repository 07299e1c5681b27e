//! Command-line front end: one-shot sliced Wasserstein estimates, benchmark
//! runs, repulsion-step sweeps, spectral-profile exports, toy-data
//! generation.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use swquad::estimator::{ols_cv_estimate, shcv_controls, shcv_default_degree};
use swquad::harmonics::basis_cache_get_or_build;
use swquad::harness::{
    epsilon_sweep, gen_banana_sample, gen_gaussian_pair, load_point_cloud, run_experiment,
    save_point_cloud, ExperimentConfig, MethodSpec, WeightColumn, CACHE_DIR_ENV,
};
use swquad::quadrature::GenContext;
use swquad::spectral::spectral_profile;
use swquad::transport::{estimate_sw, SwIntegrand};
use swquad::{DiscreteMeasure, Seed};

#[derive(Parser)]
#[command(
    name = "swquad",
    about = "Sliced Wasserstein estimation with repulsive quadratures on the sphere",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate SW_p between two CSV point clouds.
    Estimate {
        /// First point cloud (CSV, one atom per row).
        #[arg(long)]
        mu: PathBuf,
        /// Second point cloud.
        #[arg(long)]
        nu: PathBuf,
        /// Files carry a trailing weight column.
        #[arg(long, default_value_t = false)]
        weighted: bool,
        /// Wasserstein order (>= 1).
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Node method, e.g. `iid`, `unifortho`, `spiral3d`,
        /// `repelled:iid`, optionally with `+shcv`/`+cvup`/`+cvlow`.
        #[arg(long, default_value = "iid")]
        method: String,
        /// Number of projection directions.
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Maximum harmonic degree for `+shcv` (default 4 up to d = 10, 2 beyond).
        #[arg(long)]
        shcv_degree: Option<usize>,
    },
    /// Run a replicated benchmark described by a config file.
    Bench {
        /// Config file in `key = value` format (see README).
        #[arg(long)]
        config: PathBuf,
        /// Output prefix; writes <out>.csv and <out>.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the replication count.
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Sweep the repulsion step size over the config's eps grid.
    SweepEps {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Export the spectral profile (l, mu_l, lambda_2l) of an SW integrand.
    Spectrum {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, default_value_t = false)]
        weighted: bool,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Largest harmonic degree of the profile.
        #[arg(long, default_value_t = 12)]
        max_degree: usize,
        /// Integration nodes (spiral QMC in d = 3, grid in d = 2, i.i.d. beyond).
        #[arg(long, default_value_t = 100_000)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate toy point clouds.
    Gen {
        #[command(subcommand)]
        what: GenWhat,
    },
}

#[derive(Subcommand)]
enum GenWhat {
    /// Two Gaussian clouds with random means and covariances.
    Gaussian {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 100)]
        atoms: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_mu: PathBuf,
        #[arg(long)]
        out_nu: PathBuf,
    },
    /// A banana-shaped cloud (d even).
    Banana {
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, default_value_t = 100)]
        atoms: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Estimate {
            mu,
            nu,
            weighted,
            p,
            method,
            nodes,
            seed,
            shcv_degree,
        } => cmd_estimate(&mu, &nu, weighted, p, &method, nodes, seed, shcv_degree),
        Command::Bench {
            config,
            out,
            seed,
            replications,
        } => cmd_bench(&config, out.as_deref(), seed, replications),
        Command::SweepEps {
            config,
            out,
            seed,
            replications,
        } => cmd_sweep(&config, out.as_deref(), seed, replications),
        Command::Spectrum {
            mu,
            nu,
            weighted,
            p,
            max_degree,
            nodes,
            seed,
            out,
        } => cmd_spectrum(&mu, &nu, weighted, p, max_degree, nodes, seed, &out),
        Command::Gen { what } => cmd_gen(what),
    }
}

fn load_cloud(path: &Path, weighted: bool) -> Result<DiscreteMeasure> {
    let cols = if weighted {
        WeightColumn::Trailing
    } else {
        WeightColumn::None
    };
    let loaded = load_point_cloud(path, cols)
        .with_context(|| format!("loading {}", path.display()))?;
    if loaded.renormalized {
        eprintln!(
            "warning: weights in {} did not sum to 1 and were renormalized",
            path.display()
        );
    }
    Ok(loaded.measure)
}

#[allow(clippy::too_many_arguments)]
fn cmd_estimate(
    mu_path: &Path,
    nu_path: &Path,
    weighted: bool,
    p: f64,
    method: &str,
    nodes: usize,
    seed: u64,
    shcv_degree: Option<usize>,
) -> Result<ExitCode> {
    let mu = load_cloud(mu_path, weighted)?;
    let nu = load_cloud(nu_path, weighted)?;
    if mu.dim() != nu.dim() {
        bail!("dimension mismatch: {} vs {}", mu.dim(), nu.dim());
    }
    let spec = MethodSpec::parse(method)?;
    let seed = Seed::new(seed);
    let f = SwIntegrand::new(&mu, &nu, p)?;
    let ctx = GenContext {
        d: mu.dim(),
        n: nodes,
        seed,
        integrand: Some(&|theta| f.eval(theta)),
    };
    let node_set = spec.nodes.generate(&ctx)?;

    use swquad::harness::EstimatorLayer;
    let result = match &spec.layer {
        EstimatorLayer::Mean => estimate_sw(&mu, &nu, p, &node_set)?,
        EstimatorLayer::CvLow | EstimatorLayer::CvUp => {
            let family = if matches!(spec.layer, EstimatorLayer::CvLow) {
                swquad::estimator::cv_low(&mu, &nu)?
            } else {
                swquad::estimator::cv_up(&mu, &nu)?
            };
            let mut est = ols_cv_estimate(|t| f.eval(t), &node_set, &family)?;
            est.sw_value = est.value.max(0.0).powf(1.0 / p);
            est
        }
        EstimatorLayer::Shcv { degree } => {
            let degree = degree
                .or(shcv_degree)
                .unwrap_or_else(|| shcv_default_degree(mu.dim()));
            let cache = std::env::var(CACHE_DIR_ENV).ok().map(PathBuf::from);
            let basis =
                basis_cache_get_or_build(mu.dim(), degree, seed.child(0xba515), cache.as_deref())?;
            let controls = shcv_controls(&basis, degree)?;
            let mut est = ols_cv_estimate(|t| f.eval(t), &node_set, &controls)?;
            est.sw_value = est.value.max(0.0).powf(1.0 / p);
            est
        }
    };

    println!("method        {}", spec.name());
    println!("d             {}", mu.dim());
    println!("p             {p}");
    println!("nodes         {}", node_set.len());
    println!("evaluations   {}", result.evaluations);
    println!("sw_p^p        {:.12e}", result.value);
    println!("sw_p          {:.12e}", result.sw_value);
    if result.diagnostics.clipped_negative {
        println!("note          raw estimate was negative; clipped for the root");
    }
    if result.diagnostics.controls > 0 {
        println!("controls      {}", result.diagnostics.controls);
        if !result.diagnostics.dropped_controls.is_empty() {
            println!(
                "dropped       {:?}",
                result.diagnostics.dropped_controls
            );
        }
    }
    println!(
        "wall_seconds  {:.6}",
        (node_set.provenance.gen_time + result.wall_time).as_secs_f64()
    );
    Ok(ExitCode::SUCCESS)
}

fn load_config(
    path: &Path,
    seed: Option<u64>,
    replications: Option<usize>,
) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut config = ExperimentConfig::from_key_values(&text)?;
    if let Some(s) = seed {
        config.seed = Seed::new(s);
    }
    if let Some(r) = replications {
        config.replications = r;
    }
    Ok(config)
}

fn cmd_bench(
    path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    replications: Option<usize>,
) -> Result<ExitCode> {
    let config = load_config(path, seed, replications)?;
    let report = run_experiment(&config)?;
    for row in &report.rows {
        match &row.stats {
            Some(s) => println!(
                "{:28} N={:6} mean={:+.6e} var={:.6e} mse={:.6e} wall={:.3}s",
                row.method, row.n_actual, s.mean, s.variance, s.mse, s.mean_wall_seconds
            ),
            None => println!("{:28} N={:6} FAILED: {}", row.method, row.n_requested, row.status),
        }
    }
    println!("reference = {:.12e}", report.reference);
    if let Some(prefix) = out {
        write_outputs(prefix, &report.to_csv(true), &report.to_json_string())?;
    }
    Ok(if report.any_failed() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_sweep(
    path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    replications: Option<usize>,
) -> Result<ExitCode> {
    let config = load_config(path, seed, replications)?;
    let report = epsilon_sweep(&config)?;
    println!(
        "base={} N={} s={} reference={:.9e}",
        report.base_method, report.n, report.force_exponent, report.reference
    );
    for row in &report.rows {
        println!(
            "eps={:<12.6e} var={:.6e} ci=[{:.6e}, {:.6e}] mse={:.6e}",
            row.eps, row.variance, row.ci_variance.0, row.ci_variance.1, row.mse
        );
    }
    if let Some(prefix) = out {
        write_outputs(prefix, &report.to_csv(), &report.to_json_string())?;
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_spectrum(
    mu_path: &Path,
    nu_path: &Path,
    weighted: bool,
    p: f64,
    max_degree: usize,
    nodes: usize,
    seed: u64,
    out: &Path,
) -> Result<ExitCode> {
    let mu = load_cloud(mu_path, weighted)?;
    let nu = load_cloud(nu_path, weighted)?;
    let d = mu.dim();
    let seed = Seed::new(seed);
    let cache = std::env::var(CACHE_DIR_ENV).ok().map(PathBuf::from);
    let basis = basis_cache_get_or_build(d, max_degree, seed.child(0xba515), cache.as_deref())?;
    let node_set = match d {
        2 => swquad::quadrature::nodes_grid_circle(nodes, seed)?,
        3 => swquad::quadrature::nodes_spiral_sphere(nodes, seed)?,
        _ => swquad::quadrature::nodes_iid(d, nodes, seed)?,
    };
    let f = SwIntegrand::new(&mu, &nu, p)?;
    let profile = spectral_profile(&|t| f.eval(t), &basis, max_degree, &node_set)?;
    std::fs::write(out, profile.to_csv_string())
        .with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} (degrees 0..={max_degree}, {} nodes)", out.display(), node_set.len());
    for l in 0..=max_degree {
        println!("l={l:<3} mu={:.6e} lambda={:.6e}", profile.energies[l], profile.lambdas[l]);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(what: GenWhat) -> Result<ExitCode> {
    match what {
        GenWhat::Gaussian {
            d,
            atoms,
            seed,
            out_mu,
            out_nu,
        } => {
            let (mu, nu) = gen_gaussian_pair(d, atoms, Seed::new(seed))?;
            save_point_cloud(&mu, &out_mu, WeightColumn::None)?;
            save_point_cloud(&nu, &out_nu, WeightColumn::None)?;
            println!("wrote {} and {}", out_mu.display(), out_nu.display());
        }
        GenWhat::Banana { d, atoms, seed, out } => {
            let m = gen_banana_sample(d, atoms, Seed::new(seed))?;
            save_point_cloud(&m, &out, WeightColumn::None)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_outputs(prefix: &Path, csv: &str, json: &str) -> Result<()> {
    let csv_path = prefix.with_extension("csv");
    let json_path = prefix.with_extension("json");
    std::fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;
    std::fs::write(&json_path, json)
        .with_context(|| format!("writing {}", json_path.display()))?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}
