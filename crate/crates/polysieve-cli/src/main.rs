//! Command-line driver: `fit` a single dataset, run the reference
//! `experiment` suites, execute numerical `check` suites, or `sample`
//! observations from the reference targets.
//!
//! Exit codes: 0 success, 1 check-suite assertion failure, 2 configuration
//! or usage error, 3 numeric failure.

mod config;
mod manifest;

use clap::{Parser, Subcommand};
use polysieve::basis::BasisFamily;
use polysieve::density::format_f64;
use polysieve::experiments::{self, ExperimentConfig, ExperimentId};
use polysieve::inference::{self, KnVariant, SievePriorSpec};
use polysieve::report::{CsvCell, CsvTable, SvgPlot};
use polysieve::sampling::{self, TrueDensityKind, TrueDensitySpec};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use config::{parse_fit_config, FitConfig, SigmaSetting};
use manifest::RunManifest;

#[derive(Debug)]
pub enum CliError {
    /// Schema or usage violation (exit 2).
    Config(String),
    /// Numeric failure (exit 3).
    Numeric(String),
    /// A check suite reported violations (exit 1).
    CheckFailed,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numeric(msg) => write!(f, "numeric error: {msg}"),
            CliError::CheckFailed => write!(f, "check failed"),
        }
    }
}

impl From<polysieve::Error> for CliError {
    fn from(e: polysieve::Error) -> Self {
        match e {
            polysieve::Error::Input(_) | polysieve::Error::Capability(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "polysieve",
    version,
    about = "Bayesian density estimation with weighted orthogonal polynomial sieves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one dataset from a flat key=value config file.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides the config `out` key).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a predefined experiment: exp1, exp2, supp-laguerre, supp-hermite.
    Experiment {
        id: String,
        /// Replications per sample size (exp2).
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated sample sizes override.
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Use the paper-scale sample sizes (excluded from CI budgets).
        #[arg(long)]
        paper_scale: bool,
        /// `trig` adds the trigonometric comparison fit (exp1 only).
        #[arg(long)]
        basis: Option<String>,
    },
    /// Run a verification suite: orthogonality, hardy, growth, divergence.
    Check {
        suite: String,
        /// Trial count for the hardy suite.
        #[arg(long)]
        trials: Option<usize>,
        /// Family filter for the growth suite (legendre | hermite).
        #[arg(long)]
        family: Option<String>,
        /// Smoothness filter for the growth suite.
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw observations from a reference target into a CSV file.
    Sample {
        /// exp1-sine | supp-exponential | supp-gaussian
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV path (default observations.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::CheckFailed) => ExitCode::from(1),
        Err(err @ CliError::Config(_)) => {
            eprintln!("{err}");
            ExitCode::from(2)
        }
        Err(err @ CliError::Numeric(_)) => {
            eprintln!("{err}");
            ExitCode::from(3)
        }
    }
}

fn run() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Fit {
            config,
            seed,
            out,
            threads,
        } => cmd_fit(&config, seed, out, threads),
        Command::Experiment {
            id,
            m,
            seed,
            n,
            out,
            threads,
            paper_scale,
            basis,
        } => cmd_experiment(&id, m, seed, n, out, threads, paper_scale, basis),
        Command::Check {
            suite,
            trials,
            family,
            p,
            seed,
        } => cmd_check(&suite, trials, family, p, seed),
        Command::Sample { kind, n, seed, out } => cmd_sample(&kind, n, seed, out),
    }
}

fn thread_cap(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("POLYSIEVE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

#[derive(Serialize)]
struct FitReport {
    config: FitConfig,
    k: usize,
    n_observations: usize,
    acceptance_rate: f64,
    final_proposal_scale: f64,
    clamp_mass: f64,
    hellinger: Option<f64>,
    warnings: Vec<String>,
}

fn default_target(family: BasisFamily) -> Option<TrueDensityKind> {
    match family {
        BasisFamily::Legendre | BasisFamily::GeneralizedLegendre => Some(TrueDensityKind::Exp1Sine),
        BasisFamily::Laguerre => Some(TrueDensityKind::SuppExponential),
        BasisFamily::Hermite => Some(TrueDensityKind::SuppGaussian),
        BasisFamily::Trigonometric => None,
    }
}

fn display_grid(family: BasisFamily, points: usize) -> Vec<f64> {
    let (lo, hi) = match family {
        BasisFamily::Legendre | BasisFamily::GeneralizedLegendre => (-1.0, 1.0),
        BasisFamily::Trigonometric => (0.0, 1.0),
        BasisFamily::Laguerre => (0.0, 12.0),
        BasisFamily::Hermite => (-4.0, 4.0),
    };
    experiments::linspace(lo, hi, points)
}

fn cmd_fit(
    config_path: &Path,
    seed_flag: Option<u64>,
    out_flag: Option<PathBuf>,
    _threads: Option<usize>,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(format!("cannot read `{}`: {e}", config_path.display())))?;
    let mut cfg = parse_fit_config(&text)?;
    if let Some(seed) = seed_flag {
        cfg.seed = seed;
        cfg.mcmc.seed = seed;
    }
    let out_dir = out_flag
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("polysieve_out/fit"));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("cannot create `{}`: {e}", out_dir.display())))?;

    // observations: imported or synthesized from the family's reference target
    let (data, truth) = match &cfg.data {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read data `{}`: {e}", path.display()))
            })?;
            (sampling::observations_from_csv(&text)?, None)
        }
        None => {
            let kind = default_target(cfg.family).ok_or_else(|| {
                CliError::Config(format!(
                    "no reference target for the {} family; provide a `data` path",
                    cfg.family
                ))
            })?;
            let truth = TrueDensitySpec::build(kind)?;
            let data = truth.draw(cfg.n, cfg.seed)?;
            (data, Some(truth))
        }
    };

    let prior = match &cfg.sigmas {
        SigmaSetting::Theoretical => {
            let k = cfg
                .k
                .unwrap_or_else(|| inference::k_n_rule(data.len(), cfg.p, KnVariant::Exp2));
            SievePriorSpec::theoretical(cfg.family, cfg.p, k)?
        }
        SigmaSetting::Explicit(sigmas) => {
            // the scale coordinate is not likelihood-identified; pin it
            let gamma0 = cfg.family.gamma0();
            SievePriorSpec::explicit(cfg.family, sigmas.clone())?.pin(0, 1.0 / gamma0)
        }
    };
    let k = prior.truncation();

    let grid = display_grid(cfg.family, cfg.grid);
    let mcmc = polysieve::inference::McmcConfig {
        seed: cfg.seed,
        ..cfg.mcmc
    };
    let fit = experiments::fit_single(
        &prior,
        &data,
        &mcmc,
        &grid,
        truth.as_ref().map(|t| t.density()),
    )?;

    let mut written = Vec::new();
    let chain_path = out_dir.join("chain.csv");
    polysieve::report::write_text(&chain_path, &fit.chain.to_csv(mcmc.burn_in))?;
    written.push(chain_path);

    let mut curves = CsvTable::new(if truth.is_some() {
        "x,true,mean,lower,upper"
    } else {
        "x,mean,lower,upper"
    });
    for (i, &x) in grid.iter().enumerate() {
        let mut row = vec![CsvCell::Float(x)];
        if let Some(t) = &truth {
            row.push(CsvCell::Float(t.density().evaluate(x)?));
        }
        row.extend([
            CsvCell::Float(fit.curves.mean[i]),
            CsvCell::Float(fit.curves.lower[i]),
            CsvCell::Float(fit.curves.upper[i]),
        ]);
        curves.push_row(&row);
    }
    let curves_path = out_dir.join("curves.csv");
    curves.write(&curves_path)?;
    written.push(curves_path);

    let mut warnings = Vec::new();
    if fit.curves.clamp_mass > 1e-6 {
        warnings.push(format!("clamp mass {:.3e} above 1e-6", fit.curves.clamp_mass));
    }
    let report = FitReport {
        k,
        n_observations: data.len(),
        acceptance_rate: fit.chain.acceptance_rate,
        final_proposal_scale: fit.chain.final_scale,
        clamp_mass: fit.curves.clamp_mass,
        hellinger: fit.hellinger,
        warnings,
        config: cfg,
    };
    let report_path = out_dir.join("report.json");
    polysieve::report::write_text(
        &report_path,
        &serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Numeric(format!("report serialization: {e}")))?,
    )?;
    written.push(report_path);

    let mut plot = SvgPlot::new("posterior fit", "x", "density").floor_y_at_zero();
    plot.band(&grid, &fit.curves.lower, &fit.curves.upper, "#4477cc", "95% band");
    plot.line(&grid, &fit.curves.mean, "#2244aa", "posterior mean");
    if let Some(t) = &truth {
        let tv: Vec<f64> = grid
            .iter()
            .map(|&x| t.density().evaluate(x))
            .collect::<polysieve::Result<_>>()?;
        plot.dashed(&grid, &tv, "#cc3333", "true density");
    }
    let plot_path = out_dir.join("plot.svg");
    plot.write(&plot_path)?;
    written.push(plot_path);

    let resolved = serde_json::to_value(&report)
        .map_err(|e| CliError::Numeric(format!("manifest echo: {e}")))?;
    RunManifest::new("fit", Some(config_path), resolved, report.config.seed, &written)
        .write(&out_dir)?;
    println!(
        "fit: n={} k={} acceptance={:.3}{}",
        report.n_observations,
        report.k,
        report.acceptance_rate,
        match report.hellinger {
            Some(h) => format!(" hellinger={h:.4}"),
            None => String::new(),
        }
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_experiment(
    id: &str,
    m: Option<usize>,
    seed: Option<u64>,
    n: Option<String>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    paper_scale: bool,
    basis: Option<String>,
) -> Result<(), CliError> {
    let id: ExperimentId = id.parse()?;
    let mut cfg = ExperimentConfig::defaults(id, paper_scale);
    if let Some(m) = m {
        cfg.replications = m;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(list) = n {
        let values: Result<Vec<usize>, _> = list.split(',').map(|s| s.trim().parse()).collect();
        cfg.n_values =
            values.map_err(|_| CliError::Config(format!("--n: bad sample-size list `{list}`")))?;
    }
    cfg.threads = thread_cap(threads);
    match basis.as_deref() {
        None => {}
        Some("trig") | Some("trigonometric") => {
            if id != ExperimentId::Exp1 {
                return Err(CliError::Config(
                    "--basis trig only applies to exp1".into(),
                ));
            }
            cfg.trig_comparison = true;
        }
        Some(other) => {
            return Err(CliError::Config(format!(
                "--basis: unknown comparison basis `{other}`"
            )))
        }
    }
    cfg.validate()?;

    let out_dir = out.unwrap_or_else(|| PathBuf::from(format!("polysieve_out/{id}")));
    let report = match id {
        ExperimentId::Exp1 => experiments::run_experiment1(&cfg)?,
        ExperimentId::Exp2 => experiments::run_experiment2(&cfg)?,
        ExperimentId::SuppLaguerre | ExperimentId::SuppHermite => {
            experiments::run_supplement(&cfg)?
        }
    };
    let written = report.write_outputs(&out_dir)?;
    let resolved = serde_json::to_value(&cfg)
        .map_err(|e| CliError::Numeric(format!("manifest echo: {e}")))?;
    RunManifest::new("experiment", None, resolved, cfg.seed, &written).write(&out_dir)?;

    for d in &report.distances {
        println!(
            "{id} n={} rep={} basis={}: hellinger={:.4} acceptance={:.3}",
            d.n, d.replication, d.basis, d.hellinger, d.acceptance
        );
    }
    for m in &report.medians {
        println!("{id} n={}: median hellinger={:.4}", m.n, m.median);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("outputs in {}", out_dir.display());
    Ok(())
}

fn cmd_check(
    suite: &str,
    trials: Option<usize>,
    family: Option<String>,
    p: Option<usize>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut pass = true;
    match suite {
        "orthogonality" => {
            let report = experiments::orthogonality_check()?;
            for line in &report.details {
                println!("{line}");
            }
            pass = report.pass;
        }
        "divergence" => {
            let report = experiments::divergence_check()?;
            for line in &report.details {
                println!("{line}");
            }
            pass = report.pass;
        }
        "hardy" => {
            let report =
                experiments::hardy_check(trials.unwrap_or(1000), 50, seed.unwrap_or(20240501));
            println!(
                "hardy: trials={} violations={} max-ratio={:.6} (constant {:.6})",
                report.trials, report.violations, report.max_ratio, report.constant
            );
            pass = report.violations == 0;
        }
        "growth" => {
            let combos: Vec<(BasisFamily, usize)> = match (&family, p) {
                (Some(f), Some(p)) => vec![(f.parse::<BasisFamily>()?, p)],
                (Some(f), None) => {
                    let fam = f.parse::<BasisFamily>()?;
                    vec![(fam, 1), (fam, 2)]
                }
                (None, Some(p)) => vec![(BasisFamily::Legendre, p), (BasisFamily::Hermite, p)],
                (None, None) => experiments::GROWTH_BANDS
                    .iter()
                    .map(|(f, p, _, _)| (*f, *p))
                    .collect(),
            };
            for (fam, p) in combos {
                let report = experiments::growth_check(fam, p)?;
                println!(
                    "growth {fam} p={p}: ratio in [{:.4}, {:.4}], frozen band [{}, {}] -> {}",
                    report.min_ratio,
                    report.max_ratio,
                    report.band.0,
                    report.band.1,
                    if report.pass { "ok" } else { "FAIL" }
                );
                pass &= report.pass;
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown check suite `{other}` (orthogonality | hardy | growth | divergence)"
            )))
        }
    }
    if pass {
        Ok(())
    } else {
        Err(CliError::CheckFailed)
    }
}

fn cmd_sample(
    kind: &str,
    n: usize,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let kind = match kind {
        "exp1-sine" => TrueDensityKind::Exp1Sine,
        "supp-exponential" => TrueDensityKind::SuppExponential,
        "supp-gaussian" => TrueDensityKind::SuppGaussian,
        other => {
            return Err(CliError::Config(format!(
                "unknown target `{other}` (exp1-sine | supp-exponential | supp-gaussian)"
            )))
        }
    };
    let seed = seed.unwrap_or(0);
    let spec = TrueDensitySpec::build(kind)?;
    let data = spec.draw(n, seed)?;
    let path = out.unwrap_or_else(|| PathBuf::from("observations.csv"));
    polysieve::report::write_text(&path, &sampling::observations_to_csv(&data))?;

    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    let resolved = serde_json::json!({
        "kind": format!("{kind:?}"),
        "n": n,
        "seed": seed,
        "c0": spec.c0(),
        "path": path.display().to_string(),
    });
    RunManifest::new("sample", None, resolved, seed, std::slice::from_ref(&path)).write(&dir)?;
    println!(
        "sample: {} observations -> {} (mean {})",
        n,
        path.display(),
        format_f64(data.iter().sum::<f64>() / n as f64)
    );
    Ok(())
}
