//! `pmint` — probabilistic reconciliation of hierarchical forecasts.
//!
//! Subcommands cover the full pipeline: `simulate` synthetic panels,
//! `forecast` base models per series, `reconcile` into coherent joint
//! Gaussian distributions, `score` them with the energy score, and
//! `experiment` for the end-to-end simulation study.
//!
//! Exit codes: 0 success, 2 input/validation failure, 3 numerical failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pmint::basefc::{forecast_panel, ingest_base_forecasts};
use pmint::covariance::{CovarianceModel, KhMode};
use pmint::experiment::{run_experiment, ExperimentConfig};
use pmint::hierarchy::{HierarchySpec, SummingMatrix};
use pmint::io;
use pmint::reconcile::{reconcile_bottom_up, reconcile_pmint, GainVariant, Method};
use pmint::scoring::energy_score_gaussian;
use pmint::seed::{derive_seed, TAG_SCORE, TAG_SIMULATE};
use pmint::synth::{simulate_hierarchy, SynthConfig};
use pmint::{Error, Result};

#[derive(Parser)]
#[command(name = "pmint", version, about = "Probabilistic hierarchical forecast reconciliation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate synthetic hierarchy panels.
    Simulate(SimulateArgs),
    /// Fit AR base models to a panel and emit forecasts plus residuals.
    Forecast(ForecastArgs),
    /// Reconcile base forecasts into coherent joint Gaussian distributions.
    Reconcile(ReconcileArgs),
    /// Energy-score reconciled distributions against realized values.
    Score(ScoreArgs),
    /// Run the full simulate/forecast/reconcile/score experiment.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Series length per replicate.
    #[arg(long = "T", default_value_t = 1000)]
    t: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of replicate panels.
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    /// Observation-noise variance.
    #[arg(long, default_value_t = 10.0)]
    eta_var: f64,
    /// Output directory for panel CSVs and the manifest.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ForecastArgs {
    /// Input panel CSV (full hierarchy or bottoms only).
    #[arg(long)]
    input: PathBuf,
    /// Hierarchy spec JSON.
    #[arg(long)]
    hierarchy: PathBuf,
    /// Autoregressive order of the per-series models.
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Maximum forecast horizon.
    #[arg(long, default_value_t = 4)]
    horizon: usize,
    /// Output CSV for the base forecasts (series,h,mean).
    #[arg(long)]
    out_forecasts: PathBuf,
    /// Output CSV for the one-step residuals.
    #[arg(long)]
    out_residuals: PathBuf,
}

#[derive(Args)]
struct ReconcileArgs {
    /// Hierarchy spec JSON.
    #[arg(long)]
    hierarchy: PathBuf,
    /// Base forecasts CSV (series,h,mean).
    #[arg(long)]
    forecasts: PathBuf,
    /// One-step residuals CSV.
    #[arg(long)]
    residuals: PathBuf,
    /// Methods to reconcile (repeatable).
    #[arg(long = "method", value_parser = parse_method, default_values = ["bu", "lg", "pmint"])]
    methods: Vec<Method>,
    /// Horizon scaling convention (one or h).
    #[arg(long, value_parser = parse_kh, default_value = "one")]
    kh: KhMode,
    /// Reconcile horizons 1..=H (defaults to the horizon of the forecasts file).
    #[arg(long)]
    horizon: Option<usize>,
    /// Relative diagonal jitter for the shrinkage covariance.
    #[arg(long, default_value_t = 1e-8)]
    jitter: f64,
    /// Output directory for the per-(method, h) JSON files.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// Reconciled distribution JSON files.
    #[arg(long = "reconciled", required = true, num_args = 1..)]
    reconciled: Vec<PathBuf>,
    /// Realized values CSV: one row per horizon, columns = series names.
    #[arg(long)]
    actuals: PathBuf,
    /// Monte Carlo samples per score.
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// Master seed for the sampling streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output scores CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Number of simulated replicates.
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    /// Series length per replicate (final H points held out).
    #[arg(long = "T", default_value_t = 1000)]
    t: usize,
    /// Maximum forecast horizon.
    #[arg(long, default_value_t = 4)]
    horizon: usize,
    /// Horizon scaling convention (one or h).
    #[arg(long, value_parser = parse_kh, default_value = "one")]
    kh: KhMode,
    /// Methods to evaluate (repeatable).
    #[arg(long = "method", value_parser = parse_method, default_values = ["bu", "lg", "pmint"])]
    methods: Vec<Method>,
    /// Autoregressive order of the base models.
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Monte Carlo samples per energy score.
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative diagonal jitter for the shrinkage covariance.
    #[arg(long, default_value_t = 1e-8)]
    jitter: f64,
    /// Output directory for scores.csv and summary.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse()
}

fn parse_kh(s: &str) -> std::result::Result<KhMode, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Forecast(args) => cmd_forecast(args),
        Command::Reconcile(args) => cmd_reconcile(args),
        Command::Score(args) => cmd_score(args),
        Command::Experiment(args) => cmd_experiment(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    fs::create_dir_all(&args.out_dir)?;
    let mut phi = Vec::with_capacity(args.replicates);
    let mut panels = Vec::with_capacity(args.replicates);
    for r in 0..args.replicates {
        let sub_seed = derive_seed(args.seed, &[TAG_SIMULATE, r as u64]);
        let mut cfg = SynthConfig::new(args.t, sub_seed);
        cfg.eta_var = args.eta_var;
        let out = simulate_hierarchy(&cfg)?;
        let file = format!("panel_{r:04}.csv");
        io::write_panel(&args.out_dir.join(&file), &out.panel)?;
        phi.push(out.phi);
        panels.push(file);
    }
    let manifest = io::SimulationManifest {
        seed: args.seed,
        t: args.t,
        replicates: args.replicates,
        eta_var: args.eta_var,
        phi,
        panels,
    };
    io::write_manifest(&args.out_dir.join("manifest.json"), &manifest)?;
    println!(
        "wrote {} panel(s) and manifest.json to {}",
        args.replicates,
        args.out_dir.display()
    );
    Ok(())
}

fn load_hierarchy(path: &PathBuf) -> Result<(HierarchySpec, SummingMatrix)> {
    let text = fs::read_to_string(path)?;
    let spec = HierarchySpec::from_json(&text)?;
    let s = SummingMatrix::from_spec(&spec);
    Ok((spec, s))
}

fn cmd_forecast(args: ForecastArgs) -> Result<()> {
    let (spec, s) = load_hierarchy(&args.hierarchy)?;
    let panel = io::read_panel(&args.input, &s)?;
    let (base, residuals, models) = forecast_panel(&panel, spec.n(), args.order, args.horizon)?;
    for (name, model) in base.names.iter().zip(&models) {
        if model.fallback {
            eprintln!("warning: series '{name}' has a singular AR design; using intercept-only model");
        }
    }
    io::write_forecasts(&args.out_forecasts, &base.names, &base.means)?;
    io::write_residuals(&args.out_residuals, &residuals)?;
    println!(
        "wrote forecasts to {} and residuals to {}",
        args.out_forecasts.display(),
        args.out_residuals.display()
    );
    Ok(())
}

fn cmd_reconcile(args: ReconcileArgs) -> Result<()> {
    let (spec, s) = load_hierarchy(&args.hierarchy)?;
    let (base, residuals) = ingest_base_forecasts(&args.forecasts, &args.residuals, &spec)?;
    let horizon = args.horizon.unwrap_or_else(|| base.horizon());
    if horizon == 0 || horizon > base.horizon() {
        return Err(Error::DimensionMismatch {
            expected: format!("horizon in 1..={}", base.horizon()),
            actual: format!("{horizon}"),
        });
    }
    let cov = CovarianceModel::from_residuals(&residuals, spec.n(), args.kh, args.jitter)?;
    fs::create_dir_all(&args.out_dir)?;
    for &method in &args.methods {
        for h in 1..=horizon {
            let dist = match method {
                Method::Bu => {
                    let mut d = reconcile_bottom_up(&base, &cov.sigma_b1, &s, h, args.kh)?;
                    d.shrink_lambda = Some(cov.shrink_lambda);
                    d
                }
                Method::Lg => reconcile_pmint(&base, &cov, &s, h, args.kh, GainVariant::Lg)?,
                Method::Pmint => reconcile_pmint(&base, &cov, &s, h, args.kh, GainVariant::Pmint)?,
            };
            let path = args.out_dir.join(format!("reconciled_{method}_h{h}.json"));
            io::write_reconciled(&path, &dist)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let mut rows = Vec::with_capacity(args.reconciled.len());
    for path in &args.reconciled {
        let dist = io::read_reconciled(path)?;
        let actuals = io::read_actuals(&args.actuals, &dist.names)?;
        if dist.h == 0 || dist.h > actuals.nrows() {
            return Err(Error::DimensionMismatch {
                expected: format!("actuals with at least {} rows", dist.h),
                actual: format!("{}", actuals.nrows()),
            });
        }
        let y = actuals.row(dist.h - 1).transpose();
        let sub_seed = derive_seed(args.seed, &[TAG_SCORE, 0, dist.h as u64, dist.method.tag()]);
        let report = energy_score_gaussian(&dist, &y, args.samples, sub_seed)?;
        rows.push(io::ScoreRow {
            method: report.method,
            h: report.h,
            replicate: 0,
            energy_score: report.energy_score,
            seed: report.seed,
        });
    }
    io::write_scores(&args.out, &rows)?;
    println!("wrote {} score(s) to {}", rows.len(), args.out.display());
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let cfg = ExperimentConfig {
        replicates: args.replicates,
        t: args.t,
        horizon: args.horizon,
        kh_mode: args.kh,
        methods: args.methods,
        ar_order: args.order,
        samples: args.samples,
        seed: args.seed,
        jitter: args.jitter,
    };
    let result = run_experiment(&cfg)?;
    fs::create_dir_all(&args.out_dir)?;
    io::write_scores(&args.out_dir.join("scores.csv"), &result.cells)?;
    io::write_summary(&args.out_dir.join("summary.csv"), &result.summary)?;
    println!("method,mean_energy_score");
    for (method, mean) in &result.summary {
        println!("{method},{mean}");
    }
    Ok(())
}
