//! `modelrobust` — fit regression functionals, compute sandwich and bootstrap
//! standard errors, run reweighting diagnostics, and drive the synthetic
//! Monte Carlo experiments from the command line.
//!
//! All randomized commands are deterministic given `--seed`; outputs are
//! byte-identical across runs and thread counts.

mod output;
mod svg;

use clap::{Args, Parser, Subcommand};
use modelrobust::bootstrap::{
    m_of_n_bootstrap, plugin_limit_check, BootstrapPlan, Fitter, OlsFitter,
};
use modelrobust::diagnostics::{
    interior_deciles, misspecification_test, reweighting_diagnostic, CenterGrid,
    DiagnosticConfig, KernelWeightSpec,
};
use modelrobust::functionals::{
    huber_spec, logistic_spec, quantile_default_epsilon, quantile_spec, RidgeFunctional,
};
use modelrobust::scoring::{scoring_objective, GaussianLinearFamily};
use modelrobust::simulation::{builtin_population, clt_check};
use modelrobust::solver::{ee_solve, SolverConfig};
use modelrobust::{sandwich_variance, Dataset, Error, Functional, Result, SeededStream};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Parser)]
#[command(
    name = "modelrobust",
    about = "Model-robust regression: functionals, sandwich/bootstrap errors, reweighting diagnostics",
    version
)]
struct Cli {
    /// Flat key=value config file; command-line flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (falls back to MODELROBUST_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a functional and write estimate.csv with sandwich SEs.
    Fit(FitArgs),
    /// Like fit, plus the bread/meat/sandwich matrices in variance.csv.
    Sandwich(FitArgs),
    /// Fit plus M-of-N pairs-bootstrap standard errors.
    Bootstrap(BootstrapArgs),
    /// Decile-trace reweighting diagnostic (trace.csv and trace.svg).
    Diagnose(DiagnoseArgs),
    /// Two-weighting misspecification test (misspec.csv).
    MisspecTest(MisspecArgs),
    /// Sample a builtin population to sample.csv.
    Simulate(SimulateArgs),
    /// Monte Carlo check of the CLT decomposition (clt_report.csv).
    CltCheck(CltArgs),
    /// Compare M-of-N bootstrap variances to the plug-in sandwich
    /// (plugin_limit.csv).
    PluginLimit(PluginLimitArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// CSV file (header row; decimal reals; no missing values).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Response column name (required with --data).
    #[arg(long)]
    response: Option<String>,
    /// Builtin population name (alternative to --data).
    #[arg(long)]
    pop: Option<String>,
    /// Sample size when drawing from --pop.
    #[arg(long, alias = "N")]
    n: Option<usize>,
    /// Population parameter (key=value, repeatable).
    #[arg(long = "pop-param", value_name = "KEY=VALUE")]
    pop_params: Vec<String>,
}

#[derive(Args, Clone)]
struct FunctionalArgs {
    /// ols | ridge | huber | quantile | logistic | score-power
    #[arg(long)]
    functional: Option<String>,
    /// Functional hyperparameter (key=value, repeatable):
    /// ridge: c|lambda; huber: k; quantile: tau,eps; score-power: alpha,sigma.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Args, Clone)]
struct CommonArgs {
    #[arg(long, default_value = "0")]
    seed: u64,
    /// Output directory for artifact files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    functional: FunctionalArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct BootstrapArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    functional: FunctionalArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Resample size M (default: N).
    #[arg(long, alias = "M")]
    m: Option<usize>,
    /// Bootstrap replicates.
    #[arg(long, alias = "B", default_value = "1000")]
    b: usize,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    functional: FunctionalArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Regressor column to reweight on.
    #[arg(long)]
    regressor: Option<String>,
    /// `deciles` or a comma-separated list of centers.
    #[arg(long, default_value = "deciles")]
    grid: String,
    /// Kernel bandwidth as a multiple of the regressor sd.
    #[arg(long = "alpha-bw", default_value = "1.0")]
    alpha_bw: f64,
    /// Bootstrap replicates for the bands.
    #[arg(long, alias = "B", default_value = "1000")]
    b: usize,
    /// Also write trace_replicates.csv and draw gray replicate traces.
    #[arg(long)]
    keep_replicates: bool,
}

#[derive(Args)]
struct MisspecArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    functional: FunctionalArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    regressor: Option<String>,
    /// First weighting center (default: lowest interior decile).
    #[arg(long)]
    center1: Option<f64>,
    /// Second weighting center (default: highest interior decile).
    #[arg(long)]
    center2: Option<f64>,
    #[arg(long = "alpha-bw", default_value = "1.0")]
    alpha_bw: f64,
    #[arg(long, alias = "B", default_value = "1000")]
    b: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CltArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    functional: FunctionalArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Replications.
    #[arg(long, alias = "R", default_value = "2000")]
    r: usize,
}

#[derive(Args)]
struct PluginLimitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    functional: FunctionalArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated resample sizes, e.g. 50,200,1000,10000.
    #[arg(long = "m-grid", alias = "M")]
    m_grid: Option<String>,
    #[arg(long, alias = "B", default_value = "10000")]
    b: usize,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            emit_error("invalid_arguments", &e.render().to_string());
            std::process::exit(2);
        }
    };
    if let Err(e) = run(cli) {
        emit_error(e.code(), &e.to_string());
        std::process::exit(1);
    }
}

fn emit_error(code: &str, message: &str) {
    eprintln!(
        "{}",
        serde_json::json!({ "error": code, "message": message })
    );
}

fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Fit(a) => cmd_fit(a, &config, false),
        Command::Sandwich(a) => cmd_fit(a, &config, true),
        Command::Bootstrap(a) => cmd_bootstrap(a, &config),
        Command::Diagnose(a) => cmd_diagnose(a, &config),
        Command::MisspecTest(a) => cmd_misspec(a, &config),
        Command::Simulate(a) => cmd_simulate(a, &config),
        Command::CltCheck(a) => cmd_clt(a, &config),
        Command::PluginLimit(a) => cmd_plugin_limit(a, &config),
    }
}

fn init_threads(flag: Option<usize>) -> Result<()> {
    let threads = match flag {
        Some(t) => Some(t),
        None => match std::env::var("MODELROBUST_THREADS") {
            Ok(v) => Some(v.parse().map_err(|_| {
                Error::InvalidInput(format!("MODELROBUST_THREADS: cannot parse `{v}`"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::InvalidInput("--threads must be at least 1".into()));
        }
        // ignore "already initialized" (tests may reuse the process)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// config file + option merging
// ---------------------------------------------------------------------------

type Config = BTreeMap<String, String>;

/// Flat `key=value` lines; `#` starts a comment.
fn load_config(path: Option<&Path>) -> Result<Config> {
    let mut map = BTreeMap::new();
    let Some(path) = path else { return Ok(map) };
    let text = std::fs::read_to_string(path)?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidInput(format!(
                "config line {}: expected key=value, got `{line}`",
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn merged<T: std::str::FromStr>(cli: Option<T>, config: &Config, key: &str) -> Result<Option<T>> {
    if cli.is_some() {
        return Ok(cli);
    }
    match config.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidInput(format!("config `{key}`: cannot parse `{v}`"))),
    }
}

fn parse_kv_pairs(pairs: &[String], what: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for pair in pairs {
        let Some((k, v)) = pair.split_once('=') else {
            return Err(Error::InvalidInput(format!("{what} `{pair}`: expected KEY=VALUE")));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// inputs and functionals
// ---------------------------------------------------------------------------

/// Stream ids: 0 samples the input population, 1 feeds the command's own
/// randomness (bootstraps, replications).
const SAMPLE_STREAM: u64 = 0;
const ALGO_STREAM: u64 = 1;

fn load_input(input: &InputArgs, config: &Config, seed: u64) -> Result<Dataset> {
    let data = merged(input.data.clone(), config, "data")?;
    let pop = merged(input.pop.clone(), config, "pop")?;
    match (data, pop) {
        (Some(path), None) => {
            let response = merged(input.response.clone(), config, "response")?
                .ok_or_else(|| Error::InvalidInput("--response is required with --data".into()))?;
            Dataset::from_csv(path, &response)
        }
        (None, Some(name)) => {
            let n = merged(input.n, config, "n")?
                .ok_or_else(|| Error::InvalidInput("--n is required with --pop".into()))?;
            let pop = build_population(&name, input, config)?;
            pop.sample(n, SeededStream::new(seed).child(SAMPLE_STREAM))
        }
        (Some(_), Some(_)) => {
            Err(Error::InvalidInput("give either --data or --pop, not both".into()))
        }
        (None, None) => Err(Error::InvalidInput("an input is required: --data or --pop".into())),
    }
}

fn build_population(
    name: &str,
    input: &InputArgs,
    config: &Config,
) -> Result<modelrobust::SyntheticPopulation> {
    let mut params = parse_kv_pairs(&input.pop_params, "--pop-param")?;
    if params.is_empty() {
        if let Some(v) = config.get("pop-param") {
            for pair in v.split(',') {
                let Some((k, val)) = pair.split_once('=') else {
                    return Err(Error::InvalidInput(format!(
                        "config pop-param `{pair}`: expected KEY=VALUE"
                    )));
                };
                params.insert(k.trim().to_string(), val.trim().to_string());
            }
        }
    }
    builtin_population(name, &params)
}

/// A spec plus solver config, owned, driving the generic Newton solver.
struct OwnedSpecFitter {
    spec: Box<dyn Functional>,
    cfg: SolverConfig,
}

impl Fitter for OwnedSpecFitter {
    fn dim_for(&self, p: usize) -> usize {
        self.spec.dim_for(p)
    }

    fn fit_estimate(&self, data: &Dataset) -> Result<modelrobust::FunctionalEstimate> {
        ee_solve(self.spec.as_ref(), data, &self.cfg)
    }
}

fn parse_param_f64(params: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>> {
    match params.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidInput(format!("--param {key}: cannot parse `{v}`"))),
    }
}

fn reject_unknown_params(params: &BTreeMap<String, String>, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::InvalidInput(format!(
                "unknown functional parameter `{key}` (allowed: {})",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

fn build_fitter(
    args: &FunctionalArgs,
    config: &Config,
    data: &Dataset,
) -> Result<Box<dyn Fitter>> {
    let name = merged(args.functional.clone(), config, "functional")?
        .ok_or_else(|| Error::InvalidInput("--functional is required".into()))?;
    let mut params = parse_kv_pairs(&args.params, "--param")?;
    if params.is_empty() {
        if let Some(v) = config.get("params") {
            for pair in v.split(',') {
                if let Some((k, val)) = pair.split_once('=') {
                    params.insert(k.trim().to_string(), val.trim().to_string());
                }
            }
        }
    }
    let cfg = SolverConfig::default();
    let spec: Box<dyn Functional> = match name.as_str() {
        "ols" => {
            reject_unknown_params(&params, &[])?;
            return Ok(Box::new(OlsFitter));
        }
        "ridge" => {
            reject_unknown_params(&params, &["c", "lambda"])?;
            let p = data.p();
            let omega = match (parse_param_f64(&params, "c")?, parse_param_f64(&params, "lambda")?)
            {
                (Some(c), None) => data.weighted_gram() * c,
                (None, Some(lambda)) => modelrobust::nalgebra::DMatrix::identity(p, p) * lambda,
                (None, None) => {
                    return Err(Error::InvalidInput(
                        "ridge needs --param c=<multiple of E[XX']> or --param lambda=<ridge>".into(),
                    ))
                }
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidInput("give ridge c or lambda, not both".into()))
                }
            };
            Box::new(RidgeFunctional::new(omega)?)
        }
        "huber" => {
            reject_unknown_params(&params, &["k"])?;
            let k = parse_param_f64(&params, "k")?.unwrap_or(1.345);
            Box::new(huber_spec(k)?)
        }
        "quantile" => {
            reject_unknown_params(&params, &["tau", "eps"])?;
            let tau = parse_param_f64(&params, "tau")?.unwrap_or(0.5);
            let eps =
                parse_param_f64(&params, "eps")?.unwrap_or_else(|| quantile_default_epsilon(data));
            Box::new(quantile_spec(tau, eps)?)
        }
        "logistic" => {
            reject_unknown_params(&params, &[])?;
            Box::new(logistic_spec())
        }
        "score-power" => {
            reject_unknown_params(&params, &["alpha", "sigma"])?;
            let alpha = parse_param_f64(&params, "alpha")?
                .ok_or_else(|| Error::InvalidInput("score-power needs --param alpha=<power>".into()))?;
            let sigma = parse_param_f64(&params, "sigma")?.unwrap_or(1.0);
            Box::new(scoring_objective(Arc::new(GaussianLinearFamily::new(sigma)?), alpha)?)
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown functional `{other}` (ols, ridge, huber, quantile, logistic, score-power)"
            )))
        }
    };
    Ok(Box::new(OwnedSpecFitter { spec, cfg }))
}

fn regressor_index(data: &Dataset, args_reg: Option<String>, config: &Config) -> Result<usize> {
    let name = merged(args_reg, config, "regressor")?
        .ok_or_else(|| Error::InvalidInput("--regressor is required".into()))?;
    data.column_index(&name)
        .ok_or_else(|| Error::InvalidInput(format!("regressor column `{name}` not found")))
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

fn cmd_fit(args: FitArgs, config: &Config, with_matrices: bool) -> Result<()> {
    let data = load_input(&args.input, config, args.common.seed)?;
    let fitter = build_fitter(&args.functional, config, &data)?;
    let est = fitter.fit_estimate(&data)?;
    let report = sandwich_variance(&est)?;
    std::fs::create_dir_all(&args.common.out)?;
    output::write_estimate(
        &args.common.out.join("estimate.csv"),
        data.column_names(),
        &est.theta_hat,
        &report.se,
        None,
    )?;
    if with_matrices {
        output::write_variance(&args.common.out.join("variance.csv"), &report)?;
    }
    println!("wrote {}", args.common.out.join("estimate.csv").display());
    Ok(())
}

fn cmd_bootstrap(args: BootstrapArgs, config: &Config) -> Result<()> {
    let data = load_input(&args.input, config, args.common.seed)?;
    let fitter = build_fitter(&args.functional, config, &data)?;
    let est = fitter.fit_estimate(&data)?;
    let report = sandwich_variance(&est)?;
    let m = merged(args.m, config, "m")?.unwrap_or(data.n());
    let b = merged(Some(args.b), config, "b")?.unwrap();
    let plan = BootstrapPlan::monte_carlo(
        m,
        b,
        SeededStream::new(args.common.seed).child(ALGO_STREAM),
    );
    let boot = m_of_n_bootstrap(fitter.as_ref(), &data, &plan)?;
    std::fs::create_dir_all(&args.common.out)?;
    output::write_estimate(
        &args.common.out.join("estimate.csv"),
        data.column_names(),
        &est.theta_hat,
        &report.se,
        Some(&boot.se_boot),
    )?;
    println!(
        "wrote {} (M = {m}, B = {b}, failures = {})",
        args.common.out.join("estimate.csv").display(),
        boot.failures
    );
    Ok(())
}

fn cmd_diagnose(args: DiagnoseArgs, config: &Config) -> Result<()> {
    let data = load_input(&args.input, config, args.common.seed)?;
    let fitter = build_fitter(&args.functional, config, &data)?;
    let j = regressor_index(&data, args.regressor.clone(), config)?;
    let grid = match merged(Some(args.grid.clone()), config, "grid")?.unwrap().as_str() {
        "deciles" => CenterGrid::Deciles,
        list => {
            let centers: std::result::Result<Vec<f64>, _> =
                list.split(',').map(|v| v.trim().parse()).collect();
            CenterGrid::Custom(centers.map_err(|_| {
                Error::InvalidInput(format!("--grid: cannot parse center list `{list}`"))
            })?)
        }
    };
    let cfg = DiagnosticConfig {
        bandwidth_multiple: args.alpha_bw,
        replicates: args.b,
        stream: SeededStream::new(args.common.seed).child(ALGO_STREAM),
        keep_replicate_traces: args.keep_replicates,
    };
    let trace = reweighting_diagnostic(&data, fitter.as_ref(), j, &grid, &cfg)?;
    std::fs::create_dir_all(&args.common.out)?;
    let trace_path = args.common.out.join("trace.csv");
    output::write_trace(&trace_path, &trace, data.column_names())?;
    let replicates_path = args.common.out.join("trace_replicates.csv");
    if args.keep_replicates {
        output::write_trace_replicates(&replicates_path, &trace, data.column_names())?;
    }
    // the SVG is rendered from the CSV files just written
    let svg_text = svg::render_from_files(
        &trace_path,
        if args.keep_replicates { Some(replicates_path.as_path()) } else { None },
    )?;
    std::fs::write(args.common.out.join("trace.svg"), svg_text)?;
    println!(
        "wrote {} and trace.svg ({} centers, {} failed)",
        trace_path.display(),
        trace.centers.len(),
        trace.failed_centers.len()
    );
    Ok(())
}

fn cmd_misspec(args: MisspecArgs, config: &Config) -> Result<()> {
    let data = load_input(&args.input, config, args.common.seed)?;
    let fitter = build_fitter(&args.functional, config, &data)?;
    let j = regressor_index(&data, args.regressor.clone(), config)?;
    let deciles = interior_deciles(&data, j);
    let c1 = merged(args.center1, config, "center1")?.unwrap_or(deciles[0]);
    let c2 = merged(args.center2, config, "center2")?.unwrap_or(deciles[deciles.len() - 1]);
    let w1 = KernelWeightSpec::new(j, c1).with_bandwidth(args.alpha_bw);
    let w2 = KernelWeightSpec::new(j, c2).with_bandwidth(args.alpha_bw);
    let out = misspecification_test(
        &data,
        fitter.as_ref(),
        &w1,
        &w2,
        args.b,
        SeededStream::new(args.common.seed).child(ALGO_STREAM),
    )?;
    std::fs::create_dir_all(&args.common.out)?;
    output::write_misspec(&args.common.out.join("misspec.csv"), &out, data.column_names())?;
    println!("wrote {}", args.common.out.join("misspec.csv").display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, config: &Config) -> Result<()> {
    let data = load_input(&args.input, config, args.common.seed)?;
    if merged(args.input.pop.clone(), config, "pop")?.is_none() {
        return Err(Error::InvalidInput("simulate needs --pop".into()));
    }
    std::fs::create_dir_all(&args.common.out)?;
    output::write_sample(&args.common.out.join("sample.csv"), &data)?;
    println!("wrote {}", args.common.out.join("sample.csv").display());
    Ok(())
}

fn cmd_clt(args: CltArgs, config: &Config) -> Result<()> {
    let pop_name = merged(args.input.pop.clone(), config, "pop")?
        .ok_or_else(|| Error::InvalidInput("clt-check needs --pop".into()))?;
    let pop = build_population(&pop_name, &args.input, config)?;
    let n = merged(args.input.n, config, "n")?.unwrap_or(500);
    let r = merged(Some(args.r), config, "r")?.unwrap();
    let name = merged(args.functional.functional.clone(), config, "functional")?
        .ok_or_else(|| Error::InvalidInput("--functional is required".into()))?;
    let spec: Box<dyn Functional> = match name.as_str() {
        "ols" => Box::new(modelrobust::OlsFunctional),
        "huber" => {
            let params = parse_kv_pairs(&args.functional.params, "--param")?;
            let k = parse_param_f64(&params, "k")?.unwrap_or(1.345);
            Box::new(huber_spec(k)?)
        }
        "logistic" => Box::new(logistic_spec()),
        other => {
            return Err(Error::InvalidInput(format!(
                "clt-check supports ols, huber, logistic (got `{other}`)"
            )))
        }
    };
    let report = clt_check(
        &pop,
        spec.as_ref(),
        n,
        r,
        SeededStream::new(args.common.seed).child(ALGO_STREAM),
    )?;
    std::fs::create_dir_all(&args.common.out)?;
    output::write_clt_report(&args.common.out.join("clt_report.csv"), &report)?;
    println!(
        "wrote {} (rel err total {:.4}, noise {:.4}, approx {:.4})",
        args.common.out.join("clt_report.csv").display(),
        report.rel_err[0],
        report.rel_err[1],
        report.rel_err[2]
    );
    Ok(())
}

fn cmd_plugin_limit(args: PluginLimitArgs, config: &Config) -> Result<()> {
    let data = load_input(&args.input, config, args.common.seed)?;
    let fitter = build_fitter(&args.functional, config, &data)?;
    let grid_text = merged(args.m_grid.clone(), config, "m-grid")?
        .ok_or_else(|| Error::InvalidInput("--m-grid is required (e.g. 50,200,1000)".into()))?;
    let m_grid: std::result::Result<Vec<usize>, _> =
        grid_text.split(',').map(|v| v.trim().parse()).collect();
    let m_grid = m_grid
        .map_err(|_| Error::InvalidInput(format!("--m-grid: cannot parse `{grid_text}`")))?;
    let table = plugin_limit_check(
        fitter.as_ref(),
        &data,
        &m_grid,
        args.b,
        SeededStream::new(args.common.seed).child(ALGO_STREAM),
    )?;
    std::fs::create_dir_all(&args.common.out)?;
    output::write_plugin_limit(&args.common.out.join("plugin_limit.csv"), &table)?;
    println!("wrote {}", args.common.out.join("plugin_limit.csv").display());
    Ok(())
}
