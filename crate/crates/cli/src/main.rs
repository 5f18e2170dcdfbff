//! Command-line front end of the `varlasso` library.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use varlasso::experiments::{
    emit, emit_histograms, run_monte_carlo, summary_table, ExperimentConfig, OutputFormat,
    STREAM_DESIGN, STREAM_NOISE, STREAM_TRUTH,
};
use varlasso::lasso::homotopy_path_with;
use varlasso::oracle::isometry_deviation;
use varlasso::rng::derive_seed;
use varlasso::strategy_a::{
    cvar_admissible_interval, cvar_interval_from, tune_fixed_point, tune_path_exact_a,
    FixedPointConfig, DEFAULT_CVAR,
};
use varlasso::strategy_b::{tune_newton, tune_path_exact_b, NewtonConfig};
use varlasso::theory::{
    bounds_a_from, bounds_b, c_circ, c_small_circ, check_assumptions, constants, kappa,
    ConstantSet, Strategy, TheoryParams,
};
use varlasso::tuned::PATH_FLOOR;
use varlasso::{
    eval_path, solve_lasso, tau_threshold, DesignMatrix, GroundTruth, Observation, PathConfig,
    SolverConfig, TunedEstimate,
};

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "varlasso",
    version,
    about = "LASSO with unknown noise variance"
)]
struct Cli {
    /// Seed for commands that draw random data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel commands (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// One of error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    /// Also print a human-readable summary to stderr.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Draw a Gaussian design, a sparse truth and a noisy observation.
    Generate(GenerateArgs),
    /// Solve the LASSO at a fixed penalty.
    Solve(SolveArgs),
    /// Tune the penalty by the variance-proportional rule.
    TuneA(TuneAArgs),
    /// Tune the penalty by the penalty/fidelity trade-off rule.
    TuneB(TuneBArgs),
    /// Run a Monte Carlo experiment.
    Mc(McArgs),
    /// Print the theoretical constants and bounds.
    Constants(ConstantsArgs),
    /// Coherence, operator norm and isometry deviation of a design.
    CheckMatrix(CheckMatrixArgs),
}

#[derive(Debug, Args, Serialize)]
struct InputArgs {
    /// Design matrix, CSV or `.bin`.
    #[arg(long)]
    design: PathBuf,
    /// Observation as JSON, or a response vector as CSV.
    #[arg(long)]
    obs: PathBuf,
    /// Rescale design columns to unit norm instead of rejecting them.
    #[arg(long)]
    normalize: bool,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    s: usize,
    #[arg(long)]
    magnitude: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Store the design in the binary format.
    #[arg(long)]
    binary: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SolverKind {
    Cd,
    Path,
}

#[derive(Debug, Args, Serialize)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    lambda: f64,
    #[arg(long, value_enum, default_value = "path")]
    solver: SolverKind,
    /// Also export the regularization path as CSV.
    #[arg(long)]
    path_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodAArg {
    FixedPoint,
    Path,
}

#[derive(Debug, Args, Serialize)]
struct TuneAArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_CVAR)]
    cvar: f64,
    #[arg(long, value_enum, default_value = "fixed-point")]
    method: MethodAArg,
    /// Exponent used for the admissible-interval warning.
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    /// Isometry slack used for the admissible-interval warning.
    #[arg(long, default_value_t = 0.5)]
    r: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodBArg {
    Newton,
    Path,
}

#[derive(Debug, Args, Serialize)]
struct TuneBArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    c: f64,
    #[arg(long, value_enum, default_value = "path")]
    method: MethodBArg,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
struct McArgs {
    /// Experiment configuration, JSON or TOML.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Debug, Args, Serialize)]
struct ConstantsArgs {
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    r: f64,
    /// Trade-off constant of the penalty/fidelity rule.
    #[arg(long, default_value_t = 0.1)]
    c: f64,
    /// Constant of the variance-proportional rule checked against its interval.
    #[arg(long, default_value_t = DEFAULT_CVAR)]
    cvar: f64,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    s: usize,
    /// Design for the operator norm and the assumption reports.
    #[arg(long)]
    design: Option<PathBuf>,
    /// Ground truth JSON for the assumption reports.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Draw a ground truth with this magnitude when `--truth` is absent.
    #[arg(long)]
    magnitude: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    invertibility_constants: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct CheckMatrixArgs {
    #[arg(long)]
    design: PathBuf,
    /// Comma-separated column indices for the isometry deviation.
    #[arg(long, value_delimiter = ',')]
    support: Option<Vec<usize>>,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => report_failure(&err),
    }
}

fn report_failure(err: &anyhow::Error) -> ExitCode {
    let lib = err
        .chain()
        .find_map(|e| e.downcast_ref::<varlasso::Error>());
    match lib {
        Some(e) if e.is_numerical() => {
            let diag = json!({
                "error": "numerical",
                "kind": e.kind(),
                "message": format!("{err:#}"),
            });
            eprintln!("{diag}");
            ExitCode::from(2)
        }
        _ => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    eprintln!("resolved config: {}", serde_json::to_string(cli)?);
    match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Solve(a) => solve(cli, a),
        Command::TuneA(a) => tune_a(cli, a),
        Command::TuneB(a) => tune_b(cli, a),
        Command::Mc(a) => mc(cli, a),
        Command::Constants(a) => constants_cmd(cli, a),
        Command::CheckMatrix(a) => check_matrix(cli, a),
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn load_input(a: &InputArgs) -> anyhow::Result<(DesignMatrix, Observation)> {
    let x = DesignMatrix::load(&a.design, a.normalize)
        .with_context(|| format!("loading design {}", a.design.display()))?;
    let obs = Observation::load(&a.obs)
        .with_context(|| format!("loading observation {}", a.obs.display()))?;
    if obs.y.len() != x.n() {
        bail!(
            "observation has {} entries, design has {} rows",
            obs.y.len(),
            x.n()
        );
    }
    Ok((x, obs))
}

fn generate(cli: &Cli, a: &GenerateArgs) -> anyhow::Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let x = DesignMatrix::gaussian(a.n, a.p, derive_seed(seed, STREAM_DESIGN, 0))?;
    let truth = GroundTruth::generate(
        a.p,
        a.s,
        a.magnitude,
        a.sigma,
        derive_seed(seed, STREAM_TRUTH, 0),
    )?;
    let obs = Observation::generate(&x, &truth, derive_seed(seed, STREAM_NOISE, 0))?;
    fs::create_dir_all(&a.out_dir)?;
    let design = a
        .out_dir
        .join(if a.binary { "design.bin" } else { "design.csv" });
    x.save(&design)?;
    let truth_path = a.out_dir.join("truth.json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&truth_path)?), &truth)?;
    let obs_path = a.out_dir.join("obs.json");
    obs.save_json(&obs_path)?;
    let manifest = json!({
        "seed": seed,
        "design": design,
        "truth": truth_path,
        "obs": obs_path,
        "support": truth.support,
    });
    write_json(&manifest, None)?;
    if cli.pretty {
        eprintln!(
            "generated n = {}, p = {}, s = {} in {}",
            a.n,
            a.p,
            a.s,
            a.out_dir.display()
        );
    }
    Ok(())
}

fn solve(cli: &Cli, a: &SolveArgs) -> anyhow::Result<()> {
    let (x, obs) = load_input(&a.input)?;
    let y = &obs.y;
    let tau = tau_threshold(&x, y);
    let floor = a.lambda.min(PATH_FLOOR * tau).max(f64::MIN_POSITIVE);
    let path = match (a.solver, &a.path_csv) {
        (SolverKind::Path, _) | (_, Some(_)) => {
            Some(homotopy_path_with(&x, y, floor, &PathConfig::default())?)
        }
        _ => None,
    };
    let sol = match (a.solver, &path) {
        (SolverKind::Path, Some(path)) => eval_path(path, a.lambda)?,
        _ => solve_lasso(&x, y, a.lambda, &SolverConfig::default())?,
    };
    if let (Some(file), Some(path)) = (&a.path_csv, &path) {
        path.write_csv(BufWriter::new(File::create(file)?))?;
    }
    write_json(&sol, a.input.out.as_deref())?;
    if cli.pretty {
        eprintln!(
            "lambda = {:.6e}, |support| = {}, objective = {:.6e}, kkt valid = {}",
            sol.lambda,
            sol.active_set.len(),
            sol.objective,
            sol.kkt.is_valid()
        );
    }
    Ok(())
}

fn print_tuned(est: &TunedEstimate) {
    eprintln!(
        "lambda_hat = {:.6e}, sigma_hat = {:.6}, |support| = {}, iterations = {}, converged = {}",
        est.lambda_hat,
        est.sigma_hat,
        est.active_set.len(),
        est.iterations,
        est.converged
    );
}

fn tune_a(cli: &Cli, a: &TuneAArgs) -> anyhow::Result<()> {
    let (x, obs) = load_input(&a.input)?;
    let params = TheoryParams::new(a.alpha, a.r, 1.0)?;
    let (lo, hi) = cvar_admissible_interval(&x, &params)?;
    if !(lo..=hi).contains(&a.cvar) {
        log::warn!(
            "cvar = {} lies outside the admissible interval [{lo:.4e}, {hi:.4e}]; proceeding",
            a.cvar
        );
        eprintln!(
            "warning: cvar = {} lies outside the admissible interval [{lo:.4e}, {hi:.4e}]",
            a.cvar
        );
    }
    let est = match a.method {
        MethodAArg::FixedPoint => {
            tune_fixed_point(&x, &obs.y, a.cvar, &FixedPointConfig::default())?
        }
        MethodAArg::Path => tune_path_exact_a(&x, &obs.y, a.cvar)?,
    };
    write_json(&est, a.input.out.as_deref())?;
    if cli.pretty {
        print_tuned(&est);
    }
    Ok(())
}

fn tune_b(cli: &Cli, a: &TuneBArgs) -> anyhow::Result<()> {
    let (x, obs) = load_input(&a.input)?;
    let est = match a.method {
        MethodBArg::Newton => tune_newton(&x, &obs.y, a.c, &NewtonConfig::default())?,
        MethodBArg::Path => tune_path_exact_b(&x, &obs.y, a.c)?,
    };
    write_json(&est, a.input.out.as_deref())?;
    if cli.pretty {
        print_tuned(&est);
    }
    Ok(())
}

fn mc(cli: &Cli, a: &McArgs) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)
        .with_context(|| format!("config {}", a.config.display()))?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    eprintln!("experiment: {}", serde_json::to_string(&cfg)?);
    let report = run_monte_carlo(&cfg)?;
    fs::create_dir_all(&a.out)?;
    let written = match a.format {
        FormatArg::Csv => {
            let trials = a.out.join("trials.csv");
            emit(
                &report,
                OutputFormat::Csv,
                BufWriter::new(File::create(&trials)?),
            )?;
            let hist = a.out.join("histograms.csv");
            emit_histograms(&report, BufWriter::new(File::create(&hist)?))?;
            vec![trials, hist]
        }
        FormatArg::Json => {
            let path = a.out.join("report.json");
            emit(
                &report,
                OutputFormat::Json,
                BufWriter::new(File::create(&path)?),
            )?;
            vec![path]
        }
    };
    write_json(
        &json!({ "files": written, "summaries": report.summaries }),
        None,
    )?;
    if cli.pretty {
        eprint!("{}", summary_table(&report));
    }
    Ok(())
}

fn constants_cmd(cli: &Cli, a: &ConstantsArgs) -> anyhow::Result<()> {
    let set = if a.invertibility_constants {
        ConstantSet::Invertibility
    } else {
        ConstantSet::Standard
    };
    let params = TheoryParams::new(a.alpha, a.r, a.c)?.with_constant_set(set);
    let design = a
        .design
        .as_ref()
        .map(|d| DesignMatrix::load(d, false).with_context(|| format!("loading {}", d.display())))
        .transpose()?;
    let (n, p) = match (&design, a.n, a.p) {
        (Some(x), n, p) => {
            if n.is_some_and(|n| n != x.n()) || p.is_some_and(|p| p != x.p()) {
                bail!("--n/--p disagree with the design ({} x {})", x.n(), x.p());
            }
            (x.n(), x.p())
        }
        (None, Some(n), Some(p)) => (n, p),
        _ => bail!("either --design or both --n and --p are required"),
    };
    // Without a design, use the Gaussian estimate ||X|| ~ 1 + sqrt(p / n).
    let (opnorm_sq, opnorm_source) = match &design {
        Some(x) => (x.opnorm()?.powi(2), "design"),
        None => (
            (1.0 + (p as f64 / n as f64).sqrt()).powi(2),
            "gaussian_estimate",
        ),
    };
    let (c_spar, c_mu) = constants(&params);
    let a_bounds = bounds_a_from(opnorm_sq, n, p, a.s, &params);
    let b_bounds = bounds_b(n, p, a.s, &params).ok();
    let log_p = (p as f64).ln();
    let cvar_interval = cvar_interval_from(n, p, opnorm_sq, &params);

    let truth = match (&a.truth, a.magnitude) {
        (Some(path), _) => Some(
            serde_json::from_reader::<_, GroundTruth>(File::open(path)?)
                .with_context(|| format!("reading truth {}", path.display()))?,
        ),
        (None, Some(m)) => Some(GroundTruth::generate(
            p,
            a.s,
            m,
            a.sigma,
            derive_seed(cli.seed.unwrap_or(0), STREAM_TRUTH, 0),
        )?),
        (None, None) => None,
    };
    let reports = match (&design, &truth) {
        (Some(x), Some(t)) => Some(json!({
            "a": check_assumptions(x, t, Strategy::A, &params, a.cvar)?,
            "b": check_assumptions(x, t, Strategy::B, &params, a.c)?,
        })),
        _ => None,
    };

    let out: Value = json!({
        "params": params,
        "n": n,
        "p": p,
        "s": a.s,
        "log_p": log_p,
        "opnorm_sq": opnorm_sq,
        "opnorm_source": opnorm_source,
        "kappa": kappa(a.alpha),
        "c_spar": c_spar,
        "c_mu": c_mu,
        "c_circ": c_circ(&params),
        "c_small_circ": c_small_circ(&params),
        "bounds_a": a_bounds,
        "bounds_b": b_bounds,
        "cvar_interval": cvar_interval,
        "assumptions": reports,
    });
    write_json(&out, a.out.as_deref())?;
    if cli.pretty {
        eprintln!(
            "kappa = {:.6}, C_spar = {c_spar:.6e}, C_mu = {c_mu:.6}, s0 = {:.4e}, n_min(A) = {:.4e}",
            kappa(a.alpha),
            a_bounds.s0,
            a_bounds.n_min
        );
    }
    Ok(())
}

fn check_matrix(cli: &Cli, a: &CheckMatrixArgs) -> anyhow::Result<()> {
    let x = DesignMatrix::load(&a.design, a.normalize)
        .with_context(|| format!("loading design {}", a.design.display()))?;
    let opnorm = x.opnorm()?;
    let iso = a
        .support
        .as_ref()
        .map(|t| isometry_deviation(&x, t))
        .transpose()?;
    let out = json!({
        "n": x.n(),
        "p": x.p(),
        "coherence": x.coherence(),
        "opnorm": opnorm,
        "opnorm_sq": opnorm * opnorm,
        "support": a.support,
        "isometry_deviation": iso,
    });
    write_json(&out, a.out.as_deref())?;
    if cli.pretty {
        eprintln!(
            "{} x {}: coherence = {:.6}, ||X|| = {opnorm:.6}",
            x.n(),
            x.p(),
            x.coherence()
        );
        if let Some(d) = iso {
            eprintln!("||X_T^t X_T - I|| = {d:.6}");
        }
    }
    Ok(())
}
