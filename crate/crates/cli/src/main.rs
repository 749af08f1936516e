mod config;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use wiener_sampling::analytics::{self, DEFAULT_SOLVER_TOL};
use wiener_sampling::experiments::{
    self, asymptotic_report, log_grid, AsymptoticGrid, AsymptoticTable, PolicyKind, SweepConfig, SweepKind, SweepTable,
};
use wiener_sampling::sim::{self, DEFAULT_QUEUE_CAP};
use wiener_sampling::verify::{self, Status, VerifyConfig};
use wiener_sampling::{DelayModel, Error, FrequencyConstraint, PolicySpec, SimOptions, ThresholdSolution};

use config::{parse_fmax, FileConfig};

const DEFAULT_SEED: u64 = 1;
const DEFAULT_SIM_CYCLES: usize = 100_000;

#[derive(Parser)]
#[command(name = "wsamp", version, about = "Optimal sampling of a Wiener process over a random-delay channel")]
struct Cli {
    /// Worker threads for sweeps and Monte Carlo oracles.
    #[arg(long, global = true, env = "WSAMP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the MMSE-optimal and age-optimal thresholds.
    Solve(SolveArgs),
    /// Simulate one sampling policy.
    Simulate(SimulateArgs),
    /// Run a parameter sweep, or a solver-only asymptotic report.
    Sweep(SweepArgs),
    /// Run the self-check suites.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// JSON file with default values for any flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Omit the generation timestamp.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// Delay model: det:y, exp:mean, lognorm:sigma, scaled:d:inner, file:path.
    #[arg(long)]
    delay: Option<String>,
    /// Maximum average sampling rate, or "inf".
    #[arg(long)]
    fmax: Option<String>,
    /// Relative tolerance of the root finder.
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SimulateArgs {
    /// zero-wait, uniform:T, age-threshold:B, signal-threshold:B; B may be "auto".
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    delay: Option<String>,
    /// Rate cap used to resolve "auto" thresholds.
    #[arg(long)]
    fmax: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    cycles: Option<usize>,
    /// Path step size (default: min(beta, E[Y], 1)/1000).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Queue length at which uniform sampling is declared divergent.
    #[arg(long)]
    queue_cap: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    /// fmax, sigma or scale.
    #[arg(long)]
    sweep: Option<String>,
    /// Comma-separated grid values (default depends on the sweep).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Comma-separated subset of signal-threshold, age-threshold, zero-wait, uniform.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    /// Delay model for fmax sweeps, inner model for scale sweeps.
    #[arg(long)]
    delay: Option<String>,
    /// Rate cap for sigma and scale sweeps.
    #[arg(long)]
    fmax: Option<String>,
    #[arg(long)]
    cycles: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; a `.meta.json` sidecar is written next to it.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Solver-only limits instead of simulations (fmax or scale sweeps).
    #[arg(long)]
    asymptotic: bool,
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    /// Paths per Monte Carlo oracle.
    #[arg(long)]
    runs: Option<usize>,
    /// Cycles per simulated identity check.
    #[arg(long)]
    cycles: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: Common,
}

/// The pieces every command hands to the printer.
struct Rendered {
    human: String,
    json: Value,
    csv: String,
}

fn load_config(common: &Common) -> Result<FileConfig> {
    match &common.config {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn format_of(common: &Common, file: &FileConfig) -> Result<Format> {
    if let Some(f) = common.format {
        return Ok(f);
    }
    match file.format.as_deref() {
        None => Ok(Format::Human),
        Some(s) => Format::from_str(s, true).map_err(|_| anyhow::anyhow!("unknown format {s:?}")),
    }
}

fn delay_of(flag: &Option<String>, file: &FileConfig, default: &str) -> Result<DelayModel> {
    let spec = flag.as_deref().or(file.delay.as_deref()).unwrap_or(default);
    DelayModel::parse_spec(spec).with_context(|| format!("bad --delay {spec:?}"))
}

fn fmax_of(flag: &Option<String>, file: &FileConfig) -> Result<Option<f64>> {
    match (flag, &file.fmax) {
        (Some(s), _) => parse_fmax(s).map(Some),
        (None, Some(v)) => v.value().map(Some),
        (None, None) => Ok(None),
    }
}

fn constraint(f: Option<f64>) -> Result<FrequencyConstraint> {
    Ok(FrequencyConstraint::max(f.unwrap_or(f64::INFINITY))?)
}

fn fmt_fmax(f: f64) -> String {
    if f.is_infinite() {
        "inf".into()
    } else {
        f.to_string()
    }
}

/// Shortest round-trip form, in exponent notation for very small or large
/// magnitudes.
fn num(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && a.is_finite() && !(1e-4..1e9).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn opt_str(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn emit(r: Rendered, format: Format, no_timestamp: bool) {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    match format {
        Format::Human => {
            if !no_timestamp {
                println!("# generated: {stamp}");
            }
            print!("{}", r.human);
        }
        Format::Json => {
            let mut v = r.json;
            if !no_timestamp {
                if let Value::Object(m) = &mut v {
                    m.insert("generated_at".into(), json!(stamp));
                }
            }
            println!("{}", serde_json::to_string_pretty(&v).expect("report serializes"));
        }
        Format::Csv => print!("{}", r.csv),
    }
}

#[derive(Serialize)]
struct SolverOut {
    beta: f64,
    objective: f64,
    binding: String,
    residual: f64,
    iterations: usize,
}

impl From<&ThresholdSolution> for SolverOut {
    fn from(s: &ThresholdSolution) -> Self {
        SolverOut {
            beta: s.beta,
            objective: s.objective,
            binding: s.binding.to_string(),
            residual: s.residual,
            iterations: s.iterations,
        }
    }
}

fn cmd_solve(args: SolveArgs) -> Result<(Rendered, Format, bool)> {
    let file = load_config(&args.common)?;
    let format = format_of(&args.common, &file)?;
    let model = delay_of(&args.delay, &file, "exp:1")?;
    let cap = constraint(fmax_of(&args.fmax, &file)?)?;
    let tol = args.tol.or(file.tol).unwrap_or(DEFAULT_SOLVER_TOL);

    let mmse = analytics::solve_beta_mmse(&model, cap, tol).context("MMSE-optimal threshold")?;
    let age = analytics::solve_beta_age(&model, cap, tol).context("age-optimal threshold")?;
    let mmse_at_age = analytics::mmse_age_value(age.beta, &model)?;
    let ratio = mmse.objective / mmse_at_age;
    let zw_age = analytics::zero_wait_age_optimal(&model);
    let zw_mmse = analytics::zero_wait_mmse_optimal(&model);
    let (m, a) = (SolverOut::from(&mmse), SolverOut::from(&age));

    let mut h = String::new();
    writeln!(h, "delay: {model}")?;
    writeln!(h, "f_max: {cap}")?;
    writeln!(h, "tol: {tol}")?;
    writeln!(h, "mmse-optimal:")?;
    writeln!(h, "  beta: {}", m.beta)?;
    writeln!(h, "  objective: {}", m.objective)?;
    writeln!(h, "  binding: {}", m.binding)?;
    writeln!(h, "  residual: {}", num(m.residual))?;
    writeln!(h, "  iterations: {}", m.iterations)?;
    writeln!(h, "age-optimal:")?;
    writeln!(h, "  beta: {}", a.beta)?;
    writeln!(h, "  objective: {}", a.objective)?;
    writeln!(h, "  mmse: {mmse_at_age}")?;
    writeln!(h, "  binding: {}", a.binding)?;
    writeln!(h, "  residual: {}", num(a.residual))?;
    writeln!(h, "  iterations: {}", a.iterations)?;
    writeln!(h, "mmse-ratio: {ratio}")?;
    writeln!(h, "zero-wait-age-optimal: {zw_age}")?;
    writeln!(h, "zero-wait-mmse-optimal: {zw_mmse}")?;

    let json = json!({
        "delay": model.to_string(),
        "f_max": cap.to_string(),
        "tol": tol,
        "mmse_optimal": m,
        "age_optimal": {
            "beta": a.beta,
            "objective": a.objective,
            "mmse": mmse_at_age,
            "binding": a.binding,
            "residual": a.residual,
            "iterations": a.iterations,
        },
        "mmse_ratio": ratio,
        "zero_wait_age_optimal": zw_age,
        "zero_wait_mmse_optimal": zw_mmse,
    });

    let mut csv = String::from("solver,delay,f_max,beta,objective,mmse,binding,residual,iterations\n");
    writeln!(
        csv,
        "mmse-optimal,{model},{cap},{},{},{},{},{},{}",
        m.beta,
        m.objective,
        m.objective,
        m.binding,
        num(m.residual),
        m.iterations
    )?;
    writeln!(
        csv,
        "age-optimal,{model},{cap},{},{},{},{},{},{}",
        a.beta,
        a.objective,
        mmse_at_age,
        a.binding,
        num(a.residual),
        a.iterations
    )?;
    Ok((Rendered { human: h, json, csv }, format, args.common.no_timestamp))
}

/// Parses a policy, resolving `:auto` thresholds with the solvers.
fn resolve_policy(
    spec: &str,
    model: &DelayModel,
    cap: FrequencyConstraint,
    tol: f64,
) -> Result<(PolicySpec, Option<f64>)> {
    match spec {
        "signal-threshold:auto" => {
            let s = analytics::solve_beta_mmse(model, cap, tol).context("resolving signal-threshold:auto")?;
            Ok((PolicySpec::SignalThreshold { beta: s.beta }, Some(s.objective)))
        }
        "age-threshold:auto" => {
            let s = analytics::solve_beta_age(model, cap, tol).context("resolving age-threshold:auto")?;
            Ok((PolicySpec::AgeThreshold { beta: s.beta }, Some(analytics::mmse_age_value(s.beta, model)?)))
        }
        other => Ok((other.parse().with_context(|| format!("bad --policy {other:?}"))?, None)),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(Rendered, Format, bool)> {
    let file = load_config(&args.common)?;
    let format = format_of(&args.common, &file)?;
    let model = delay_of(&args.delay, &file, "exp:1")?;
    let fmax = fmax_of(&args.fmax, &file)?;
    let cap = constraint(fmax)?;
    let tol = args.tol.or(file.tol).unwrap_or(DEFAULT_SOLVER_TOL);
    let Some(spec) = args.policy.clone().or(file.policy.clone()) else {
        bail!(UsageError("--policy is required".into()));
    };
    let seed = args.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let cycles = args.cycles.or(file.cycles).unwrap_or(DEFAULT_SIM_CYCLES);
    let (policy, analytic_mse) = resolve_policy(&spec, &model, cap, tol)?;

    let mut opts = SimOptions::new(cycles, seed);
    opts.dt = args.dt.or(file.dt);
    opts.queue_cap = args.queue_cap.or(file.queue_cap).unwrap_or(DEFAULT_QUEUE_CAP);
    let r = sim::run_cycles(policy, &model, opts)?;

    let mut notes = Vec::new();
    if policy == PolicySpec::ZeroWait && cap.f_max() * model.mean() < 1.0 {
        notes.push(format!(
            "zero-wait samples at rate 1/E[Y] = {}, above f_max = {cap}; the cap is not enforced",
            1.0 / model.mean()
        ));
    }
    if r.divergent {
        notes.push("queue did not stabilize; time averages are not meaningful".to_string());
    }

    let mut h = String::new();
    writeln!(h, "policy: {policy}")?;
    writeln!(h, "delay: {model}")?;
    writeln!(h, "f_max: {cap}")?;
    writeln!(h, "seed: {seed}")?;
    writeln!(h, "dt: {}", r.dt)?;
    writeln!(h, "cycles: {}", r.n_cycles)?;
    writeln!(h, "mse: {} +- {}", r.mse.value, r.mse.half_width)?;
    writeln!(h, "age: {} +- {}", r.age.value, r.age.half_width)?;
    writeln!(h, "rate: {} +- {}", r.rate.value, r.rate.half_width)?;
    writeln!(h, "divergent: {}", r.divergent)?;
    writeln!(h, "max-queue: {}", r.max_queue)?;
    if let Some(a) = analytic_mse {
        writeln!(h, "analytic-mse: {a}")?;
    }
    for n in &notes {
        writeln!(h, "note: {n}")?;
    }

    let json = json!({
        "policy": policy.to_string(),
        "delay": model.to_string(),
        "f_max": cap.to_string(),
        "seed": seed,
        "dt": r.dt,
        "cycles": r.n_cycles,
        "mse": r.mse.value,
        "mse_ci95": r.mse.half_width,
        "age": r.age.value,
        "age_ci95": r.age.half_width,
        "rate": r.rate.value,
        "rate_ci95": r.rate.half_width,
        "divergent": r.divergent,
        "max_queue": r.max_queue,
        "analytic_mse": analytic_mse,
        "notes": notes,
    });

    let mut csv = String::from(
        "policy,delay,f_max,seed,dt,cycles,mse,mse_ci95,age,age_ci95,rate,rate_ci95,divergent,max_queue,analytic_mse\n",
    );
    writeln!(
        csv,
        "{policy},{model},{cap},{seed},{},{},{},{},{},{},{},{},{},{},{}",
        r.dt,
        r.n_cycles,
        r.mse.value,
        r.mse.half_width,
        r.age.value,
        r.age.half_width,
        r.rate.value,
        r.rate.half_width,
        r.divergent,
        r.max_queue,
        opt_str(analytic_mse)
    )?;
    Ok((Rendered { human: h, json, csv }, format, args.common.no_timestamp))
}

fn sweep_table_human(t: &SweepTable) -> Result<String> {
    let mut h = String::new();
    for row in &t.rows {
        writeln!(h, "{} = {} (f_max {}), ratio {}", t.kind, row.parameter, fmt_fmax(row.f_max), opt_str(row.ratio))?;
        for c in &row.cells {
            write!(h, "  {:<17} {:<10}", c.policy.as_str(), c.flag.as_str())?;
            if let Some(b) = c.beta {
                write!(h, " beta {b}")?;
            }
            if let Some(a) = c.analytic_mse {
                write!(h, " analytic-mse {a}")?;
            }
            if let (Some(m), Some(ci)) = (c.mse, c.mse_ci95) {
                write!(h, " mse {m} +- {ci}")?;
            }
            if let (Some(a), Some(ci)) = (c.age, c.age_ci95) {
                write!(h, " age {a} +- {ci}")?;
            }
            if let Some(r) = c.rate {
                write!(h, " rate {r}")?;
            }
            writeln!(h)?;
        }
        if !row.note.is_empty() {
            writeln!(h, "  note: {}", row.note)?;
        }
    }
    Ok(h)
}

fn cmd_sweep(args: SweepArgs) -> Result<(Rendered, Format, bool)> {
    let file = load_config(&args.common)?;
    let format = format_of(&args.common, &file)?;
    let Some(kind) = args.sweep.clone().or(file.sweep.clone()) else {
        bail!(UsageError("--sweep is required (fmax, sigma or scale)".into()));
    };
    let kind: SweepKind = kind.parse()?;
    let seed = args.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let grid = args.grid.clone().or(file.grid.clone());
    let tol = args.tol.or(file.tol).unwrap_or(DEFAULT_SOLVER_TOL);

    if args.asymptotic {
        let template = delay_of(&args.delay, &file, "exp:1")?;
        let agrid = match kind {
            SweepKind::FmaxSweep => AsymptoticGrid::Fmax(grid.unwrap_or_else(|| log_grid(1e-3, 1.0, 7))),
            SweepKind::ScaleSweep => AsymptoticGrid::Scale(grid.unwrap_or_else(|| log_grid(1.0, 100.0, 5))),
            SweepKind::SigmaSweep => bail!(UsageError("--asymptotic needs an fmax or scale sweep".into())),
        };
        let table = asymptotic_report(&template, &agrid, tol)?;
        return Ok((asymptotic_rendered(&template, &table)?, format, args.common.no_timestamp));
    }

    let mut cfg = SweepConfig::default_for(kind, seed);
    if let Some(g) = grid {
        cfg.grid = g;
    }
    if let Some(p) = args.policies.clone().or(file.policies.clone()) {
        cfg.policies = p.iter().map(|s| s.trim().parse()).collect::<Result<Vec<PolicyKind>, _>>()?;
    }
    if args.delay.is_some() || file.delay.is_some() {
        cfg.model_template = delay_of(&args.delay, &file, "exp:1")?;
    }
    if let Some(f) = fmax_of(&args.fmax, &file)? {
        cfg.f_max = if f.is_infinite() { None } else { Some(f) };
    }
    if let Some(n) = args.cycles.or(file.cycles) {
        cfg.n_cycles = n;
    }
    cfg.dt = args.dt.or(file.dt);
    cfg.output_path = args.output.clone().or(file.output.clone());

    let table = experiments::run_sweep(&cfg)?;
    let mut csv_bytes = Vec::new();
    experiments::write_csv_to(&table, &mut csv_bytes)?;
    let csv = String::from_utf8(csv_bytes).expect("csv is utf-8");

    let mut h = String::new();
    writeln!(h, "sweep: {kind}")?;
    writeln!(h, "seed: {seed}")?;
    writeln!(h, "cycles: {}", cfg.n_cycles)?;
    writeln!(h, "dt: {}", cfg.dt.map_or_else(|| "default".to_string(), |d| d.to_string()))?;
    if let Some(p) = &cfg.output_path {
        writeln!(h, "output: {}", p.display())?;
        writeln!(h, "metadata: {}", experiments::metadata_path(p).display())?;
    }
    h.push_str(&sweep_table_human(&table)?);
    let json = json!({
        "sweep": kind.as_str(),
        "seed": seed,
        "cycles": cfg.n_cycles,
        "dt": cfg.dt,
        "output": cfg.output_path,
        "table": table,
    });
    Ok((Rendered { human: h, json, csv }, format, args.common.no_timestamp))
}

fn asymptotic_rendered(template: &DelayModel, table: &AsymptoticTable) -> Result<Rendered> {
    let mut h = format!("delay: {template}\n");
    let mut csv = String::new();
    match table {
        AsymptoticTable::Fmax(rows) => {
            csv.push_str("f_max,beta,beta_f,beta_f_lower,mmse_6f,ratio\n");
            writeln!(h, "{:>14} {:>20} {:>20} {:>20} {:>20} {:>20}", "f_max", "beta", "beta*f", "1-E[Y]f", "mmse*6f", "ratio")?;
            for r in rows {
                writeln!(
                    h,
                    "{:>14} {:>20} {:>20} {:>20} {:>20} {:>20}",
                    r.f_max, r.beta, r.beta_f, r.beta_f_lower, r.mmse_6f, r.ratio
                )?;
                writeln!(csv, "{},{},{},{},{},{}", r.f_max, r.beta, r.beta_f, r.beta_f_lower, r.mmse_6f, r.ratio)?;
            }
        }
        AsymptoticTable::Scale(rows) => {
            csv.push_str("d,beta_age,beta_mmse,age_scaling,mmse_scaling\n");
            writeln!(h, "{:>14} {:>20} {:>20} {:>20} {:>20}", "d", "beta-age", "beta-mmse", "age-scaling", "mmse-scaling")?;
            for r in rows {
                writeln!(
                    h,
                    "{:>14} {:>20} {:>20} {:>20} {:>20}",
                    r.d, r.beta_age, r.beta_mmse, r.age_scaling, r.mmse_scaling
                )?;
                writeln!(csv, "{},{},{},{},{}", r.d, r.beta_age, r.beta_mmse, r.age_scaling, r.mmse_scaling)?;
            }
        }
    }
    let json = json!({ "delay": template.to_string(), "report": table });
    Ok(Rendered { human: h, json, csv })
}

fn cmd_verify(args: VerifyArgs) -> Result<(Rendered, Format, bool, usize)> {
    let file = load_config(&args.common)?;
    let format = format_of(&args.common, &file)?;
    let mut cfg = VerifyConfig::new(args.seed.or(file.seed).unwrap_or(DEFAULT_SEED));
    if let Some(n) = args.runs.or(file.runs) {
        cfg.runs = n;
    }
    if let Some(n) = args.cycles.or(file.cycles) {
        cfg.cycles = n;
    }
    if let Some(dt) = args.dt.or(file.dt) {
        cfg.dt = dt;
    }
    let report = verify::run_all(&cfg)?;

    let mut h = String::new();
    writeln!(h, "seed: {}", cfg.seed)?;
    writeln!(h, "runs: {}", cfg.runs)?;
    writeln!(h, "cycles: {}", cfg.cycles)?;
    writeln!(h, "dt: {}", cfg.dt)?;
    let mut csv = String::from("suite,check,observed,std_err,expected,tolerance,status\n");
    for c in &report.checks {
        writeln!(
            h,
            "[{:<8}] {:<20} {}: observed {} (se {}), expected {}, tolerance {}",
            c.status.to_string(),
            c.suite,
            c.name,
            num(c.observed),
            num(c.std_err),
            num(c.expected),
            num(c.tolerance)
        )?;
        writeln!(
            csv,
            "{},\"{}\",{},{},{},{},{}",
            c.suite,
            c.name,
            num(c.observed),
            num(c.std_err),
            num(c.expected),
            num(c.tolerance),
            c.status
        )?;
    }
    let failures = report.failures();
    writeln!(
        h,
        "{} checks: {} passed, {} failed, {} degraded",
        report.checks.len(),
        report.checks.iter().filter(|c| c.status == Status::Pass).count(),
        failures,
        report.degraded()
    )?;
    let json = json!({
        "seed": cfg.seed,
        "runs": cfg.runs,
        "cycles": cfg.cycles,
        "dt": cfg.dt,
        "checks": report.checks,
        "failures": failures,
        "degraded": report.degraded(),
    });
    Ok((Rendered { human: h, json, csv }, format, args.common.no_timestamp, failures))
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::NoConvergence { .. } | Error::MultipleRoots { .. } | Error::NoBracket { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(a).map(|(r, f, t)| (r, f, t, 0)),
        Command::Simulate(a) => cmd_simulate(a).map(|(r, f, t)| (r, f, t, 0)),
        Command::Sweep(a) => cmd_sweep(a).map(|(r, f, t)| (r, f, t, 0)),
        Command::Verify(a) => cmd_verify(a),
    };
    match outcome {
        Ok((rendered, format, no_ts, failures)) => {
            emit(rendered, format, no_ts);
            if failures > 0 {
                ExitCode::from(10u8.saturating_add(failures.min(245) as u8))
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
