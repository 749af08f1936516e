//! Parameter sweeps pairing solved thresholds with simulated confirmations.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{self, FrequencyConstraint, DEFAULT_SOLVER_TOL};
use crate::delay::DelayModel;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::sim::{run_cycles, PolicySpec, SimOptions, MIN_CYCLES};

pub const DEFAULT_SWEEP_CYCLES: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Grid over `f_max` with a fixed delay model.
    FmaxSweep,
    /// Grid over σ of the normalized log-normal delay.
    SigmaSweep,
    /// Grid over the scale factor `d` applied to the template model.
    ScaleSweep,
}

impl SweepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepKind::FmaxSweep => "fmax-sweep",
            SweepKind::SigmaSweep => "sigma-sweep",
            SweepKind::ScaleSweep => "scale-sweep",
        }
    }

    fn parameter_name(&self) -> &'static str {
        match self {
            SweepKind::FmaxSweep => "f_max",
            SweepKind::SigmaSweep => "sigma",
            SweepKind::ScaleSweep => "d",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fmax-sweep" | "fmax" => Ok(SweepKind::FmaxSweep),
            "sigma-sweep" | "sigma" => Ok(SweepKind::SigmaSweep),
            "scale-sweep" | "scale" => Ok(SweepKind::ScaleSweep),
            other => Err(Error::InvalidParameter(format!("unknown sweep kind {other:?}"))),
        }
    }
}

/// The four policies a sweep can compare.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    SignalThreshold,
    AgeThreshold,
    ZeroWait,
    Uniform,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::SignalThreshold,
        PolicyKind::AgeThreshold,
        PolicyKind::ZeroWait,
        PolicyKind::Uniform,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::SignalThreshold => "signal-threshold",
            PolicyKind::AgeThreshold => "age-threshold",
            PolicyKind::ZeroWait => "zero-wait",
            PolicyKind::Uniform => "uniform",
        }
    }

    /// Column prefix in the CSV output.
    pub fn column_prefix(&self) -> &'static str {
        match self {
            PolicyKind::SignalThreshold => "signal_threshold",
            PolicyKind::AgeThreshold => "age_threshold",
            PolicyKind::ZeroWait => "zero_wait",
            PolicyKind::Uniform => "uniform",
        }
    }

    fn from_prefix(s: &str) -> Option<Self> {
        PolicyKind::ALL.into_iter().find(|p| p.column_prefix() == s)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown policy kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub sweep_kind: SweepKind,
    /// Delay model for fmax-sweeps, the inner model for scale-sweeps;
    /// unused by sigma-sweeps.
    pub model_template: DelayModel,
    pub grid: Vec<f64>,
    /// Sampling-rate cap for sigma- and scale-sweeps; `None` is unbounded.
    pub f_max: Option<f64>,
    pub policies: Vec<PolicyKind>,
    pub n_cycles: usize,
    /// Step size for every simulation; `None` picks the per-policy default.
    pub dt: Option<f64>,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

impl SweepConfig {
    /// Defaults: fmax-sweep on `exp:1` over 24 log points in `[0.01, 2]`;
    /// sigma-sweep over 15 points in `[0.05, 1.5]` at `f_max = 1.5`;
    /// scale-sweep on `exp:1` over 11 log points in `[0.1, 10]`, unbounded.
    pub fn default_for(kind: SweepKind, seed: u64) -> Self {
        let exp1 = DelayModel::Exponential { mean: 1.0 };
        let (model_template, grid, f_max) = match kind {
            SweepKind::FmaxSweep => (exp1, log_grid(0.01, 2.0, 24), None),
            SweepKind::SigmaSweep => (
                DelayModel::LogNormalNormalized { sigma: 1.0 },
                linear_grid(0.05, 1.5, 15),
                Some(1.5),
            ),
            SweepKind::ScaleSweep => (exp1, log_grid(0.1, 10.0, 11), None),
        };
        SweepConfig {
            sweep_kind: kind,
            model_template,
            grid,
            f_max,
            policies: PolicyKind::ALL.to_vec(),
            n_cycles: DEFAULT_SWEEP_CYCLES,
            dt: None,
            seed,
            output_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidParameter("sweep grid is empty".into()));
        }
        if let Some(&g) = self.grid.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::InvalidParameter(format!("grid values must be finite and > 0, got {g}")));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("sweep grid must be strictly increasing".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::InvalidParameter("no policies requested".into()));
        }
        let mut sorted = self.policies.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("duplicate policy in sweep".into()));
        }
        if self.n_cycles < MIN_CYCLES {
            return Err(Error::InvalidParameter(format!(
                "need at least {MIN_CYCLES} cycles, got {}",
                self.n_cycles
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
            }
        }
        if self.sweep_kind != SweepKind::FmaxSweep {
            if let Some(f) = self.f_max {
                FrequencyConstraint::max(f)?;
            }
        }
        self.model_template.validate()
    }

    /// The delay model and rate cap at one grid value.
    pub fn point(&self, value: f64) -> Result<(DelayModel, FrequencyConstraint)> {
        let cap = || match self.f_max {
            Some(f) => FrequencyConstraint::max(f),
            None => Ok(FrequencyConstraint::Unbounded),
        };
        match self.sweep_kind {
            SweepKind::FmaxSweep => Ok((self.model_template.clone(), FrequencyConstraint::max(value)?)),
            SweepKind::SigmaSweep => Ok((DelayModel::lognormal(value)?, cap()?)),
            SweepKind::ScaleSweep => Ok((DelayModel::scaled(self.model_template.clone(), value)?, cap()?)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feasibility {
    Feasible,
    Infeasible,
    Divergent,
}

impl Feasibility {
    pub fn as_str(&self) -> &'static str {
        match self {
            Feasibility::Feasible => "feasible",
            Feasibility::Infeasible => "infeasible",
            Feasibility::Divergent => "divergent",
        }
    }
}

impl FromStr for Feasibility {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feasible" => Ok(Feasibility::Feasible),
            "infeasible" => Ok(Feasibility::Infeasible),
            "divergent" => Ok(Feasibility::Divergent),
            other => Err(Error::InvalidParameter(format!("unknown flag {other:?}"))),
        }
    }
}

/// One policy's results at one grid point. Numeric cells are `None`
/// where they do not apply or the combination is infeasible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyCell {
    pub policy: PolicyKind,
    pub flag: Feasibility,
    /// Solved threshold (threshold policies) or sampling interval (uniform).
    pub beta: Option<f64>,
    pub analytic_mse: Option<f64>,
    pub analytic_age: Option<f64>,
    pub mse: Option<f64>,
    pub mse_ci95: Option<f64>,
    pub age: Option<f64>,
    pub age_ci95: Option<f64>,
    pub rate: Option<f64>,
}

impl PolicyCell {
    fn empty(policy: PolicyKind, flag: Feasibility) -> Self {
        PolicyCell {
            policy,
            flag,
            beta: None,
            analytic_mse: None,
            analytic_age: None,
            mse: None,
            mse_ci95: None,
            age: None,
            age_ci95: None,
            rate: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub f_max: f64,
    /// `mmse_opt / mmse_age-opt` from the solvers.
    pub ratio: Option<f64>,
    /// One cell per requested policy, in config order.
    pub cells: Vec<PolicyCell>,
    /// Solver or simulation errors at this point; empty when none.
    pub note: String,
}

impl SweepRow {
    pub fn cell(&self, policy: PolicyKind) -> Option<&PolicyCell> {
        self.cells.iter().find(|c| c.policy == policy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub policies: Vec<PolicyKind>,
    pub rows: Vec<SweepRow>,
}

/// Rounds to the 12 significant digits written to CSV.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn round_opt(x: Option<f64>) -> Option<f64> {
    x.map(round12)
}

fn push_note(note: &mut String, msg: impl fmt::Display) {
    if !note.is_empty() {
        note.push_str("; ");
    }
    note.push_str(&msg.to_string());
}

fn sweep_point(config: &SweepConfig, index: usize, value: f64) -> Result<SweepRow> {
    let (model, cap) = config.point(value)?;
    let mean = model.mean();
    let point_seed = derive_seed(config.seed, index as u64);
    let mut note = String::new();

    let mmse = analytics::solve_beta_mmse(&model, cap, DEFAULT_SOLVER_TOL);
    let age = analytics::solve_beta_age(&model, cap, DEFAULT_SOLVER_TOL);
    let mmse_age_opt = age.as_ref().ok().map(|s| analytics::mmse_age_value(s.beta, &model));
    let mmse_age_opt = match mmse_age_opt {
        Some(Ok(v)) => Some(v),
        Some(Err(e)) => {
            push_note(&mut note, format!("mmse at age-optimal beta: {e}"));
            None
        }
        None => None,
    };
    let ratio = match (&mmse, mmse_age_opt) {
        (Ok(s), Some(v)) if v > 0.0 => Some(s.objective / v),
        _ => None,
    };

    let mut cells = Vec::with_capacity(config.policies.len());
    for (k, &kind) in config.policies.iter().enumerate() {
        let (policy, analytic_mse, analytic_age) = match kind {
            PolicyKind::SignalThreshold => match &mmse {
                Ok(s) => (Some(PolicySpec::SignalThreshold { beta: s.beta }), Some(s.objective), None),
                Err(e) => {
                    push_note(&mut note, format!("signal-threshold solver: {e}"));
                    (None, None, None)
                }
            },
            PolicyKind::AgeThreshold => match &age {
                Ok(s) => (Some(PolicySpec::AgeThreshold { beta: s.beta }), mmse_age_opt, Some(s.objective)),
                Err(e) => {
                    push_note(&mut note, format!("age-threshold solver: {e}"));
                    (None, None, None)
                }
            },
            PolicyKind::ZeroWait => {
                // Zero-wait samples at rate 1/E[Y].
                if cap.f_max() * mean >= 1.0 {
                    let v = analytics::mmse_age_value(0.0, &model)?;
                    (Some(PolicySpec::ZeroWait), Some(v), Some(v))
                } else {
                    (None, None, None)
                }
            }
            PolicyKind::Uniform => {
                let interval = cap.min_interval();
                if interval > mean {
                    (Some(PolicySpec::Uniform { interval }), None, None)
                } else {
                    (None, None, None)
                }
            }
        };
        let Some(policy) = policy else {
            cells.push(PolicyCell::empty(kind, Feasibility::Infeasible));
            continue;
        };
        let mut opts = SimOptions::new(config.n_cycles, derive_seed(point_seed, k as u64));
        opts.dt = config.dt;
        let mut cell = PolicyCell::empty(kind, Feasibility::Feasible);
        cell.beta = round_opt(policy.threshold());
        cell.analytic_mse = round_opt(analytic_mse);
        cell.analytic_age = round_opt(analytic_age);
        match run_cycles(policy, &model, opts) {
            Ok(r) if r.divergent => cell.flag = Feasibility::Divergent,
            Ok(r) => {
                cell.mse = Some(round12(r.mse.value));
                cell.mse_ci95 = Some(round12(r.mse.half_width));
                cell.age = Some(round12(r.age.value));
                cell.age_ci95 = Some(round12(r.age.half_width));
                cell.rate = Some(round12(r.rate.value));
            }
            Err(e) => push_note(&mut note, format!("{kind} simulation: {e}")),
        }
        cells.push(cell);
    }
    Ok(SweepRow {
        parameter: round12(value),
        f_max: round12(cap.f_max()),
        ratio: round_opt(ratio),
        cells,
        note,
    })
}

/// Runs every grid point (in parallel, seeds derived from the master seed
/// and the point index) and, if `output_path` is set, writes the CSV and
/// its `.meta.json` sidecar. Rows come back in grid order.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepTable> {
    config.validate()?;
    let rows: Vec<Result<SweepRow>> = config
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, &v)| sweep_point(config, i, v))
        .collect();
    let table = SweepTable {
        kind: config.sweep_kind,
        policies: config.policies.clone(),
        rows: rows.into_iter().collect::<Result<_>>()?,
    };
    if let Some(path) = &config.output_path {
        write_csv(&table, path)?;
        write_metadata(config, path)?;
    }
    Ok(table)
}

const CELL_FIELDS: [&str; 9] = [
    "flag",
    "beta",
    "analytic_mse",
    "analytic_age",
    "mse",
    "mse_ci95",
    "age",
    "age_ci95",
    "rate",
];

fn cell_fields() -> impl Iterator<Item = &'static str> {
    CELL_FIELDS.into_iter()
}

pub fn csv_header(table: &SweepTable) -> Vec<String> {
    let mut h = vec![table.kind.parameter_name().to_string(), "f_max_cap".into(), "ratio".into()];
    for p in &table.policies {
        h.extend(cell_fields().map(|f| format!("{}_{f}", p.column_prefix())));
    }
    h.push("note".into());
    h
}

fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// Writes `table` as CSV to any writer.
pub fn write_csv_to<W: Write>(table: &SweepTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(table))?;
    for row in &table.rows {
        let mut rec = vec![fmt_num(row.parameter), fmt_num(row.f_max), fmt_opt(row.ratio)];
        for p in &table.policies {
            let c = row
                .cell(*p)
                .ok_or_else(|| Error::Precondition(format!("row is missing the {p} cell")))?;
            rec.push(c.flag.as_str().into());
            for v in [c.beta, c.analytic_mse, c.analytic_age, c.mse, c.mse_ci95, c.age, c.age_ci95, c.rate] {
                rec.push(fmt_opt(v));
            }
        }
        rec.push(row.note.clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_csv(table: &SweepTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(table, file)
}

fn parse_num(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse {
        path: PathBuf::from("<csv>"),
        line,
        text: s.to_string(),
    })
}

fn parse_opt(s: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_num(s, line).map(Some)
    }
}

/// Parses a table written by [`write_csv_to`].
pub fn read_csv_from<R: Read>(input: R) -> Result<SweepTable> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let bad = |msg: String| Error::InvalidParameter(format!("unrecognized sweep CSV header: {msg}"));
    let kind = match header.get(0) {
        Some("f_max") => SweepKind::FmaxSweep,
        Some("sigma") => SweepKind::SigmaSweep,
        Some("d") => SweepKind::ScaleSweep,
        other => return Err(bad(format!("first column {other:?}"))),
    };
    let n_fields = cell_fields().count();
    let policy_cols = header.len().checked_sub(4).ok_or_else(|| bad("too few columns".into()))?;
    if policy_cols % n_fields != 0 {
        return Err(bad(format!("{} columns", header.len())));
    }
    let mut policies = Vec::new();
    for k in 0..policy_cols / n_fields {
        let col = &header[3 + k * n_fields];
        let prefix = col.strip_suffix("_flag").ok_or_else(|| bad(col.to_string()))?;
        policies.push(PolicyKind::from_prefix(prefix).ok_or_else(|| bad(col.to_string()))?);
    }
    let table = SweepTable {
        kind,
        policies,
        rows: Vec::new(),
    };
    if csv_header(&table).iter().map(String::as_str).ne(header.iter()) {
        return Err(bad("column names do not match".into()));
    }

    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let mut cells = Vec::new();
        for (k, &p) in table.policies.iter().enumerate() {
            let base = 3 + k * n_fields;
            let num = |j: usize| parse_opt(&rec[base + j], line);
            cells.push(PolicyCell {
                policy: p,
                flag: rec[base].parse()?,
                beta: num(1)?,
                analytic_mse: num(2)?,
                analytic_age: num(3)?,
                mse: num(4)?,
                mse_ci95: num(5)?,
                age: num(6)?,
                age_ci95: num(7)?,
                rate: num(8)?,
            });
        }
        rows.push(SweepRow {
            parameter: parse_num(&rec[0], line)?,
            f_max: parse_num(&rec[1], line)?,
            ratio: parse_opt(&rec[2], line)?,
            cells,
            note: rec[rec.len() - 1].to_string(),
        });
    }
    Ok(SweepTable { rows, ..table })
}

pub fn read_csv(path: &Path) -> Result<SweepTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(file)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub version: String,
    pub config: SweepConfig,
    pub seed: u64,
    /// The fixed step, or `"default"` for the per-policy rule.
    pub dt: String,
    pub columns: Vec<String>,
}

/// `<output>.meta.json`.
pub fn metadata_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_metadata(config: &SweepConfig, output: &Path) -> Result<()> {
    let table = SweepTable {
        kind: config.sweep_kind,
        policies: config.policies.clone(),
        rows: Vec::new(),
    };
    let meta = SweepMetadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        seed: config.seed,
        dt: config.dt.map_or_else(|| "default".to_string(), |d| d.to_string()),
        columns: csv_header(&table),
    };
    let path = metadata_path(output);
    let mut file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(&mut file, &meta)?;
    file.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Which limit an [`asymptotic_report`] probes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "grid", rename_all = "kebab-case")]
pub enum AsymptoticGrid {
    /// Small-`f_max` limit of the MMSE solver.
    Fmax(Vec<f64>),
    /// Scaling `Scaled(template, d)` with an unbounded rate.
    Scale(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FmaxAsymptoticRow {
    pub f_max: f64,
    pub beta: f64,
    /// `β · f_max`; tends to 1 as `f_max → 0`.
    pub beta_f: f64,
    /// `1 − E[Y]·f_max`, the lower bound on `β · f_max`.
    pub beta_f_lower: f64,
    /// `mmse_opt · 6 f_max`; tends to 1.
    pub mmse_6f: f64,
    /// `mmse_opt / mmse_age-opt`; tends to 1/3.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleAsymptoticRow {
    pub d: f64,
    pub beta_age: f64,
    pub beta_mmse: f64,
    /// `β_age(d) / (d · β_age(d₀))` with `d₀` the first grid point; 1 under
    /// linear scaling.
    pub age_scaling: f64,
    /// Same for the MMSE solver.
    pub mmse_scaling: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rows", rename_all = "kebab-case")]
pub enum AsymptoticTable {
    Fmax(Vec<FmaxAsymptoticRow>),
    Scale(Vec<ScaleAsymptoticRow>),
}

fn check_span(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(Error::InvalidParameter("grid values must be finite and > 0".into()));
    }
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(0.0, f64::max);
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "grid must span at least two decades, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Solver-only table of the small-`f_max` and delay-scaling limits.
pub fn asymptotic_report(template: &DelayModel, grid: &AsymptoticGrid, tol: f64) -> Result<AsymptoticTable> {
    template.validate()?;
    match grid {
        AsymptoticGrid::Fmax(g) => {
            check_span(g)?;
            let mean = template.mean();
            let rows = g
                .par_iter()
                .map(|&f| {
                    let cap = FrequencyConstraint::max(f)?;
                    let m = analytics::solve_beta_mmse(template, cap, tol)?;
                    let a = analytics::solve_beta_age(template, cap, tol)?;
                    let age_mse = analytics::mmse_age_value(a.beta, template)?;
                    Ok(FmaxAsymptoticRow {
                        f_max: f,
                        beta: m.beta,
                        beta_f: m.beta * f,
                        beta_f_lower: 1.0 - mean * f,
                        mmse_6f: m.objective * 6.0 * f,
                        ratio: m.objective / age_mse,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AsymptoticTable::Fmax(rows))
        }
        AsymptoticGrid::Scale(g) => {
            check_span(g)?;
            let betas = g
                .par_iter()
                .map(|&d| {
                    let model = DelayModel::scaled(template.clone(), d)?;
                    let a = analytics::solve_beta_age(&model, FrequencyConstraint::Unbounded, tol)?;
                    let m = analytics::solve_beta_mmse(&model, FrequencyConstraint::Unbounded, tol)?;
                    Ok((d, a.beta, m.beta))
                })
                .collect::<Result<Vec<_>>>()?;
            let (d0, a0, m0) = betas[0];
            let rows = betas
                .into_iter()
                .map(|(d, a, m)| ScaleAsymptoticRow {
                    d,
                    beta_age: a,
                    beta_mmse: m,
                    age_scaling: a / (a0 * d / d0),
                    mmse_scaling: m / (m0 * d / d0),
                })
                .collect();
            Ok(AsymptoticTable::Scale(rows))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(kind: SweepKind, grid: Vec<f64>) -> SweepConfig {
        SweepConfig {
            grid,
            n_cycles: 2_000,
            dt: Some(0.01),
            ..SweepConfig::default_for(kind, 3)
        }
    }

    #[test]
    fn default_grids() {
        let c = SweepConfig::default_for(SweepKind::FmaxSweep, 0);
        assert_eq!(c.grid.len(), 24);
        assert_eq!(c.grid[0], 0.01);
        assert_eq!(c.grid[23], 2.0);
        c.validate().unwrap();
        let s = SweepConfig::default_for(SweepKind::SigmaSweep, 0);
        assert_eq!(s.grid.len(), 15);
        assert_eq!((s.grid[0], s.grid[14]), (0.05, 1.5));
        s.validate().unwrap();
        SweepConfig::default_for(SweepKind::ScaleSweep, 0).validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let base = small_config(SweepKind::FmaxSweep, vec![0.5, 1.0]);
        let mut c = base.clone();
        c.grid = vec![];
        assert!(c.validate().is_err());
        c.grid = vec![1.0, 1.0];
        assert!(c.validate().is_err());
        c.grid = vec![1.0, 0.5];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.policies.clear();
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.policies = vec![PolicyKind::ZeroWait, PolicyKind::ZeroWait];
        assert!(c.validate().is_err());
        let mut c = base;
        c.n_cycles = 10;
        assert!(c.validate().is_err());
    }

    #[test]
    fn feasibility_flags() {
        let mut c = small_config(SweepKind::FmaxSweep, vec![0.5, 1.0, 1.5]);
        c.n_cycles = 20_000;
        let t = run_sweep(&c).unwrap();
        let zw: Vec<_> = t.rows.iter().map(|r| r.cell(PolicyKind::ZeroWait).unwrap().flag).collect();
        assert_eq!(zw, [Feasibility::Infeasible, Feasibility::Feasible, Feasibility::Feasible]);
        let un: Vec<_> = t.rows.iter().map(|r| r.cell(PolicyKind::Uniform).unwrap().flag).collect();
        assert_eq!(un, [Feasibility::Feasible, Feasibility::Infeasible, Feasibility::Infeasible]);
        let inf = t.rows[0].cell(PolicyKind::ZeroWait).unwrap();
        assert!(inf.mse.is_none() && inf.beta.is_none() && inf.rate.is_none());
        for r in &t.rows {
            assert!(r.note.is_empty(), "{}", r.note);
            let s = r.cell(PolicyKind::SignalThreshold).unwrap();
            assert_eq!(s.flag, Feasibility::Feasible);
            assert!(s.rate.unwrap() <= r.parameter * 1.05);
        }
    }

    #[test]
    fn sweep_is_deterministic_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let mut c = small_config(SweepKind::SigmaSweep, vec![0.25, 1.0]);
        c.output_path = Some(path.clone());
        let t = run_sweep(&c).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), t);
        let again = run_sweep(&c).unwrap();
        assert_eq!(again, t);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
        assert!(!text.contains("uniform_flag,") || text.contains("infeasible"));
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(metadata_path(&path)).unwrap()).unwrap();
        assert_eq!(meta["seed"], 3);
        assert_eq!(meta["dt"], "0.01");
        assert_eq!(meta["config"]["sweep_kind"], "sigma-sweep");
    }

    #[test]
    fn only_requested_columns_appear() {
        let mut c = small_config(SweepKind::ScaleSweep, vec![1.0]);
        c.policies = vec![PolicyKind::AgeThreshold];
        let t = run_sweep(&c).unwrap();
        let h = csv_header(&t);
        assert_eq!(h.len(), 3 + 9 + 1);
        assert!(h.iter().all(|c| !c.starts_with("signal") && !c.starts_with("uniform")));
    }

    #[test]
    fn csv_number_format() {
        assert_eq!(fmt_num(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        let x = round12(std::f64::consts::PI);
        assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn asymptotics_degenerate_zero() {
        let grid = AsymptoticGrid::Fmax(log_grid(0.01, 1.0, 5));
        let AsymptoticTable::Fmax(rows) = asymptotic_report(&DelayModel::degenerate(0.0).unwrap(), &grid, 1e-10).unwrap()
        else {
            panic!()
        };
        for r in rows {
            assert!((r.beta_f - 1.0).abs() < 1e-8, "{r:?}");
            assert!((r.ratio - 1.0 / 3.0).abs() < 1e-8);
            assert!((r.mmse_6f - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn asymptotics_exponential() {
        let exp1 = DelayModel::exponential(1.0).unwrap();
        let AsymptoticTable::Fmax(rows) =
            asymptotic_report(&exp1, &AsymptoticGrid::Fmax(vec![1e-3, 1e-2, 0.1]), 1e-10).unwrap()
        else {
            panic!()
        };
        let r = &rows[0];
        assert!(r.beta_f <= 1.0 + 1e-9 && r.beta_f >= r.beta_f_lower - 1e-9, "{r:?}");
        assert!((rows[1].ratio - 1.0 / 3.0).abs() < 0.05);

        let AsymptoticTable::Scale(rows) =
            asymptotic_report(&exp1, &AsymptoticGrid::Scale(vec![1.0, 10.0, 100.0]), 1e-10).unwrap()
        else {
            panic!()
        };
        for r in rows {
            assert!((r.age_scaling - 1.0).abs() < 1e-6, "{r:?}");
            assert!((r.mmse_scaling - 1.0).abs() < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn asymptotic_grid_must_span_two_decades() {
        let exp1 = DelayModel::exponential(1.0).unwrap();
        assert!(asymptotic_report(&exp1, &AsymptoticGrid::Fmax(vec![0.1, 1.0]), 1e-9).is_err());
        assert!(asymptotic_report(&exp1, &AsymptoticGrid::Scale(vec![]), 1e-9).is_err());
    }
}
