//! Self-check suites: Monte Carlo stopping-time identities, discretization
//! bias under dt halving, per-cycle renewal identities, and age = MSE for
//! signal-independent sampling.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analytics::Estimate;
use crate::delay::DelayModel;
use crate::error::Result;
use crate::sim::{age_equals_mse_for_signal_independent, cycle_identity_check, simulate, PolicySpec, SimOptions};
use crate::wiener::{dt_halving, wald_moment_oracle, TauSpec};

pub const DEFAULT_VERIFY_RUNS: usize = 200_000;
pub const DEFAULT_VERIFY_CYCLES: usize = 100_000;
pub const DEFAULT_VERIFY_DT: f64 = 1e-3;
/// Standard errors allowed by every statistical check.
pub const SIGMAS: f64 = 4.0;
/// Discretization allowance per unit `dt`, relative to the expected value.
/// Measured first-order bias of the bridge-corrected walk is about `0.13 dt`.
pub const BIAS_PER_DT: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub runs: usize,
    pub cycles: usize,
    pub dt: f64,
    pub seed: u64,
}

impl VerifyConfig {
    pub fn new(seed: u64) -> Self {
        VerifyConfig {
            runs: DEFAULT_VERIFY_RUNS,
            cycles: DEFAULT_VERIFY_CYCLES,
            dt: DEFAULT_VERIFY_DT,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Diagnostic outside its band; not counted as a failure.
    Degraded,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Degraded => "degraded",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub suite: String,
    pub name: String,
    pub observed: f64,
    pub std_err: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Fail).count()
    }

    pub fn degraded(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Degraded).count()
    }
}

struct Suite<'a> {
    name: &'static str,
    dt: f64,
    out: &'a mut Vec<CheckResult>,
}

impl Suite<'_> {
    fn push(&mut self, name: &str, observed: f64, std_err: f64, expected: f64, tolerance: f64, on_miss: Status) {
        let status = if (observed - expected).abs() <= tolerance {
            Status::Pass
        } else {
            on_miss
        };
        self.out.push(CheckResult {
            suite: self.name.to_string(),
            name: name.to_string(),
            observed,
            std_err,
            expected,
            tolerance,
            status,
        });
    }

    /// `SIGMAS` standard errors plus the dt allowance, scaled by `scale`.
    fn stat(&mut self, name: &str, e: Estimate, expected: f64, scale: f64) {
        let tol = SIGMAS * e.std_err + BIAS_PER_DT * self.dt * scale;
        self.push(name, e.value, e.std_err, expected, tol, Status::Fail);
    }
}

fn wald_suite(cfg: &VerifyConfig, out: &mut Vec<CheckResult>) -> Result<()> {
    let mut s = Suite {
        name: "wald-oracle",
        dt: cfg.dt,
        out,
    };
    let m = wald_moment_oracle(TauSpec::Hitting { start: 0.0, threshold: 1.0 }, cfg.runs, cfg.dt, cfg.seed)?;
    s.stat("hitting +-1: E[tau] = 1", m.tau, 1.0, 1.0);
    s.stat("hitting +-1: E[int W^2] = 1/6", m.integral, 1.0 / 6.0, 1.0);
    s.stat("hitting +-1: E[W_tau^2 - tau] = 0", m.wald_gap, 0.0, 1.0);
    s.stat("hitting +-1: E[int W^2 - W_tau^4/6] = 0", m.integral_gap, 0.0, 1.0);

    let m = wald_moment_oracle(TauSpec::Fixed { duration: 1.0 }, cfg.runs, cfg.dt, cfg.seed ^ 1)?;
    s.stat("fixed 1: E[W^2] = 1", m.x_tau_sq, 1.0, 0.0);
    s.stat("fixed 1: E[W^4] = 3", m.x_tau_4, 3.0, 0.0);
    s.stat("fixed 1: E[int W^2] = 1/2", m.integral, 0.5, 1.0);

    let m = wald_moment_oracle(TauSpec::Zero, 2, cfg.dt, cfg.seed)?;
    s.stat("zero: E[tau] = 0", m.tau, 0.0, 0.0);
    Ok(())
}

fn hitting_suite(cfg: &VerifyConfig, out: &mut Vec<CheckResult>) -> Result<()> {
    let mut s = Suite {
        name: "hitting-expectation",
        dt: cfg.dt,
        out,
    };
    for (k, (b, beta)) in [(0.0, 1.0), (0.5, 1.0)].into_iter().enumerate() {
        let a: f64 = f64::sqrt(beta);
        let m = wald_moment_oracle(TauSpec::Hitting { start: b, threshold: a }, cfg.runs, cfg.dt, cfg.seed ^ (2 + k as u64))?;
        s.stat(&format!("E_{b} tau* = beta - b^2 (beta = {beta})"), m.tau, beta - b * b, beta);
        s.stat(
            &format!("E_{b} int X^2 = (beta^2 - b^4)/6 (beta = {beta})"),
            m.integral,
            (beta * beta - b.powi(4)) / 6.0,
            beta,
        );
    }
    Ok(())
}

fn bridge_suite(cfg: &VerifyConfig, out: &mut Vec<CheckResult>) -> Result<()> {
    let mut s = Suite {
        name: "bridge-bias",
        dt: cfg.dt,
        out,
    };
    let r = dt_halving(0.0, 1.0, cfg.runs, cfg.dt, cfg.seed ^ 4)?;
    s.push(
        "E[tau](dt) - E[tau](dt/2)",
        r.tau_diff.value,
        r.tau_diff.std_err,
        0.0,
        r.tau_combined_error(),
        Status::Degraded,
    );
    s.push(
        "E[int W^2](dt) - E[int W^2](dt/2)",
        r.integral_diff.value,
        r.integral_diff.std_err,
        0.0,
        r.integral_combined_error(),
        Status::Degraded,
    );
    Ok(())
}

fn cycle_suite(cfg: &VerifyConfig, model: &DelayModel, out: &mut Vec<CheckResult>) -> Result<()> {
    let mut s = Suite {
        name: "cycle-identity",
        dt: cfg.dt,
        out,
    };
    let policies = [PolicySpec::SignalThreshold { beta: 1.0 }, PolicySpec::AgeThreshold { beta: 1.0 }];
    for (k, policy) in policies.into_iter().enumerate() {
        let opts = SimOptions::new(cfg.cycles, cfg.seed ^ (5 + k as u64)).with_dt(cfg.dt);
        let run = simulate(policy, model, opts)?;
        let report = cycle_identity_check(&run.records, policy, model, SIGMAS)?;
        for c in report.checks {
            let scale = c.expected.abs().max(1.0);
            s.stat(&format!("{policy}: {}", c.name), c.observed, c.expected, scale);
        }
    }
    Ok(())
}

fn age_mse_suite(cfg: &VerifyConfig, model: &DelayModel, out: &mut Vec<CheckResult>) -> Result<()> {
    let mut s = Suite {
        name: "age-equals-mse",
        dt: cfg.dt,
        out,
    };
    for (k, policy) in [PolicySpec::ZeroWait, PolicySpec::AgeThreshold { beta: 1.0 }].into_iter().enumerate() {
        let opts = SimOptions::new(cfg.cycles, cfg.seed ^ (7 + k as u64)).with_dt(cfg.dt);
        let (r, c) = age_equals_mse_for_signal_independent(policy, model, opts)?;
        let tol = c.tolerance + BIAS_PER_DT * cfg.dt * r.age.value;
        s.push(&format!("{policy}: {}", c.name), r.mse.value, r.mse.half_width, r.age.value, tol, Status::Fail);
    }
    Ok(())
}

/// Runs every suite on `exp:1` delays in a fixed order.
pub fn run_all(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let model = DelayModel::exponential(1.0)?;
    let mut checks = Vec::new();
    wald_suite(cfg, &mut checks)?;
    hitting_suite(cfg, &mut checks)?;
    bridge_suite(cfg, &mut checks)?;
    cycle_suite(cfg, &model, &mut checks)?;
    age_mse_suite(cfg, &model, &mut checks)?;
    Ok(VerifyReport { config: *cfg, checks })
}
