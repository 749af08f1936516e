//! Discrete-event Monte Carlo of sampler → FIFO channel → MMSE estimator.
//!
//! The estimator holds the most recently delivered sample value, so the
//! squared error on `[D_i, D_{i+1})` is `(W_t − W_{S_i})²` and the age is
//! `t − S_i`. Threshold and zero-wait policies never sample while the
//! channel is busy; each cycle is then
//!
//! 1. wait `Z_i` after delivery `D_i` according to the policy,
//! 2. sample at `S_{i+1} = D_i + Z_i` and transmit for `Y_{i+1}`,
//!
//! with the error integral of cycle `i` measured against `W_{S_i}` over
//! both phases. Uniform sampling can queue, so it runs an explicit FIFO.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{self, Estimate, MomentMethod};
use crate::delay::DelayModel;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::{batch_ratio, Interval, Moments, DEFAULT_BATCHES};
use crate::wiener::{advance_fixed, default_dt, simulate_hitting};

pub const MIN_CYCLES: usize = 1_000;
pub const DEFAULT_QUEUE_CAP: usize = 1_000;
pub const MIN_IDENTITY_RECORDS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicySpec {
    /// `S_{i+1} = S_i + interval`.
    Uniform { interval: f64 },
    /// `S_{i+1} = D_i`.
    ZeroWait,
    /// Sample once `t − S_i ≥ β` and the channel is idle.
    AgeThreshold { beta: f64 },
    /// Sample once `|W_t − W_{S_i}| ≥ √β` after delivery.
    SignalThreshold { beta: f64 },
}

impl PolicySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PolicySpec::Uniform { interval } if !(interval > 0.0 && interval.is_finite()) => Err(
                Error::InvalidParameter(format!("uniform interval must be > 0, got {interval}")),
            ),
            PolicySpec::AgeThreshold { beta } | PolicySpec::SignalThreshold { beta }
                if !(beta >= 0.0 && beta.is_finite()) =>
            {
                Err(Error::InvalidParameter(format!("threshold must be >= 0, got {beta}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_signal_independent(&self) -> bool {
        !matches!(self, PolicySpec::SignalThreshold { .. })
    }

    /// The threshold that sets the path time scale, if any.
    pub fn threshold(&self) -> Option<f64> {
        match *self {
            PolicySpec::AgeThreshold { beta } | PolicySpec::SignalThreshold { beta } => Some(beta),
            PolicySpec::Uniform { interval } => Some(interval),
            PolicySpec::ZeroWait => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Uniform { .. } => "uniform",
            PolicySpec::ZeroWait => "zero-wait",
            PolicySpec::AgeThreshold { .. } => "age-threshold",
            PolicySpec::SignalThreshold { .. } => "signal-threshold",
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Uniform { interval } => write!(f, "uniform:{interval}"),
            PolicySpec::ZeroWait => f.write_str("zero-wait"),
            PolicySpec::AgeThreshold { beta } => write!(f, "age-threshold:{beta}"),
            PolicySpec::SignalThreshold { beta } => write!(f, "signal-threshold:{beta}"),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let num = || -> Result<f64> {
            let a = arg.ok_or_else(|| Error::InvalidParameter(format!("policy {s:?} needs a parameter")))?;
            a.parse()
                .map_err(|_| Error::InvalidParameter(format!("bad number {a:?} in policy {s:?}")))
        };
        let p = match kind {
            "zero-wait" => PolicySpec::ZeroWait,
            "uniform" => PolicySpec::Uniform { interval: num()? },
            "age-threshold" => PolicySpec::AgeThreshold { beta: num()? },
            "signal-threshold" => PolicySpec::SignalThreshold { beta: num()? },
            other => return Err(Error::InvalidParameter(format!("unknown policy {other:?}"))),
        };
        p.validate()?;
        Ok(p)
    }
}

/// One inter-delivery interval `[D_i, D_{i+1}]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    /// Delay `Y_i` of sample `i`.
    pub y: f64,
    /// Wait `Z_i = S_{i+1} − D_i`.
    pub z: f64,
    /// `W_{S_{i+1}} − W_{S_i}`.
    pub delta_w_end: f64,
    /// `∫ (W_t − W_{S_i})² dt` over the cycle.
    pub mse_integral: f64,
    /// `∫ (t − S_i) dt` over the cycle.
    pub age_integral: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub n_cycles: usize,
    /// Path step; `None` picks [`default_dt`].
    pub dt: Option<f64>,
    pub seed: u64,
    /// Uniform runs with more queued samples than this are divergent.
    pub queue_cap: usize,
}

impl SimOptions {
    pub fn new(n_cycles: usize, seed: u64) -> Self {
        SimOptions {
            n_cycles,
            dt: None,
            seed,
            queue_cap: DEFAULT_QUEUE_CAP,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }
}

/// Cycles discarded before averaging: 1% of the run, at least 100.
pub fn warmup_cycles(n_cycles: usize) -> usize {
    (n_cycles / 100).max(100)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub mse: Interval,
    pub age: Interval,
    pub rate: Interval,
    pub n_cycles: usize,
    pub policy: PolicySpec,
    pub delay: String,
    pub seed: u64,
    pub dt: f64,
    /// Uniform sampling whose queue hit the cap or never drained.
    pub divergent: bool,
    pub max_queue: usize,
}

/// A run together with its post-warm-up cycle records.
#[derive(Clone, Debug)]
pub struct SimulationRun {
    pub result: SimulationResult,
    pub records: Vec<CycleRecord>,
}

/// Per-cycle series used for the ratio estimators.
#[derive(Default)]
struct Series {
    duration: Vec<f64>,
    mse: Vec<f64>,
    age: Vec<f64>,
    records: Vec<CycleRecord>,
    divergent: bool,
    max_queue: usize,
}

impl Series {
    fn with_capacity(n: usize) -> Self {
        Series {
            duration: Vec::with_capacity(n),
            mse: Vec::with_capacity(n),
            age: Vec::with_capacity(n),
            records: Vec::new(),
            divergent: false,
            max_queue: 0,
        }
    }

    fn push(&mut self, duration: f64, mse: f64, age: f64) {
        self.duration.push(duration);
        self.mse.push(mse);
        self.age.push(age);
    }
}

fn resolve_dt(policy: &PolicySpec, model: &DelayModel, opts: &SimOptions) -> Result<f64> {
    let dt = opts.dt.unwrap_or_else(|| default_dt(policy.threshold(), model.mean()));
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    Ok(dt)
}

/// Simulates `policy` over `opts.n_cycles` post-warm-up cycles.
pub fn run_cycles(policy: PolicySpec, model: &DelayModel, opts: SimOptions) -> Result<SimulationResult> {
    simulate(policy, model, opts).map(|r| r.result)
}

/// Like [`run_cycles`] but keeps the cycle records (empty for uniform).
pub fn simulate(policy: PolicySpec, model: &DelayModel, opts: SimOptions) -> Result<SimulationRun> {
    policy.validate()?;
    model.validate()?;
    if opts.n_cycles < MIN_CYCLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_CYCLES} cycles, got {}",
            opts.n_cycles
        )));
    }
    let dt = resolve_dt(&policy, model, &opts)?;
    let series = simulate_series(policy, model, &opts, dt, opts.seed)?;
    Ok(summarize(policy, model, &opts, dt, series))
}

/// Independent replications with seeds derived from `opts.seed`, run in
/// parallel and pooled in replication order.
pub fn run_replications(
    policy: PolicySpec,
    model: &DelayModel,
    opts: SimOptions,
    replications: usize,
) -> Result<SimulationRun> {
    policy.validate()?;
    model.validate()?;
    if replications == 0 {
        return Err(Error::InvalidParameter("need at least one replication".into()));
    }
    if opts.n_cycles < MIN_CYCLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_CYCLES} cycles per replication, got {}",
            opts.n_cycles
        )));
    }
    let dt = resolve_dt(&policy, model, &opts)?;
    let parts: Vec<Result<Series>> = (0..replications)
        .into_par_iter()
        .map(|r| simulate_series(policy, model, &opts, dt, derive_seed(opts.seed, r as u64)))
        .collect();
    let mut pooled = Series::with_capacity(opts.n_cycles * replications);
    for p in parts {
        let p = p?;
        pooled.duration.extend(p.duration);
        pooled.mse.extend(p.mse);
        pooled.age.extend(p.age);
        pooled.records.extend(p.records);
        pooled.divergent |= p.divergent;
        pooled.max_queue = pooled.max_queue.max(p.max_queue);
    }
    let mut run = summarize(policy, model, &opts, dt, pooled);
    run.result.n_cycles = opts.n_cycles * replications;
    Ok(run)
}

fn summarize(policy: PolicySpec, model: &DelayModel, opts: &SimOptions, dt: f64, s: Series) -> SimulationRun {
    let ones = vec![1.0; s.duration.len()];
    let result = SimulationResult {
        mse: batch_ratio(&s.mse, &s.duration, DEFAULT_BATCHES),
        age: batch_ratio(&s.age, &s.duration, DEFAULT_BATCHES),
        rate: batch_ratio(&ones, &s.duration, DEFAULT_BATCHES),
        n_cycles: s.duration.len(),
        policy,
        delay: model.to_string(),
        seed: opts.seed,
        dt,
        divergent: s.divergent,
        max_queue: s.max_queue,
    };
    SimulationRun {
        result,
        records: s.records,
    }
}

fn simulate_series(policy: PolicySpec, model: &DelayModel, opts: &SimOptions, dt: f64, seed: u64) -> Result<Series> {
    match policy {
        PolicySpec::Uniform { interval } => simulate_uniform(interval, model, opts, dt, seed),
        _ => simulate_idle_channel(policy, model, opts.n_cycles, dt, seed),
    }
}

/// `∫_{y}^{y + len} s ds`: age accumulated over a cycle that starts `y`
/// after the generation time.
fn age_area(start_age: f64, len: f64) -> f64 {
    len * (start_age + 0.5 * len)
}

/// Policies that sample only when the channel is idle.
fn simulate_idle_channel(policy: PolicySpec, model: &DelayModel, n_cycles: usize, dt: f64, seed: u64) -> Result<Series> {
    let mut rng = rng_from_seed(seed);
    let warmup = warmup_cycles(n_cycles);
    let total = warmup + n_cycles;
    let mut out = Series::with_capacity(n_cycles);
    out.records.reserve(n_cycles);

    // Sample 0 at t = 0 with W_0 = 0.
    let mut y = model.sample(&mut rng);
    let mut offset = advance_fixed(y, dt, 0.0, &mut rng)?.end_offset;

    for i in 0..total {
        // `offset` = W_{D_i} − W_{S_i}.
        let (z, delta, wait_integral) = match policy {
            PolicySpec::ZeroWait => (0.0, offset, 0.0),
            PolicySpec::AgeThreshold { beta } => {
                let z = (beta - y).max(0.0);
                let seg = advance_fixed(z, dt, -offset, &mut rng)?;
                (z, seg.end_offset, seg.integral)
            }
            PolicySpec::SignalThreshold { beta } => {
                let a = beta.sqrt();
                if offset.abs() >= a {
                    (0.0, offset, 0.0)
                } else {
                    let h = simulate_hitting(offset, a, dt, &mut rng)?;
                    (h.tau, h.exit_value, h.integral_w2_from_offset)
                }
            }
            PolicySpec::Uniform { .. } => unreachable!("uniform runs through the FIFO simulator"),
        };

        let y_next = model.sample(&mut rng);
        let seg = advance_fixed(y_next, dt, -delta, &mut rng)?;
        let record = CycleRecord {
            y,
            z,
            delta_w_end: delta,
            mse_integral: wait_integral + seg.integral,
            age_integral: age_area(y, z + y_next),
        };
        if i >= warmup {
            out.push(y + z, record.mse_integral, record.age_integral);
            out.records.push(record);
        }
        offset = seg.increment;
        y = y_next;
    }
    Ok(out)
}

struct Queued {
    generated: f64,
    value: f64,
}

/// Uniform sampling through an explicit FIFO queue.
fn simulate_uniform(interval: f64, model: &DelayModel, opts: &SimOptions, dt: f64, seed: u64) -> Result<Series> {
    let mut rng = rng_from_seed(seed);
    let warmup = warmup_cycles(opts.n_cycles);
    let total = warmup + opts.n_cycles;
    let mut out = Series::with_capacity(opts.n_cycles);

    let mut now = 0.0;
    let mut w = 0.0;
    let mut generated: u64 = 0;
    let mut next_gen = 0.0;
    let mut queue: VecDeque<Queued> = VecDeque::new();
    // (generation time, sampled value, delivery time)
    let mut in_service: Option<(f64, f64, f64)> = None;

    let mut est_value = 0.0;
    let mut est_generated = 0.0;
    let mut last_delivery: Option<f64> = None;
    let mut cycle_mse = 0.0;
    let mut closed = 0usize;
    let mut drained_after_warmup = false;

    while closed < total {
        let delivery = in_service.map(|(_, _, d)| d);
        let deliver_first = matches!(delivery, Some(d) if d <= next_gen);
        let event_time = if deliver_first { delivery.unwrap() } else { next_gen };

        let seg = advance_fixed(event_time - now, dt, est_value - w, &mut rng)?;
        cycle_mse += seg.integral;
        w += seg.increment;
        now = event_time;

        if deliver_first {
            let (gen_time, value, d) = in_service.take().expect("delivery needs a sample in service");
            if let Some(prev) = last_delivery {
                if closed >= warmup {
                    let len = d - prev;
                    out.push(len, cycle_mse, age_area(prev - est_generated, len));
                }
                closed += 1;
            }
            cycle_mse = 0.0;
            est_value = value;
            est_generated = gen_time;
            last_delivery = Some(d);
            match queue.pop_front() {
                Some(q) => in_service = Some((q.generated, q.value, d + model.sample(&mut rng))),
                None => {
                    if closed > warmup {
                        drained_after_warmup = true;
                    }
                }
            }
        } else {
            if in_service.is_none() {
                in_service = Some((now, w, now + model.sample(&mut rng)));
            } else {
                queue.push_back(Queued { generated: now, value: w });
                out.max_queue = out.max_queue.max(queue.len());
                if queue.len() > opts.queue_cap {
                    out.divergent = true;
                    break;
                }
            }
            generated += 1;
            next_gen = generated as f64 * interval;
        }
    }
    if !drained_after_warmup {
        out.divergent = true;
    }
    Ok(out)
}

/// Outcome of one statistical identity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub observed: Estimate,
    pub expected: f64,
    /// Allowed `|observed − expected|`.
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityCheck {
    fn new(name: &str, observed: Estimate, expected: f64, tolerance: f64) -> Self {
        IdentityCheck {
            name: name.to_string(),
            observed,
            expected,
            tolerance,
            pass: (observed.value - expected).abs() <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Mean with a batch-means standard error.
fn batch_mean(values: impl Iterator<Item = f64>, batches: usize) -> Estimate {
    let v: Vec<f64> = values.collect();
    let size = v.len() / batches;
    let mut means = Moments::default();
    for b in 0..batches {
        let hi = if b + 1 == batches { v.len() } else { (b + 1) * size };
        let chunk = &v[b * size..hi];
        means.push(chunk.iter().sum::<f64>() / chunk.len() as f64);
    }
    Estimate {
        value: v.iter().sum::<f64>() / v.len() as f64,
        std_err: means.std_err(),
    }
}

/// Checks the per-cycle renewal identities on simulated records:
///
/// * `E[∫ (W − W_{S_i})²] = E[Δ⁴]/6 + E[Y + Z]·E[Y]` for any idle-channel policy;
/// * `E[Y + Z] = E[max(β, W_Y²)]` and `E[Δ⁴] = E[max(β², W_Y⁴)]` for the
///   signal threshold;
/// * `E[Y + Z] = E[max(β, Y)]` for the age threshold.
///
/// Each statistical check passes within `sigmas` batch-means standard errors.
pub fn cycle_identity_check(
    records: &[CycleRecord],
    policy: PolicySpec,
    model: &DelayModel,
    sigmas: f64,
) -> Result<IdentityReport> {
    if records.len() < MIN_IDENTITY_RECORDS {
        return Err(Error::Precondition(format!(
            "identity checks need at least {MIN_IDENTITY_RECORDS} records, got {}",
            records.len()
        )));
    }
    if let PolicySpec::Uniform { .. } = policy {
        return Err(Error::Precondition("uniform sampling has no idle-channel cycle records".into()));
    }
    let b = DEFAULT_BATCHES;
    let ey = model.mean();
    let mut checks = Vec::new();

    let gap = batch_mean(
        records
            .iter()
            .map(|r| r.mse_integral - r.delta_w_end.powi(4) / 6.0 - (r.y + r.z) * ey),
        b,
    );
    checks.push(IdentityCheck::new(
        "mse-integral = E[delta^4]/6 + E[Y+Z]E[Y]",
        gap,
        0.0,
        sigmas * gap.std_err,
    ));

    let cycle = batch_mean(records.iter().map(|r| r.y + r.z), b);
    match policy {
        PolicySpec::SignalThreshold { beta } => {
            let e2 = analytics::e_max_beta_wy2(beta, model, MomentMethod::Quadrature)?.value;
            let e4 = analytics::e_max_beta2_wy4(beta, model, MomentMethod::Quadrature)?.value;
            let d4 = batch_mean(records.iter().map(|r| r.delta_w_end.powi(4)), b);
            checks.push(IdentityCheck::new("E[Y+Z] = E[max(beta, W_Y^2)]", cycle, e2, sigmas * cycle.std_err));
            checks.push(IdentityCheck::new("E[delta^4] = E[max(beta^2, W_Y^4)]", d4, e4, sigmas * d4.std_err));
        }
        PolicySpec::AgeThreshold { beta } => {
            let e1 = analytics::e_max_beta_y(beta, model)?;
            checks.push(IdentityCheck::new(
                "E[Y+Z] = E[max(beta, Y)]",
                cycle,
                e1,
                sigmas * cycle.std_err + 1e-12 * e1.abs(),
            ));
        }
        PolicySpec::ZeroWait => {
            checks.push(IdentityCheck::new(
                "E[Y+Z] = E[Y]",
                cycle,
                ey,
                sigmas * cycle.std_err + 1e-12 * ey,
            ));
        }
        PolicySpec::Uniform { .. } => unreachable!(),
    }
    Ok(IdentityReport { checks })
}

/// Simulated MSE equals simulated age for a signal-independent policy,
/// within the combined 95% intervals.
pub fn age_equals_mse_for_signal_independent(
    policy: PolicySpec,
    model: &DelayModel,
    opts: SimOptions,
) -> Result<(SimulationResult, IdentityCheck)> {
    if !policy.is_signal_independent() {
        return Err(Error::Precondition(format!("{policy} depends on the signal")));
    }
    let r = run_cycles(policy, model, opts)?;
    let tol = r.mse.half_width.hypot(r.age.half_width);
    let check = IdentityCheck::new(
        "time-average mse = time-average age",
        Estimate {
            value: r.mse.value,
            std_err: r.mse.half_width,
        },
        r.age.value,
        tol,
    );
    Ok((r, check))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp1() -> DelayModel {
        DelayModel::exponential(1.0).unwrap()
    }

    #[test]
    fn policy_strings() {
        assert_eq!("zero-wait".parse::<PolicySpec>().unwrap(), PolicySpec::ZeroWait);
        assert_eq!(
            "uniform:0.5".parse::<PolicySpec>().unwrap(),
            PolicySpec::Uniform { interval: 0.5 }
        );
        let p: PolicySpec = "signal-threshold:1.5".parse().unwrap();
        assert_eq!(p.to_string(), "signal-threshold:1.5");
        assert!("uniform:0".parse::<PolicySpec>().is_err());
        assert!("uniform".parse::<PolicySpec>().is_err());
        assert!("age-threshold:-1".parse::<PolicySpec>().is_err());
        assert!("sometimes".parse::<PolicySpec>().is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = exp1();
        assert!(run_cycles(PolicySpec::Uniform { interval: 0.0 }, &m, SimOptions::new(5000, 1)).is_err());
        assert!(run_cycles(PolicySpec::ZeroWait, &m, SimOptions::new(10, 1)).is_err());
        assert!(run_cycles(PolicySpec::ZeroWait, &m, SimOptions::new(5000, 1).with_dt(0.0)).is_err());
    }

    #[test]
    fn records_respect_invariants() {
        let beta = 0.8;
        let run = simulate(PolicySpec::SignalThreshold { beta }, &exp1(), SimOptions::new(5000, 3)).unwrap();
        assert_eq!(run.records.len(), 5000);
        for r in &run.records {
            assert!(r.z >= 0.0 && r.mse_integral >= 0.0 && r.age_integral >= 0.0);
            if r.z > 0.0 {
                assert!((r.delta_w_end.abs() - beta.sqrt()).abs() < 1e-12);
            } else {
                assert!(r.delta_w_end.abs() >= beta.sqrt());
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let p = PolicySpec::AgeThreshold { beta: 0.9 };
        let a = run_cycles(p, &exp1(), SimOptions::new(2000, 9)).unwrap();
        let b = run_cycles(p, &exp1(), SimOptions::new(2000, 9)).unwrap();
        assert_eq!(a, b);
        let c = run_cycles(p, &exp1(), SimOptions::new(2000, 10)).unwrap();
        assert_ne!(a.mse, c.mse);
    }

    #[test]
    fn zero_wait_exponential() {
        let r = run_cycles(PolicySpec::ZeroWait, &exp1(), SimOptions::new(100_000, 4).with_dt(1e-2)).unwrap();
        assert!(r.age.contains(2.0, 1.0), "{:?}", r.age);
        assert!(r.mse.contains(2.0, 1.0), "{:?}", r.mse);
        assert!(r.rate.contains(1.0, 1.0), "{:?}", r.rate);
        assert!(!r.divergent);
    }

    #[test]
    fn age_threshold_degenerate_delay() {
        let m = DelayModel::degenerate(1.0).unwrap();
        let run = simulate(PolicySpec::AgeThreshold { beta: 0.5 }, &m, SimOptions::new(20_000, 5).with_dt(1e-2)).unwrap();
        let r = &run.result;
        assert!((r.rate.value - 1.0).abs() < 1e-12);
        assert!((r.age.value - 1.5).abs() < 1e-12);
        assert!(r.mse.contains(1.5, 1.0), "{:?}", r.mse);
        assert!(run.records.iter().all(|c| c.y + c.z == 1.0));
    }

    #[test]
    fn uniform_stable_and_divergent() {
        let stable = run_cycles(PolicySpec::Uniform { interval: 2.0 }, &exp1(), SimOptions::new(20_000, 6).with_dt(1e-2)).unwrap();
        assert!(!stable.divergent);
        assert!(stable.rate.contains(0.5, 1.0), "{:?}", stable.rate);
        assert!(stable.mse.value.hypot(0.0) > 0.0);
        assert!((stable.mse.value - stable.age.value).abs() <= stable.mse.half_width.hypot(stable.age.half_width));

        let diverging = run_cycles(PolicySpec::Uniform { interval: 0.5 }, &exp1(), SimOptions::new(20_000, 6).with_dt(1e-2)).unwrap();
        assert!(diverging.divergent);
        assert!(diverging.max_queue > DEFAULT_QUEUE_CAP);
    }

    #[test]
    fn identity_precondition() {
        let run = simulate(PolicySpec::ZeroWait, &exp1(), SimOptions::new(2000, 1)).unwrap();
        assert!(matches!(
            cycle_identity_check(&run.records, PolicySpec::ZeroWait, &exp1(), 4.0),
            Err(Error::Precondition(_))
        ));
        assert!(age_equals_mse_for_signal_independent(
            PolicySpec::SignalThreshold { beta: 1.0 },
            &exp1(),
            SimOptions::new(2000, 1)
        )
        .is_err());
    }

    #[test]
    fn replications_pool_in_order() {
        let p = PolicySpec::ZeroWait;
        let a = run_replications(p, &exp1(), SimOptions::new(2000, 8).with_dt(1e-2), 3).unwrap();
        let b = run_replications(p, &exp1(), SimOptions::new(2000, 8).with_dt(1e-2), 3).unwrap();
        assert_eq!(a.result, b.result);
        assert_eq!(a.result.n_cycles, 6000);
        assert_eq!(a.records.len(), 6000);
    }
}
