//! Discretized Wiener-path primitives.
//!
//! Paths advance in Euler steps of length `dt`. First passage out of the
//! band `(−a, a)` is detected both at step endpoints and, between two
//! inside endpoints `x₁, x₂`, by the Brownian-bridge crossing probability
//! `exp(−2 (a − x₁)(a − x₂) / dt)` per boundary. Path integrals use the
//! trapezoid rule on the same grid.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::Estimate;
use crate::error::{Error, Result};
use crate::rng::{derived_rng, SimRng};
use crate::stats::Moments;

/// Guard against runaway first-passage loops.
pub const MAX_STEPS: u64 = 10_000_000_000;
pub const MIN_DT: f64 = 1e-6;
/// Bridge probabilities below `exp(-BRIDGE_CUTOFF)` are treated as zero.
const BRIDGE_CUTOFF: f64 = 40.0;
/// Runs per independently seeded chunk in the Monte Carlo oracles.
const CHUNK_RUNS: usize = 8192;

/// `min(β, E[Y], 1) / 1000` over the positive entries, floored at [`MIN_DT`].
pub fn default_dt(threshold: Option<f64>, mean_delay: f64) -> f64 {
    let scale = [threshold.unwrap_or(f64::INFINITY), mean_delay, 1.0]
        .into_iter()
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    (scale / 1000.0).max(MIN_DT)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    Ok(())
}

/// Fixed-duration stretch of a path started at 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSegment {
    pub dt: f64,
    pub steps: u64,
    /// `W_end − W_start`.
    pub increment: f64,
    /// `W_end − anchor`.
    pub end_offset: f64,
    /// `∫ (W_t − anchor)² dt` over the segment.
    pub integral: f64,
}

/// Advances a path that starts at 0 for `duration`, measuring it against
/// `anchor`. The last step is shortened to land exactly on `duration`.
pub fn advance_fixed(duration: f64, dt: f64, anchor: f64, rng: &mut SimRng) -> Result<PathSegment> {
    check_dt(dt)?;
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParameter(format!("duration must be >= 0, got {duration}")));
    }
    let full = (duration / dt).floor();
    if full > MAX_STEPS as f64 {
        return Err(Error::InvalidParameter(format!(
            "duration {duration} needs more than {MAX_STEPS} steps at dt = {dt}"
        )));
    }
    let full = full as u64;
    let rest = duration - full as f64 * dt;
    let sd = dt.sqrt();

    let mut x = -anchor;
    let mut integral = 0.0;
    for _ in 0..full {
        let z: f64 = rng.sample(StandardNormal);
        let next = x + sd * z;
        integral += 0.5 * dt * (x * x + next * next);
        x = next;
    }
    let mut steps = full;
    if rest > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        let next = x + rest.sqrt() * z;
        integral += 0.5 * rest * (x * x + next * next);
        x = next;
        steps += 1;
    }
    Ok(PathSegment {
        dt,
        steps,
        increment: x + anchor,
        end_offset: x,
        integral,
    })
}

/// First exit of `b + W_t` from `(−a, a)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingResult {
    pub tau: f64,
    /// `b + W_τ`; on the boundary whenever `tau > 0`.
    pub exit_value: f64,
    /// `∫₀^τ W_t² dt` for the increment process started at 0.
    pub integral_w2: f64,
    /// `∫₀^τ (b + W_t)² dt`.
    pub integral_w2_from_offset: f64,
    pub steps: u64,
}

/// Incremental first-passage state for `b + W_t` against `(−a, a)`.
struct Walker {
    a: f64,
    b: f64,
    x: f64,
    t: f64,
    int_off: f64,
    int_w: f64,
    steps: u64,
}

impl Walker {
    fn new(b: f64, a: f64) -> Self {
        Walker {
            a,
            b,
            x: b,
            t: 0.0,
            int_off: 0.0,
            int_w: 0.0,
            steps: 0,
        }
    }

    fn finish(&self, tau: f64, exit_value: f64) -> HittingResult {
        HittingResult {
            tau,
            exit_value,
            integral_w2: self.int_w,
            integral_w2_from_offset: self.int_off,
            steps: self.steps,
        }
    }

    #[inline]
    fn accumulate(&mut self, to: f64, h: f64) {
        let (x, b) = (self.x, self.b);
        self.int_off += 0.5 * h * (x * x + to * to);
        let (u, v) = (x - b, to - b);
        self.int_w += 0.5 * h * (u * u + v * v);
    }

    /// Takes one step of length `h` ending at `x + increment`. Returns the
    /// exit when the step crosses the boundary.
    #[inline]
    fn step(&mut self, increment: f64, h: f64, rng: &mut SimRng) -> Option<HittingResult> {
        let a = self.a;
        let x = self.x;
        let next = x + increment;
        self.steps += 1;

        if next.abs() >= a {
            let bound = a.copysign(next);
            let part = h * (bound - x) / (next - x);
            self.accumulate(bound, part);
            return Some(self.finish(self.t + part, bound));
        }

        let k = 2.0 / h;
        let up = (a - x) * (a - next) * k;
        let down = (a + x) * (a + next) * k;
        if up.min(down) < BRIDGE_CUTOFF {
            let p_up = (-up).exp();
            let p_down = (-down).exp();
            let u: f64 = rng.random();
            let crossed = if u < p_up {
                Some(a)
            } else if u < p_up + (1.0 - p_up) * p_down {
                Some(-a)
            } else {
                None
            };
            if let Some(bound) = crossed {
                let part = h * rng.random::<f64>();
                self.accumulate(bound, part);
                return Some(self.finish(self.t + part, bound));
            }
        }

        self.accumulate(next, h);
        self.x = next;
        self.t += h;
        None
    }
}

fn check_threshold(a: f64) -> Result<()> {
    if a.is_nan() || a < 0.0 {
        return Err(Error::InvalidParameter(format!("threshold must be >= 0, got {a}")));
    }
    Ok(())
}

fn immediate_exit(b: f64) -> HittingResult {
    HittingResult {
        tau: 0.0,
        exit_value: b,
        integral_w2: 0.0,
        integral_w2_from_offset: 0.0,
        steps: 0,
    }
}

fn step_cap_error(a: f64, dt: f64) -> Error {
    Error::Precondition(format!("first passage exceeded {MAX_STEPS} steps (a = {a}, dt = {dt})"))
}

/// Simulates the first time `|b + W_t| ≥ a`.
///
/// Returns `tau = 0` when the start is already outside the open band. On a
/// detected crossing the path exits exactly on the boundary: at the linear
/// interpolation point when the step endpoint overshoots, or at a uniform
/// instant in the step for a bridge crossing.
pub fn simulate_hitting(b: f64, a: f64, dt: f64, rng: &mut SimRng) -> Result<HittingResult> {
    check_dt(dt)?;
    check_threshold(a)?;
    if b.abs() >= a {
        return Ok(immediate_exit(b));
    }
    let sd = dt.sqrt();
    let mut walker = Walker::new(b, a);
    loop {
        if walker.steps >= MAX_STEPS {
            return Err(step_cap_error(a, dt));
        }
        let z: f64 = rng.sample(StandardNormal);
        if let Some(hit) = walker.step(sd * z, dt, rng) {
            return Ok(hit);
        }
    }
}

/// First passage of one Brownian path observed on two grids, `dt` and
/// `dt / 2`: each coarse increment is the sum of two fine ones.
pub fn simulate_hitting_coupled(b: f64, a: f64, dt: f64, rng: &mut SimRng) -> Result<(HittingResult, HittingResult)> {
    check_dt(dt)?;
    check_threshold(a)?;
    if b.abs() >= a {
        return Ok((immediate_exit(b), immediate_exit(b)));
    }
    let half = 0.5 * dt;
    let sd = half.sqrt();
    let mut coarse = Walker::new(b, a);
    let mut fine = Walker::new(b, a);
    let (mut coarse_hit, mut fine_hit) = (None, None);
    loop {
        if coarse.steps >= MAX_STEPS || fine.steps >= MAX_STEPS {
            return Err(step_cap_error(a, dt));
        }
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        if fine_hit.is_none() {
            fine_hit = fine.step(sd * z1, half, rng);
            if fine_hit.is_none() {
                fine_hit = fine.step(sd * z2, half, rng);
            }
        }
        if coarse_hit.is_none() {
            coarse_hit = coarse.step(sd * (z1 + z2), dt, rng);
        }
        if let (Some(c), Some(f)) = (coarse_hit, fine_hit) {
            return Ok((c, f));
        }
    }
}

/// Stopping times understood by [`wald_moment_oracle`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauSpec {
    /// First exit of `start + W_t` from `(−threshold, threshold)`.
    Hitting { start: f64, threshold: f64 },
    Fixed { duration: f64 },
    Zero,
}

impl TauSpec {
    fn start(&self) -> f64 {
        match self {
            TauSpec::Hitting { start, .. } => *start,
            _ => 0.0,
        }
    }
}

/// Monte Carlo moments of `X = start + W` stopped at `τ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaldMoments {
    pub runs: usize,
    pub tau: Estimate,
    pub x_tau_sq: Estimate,
    pub x_tau_4: Estimate,
    pub integral: Estimate,
    /// Per-run `X_τ² − start² − τ`; zero mean by Wald's identity.
    pub wald_gap: Estimate,
    /// Per-run `∫X² − (X_τ⁴ − start⁴)/6`; zero mean by Dynkin's formula.
    pub integral_gap: Estimate,
}

#[derive(Default, Clone, Copy)]
struct WaldAccum {
    tau: Moments,
    x2: Moments,
    x4: Moments,
    integral: Moments,
    wald_gap: Moments,
    integral_gap: Moments,
}

impl WaldAccum {
    fn record(&mut self, tau: f64, x: f64, integral: f64, start: f64) {
        let x2 = x * x;
        let x4 = x2 * x2;
        self.tau.push(tau);
        self.x2.push(x2);
        self.x4.push(x4);
        self.integral.push(integral);
        self.wald_gap.push(x2 - start * start - tau);
        self.integral_gap.push(integral - (x4 - start.powi(4)) / 6.0);
    }

    fn finish(&self, runs: usize) -> WaldMoments {
        let est = |m: &Moments| {
            let e = m.estimate();
            // A degenerate sample has zero spread, not an undefined one.
            Estimate {
                value: e.value,
                std_err: if e.std_err.is_nan() { 0.0 } else { e.std_err },
            }
        };
        WaldMoments {
            runs,
            tau: est(&self.tau),
            x_tau_sq: est(&self.x2),
            x_tau_4: est(&self.x4),
            integral: est(&self.integral),
            wald_gap: est(&self.wald_gap),
            integral_gap: est(&self.integral_gap),
        }
    }

    fn merge(&mut self, other: &WaldAccum) {
        self.tau.merge(&other.tau);
        self.x2.merge(&other.x2);
        self.x4.merge(&other.x4);
        self.integral.merge(&other.integral);
        self.wald_gap.merge(&other.wald_gap);
        self.integral_gap.merge(&other.integral_gap);
    }
}

/// Monte Carlo estimates of `E[τ]`, `E[X_τ²]`, `E[X_τ⁴]`, `E[∫₀^τ X² dt]`
/// and the two identity gaps, over `n_runs` paths at step `dt`.
pub fn wald_moment_oracle(spec: TauSpec, n_runs: usize, dt: f64, seed: u64) -> Result<WaldMoments> {
    check_dt(dt)?;
    if n_runs == 0 {
        return Err(Error::InvalidParameter("need at least 1 run".into()));
    }
    match spec {
        TauSpec::Hitting { threshold, .. } => check_threshold(threshold)?,
        TauSpec::Fixed { duration } if !(duration >= 0.0 && duration.is_finite()) => {
            return Err(Error::InvalidParameter(format!("duration must be >= 0, got {duration}")));
        }
        _ => {}
    }
    let b = spec.start();
    let chunks = n_runs.div_ceil(CHUNK_RUNS);
    let parts: Vec<Result<WaldAccum>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = derived_rng(seed, c as u64);
            let runs = CHUNK_RUNS.min(n_runs - c * CHUNK_RUNS);
            let mut acc = WaldAccum::default();
            for _ in 0..runs {
                let (tau, x, integral) = match spec {
                    TauSpec::Hitting { start, threshold } => {
                        let h = simulate_hitting(start, threshold, dt, &mut rng)?;
                        (h.tau, h.exit_value, h.integral_w2_from_offset)
                    }
                    TauSpec::Fixed { duration } => {
                        let seg = advance_fixed(duration, dt, 0.0, &mut rng)?;
                        (duration, seg.end_offset, seg.integral)
                    }
                    TauSpec::Zero => (0.0, 0.0, 0.0),
                };
                acc.record(tau, x, integral, b);
            }
            Ok(acc)
        })
        .collect();
    let mut total = WaldAccum::default();
    for p in parts {
        total.merge(&p?);
    }
    Ok(total.finish(n_runs))
}

/// Exit-time moments of one set of paths resolved at `dt` and at `dt / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalvingReport {
    pub dt: f64,
    pub coarse: WaldMoments,
    pub fine: WaldMoments,
    /// Paired per-path `τ(dt) − τ(dt/2)`.
    pub tau_diff: Estimate,
    /// Paired per-path `∫X²(dt) − ∫X²(dt/2)`.
    pub integral_diff: Estimate,
}

impl HalvingReport {
    /// `sqrt(se_coarse² + se_fine²)` for `E[τ]`.
    pub fn tau_combined_error(&self) -> f64 {
        self.coarse.tau.std_err.hypot(self.fine.tau.std_err)
    }

    pub fn integral_combined_error(&self) -> f64 {
        self.coarse.integral.std_err.hypot(self.fine.integral.std_err)
    }
}

/// Runs [`simulate_hitting_coupled`] for `n_runs` paths: the change in the
/// estimates when `dt` is halved, with Monte Carlo noise shared by both.
pub fn dt_halving(start: f64, threshold: f64, n_runs: usize, dt: f64, seed: u64) -> Result<HalvingReport> {
    check_dt(dt)?;
    if n_runs < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 runs, got {n_runs}")));
    }
    let chunks = n_runs.div_ceil(CHUNK_RUNS);
    type Part = (WaldAccum, WaldAccum, Moments, Moments);
    let parts: Vec<Result<Part>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = derived_rng(seed, c as u64);
            let runs = CHUNK_RUNS.min(n_runs - c * CHUNK_RUNS);
            let mut part: Part = Default::default();
            for _ in 0..runs {
                let (hc, hf) = simulate_hitting_coupled(start, threshold, dt, &mut rng)?;
                part.0.record(hc.tau, hc.exit_value, hc.integral_w2_from_offset, start);
                part.1.record(hf.tau, hf.exit_value, hf.integral_w2_from_offset, start);
                part.2.push(hc.tau - hf.tau);
                part.3.push(hc.integral_w2_from_offset - hf.integral_w2_from_offset);
            }
            Ok(part)
        })
        .collect();
    let mut total: Part = Default::default();
    for p in parts {
        let p = p?;
        total.0.merge(&p.0);
        total.1.merge(&p.1);
        total.2.merge(&p.2);
        total.3.merge(&p.3);
    }
    Ok(HalvingReport {
        dt,
        coarse: total.0.finish(n_runs),
        fine: total.1.finish(n_runs),
        tau_diff: total.2.estimate(),
        integral_diff: total.3.estimate(),
    })
}
