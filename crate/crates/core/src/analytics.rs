//! Closed-form machinery for the optimal thresholds.
//!
//! `W_Y` denotes the Wiener increment accumulated over one channel delay:
//! conditioned on `Y = y` it is `Normal(0, y)`. The MMSE-optimal threshold
//! solves
//!
//! ```text
//! E[max(β, W_Y²)] = max(1/f_max, E[max(β², W_Y⁴)] / (2β))
//! ```
//!
//! and the age-optimal threshold solves the same equation with `W_Y²`
//! replaced by `Y`. Both are found by bisection on the difference of the
//! two sides.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::delay::DelayModel;
use crate::error::{Error, Result};
use crate::quadrature::DEFAULT_REL_TOL;
use crate::rng::rng_from_seed;

pub const DEFAULT_SOLVER_TOL: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 200;
/// Below this β the ratio term is replaced by its analytic limit.
pub const BETA_LIMIT_CUTOFF: f64 = 1e-12;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_4;

/// Upper bound on the long-run sampling rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyConstraint {
    Unbounded,
    Max(f64),
}

impl FrequencyConstraint {
    pub fn max(f_max: f64) -> Result<Self> {
        if f_max.is_infinite() && f_max > 0.0 {
            return Ok(FrequencyConstraint::Unbounded);
        }
        if !(f_max.is_finite() && f_max > 0.0) {
            return Err(Error::InvalidParameter(format!("f_max must be > 0, got {f_max}")));
        }
        Ok(FrequencyConstraint::Max(f_max))
    }

    /// `1 / f_max`, zero when unbounded.
    pub fn min_interval(&self) -> f64 {
        match self {
            FrequencyConstraint::Unbounded => 0.0,
            FrequencyConstraint::Max(f) => 1.0 / f,
        }
    }

    pub fn f_max(&self) -> f64 {
        match self {
            FrequencyConstraint::Unbounded => f64::INFINITY,
            FrequencyConstraint::Max(f) => *f,
        }
    }
}

impl fmt::Display for FrequencyConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrequencyConstraint::Unbounded => f.write_str("inf"),
            FrequencyConstraint::Max(v) => write!(f, "{v}"),
        }
    }
}

/// Which branch of the outer `max` is active at the solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binding {
    FrequencyConstraint,
    UnconstrainedStationarity,
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Binding::FrequencyConstraint => "frequency-constraint",
            Binding::UnconstrainedStationarity => "unconstrained-stationarity",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSolution {
    pub beta: f64,
    pub objective: f64,
    pub binding: Binding,
    /// `|lhs − rhs| / rhs` at `beta`.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    Quadrature,
    MonteCarlo { n: usize, seed: u64 },
}

/// A moment value; `std_err` is zero for quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    fn exact(value: f64) -> Self {
        Estimate { value, std_err: 0.0 }
    }
}

fn normal_pdf(a: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * a * a).exp()
}

/// `E[max(c, y Z²)]` for standard normal `Z`.
pub fn conditional_max_w2(c: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return c;
    }
    if c <= 0.0 {
        return y;
    }
    let a = (c / y).sqrt();
    let inside = erf(a * std::f64::consts::FRAC_1_SQRT_2);
    let tail = erfc(a * std::f64::consts::FRAC_1_SQRT_2); // P(|Z| ≥ a)
    c * inside + y * (2.0 * a * normal_pdf(a) + tail)
}

/// `E[max(c², y² Z⁴)]` for standard normal `Z`.
pub fn conditional_max_w4(c: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return c * c;
    }
    if c <= 0.0 {
        return 3.0 * y * y;
    }
    let a = (c / y).sqrt();
    let inside = erf(a * std::f64::consts::FRAC_1_SQRT_2);
    let tail = erfc(a * std::f64::consts::FRAC_1_SQRT_2);
    let pdf = normal_pdf(a);
    c * c * inside + y * y * (2.0 * a * a * a * pdf + 6.0 * a * pdf + 3.0 * tail)
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::InvalidParameter(format!("threshold must be >= 0, got {beta}")));
    }
    Ok(())
}

/// Pairs of `(Y, Z)` draws reduced through `f(y, z)`.
fn monte_carlo_wy<F: Fn(f64, f64) -> f64>(model: &DelayModel, n: usize, seed: u64, f: F) -> Result<Estimate> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("Monte Carlo needs n >= 2, got {n}")));
    }
    let mut rng = rng_from_seed(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let y = model.sample(&mut rng);
        let z: f64 = rng.sample(StandardNormal);
        let v = f(y, z);
        sum += v;
        sum_sq += v * v;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok(Estimate {
        value: mean,
        std_err: (var / nf).sqrt(),
    })
}

/// `E[max(β, W_Y²)]`.
pub fn e_max_beta_wy2(beta: f64, model: &DelayModel, method: MomentMethod) -> Result<Estimate> {
    check_beta(beta)?;
    match method {
        MomentMethod::Quadrature => Ok(Estimate::exact(
            model.expect(|y| conditional_max_w2(beta, y), &[], DEFAULT_REL_TOL),
        )),
        MomentMethod::MonteCarlo { n, seed } => {
            monte_carlo_wy(model, n, seed, |y, z| beta.max(y * z * z))
        }
    }
}

/// `E[max(β², W_Y⁴)]`.
pub fn e_max_beta2_wy4(beta: f64, model: &DelayModel, method: MomentMethod) -> Result<Estimate> {
    check_beta(beta)?;
    match method {
        MomentMethod::Quadrature => Ok(Estimate::exact(
            model.expect(|y| conditional_max_w4(beta, y), &[], DEFAULT_REL_TOL),
        )),
        MomentMethod::MonteCarlo { n, seed } => monte_carlo_wy(model, n, seed, |y, z| {
            let w2 = y * z * z;
            (beta * beta).max(w2 * w2)
        }),
    }
}

/// `E[max(β, Y)]`.
pub fn e_max_beta_y(beta: f64, model: &DelayModel) -> Result<f64> {
    check_beta(beta)?;
    Ok(model.expect(|y| beta.max(y), &[beta], DEFAULT_REL_TOL))
}

/// `E[max(β², Y²)]`.
pub fn e_max_beta2_y2(beta: f64, model: &DelayModel) -> Result<f64> {
    check_beta(beta)?;
    Ok(model.expect(|y| (beta * beta).max(y * y), &[beta], DEFAULT_REL_TOL))
}

/// The two sides of a threshold fixed point, parameterised by the random
/// quantity `X` (`W_Y²` or `Y`): `E[max(β, X)]` and `E[max(β², X²)]`.
trait Functionals {
    fn first(&self, beta: f64) -> f64;
    fn second(&self, beta: f64) -> f64;
    /// `E[X²]`; decides the `β → 0` limit of the ratio term.
    fn second_at_zero(&self) -> f64;
}

struct SignalFunctionals<'a>(&'a DelayModel);

impl Functionals for SignalFunctionals<'_> {
    fn first(&self, beta: f64) -> f64 {
        self.0.expect(|y| conditional_max_w2(beta, y), &[], DEFAULT_REL_TOL)
    }
    fn second(&self, beta: f64) -> f64 {
        self.0.expect(|y| conditional_max_w4(beta, y), &[], DEFAULT_REL_TOL)
    }
    fn second_at_zero(&self) -> f64 {
        3.0 * self.0.second_moment()
    }
}

struct AgeFunctionals<'a>(&'a DelayModel);

impl Functionals for AgeFunctionals<'_> {
    fn first(&self, beta: f64) -> f64 {
        self.0.expect(|y| beta.max(y), &[beta], DEFAULT_REL_TOL)
    }
    fn second(&self, beta: f64) -> f64 {
        self.0.expect(|y| (beta * beta).max(y * y), &[beta], DEFAULT_REL_TOL)
    }
    fn second_at_zero(&self) -> f64 {
        self.0.second_moment()
    }
}

struct Evaluation {
    /// lhs − rhs
    gap: f64,
    rhs: f64,
    ratio: f64,
}

fn evaluate<F: Functionals>(fns: &F, beta: f64, min_interval: f64) -> Evaluation {
    let lhs = fns.first(beta);
    let ratio = if beta < BETA_LIMIT_CUTOFF {
        if fns.second_at_zero() > 0.0 {
            f64::INFINITY
        } else {
            beta / 2.0
        }
    } else {
        fns.second(beta) / (2.0 * beta)
    };
    let rhs = min_interval.max(ratio);
    Evaluation {
        gap: lhs - rhs,
        rhs,
        ratio,
    }
}

fn normalized(gap: f64, rhs: f64) -> f64 {
    if rhs > 0.0 && rhs.is_finite() {
        gap.abs() / rhs
    } else {
        gap.abs()
    }
}

/// Points scanned for sign changes between `hi·2^-SCAN_STEPS` and `hi`.
const SCAN_STEPS: i32 = 42;

fn solve<F: Functionals>(fns: &F, model: &DelayModel, f: FrequencyConstraint, tol: f64) -> Result<(f64, Binding, f64, usize)> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {tol}")));
    }
    let min_interval = f.min_interval();

    let at_zero = evaluate(fns, 0.0, min_interval);
    if at_zero.gap >= 0.0 {
        // Only reachable when the delay is a.s. zero and the rate is unbounded.
        let binding = binding_of(min_interval, at_zero.ratio);
        return Ok((0.0, binding, normalized(at_zero.gap, at_zero.rhs), 0));
    }

    let mut hi = min_interval.max(model.mean());
    if hi <= 0.0 {
        hi = 1.0;
    }
    let mut expansions = 0;
    while evaluate(fns, hi, min_interval).gap <= 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 1000 || !hi.is_finite() {
            return Err(Error::NoBracket { hi });
        }
    }

    // Scan a geometric grid below hi for extra sign changes.
    let mut grid: Vec<f64> = (0..=SCAN_STEPS).rev().map(|k| hi * 0.5f64.powi(k)).collect();
    grid.insert(0, 0.0);
    let signs: Vec<bool> = grid
        .iter()
        .map(|&b| evaluate(fns, b, min_interval).gap > 0.0)
        .collect();
    let brackets: Vec<(f64, f64)> = grid
        .windows(2)
        .zip(signs.windows(2))
        .filter(|(_, s)| s[0] != s[1])
        .map(|(g, _)| (g[0], g[1]))
        .collect();
    if brackets.len() > 1 {
        return Err(Error::MultipleRoots { brackets });
    }
    let (mut lo, mut hi) = brackets[0];

    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-3 * tol * mid {
            break;
        }
        iterations += 1;
        if evaluate(fns, mid, min_interval).gap > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    let e = evaluate(fns, beta, min_interval);
    let residual = normalized(e.gap, e.rhs);
    if residual > tol {
        return Err(Error::NoConvergence {
            iterations,
            lo,
            hi,
            residual,
        });
    }
    Ok((beta, binding_of(min_interval, e.ratio), residual, iterations))
}

fn binding_of(min_interval: f64, ratio: f64) -> Binding {
    if min_interval > 0.0 && min_interval >= ratio {
        Binding::FrequencyConstraint
    } else {
        Binding::UnconstrainedStationarity
    }
}

/// MMSE-optimal threshold for the signal-variation policy.
pub fn solve_beta_mmse(model: &DelayModel, f: FrequencyConstraint, tol: f64) -> Result<ThresholdSolution> {
    let (beta, binding, residual, iterations) = solve(&SignalFunctionals(model), model, f, tol)?;
    Ok(ThresholdSolution {
        beta,
        objective: mmse_opt_value(beta, model)?,
        binding,
        residual,
        iterations,
    })
}

/// Age-optimal threshold for the time-variation policy.
pub fn solve_beta_age(model: &DelayModel, f: FrequencyConstraint, tol: f64) -> Result<ThresholdSolution> {
    let (beta, binding, residual, iterations) = solve(&AgeFunctionals(model), model, f, tol)?;
    Ok(ThresholdSolution {
        beta,
        objective: mmse_age_value(beta, model)?,
        binding,
        residual,
        iterations,
    })
}

/// Normalized residual of the MMSE fixed point at `beta`, by quadrature.
pub fn mmse_residual(beta: f64, model: &DelayModel, f: FrequencyConstraint) -> Result<f64> {
    check_beta(beta)?;
    let e = evaluate(&SignalFunctionals(model), beta, f.min_interval());
    Ok(normalized(e.gap, e.rhs))
}

/// Normalized residual of the age fixed point at `beta`.
pub fn age_residual(beta: f64, model: &DelayModel, f: FrequencyConstraint) -> Result<f64> {
    check_beta(beta)?;
    let e = evaluate(&AgeFunctionals(model), beta, f.min_interval());
    Ok(normalized(e.gap, e.rhs))
}

/// Signed `lhs − rhs` of the MMSE fixed point.
pub fn mmse_gap(beta: f64, model: &DelayModel, f: FrequencyConstraint) -> Result<f64> {
    check_beta(beta)?;
    Ok(evaluate(&SignalFunctionals(model), beta, f.min_interval()).gap)
}

/// Signed `lhs − rhs` of the age fixed point.
pub fn age_gap(beta: f64, model: &DelayModel, f: FrequencyConstraint) -> Result<f64> {
    check_beta(beta)?;
    Ok(evaluate(&AgeFunctionals(model), beta, f.min_interval()).gap)
}

/// `E[max(β², W_Y⁴)] / (6 E[max(β, W_Y²)]) + E[Y]`.
pub fn mmse_opt_value(beta: f64, model: &DelayModel) -> Result<f64> {
    check_beta(beta)?;
    let fns = SignalFunctionals(model);
    let denom = fns.first(beta);
    if denom <= 0.0 {
        return Ok(model.mean());
    }
    Ok(fns.second(beta) / (6.0 * denom) + model.mean())
}

/// `E[max(β², Y²)] / (2 E[max(β, Y)]) + E[Y]`.
pub fn mmse_age_value(beta: f64, model: &DelayModel) -> Result<f64> {
    check_beta(beta)?;
    let fns = AgeFunctionals(model);
    let denom = fns.first(beta);
    if denom <= 0.0 {
        return Ok(model.mean());
    }
    Ok(fns.second(beta) / (2.0 * denom) + model.mean())
}

/// Zero-wait minimises age iff `E[Y²] ≤ 2 · ess inf Y · E[Y]`.
pub fn zero_wait_age_optimal(model: &DelayModel) -> bool {
    model.second_moment() <= 2.0 * model.ess_inf() * model.mean()
}

/// Zero-wait minimises the MMSE iff the delay is zero almost surely.
pub fn zero_wait_mmse_optimal(model: &DelayModel) -> bool {
    model.is_almost_surely_zero()
}

/// `mmse_opt / mmse_age-opt` at each `f_max`.
pub fn small_fmax_ratio(model: &DelayModel, f_max: &[f64], tol: f64) -> Result<Vec<f64>> {
    f_max
        .iter()
        .map(|&f| {
            let c = FrequencyConstraint::max(f)?;
            let opt = solve_beta_mmse(model, c, tol)?;
            let age = solve_beta_age(model, c, tol)?;
            Ok(opt.objective / age.objective)
        })
        .collect()
}
