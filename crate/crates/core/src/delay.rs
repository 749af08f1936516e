//! Channel-delay distributions.
//!
//! A [`DelayModel`] knows its exact moments, its essential infimum, how to
//! draw i.i.d. samples, and how to take expectations of functions of the
//! delay by quadrature (or exact summation for empirical atoms).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Standard normal tail cut-off used when integrating over log-normal delays.
const NORMAL_SPAN: f64 = 15.0;
/// Exponential tail cut-off, in units of the mean.
const EXP_SPAN: f64 = 90.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayModel {
    /// Constant delay `y`.
    Degenerate { y: f64 },
    Exponential { mean: f64 },
    /// `exp(σX) / E[exp(σX)]` with `X` standard normal; unit mean.
    LogNormalNormalized { sigma: f64 },
    /// `d · X` with `X` drawn from `inner`.
    Scaled { inner: Box<DelayModel>, d: f64 },
    /// Resampled with replacement.
    Empirical { samples: Vec<f64> },
}

impl DelayModel {
    pub fn degenerate(y: f64) -> Result<Self> {
        let m = DelayModel::Degenerate { y };
        m.validate()?;
        Ok(m)
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        let m = DelayModel::Exponential { mean };
        m.validate()?;
        Ok(m)
    }

    pub fn lognormal(sigma: f64) -> Result<Self> {
        let m = DelayModel::LogNormalNormalized { sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn scaled(inner: DelayModel, d: f64) -> Result<Self> {
        let m = DelayModel::Scaled {
            inner: Box::new(inner),
            d,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        let m = DelayModel::Empirical { samples };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            DelayModel::Degenerate { y } if !(y.is_finite() && *y >= 0.0) => {
                bad(format!("degenerate delay must be finite and >= 0, got {y}"))
            }
            DelayModel::Exponential { mean } if !(mean.is_finite() && *mean > 0.0) => {
                bad(format!("exponential mean must be finite and > 0, got {mean}"))
            }
            DelayModel::LogNormalNormalized { sigma } if !(sigma.is_finite() && *sigma > 0.0) => {
                bad(format!("log-normal sigma must be finite and > 0, got {sigma}"))
            }
            DelayModel::Scaled { inner, d } => {
                if !(d.is_finite() && *d >= 0.0) {
                    return bad(format!("scale factor must be finite and >= 0, got {d}"));
                }
                inner.validate()
            }
            DelayModel::Empirical { samples } => {
                if samples.is_empty() {
                    return bad("empirical delay needs at least one sample".into());
                }
                match samples.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
                    Some(s) => bad(format!("empirical delay sample {s} is not a finite value >= 0")),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    /// E[Y].
    pub fn mean(&self) -> f64 {
        match self {
            DelayModel::Degenerate { y } => *y,
            DelayModel::Exponential { mean } => *mean,
            DelayModel::LogNormalNormalized { .. } => 1.0,
            DelayModel::Scaled { inner, d } => d * inner.mean(),
            DelayModel::Empirical { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }

    /// E[Y²].
    pub fn second_moment(&self) -> f64 {
        match self {
            DelayModel::Degenerate { y } => y * y,
            DelayModel::Exponential { mean } => 2.0 * mean * mean,
            DelayModel::LogNormalNormalized { sigma } => (sigma * sigma).exp(),
            DelayModel::Scaled { inner, d } => d * d * inner.second_moment(),
            DelayModel::Empirical { samples } => {
                samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64
            }
        }
    }

    /// `sup { y ≥ 0 : P[Y < y] = 0 }`.
    pub fn ess_inf(&self) -> f64 {
        match self {
            DelayModel::Degenerate { y } => *y,
            DelayModel::Exponential { .. } | DelayModel::LogNormalNormalized { .. } => 0.0,
            DelayModel::Scaled { inner, d } => d * inner.ess_inf(),
            DelayModel::Empirical { samples } => samples.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// True when `Y = 0` with probability one.
    pub fn is_almost_surely_zero(&self) -> bool {
        match self {
            DelayModel::Degenerate { y } => *y == 0.0,
            DelayModel::Exponential { .. } | DelayModel::LogNormalNormalized { .. } => false,
            DelayModel::Scaled { inner, d } => *d == 0.0 || inner.is_almost_surely_zero(),
            DelayModel::Empirical { samples } => samples.iter().all(|&s| s == 0.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DelayModel::Degenerate { y } => *y,
            DelayModel::Exponential { mean } => {
                let e: f64 = rng.sample(Exp1);
                mean * e
            }
            DelayModel::LogNormalNormalized { sigma } => {
                let x: f64 = rng.sample(StandardNormal);
                (sigma * x - 0.5 * sigma * sigma).exp()
            }
            DelayModel::Scaled { inner, d } => d * inner.sample(rng),
            DelayModel::Empirical { samples } => samples[rng.random_range(0..samples.len())],
        }
    }

    /// `E[f(Y)]` by adaptive quadrature over the delay density, or exact
    /// averaging for atomic distributions.
    ///
    /// `breaks` lists delay values where `f` has a kink; the integration
    /// range is split there. `f` must grow at most polynomially.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64], rel_tol: f64) -> f64 {
        self.expect_dyn(&f, breaks, rel_tol)
    }

    fn expect_dyn(&self, f: &dyn Fn(f64) -> f64, breaks: &[f64], rel_tol: f64) -> f64 {
        match self {
            DelayModel::Degenerate { y } => f(*y),
            DelayModel::Empirical { samples } => {
                samples.iter().map(|&s| f(s)).sum::<f64>() / samples.len() as f64
            }
            DelayModel::Scaled { inner, d } => {
                if *d == 0.0 {
                    return f(0.0);
                }
                let d = *d;
                let inner_breaks: Vec<f64> = breaks.iter().map(|b| b / d).collect();
                inner.expect_dyn(&|x| f(d * x), &inner_breaks, rel_tol)
            }
            DelayModel::Exponential { mean } => {
                let m = *mean;
                let unit_breaks: Vec<f64> = breaks.iter().map(|b| b / m).collect();
                quadrature::integrate(|u| f(m * u) * (-u).exp(), 0.0, EXP_SPAN, &unit_breaks, rel_tol, 0.0)
            }
            DelayModel::LogNormalNormalized { sigma } => {
                let s = *sigma;
                let shift = 0.5 * s * s;
                let x_breaks: Vec<f64> = breaks
                    .iter()
                    .filter(|&&b| b > 0.0)
                    .map(|b| (b.ln() + shift) / s)
                    .collect();
                let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
                // Polynomial growth in y shifts mass to the right by a few σ.
                quadrature::integrate(
                    |x| f((s * x - shift).exp()) * norm * (-0.5 * x * x).exp(),
                    -NORMAL_SPAN,
                    NORMAL_SPAN + 4.0 * s,
                    &x_breaks,
                    rel_tol,
                    0.0,
                )
            }
        }
    }

    /// Reads one nonnegative decimal per line.
    pub fn load_empirical(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let samples = parse_samples(&text, path)?;
        Ok(DelayModel::Empirical { samples })
    }

    /// Parses the flag mini-language: `det:y`, `exp:mean`, `lognorm:sigma`,
    /// `scaled:d:<inner>`, `file:path`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("delay spec {spec:?} has no ':'")))?;
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number {s:?} in delay spec {spec:?}")))
        };
        match kind {
            "det" => DelayModel::degenerate(num(rest)?),
            "exp" => DelayModel::exponential(num(rest)?),
            "lognorm" => DelayModel::lognormal(num(rest)?),
            "scaled" => {
                let (d, inner) = rest.split_once(':').ok_or_else(|| {
                    Error::InvalidParameter(format!("expected scaled:d:<inner>, got {spec:?}"))
                })?;
                DelayModel::scaled(DelayModel::parse_spec(inner)?, num(d)?)
            }
            "file" => DelayModel::load_empirical(rest),
            other => Err(Error::InvalidParameter(format!("unknown delay kind {other:?}"))),
        }
    }
}

fn parse_samples(text: &str, path: &Path) -> Result<Vec<f64>> {
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        let value: f64 = line.parse().map_err(|_| Error::Parse {
            path: PathBuf::from(path),
            line: i + 1,
            text: line.to_string(),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                path: PathBuf::from(path),
                line: i + 1,
                text: line.to_string(),
            });
        }
        if value < 0.0 {
            return Err(Error::NegativeSample {
                path: PathBuf::from(path),
                line: i + 1,
                value,
            });
        }
        samples.push(value);
    }
    if samples.is_empty() {
        return Err(Error::EmptySamples(PathBuf::from(path)));
    }
    Ok(samples)
}

impl fmt::Display for DelayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelayModel::Degenerate { y } => write!(f, "det:{y}"),
            DelayModel::Exponential { mean } => write!(f, "exp:{mean}"),
            DelayModel::LogNormalNormalized { sigma } => write!(f, "lognorm:{sigma}"),
            DelayModel::Scaled { inner, d } => write!(f, "scaled:{d}:{inner}"),
            DelayModel::Empirical { samples } => write!(f, "empirical[{}]", samples.len()),
        }
    }
}

impl FromStr for DelayModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DelayModel::parse_spec(s)
    }
}
