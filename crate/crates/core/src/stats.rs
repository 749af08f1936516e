//! Running moments and batch-means confidence intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::analytics::Estimate;

/// Count, sum and sum of squares; merges exactly in a fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.sum / self.count as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let n = self.count as f64;
        let m = self.sum / n;
        ((self.sum_sq - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn std_err(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.mean(),
            std_err: self.std_err(),
        }
    }
}

/// A point estimate with a 95% confidence half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub value: f64,
    pub half_width: f64,
}

impl Interval {
    pub fn contains(&self, x: f64, inflation: f64) -> bool {
        (self.value - x).abs() <= inflation * self.half_width
    }
}

pub const DEFAULT_BATCHES: usize = 30;

/// Two-sided 95% Student-t quantile with `dof` degrees of freedom.
pub fn t95(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

/// Ratio estimator `Σ num / Σ den` with a batch-means 95% interval.
///
/// The series is cut into `batches` contiguous equal batches (trailing
/// remainder joins the last one); the half-width is
/// `t₀.₉₇₅(b−1) · sd(batch ratios) / √b`.
pub fn batch_ratio(num: &[f64], den: &[f64], batches: usize) -> Interval {
    assert_eq!(num.len(), den.len());
    let n = num.len();
    let value = num.iter().sum::<f64>() / den.iter().sum::<f64>();
    if batches < 2 || n < batches {
        return Interval {
            value,
            half_width: f64::NAN,
        };
    }
    let size = n / batches;
    let mut ratios = Moments::default();
    for b in 0..batches {
        let lo = b * size;
        let hi = if b + 1 == batches { n } else { lo + size };
        let s_num: f64 = num[lo..hi].iter().sum();
        let s_den: f64 = den[lo..hi].iter().sum();
        ratios.push(s_num / s_den);
    }
    Interval {
        value,
        half_width: t95(batches - 1) * ratios.std_err(),
    }
}
