//! Confidence intervals used by the reports.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::sampling::RunningStats;

const Z_975: f64 = 1.959_963_984_540_054;
/// Below this many observations the t quantile replaces the normal one.
pub const T_QUANTILE_BELOW: u64 = 30;

/// Two-sided 95% critical value for a mean over `n` observations.
pub fn critical_value(n: u64) -> f64 {
    if n < 2 {
        return f64::NAN;
    }
    if n < T_QUANTILE_BELOW {
        StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975)
    } else {
        Z_975
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanInterval {
    pub n: u64,
    pub mean: f64,
    pub half_width: f64,
}

impl MeanInterval {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }
}

/// 95% interval for the mean of `values`; NaN half-width for fewer than two.
pub fn mean_interval(values: &[f64]) -> MeanInterval {
    let stats = RunningStats::from_values(values);
    let n = stats.count();
    let half_width = if n < 2 {
        f64::NAN
    } else {
        critical_value(n) * stats.std_error()
    };
    MeanInterval {
        n,
        mean: if n == 0 { f64::NAN } else { stats.mean() },
        half_width,
    }
}

/// Wilson score 95% interval for `successes` out of `n`.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z_975 * Z_975;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_975 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes as f64 == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}
