//! Running replication statistics and the adaptive sample-size rule.
//!
//! A point is sampled until its estimated standard error falls below a
//! tolerance proportional to the squared trust-region radius:
//!
//! ```text
//! N = min { n >= lambda_k : sigma_hat(n) / sqrt(n) <= kappa * delta_k^2 / sqrt(lambda_k) }
//! ```
//!
//! `sigma_hat` needs two samples, so at least `max(2, lambda_k)` replications
//! are always taken.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{evaluate_with_budget, BudgetExhausted, EvaluationBudget, Problem};
use crate::rng::RngState;

/// One-pass (Welford) mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values(values: &[f64]) -> Self {
        let mut s = Self::new();
        for &v in values {
            s.push(v);
        }
        s
    }

    pub fn push(&mut self, value: f64) {
        self.n += 1;
        let delta = value - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (value - self.mean);
    }

    /// Combines two summaries as if their samples had been pushed into one.
    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Self { n, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sum_sq_dev(&self) -> f64 {
        self.m2
    }

    /// Unbiased sample variance; `None` below two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| self.m2 / (self.n - 1) as f64)
    }

    pub fn std_dev(&self) -> Option<f64> {
        self.variance().map(f64::sqrt)
    }

    /// `sigma_hat / sqrt(n)`, or infinity while the variance is undefined.
    pub fn std_error(&self) -> f64 {
        match self.variance() {
            Some(v) => (v / self.n as f64).sqrt(),
            None => f64::INFINITY,
        }
    }
}

/// Deterministic lower bound on per-point sample sizes:
/// `lambda_k = max(base, ceil(scale * ln(k + 2)^exponent))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule {
    pub base: u64,
    pub exponent: f64,
    pub scale: f64,
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        Self {
            base: 4,
            exponent: 1.5,
            scale: 2.0,
        }
    }
}

impl LambdaSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.base < 2 {
            return Err(Error::invalid("lambda.base", "must be at least 2"));
        }
        if !(self.exponent > 1.0) || !self.exponent.is_finite() {
            return Err(Error::invalid("lambda.exponent", "must be greater than 1"));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::invalid("lambda.scale", "must be positive"));
        }
        Ok(())
    }

    pub fn lambda_at(&self, k: u64) -> u64 {
        let grown = (self.scale * ((k as f64) + 2.0).ln().powf(self.exponent)).ceil();
        self.base.max(grown as u64)
    }
}

/// Stopping rule for one iteration: sample size floor and standard-error
/// tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    pub lambda: u64,
    pub tolerance: f64,
}

impl StoppingRule {
    pub fn new(lambda: u64, tolerance: f64) -> Self {
        Self { lambda, tolerance }
    }

    /// Rule for iteration `k` at radius `delta`: tolerance `kappa delta^2 / sqrt(lambda_k)`.
    pub fn for_iteration(schedule: &LambdaSchedule, k: u64, delta: f64, kappa: f64) -> Self {
        let lambda = schedule.lambda_at(k);
        Self {
            lambda,
            tolerance: kappa * delta * delta / (lambda as f64).sqrt(),
        }
    }

    pub fn min_samples(&self) -> u64 {
        self.lambda.max(2)
    }

    pub fn is_satisfied(&self, stats: &RunningStats) -> bool {
        stats.count() >= self.min_samples() && stats.std_error() <= self.tolerance
    }
}

/// Pushes draws into `stats` one at a time until `rule` holds.
///
/// Returns the number of draws taken. The rule is checked before the first
/// draw and after every draw, so the final count is the smallest admissible
/// one at or above the incoming count.
pub fn sample_until<F>(stats: &mut RunningStats, rule: &StoppingRule, mut draw: F) -> Result<u64, BudgetExhausted>
where
    F: FnMut() -> Result<f64, BudgetExhausted>,
{
    let mut taken = 0;
    while !rule.is_satisfied(stats) {
        stats.push(draw()?);
        taken += 1;
    }
    Ok(taken)
}

/// A point together with its replication summary and the stream that
/// continues its replications.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub point: Vec<f64>,
    pub stats: RunningStats,
    pub stream: RngState,
}

impl SampleRecord {
    pub fn new(point: Vec<f64>, stream: RngState) -> Self {
        Self {
            point,
            stats: RunningStats::new(),
            stream,
        }
    }

    pub fn mean(&self) -> f64 {
        self.stats.mean()
    }

    pub fn count(&self) -> u64 {
        self.stats.count()
    }

    /// Takes exactly `n` more replications.
    pub fn sample_n<P: Problem + ?Sized>(
        &mut self,
        n: u64,
        problem: &P,
        budget: &mut EvaluationBudget,
    ) -> Result<u64, BudgetExhausted> {
        for _ in 0..n {
            let v = evaluate_with_budget(problem, &self.point, &mut self.stream, budget)?;
            self.stats.push(v);
        }
        Ok(n)
    }
}

/// Tops up `record` under `rule`, drawing replications from the record's own
/// stream. On budget exhaustion the record keeps every sample drawn so far.
pub fn adaptive_sample<P: Problem + ?Sized>(
    record: &mut SampleRecord,
    rule: &StoppingRule,
    problem: &P,
    budget: &mut EvaluationBudget,
) -> Result<u64, BudgetExhausted> {
    let SampleRecord {
        point,
        stats,
        stream,
    } = record;
    sample_until(stats, rule, || evaluate_with_budget(problem, point, stream, budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::NoisySphere;
    use proptest::prelude::*;

    fn two_pass(values: &[f64]) -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    /// Values whose running sample standard deviation stays at `target`
    /// (just below one, so equality thresholds are not decided by roundoff).
    fn pinned_sequence(len: usize, target_var: f64) -> Vec<f64> {
        let mut values = vec![0.0, (2.0 * target_var).sqrt()];
        let mut stats = RunningStats::from_values(&values);
        while values.len() < len {
            let n = stats.count() as f64;
            // Want m2' = n * target_var: (x - mean)^2 * n / (n + 1) = target_var.
            let offset = (target_var * (n + 1.0) / n).sqrt();
            let sign = if values.len() % 2 == 0 { 1.0 } else { -1.0 };
            let x = stats.mean() + sign * offset;
            values.push(x);
            stats.push(x);
        }
        values
    }

    #[test]
    fn push_small_cases() {
        let mut s = RunningStats::new();
        s.push(5.0);
        assert_eq!((s.count(), s.mean(), s.sum_sq_dev()), (1, 5.0, 0.0));
        assert_eq!(s.variance(), None);
        assert_eq!(s.std_error(), f64::INFINITY);
        s.push(7.0);
        assert_eq!((s.count(), s.mean()), (2, 6.0));
        assert_eq!(s.variance(), Some(2.0));
    }

    #[test]
    fn streaming_matches_two_pass() {
        let mut rng = RngState::from_seed(12);
        let values: Vec<f64> = (0..1000).map(|_| rng.next_normal(3.0, 4.0).unwrap()).collect();
        let s = RunningStats::from_values(&values);
        let (mean, var) = two_pass(&values);
        assert!(rel_close(s.mean(), mean, 1e-12));
        assert!(rel_close(s.variance().unwrap(), var, 1e-12));
    }

    #[test]
    fn lambda_schedule_values() {
        let sched = LambdaSchedule::default();
        // 2 * ln(2)^1.5 = 1.154..., so the base of 4 binds.
        assert_eq!(sched.lambda_at(0), 4);
        assert!(sched.lambda_at(1_000_000) >= sched.lambda_at(1000));
        for k in [100u64, 10_000, 1_000_000] {
            assert!((sched.lambda_at(k) as f64) / (k as f64) < 0.5);
        }
        let mut prev = 0;
        for k in 0..5000 {
            let l = sched.lambda_at(k);
            assert!(l >= prev);
            prev = l;
        }
        assert!(sched.lambda_at(1_000_000) as f64 / 1e6 < sched.lambda_at(100) as f64 / 100.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(LambdaSchedule::default().validate().is_ok());
        let bad = LambdaSchedule {
            exponent: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = LambdaSchedule {
            base: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_variance_stops_at_lambda() {
        let mut s = RunningStats::new();
        let rule = StoppingRule::new(5, 0.1);
        let taken = sample_until(&mut s, &rule, || Ok(3.0)).unwrap();
        assert_eq!(taken, 5);
        assert_eq!(s.count(), 5);
    }

    #[test]
    fn pinned_deviation_stopping_points() {
        let seq = pinned_sequence(64, 1.0 - 1e-9);
        for (tol, expected) in [(0.5, 4), (0.25, 16)] {
            let mut s = RunningStats::new();
            let mut it = seq.iter().copied();
            let rule = StoppingRule::new(4, tol);
            sample_until(&mut s, &rule, || Ok(it.next().unwrap())).unwrap();
            assert_eq!(s.count(), expected, "tolerance {tol}");
        }
    }

    #[test]
    fn already_satisfied_record_draws_nothing() {
        let mut s = RunningStats::from_values(&[1.0; 10]);
        let rule = StoppingRule::new(4, 1.0);
        let taken = sample_until(&mut s, &rule, || panic!("must not draw")).unwrap();
        assert_eq!(taken, 0);
    }

    #[test]
    fn exhaustion_keeps_partial_samples() {
        let p = NoisySphere::new(2, 1.0, vec![0.0; 2]).unwrap();
        let mut budget = EvaluationBudget::new(3);
        let mut rec = SampleRecord::new(vec![1.0, 1.0], RngState::from_seed(1));
        let rule = StoppingRule::new(10, 1e-6);
        assert_eq!(adaptive_sample(&mut rec, &rule, &p, &mut budget), Err(BudgetExhausted));
        assert_eq!(rec.count(), 3);
        assert!(budget.is_exhausted());
    }

    #[test]
    fn smaller_radius_never_decreases_count() {
        let p = NoisySphere::new(2, 1.0, vec![0.0; 2]).unwrap();
        let mut budget = EvaluationBudget::new(1_000_000);
        let mut rec = SampleRecord::new(vec![1.0, 1.0], RngState::from_seed(2));
        let sched = LambdaSchedule::default();
        let mut prev = 0;
        for delta in [1.0, 0.8, 0.5, 0.3, 0.2] {
            let rule = StoppingRule::for_iteration(&sched, 3, delta, 2.0);
            adaptive_sample(&mut rec, &rule, &p, &mut budget).unwrap();
            assert!(rec.count() >= prev);
            assert!(rule.is_satisfied(&rec.stats));
            prev = rec.count();
        }
    }

    proptest! {
        #[test]
        fn merge_equals_concatenation(
            a in prop::collection::vec(-1e3f64..1e3, 0..40),
            b in prop::collection::vec(-1e3f64..1e3, 0..40),
        ) {
            let merged = RunningStats::from_values(&a).merge(&RunningStats::from_values(&b));
            let all: Vec<f64> = a.iter().chain(&b).copied().collect();
            let direct = RunningStats::from_values(&all);
            prop_assert_eq!(merged.count(), direct.count());
            if !all.is_empty() {
                prop_assert!((merged.mean() - direct.mean()).abs() <= 1e-9 * (1.0 + direct.mean().abs()));
                prop_assert!((merged.sum_sq_dev() - direct.sum_sq_dev()).abs() <= 1e-9 * (1.0 + direct.sum_sq_dev()));
            }
        }

        #[test]
        fn streaming_statistics_relative_error(
            values in prop::collection::vec(-1e4f64..1e4, 2..200),
        ) {
            let s = RunningStats::from_values(&values);
            let (mean, var) = two_pass(&values);
            prop_assert!((s.mean() - mean).abs() <= 1e-12 * mean.abs().max(values.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
            if var > 1e-6 {
                prop_assert!(rel_close(s.variance().unwrap(), var, 1e-12));
            }
        }
    }
}
