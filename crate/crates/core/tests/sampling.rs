use astrodf::oracle::BudgetExhausted;
use astrodf::sampling::sample_until;
use astrodf::{LambdaSchedule, RunningStats, StoppingRule};
use proptest::prelude::*;

/// Independent prefix scan: smallest `n >= max(2, lambda)` whose two-pass
/// standard error is within `tol`.
fn prefix_scan(values: &[f64], lambda: u64, tol: f64) -> Option<u64> {
    (lambda.max(2) as usize..=values.len())
        .find(|&n| {
            let p = &values[..n];
            let mean = p.iter().sum::<f64>() / n as f64;
            let var = p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt() <= tol
        })
        .map(|n| n as u64)
}

fn run_rule(values: &[f64], rule: &StoppingRule) -> Option<u64> {
    let mut stats = RunningStats::new();
    let mut it = values.iter();
    sample_until(&mut stats, rule, || it.next().copied().ok_or(BudgetExhausted)).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn stopping_index_is_minimal(
        values in prop::collection::vec(-20.0f64..20.0, 0..300),
        k in 0u64..500,
        delta in 0.1f64..3.0,
        kappa in 0.05f64..10.0,
    ) {
        let schedule = LambdaSchedule::default();
        let rule = StoppingRule::for_iteration(&schedule, k, delta, kappa);
        let lambda = schedule.lambda_at(k);
        let tol = kappa * delta * delta / (lambda as f64).sqrt();
        prop_assert_eq!(run_rule(&values, &rule), prefix_scan(&values, lambda, tol));
    }

    #[test]
    fn smaller_radius_needs_at_least_as_many(
        values in prop::collection::vec(-5.0f64..5.0, 400),
        k in 0u64..100,
        delta in 0.2f64..2.0,
        shrink in 0.1f64..1.0,
    ) {
        let schedule = LambdaSchedule::default();
        let wide = run_rule(&values, &StoppingRule::for_iteration(&schedule, k, delta, 1.0));
        let narrow = run_rule(&values, &StoppingRule::for_iteration(&schedule, k, delta * shrink, 1.0));
        // Running out of values counts as needing more than are available.
        let key = |n: Option<u64>| n.unwrap_or(u64::MAX);
        prop_assert!(key(narrow) >= key(wide));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn streaming_and_merged_statistics_match_two_pass(
        values in prop::collection::vec(-1e3f64..1e3, 2..120),
        split in 0usize..120,
    ) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let split = split.min(values.len());
        let streamed = RunningStats::from_values(&values);
        let merged = RunningStats::from_values(&values[..split]).merge(&RunningStats::from_values(&values[split..]));
        for s in [streamed, merged] {
            prop_assert_eq!(s.count(), values.len() as u64);
            prop_assert!((s.mean() - mean).abs() <= 1e-12 * scale.max(1e-300));
            prop_assert!((s.sum_sq_dev() - ss).abs() <= 1e-12 * ss.max(scale * scale * 1e-6));
        }
    }
}
