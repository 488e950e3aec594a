//! Solvability profiles over macro-replications.

use log::warn;

use super::stats::wilson_interval;

/// Post-replicated objective of one run as `(cumulative budget, estimate)`,
/// sorted by budget, with the starting point first at zero spend.
pub type Curve = [(u64, f64)];

/// Estimate of the recommendation in force once `spend` units are used:
/// the last entry whose budget does not exceed `spend`.
pub fn value_at_budget(curve: &Curve, spend: f64) -> f64 {
    curve
        .iter()
        .take_while(|(b, _)| *b as f64 <= spend)
        .last()
        .map_or(f64::NAN, |&(_, v)| v)
}

/// Budget at which `curve` first comes within `alpha` of `f_star` relative
/// to its starting gap, if it ever does.
pub fn solve_budget(curve: &Curve, alpha: f64, f_star: f64) -> Option<u64> {
    let (_, f0) = *curve.first()?;
    let threshold = alpha * (f0 - f_star);
    curve
        .iter()
        .find(|(_, v)| v - f_star <= threshold)
        .map(|&(b, _)| b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub fraction: f64,
    pub budget: f64,
    pub solved: u64,
    pub runs: u64,
    pub solved_fraction: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// Fraction of runs solved to relative optimality gap `alpha` within each
/// budget fraction. A run counts as solved at fraction `t` once any of its
/// recommendations with spend at most `t * budget` has
/// `f - f_star <= alpha (f(x0) - f_star)`.
///
/// Without `f_star` the problem is excluded: the result is empty.
pub fn solvability_profile(
    runs: &[Vec<(u64, f64)>],
    budget: u64,
    alpha: f64,
    f_star: Option<f64>,
    fractions: &[f64],
) -> Vec<ProfilePoint> {
    let Some(f_star) = f_star else {
        warn!("no optimal value available; problem excluded from the solvability profile");
        return Vec::new();
    };
    let solve_at: Vec<Option<u64>> = runs.iter().map(|c| solve_budget(c, alpha, f_star)).collect();
    let n = runs.len() as u64;
    fractions
        .iter()
        .map(|&t| {
            let level = t * budget as f64;
            let solved = solve_at
                .iter()
                .filter(|s| s.is_some_and(|b| b as f64 <= level))
                .count() as u64;
            let (ci_lower, ci_upper) = wilson_interval(solved, n);
            ProfilePoint {
                fraction: t,
                budget: level,
                solved,
                runs: n,
                solved_fraction: if n == 0 { f64::NAN } else { solved as f64 / n as f64 },
                ci_lower,
                ci_upper,
            }
        })
        .collect()
}

/// `points` evenly spaced fractions from 0 to 1 inclusive.
pub fn fraction_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..points).map(|i| i as f64 / (points - 1) as f64).collect(),
    }
}
