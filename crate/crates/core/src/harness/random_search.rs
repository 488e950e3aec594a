//! Uniform random search over the problem's search box.

use crate::oracle::{evaluate_with_budget, EvaluationBudget, Problem};
use crate::rng::RngState;
use crate::sampling::RunningStats;

/// One recommendation change: the point, its estimate, and the budget spent
/// when it became the incumbent.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchStep {
    pub cumulative_budget: u64,
    pub point: Vec<f64>,
    pub estimate: f64,
}

/// Draws points uniformly from the search box and estimates each with
/// `reps_per_point` replications until the budget cannot cover another
/// point. The first entry is the starting point at zero spend; later
/// entries are strict improvements of the best estimate.
///
/// Point locations and replications both come from `stream`.
pub fn random_search(
    problem: &dyn Problem,
    budget: u64,
    reps_per_point: u64,
    mut stream: RngState,
) -> Vec<SearchStep> {
    let reps = reps_per_point.max(1);
    let bounds = problem.search_box();
    let mut budget = EvaluationBudget::new(budget);
    let mut trajectory = vec![SearchStep {
        cumulative_budget: 0,
        point: problem.initial_point(),
        estimate: f64::NAN,
    }];
    let mut best = f64::INFINITY;
    while budget.remaining() >= reps {
        let point: Vec<f64> = bounds.iter().map(|&(lo, hi)| stream.next_range(lo, hi)).collect();
        let mut stats = RunningStats::new();
        for _ in 0..reps {
            let v = evaluate_with_budget(problem, &point, &mut stream, &mut budget)
                .expect("remaining budget covers the point");
            stats.push(v);
        }
        if stats.mean() < best {
            best = stats.mean();
            trajectory.push(SearchStep {
                cumulative_budget: budget.spent(),
                point,
                estimate: best,
            });
        }
    }
    trajectory
}
