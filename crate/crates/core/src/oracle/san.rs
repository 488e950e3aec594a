use crate::rng::RngState;

use super::Problem;

pub const SAN_NODES: usize = 9;

/// Arcs of the 9-node network as `(from, to)` with 1-based node labels, in
/// topological order of their tail nodes.
pub const SAN_ARCS: [(usize, usize); 13] = [
    (1, 2),
    (1, 3),
    (2, 3),
    (2, 4),
    (2, 6),
    (3, 6),
    (4, 5),
    (4, 7),
    (5, 6),
    (5, 8),
    (6, 9),
    (7, 8),
    (8, 9),
];

const MEAN_MIN: f64 = 0.01;
const MEAN_MAX: f64 = 100.0;

/// Stochastic activity network: arc `i` takes an exponential time with mean
/// `x_i`, and the objective is the expected source-to-sink completion time
/// plus `sum_i 1 / x_i`.
///
/// Means are clamped to `[0.01, 100]` before simulating.
#[derive(Debug, Clone, Default)]
pub struct StochasticActivityNetwork;

impl StochasticActivityNetwork {
    pub fn new() -> Self {
        Self
    }

    /// Length of the longest source-to-sink path for the given arc durations.
    pub fn longest_path(durations: &[f64]) -> f64 {
        debug_assert_eq!(durations.len(), SAN_ARCS.len());
        let mut finish = [0.0f64; SAN_NODES + 1];
        // Arcs are sorted by tail node and every arc points forward, so one
        // pass relaxes each node only after all of its predecessors.
        for (&(from, to), &t) in SAN_ARCS.iter().zip(durations) {
            finish[to] = finish[to].max(finish[from] + t);
        }
        finish[SAN_NODES]
    }

    fn cost(means: &[f64]) -> f64 {
        means.iter().map(|m| 1.0 / m).sum()
    }

    fn clamp(x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v.clamp(MEAN_MIN, MEAN_MAX)).collect()
    }
}

impl Problem for StochasticActivityNetwork {
    fn name(&self) -> &str {
        "san"
    }

    fn dim(&self) -> usize {
        SAN_ARCS.len()
    }

    fn evaluate(&self, x: &[f64], rng: &mut RngState) -> f64 {
        let means = Self::clamp(x);
        let durations: Vec<f64> = means.iter().map(|&m| rng.next_exponential(m)).collect();
        Self::longest_path(&durations) + Self::cost(&means)
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![1.0; SAN_ARCS.len()]
    }

    fn bounding_box(&self) -> Option<Vec<(f64, f64)>> {
        Some(vec![(MEAN_MIN, 10.0); SAN_ARCS.len()])
    }
}
