//! Choosing `delta_max`, `delta_init` and `kappa` before the main run.

use log::{info, warn};

use super::{Solver, SolverParams, SolverState, StreamOrigin};
use crate::error::{Error, Result};
use crate::oracle::{EvaluationBudget, Problem};
use crate::rng::{stream_for, StreamKey, StreamPurpose};

pub const DELTA_MAX_SAMPLE_POINTS: usize = 100;
/// Multipliers applied to `0.05 delta_max` to form the pilot candidates.
pub const PILOT_MULTIPLIERS: [f64; 3] = [0.1, 1.0, 10.0];
const PILOT_FRACTION: f64 = 0.01;
const DELTA_INIT_FRACTION: f64 = 0.05;
const MIN_TUNING_BUDGET: u64 = 100;
/// Pilots for different candidates are this many substreams apart.
const PILOT_SERIAL_STRIDE: u64 = 1 << 32;

/// Largest pairwise distance among uniform draws from the problem's search
/// box, using the tuning stream of `macro_rep`.
pub fn estimate_delta_max(problem: &dyn Problem, seed: u64, macro_rep: u64) -> f64 {
    let bounds = problem.search_box();
    let mut rng = stream_for(StreamKey::new(macro_rep, StreamPurpose::Tuning, 0), seed);
    let points: Vec<Vec<f64>> = (0..DELTA_MAX_SAMPLE_POINTS)
        .map(|_| bounds.iter().map(|&(lo, hi)| rng.next_range(lo, hi)).collect())
        .collect();
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            best = best.max(d2);
        }
    }
    best.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotOutcome {
    pub delta_init: f64,
    pub kappa: f64,
    pub final_estimate: f64,
    pub spent: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningReport {
    pub delta_max: f64,
    pub pilots: Vec<PilotOutcome>,
    /// Index into the candidate list that was chosen.
    pub chosen: usize,
    pub pilot_spend: u64,
    pub piloted: bool,
}

/// Fills in whatever of `delta_max`, `delta_init` and `kappa` the caller
/// left unset, charging pilot runs against `total_budget`, and returns the
/// solver with its starting state for the main run.
///
/// Pilot `j` draws from the tuning streams of `macro_rep`; the main run uses
/// the oracle streams.
pub fn tune_and_initialize<'p>(
    problem: &'p dyn Problem,
    params: &SolverParams,
    total_budget: u64,
    macro_rep: u64,
) -> Result<(Solver<'p>, SolverState, TuningReport)> {
    params.validate()?;
    let seed = params.seed;
    let delta_max = match params.delta_max {
        Some(d) => d,
        None => estimate_delta_max(problem, seed, macro_rep),
    };
    if !(delta_max > 0.0) {
        return Err(Error::invalid("delta_max", "search box has zero diameter"));
    }
    let candidates: Vec<f64> = PILOT_MULTIPLIERS
        .iter()
        .map(|m| DELTA_INIT_FRACTION * delta_max * m)
        .collect();

    let mut report = TuningReport {
        delta_max,
        pilots: Vec::new(),
        chosen: 1,
        pilot_spend: 0,
        piloted: false,
    };
    let mut tuned = SolverParams {
        delta_max: Some(delta_max),
        ..params.clone()
    };

    if let Some(d0) = params.delta_init {
        // Nothing to choose; kappa (if unset) comes from the main run's first estimate.
        tuned.delta_init = Some(d0);
    } else {
        let pilot_budget = (total_budget as f64 * PILOT_FRACTION).floor() as u64;
        let d = problem.dim() as u64;
        let lambda0 = params.lambda.lambda_at(0).max(2);
        let needed = (2 * d + 3) * lambda0;
        if total_budget < MIN_TUNING_BUDGET || pilot_budget < needed {
            warn!(
                "budget {total_budget} too small for pilot runs ({pilot_budget} < {needed}); using delta_init = {:.4e}",
                candidates[1]
            );
            tuned.delta_init = Some(candidates[1]);
        } else {
            for (j, &d0) in candidates.iter().enumerate() {
                let pilot_params = SolverParams {
                    delta_init: Some(d0),
                    ..tuned.clone()
                };
                let solver = Solver::new(problem, pilot_params)?.with_origin(StreamOrigin {
                    seed,
                    macro_rep,
                    purpose: StreamPurpose::Tuning,
                    serial_base: 1 + j as u64 * PILOT_SERIAL_STRIDE,
                });
                let state = solver.run(EvaluationBudget::new(pilot_budget));
                report.pilots.push(PilotOutcome {
                    delta_init: d0,
                    kappa: state.kappa,
                    final_estimate: state.incumbent.mean(),
                    spent: state.budget.spent(),
                });
                report.pilot_spend += state.budget.spent();
            }
            // Strict comparison keeps the smallest candidate on ties.
            let mut chosen = 0;
            for (j, p) in report.pilots.iter().enumerate() {
                if p.final_estimate < report.pilots[chosen].final_estimate {
                    chosen = j;
                }
            }
            report.chosen = chosen;
            report.piloted = true;
            tuned.delta_init = Some(report.pilots[chosen].delta_init);
            if tuned.kappa.is_none() {
                tuned.kappa = Some(report.pilots[chosen].kappa);
            }
            info!(
                "tuning: delta_max={delta_max:.4e} delta_init={:.4e} kappa={:.4e} pilot spend {}",
                report.pilots[chosen].delta_init,
                tuned.kappa.unwrap(),
                report.pilot_spend
            );
        }
    }

    let solver = Solver::new(problem, tuned)?.with_origin(StreamOrigin::oracle(seed, macro_rep));
    let budget = EvaluationBudget::with_spent(total_budget, report.pilot_spend.min(total_budget));
    let state = solver.initialize(budget);
    Ok((solver, state, report))
}
