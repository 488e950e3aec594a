//! The adaptive-sampling trust-region loop with direct coordinate search.
//!
//! Each iteration:
//!
//! 1. samples the `2d + 1` coordinate design points around the incumbent
//!    until each meets the adaptive stopping rule, and fits the diagonal
//!    quadratic model;
//! 2. minimizes the model over the trust region to get a candidate;
//! 3. samples the candidate under the same rule and computes the direct
//!    search reduction `r_hat` (best design point), the candidate reduction
//!    `r_tilde`, and the model reduction `r_model`;
//! 4. accepts the best design point if `r_hat > max(r_tilde, theta delta^2)`,
//!    otherwise the candidate if `r_tilde >= eta r_model` and
//!    `mu ||G|| >= delta`, otherwise shrinks the radius.

mod params;
mod tuning;

use std::fmt;

use log::{debug, warn};

pub use params::SolverParams;
pub use tuning::{estimate_delta_max, tune_and_initialize, TuningReport, DELTA_MAX_SAMPLE_POINTS};

use crate::error::{Error, Result};
use crate::model::{DesignSet, DiagonalQuadraticModel, MIN_RELATIVE_RADIUS};
use crate::oracle::{BudgetExhausted, EvaluationBudget, Problem};
use crate::rng::{stream_for, StreamKey, StreamPurpose};
use crate::sampling::{adaptive_sample, SampleRecord, StoppingRule};
use crate::subproblem::solve_trust_region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    SuccessDirectSearch,
    SuccessSubproblem,
    Unsuccessful,
    BudgetExhausted,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::SuccessDirectSearch => "success_direct_search",
            Outcome::SuccessSubproblem => "success_subproblem",
            Outcome::Unsuccessful => "unsuccessful",
            Outcome::BudgetExhausted => "budget_exhausted",
        }
    }

    pub fn is_success(self) -> bool {
        matches!(self, Outcome::SuccessDirectSearch | Outcome::SuccessSubproblem)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Trace of one iteration. Reductions that were never computed (the
/// iteration ran out of budget first) are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: u64,
    pub delta: f64,
    pub outcome: Outcome,
    pub r_hat: f64,
    pub r_tilde: f64,
    pub r_model: f64,
    pub gradient_norm: f64,
    pub samples: u64,
    /// Budget spent at the end of the iteration, including tuning.
    pub cumulative_budget: u64,
    /// Estimate of the incumbent after the update.
    pub incumbent_estimate: f64,
    /// Incumbent after the update.
    pub incumbent: Vec<f64>,
    pub next_delta: f64,
}

/// Where a run draws its substreams from. Every newly evaluated point takes
/// the next serial number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamOrigin {
    pub seed: u64,
    pub macro_rep: u64,
    pub purpose: StreamPurpose,
    pub serial_base: u64,
}

impl StreamOrigin {
    pub fn oracle(seed: u64, macro_rep: u64) -> Self {
        Self {
            seed,
            macro_rep,
            purpose: StreamPurpose::Oracle,
            serial_base: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub k: u64,
    pub incumbent: SampleRecord,
    pub delta: f64,
    pub kappa: f64,
    pub budget: EvaluationBudget,
    pub history: Vec<IterationRecord>,
    pub finished: bool,
    next_serial: u64,
    /// Samples drawn during initialization, charged to the first iteration.
    pending_samples: u64,
}

impl SolverState {
    pub fn incumbent_point(&self) -> &[f64] {
        &self.incumbent.point
    }

    /// `(cumulative budget, recommended point)` pairs: the starting point at
    /// zero spend, then the incumbent after every recorded iteration.
    pub fn recommendations(&self, x0: &[f64]) -> Vec<(u64, Vec<f64>)> {
        std::iter::once((0, x0.to_vec()))
            .chain(self.history.iter().map(|r| (r.cumulative_budget, r.incumbent.clone())))
            .collect()
    }
}

/// Quantities computed before the acceptance test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reductions {
    pub r_hat: f64,
    pub r_tilde: f64,
    pub r_model: f64,
    pub gradient_norm: f64,
    pub delta: f64,
}

/// Which point to accept, if any.
pub fn classify(red: &Reductions, params: &SolverParams) -> Outcome {
    let theta_floor = params.theta * red.delta * red.delta;
    if params.direct_search && red.r_hat > red.r_tilde.max(theta_floor) {
        Outcome::SuccessDirectSearch
    } else if red.r_tilde >= params.eta * red.r_model && params.mu * red.gradient_norm >= red.delta {
        Outcome::SuccessSubproblem
    } else {
        Outcome::Unsuccessful
    }
}

pub struct Solver<'p> {
    problem: &'p dyn Problem,
    params: SolverParams,
    origin: StreamOrigin,
    x0: Vec<f64>,
}

impl<'p> Solver<'p> {
    /// Builds a solver for `problem`. Missing `delta_max` is estimated from
    /// the problem's box; missing `delta_init` defaults to `0.05 delta_max`.
    /// Missing `kappa` is derived from the first estimate at `x0`.
    pub fn new(problem: &'p dyn Problem, mut params: SolverParams) -> Result<Self> {
        params.validate()?;
        let origin = StreamOrigin::oracle(params.seed, 0);
        if params.delta_max.is_none() {
            params.delta_max = Some(estimate_delta_max(problem, params.seed, 0));
        }
        if params.delta_init.is_none() {
            params.delta_init = Some(0.05 * params.delta_max.unwrap());
        }
        params.validate()?;
        Ok(Self {
            problem,
            x0: problem.initial_point(),
            params,
            origin,
        })
    }

    pub fn with_origin(mut self, origin: StreamOrigin) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_initial_point(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.problem.dim() {
            return Err(Error::invalid("initial_point", "dimension mismatch"));
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn initial_point(&self) -> &[f64] {
        &self.x0
    }

    fn stream(&self, serial: u64) -> crate::rng::RngState {
        stream_for(
            StreamKey::new(
                self.origin.macro_rep,
                self.origin.purpose,
                self.origin.serial_base + serial,
            ),
            self.origin.seed,
        )
    }

    fn fresh_record(&self, state: &mut SolverState, point: Vec<f64>) -> SampleRecord {
        let stream = self.stream(state.next_serial);
        state.next_serial += 1;
        SampleRecord::new(point, stream)
    }

    /// Starting state with the given budget. When `kappa` is unset, the
    /// starting point is sampled `max(2, lambda_0)` times to set it.
    pub fn initialize(&self, budget: EvaluationBudget) -> SolverState {
        let delta = self.params.delta_init.expect("resolved in Solver::new");
        let mut state = SolverState {
            k: 0,
            incumbent: SampleRecord::new(self.x0.clone(), self.stream(0)),
            delta,
            kappa: self.params.kappa.unwrap_or(self.params.kappa_min),
            budget,
            history: Vec::new(),
            finished: budget.is_exhausted(),
            next_serial: 1,
            pending_samples: 0,
        };
        if state.finished || self.params.kappa.is_some() {
            return state;
        }
        let n = self.params.lambda.lambda_at(0).max(2);
        let before = state.budget.spent();
        let sampled = state.incumbent.sample_n(n, self.problem, &mut state.budget);
        state.pending_samples = state.budget.spent() - before;
        match sampled {
            Ok(_) => {
                state.kappa = self.params.kappa_from_estimate(state.incumbent.mean(), delta);
            }
            Err(BudgetExhausted) => self.record_exhaustion(&mut state, Reductions::nan(delta)),
        }
        state
    }

    fn record_exhaustion(&self, state: &mut SolverState, red: Reductions) {
        let samples = state.pending_samples;
        state.pending_samples = 0;
        state.finished = true;
        if samples == 0 {
            return;
        }
        state.history.push(IterationRecord {
            k: state.k,
            delta: state.delta,
            outcome: Outcome::BudgetExhausted,
            r_hat: red.r_hat,
            r_tilde: red.r_tilde,
            r_model: red.r_model,
            gradient_norm: red.gradient_norm,
            samples,
            cumulative_budget: state.budget.spent(),
            incumbent_estimate: state.incumbent.mean(),
            incumbent: state.incumbent.point.clone(),
            next_delta: state.delta,
        });
    }

    /// Runs one iteration. Returns `None` once the run is over.
    pub fn iterate(&self, state: &mut SolverState) -> Option<Outcome> {
        if state.finished {
            return None;
        }
        if state.budget.is_exhausted() {
            self.record_exhaustion(state, Reductions::nan(state.delta));
            return None;
        }
        let center_norm = crate::model::norm(&state.incumbent.point);
        if state.delta < MIN_RELATIVE_RADIUS * (1.0 + center_norm) {
            warn!("trust region collapsed to {:e}; stopping", state.delta);
            state.finished = true;
            return None;
        }

        let spent_before = state.budget.spent();
        let result = self.step(state);
        state.pending_samples += state.budget.spent() - spent_before;
        match result {
            Ok((outcome, red, accepted)) => {
                let delta = state.delta;
                let max = self.params.delta_max.expect("resolved in Solver::new");
                let next_delta = match outcome {
                    Outcome::Unsuccessful => delta * self.params.gamma_shrink,
                    _ => (delta * self.params.gamma_expand).min(max),
                };
                if let Some(rec) = accepted {
                    state.incumbent = rec;
                }
                state.history.push(IterationRecord {
                    k: state.k,
                    delta,
                    outcome,
                    r_hat: red.r_hat,
                    r_tilde: red.r_tilde,
                    r_model: red.r_model,
                    gradient_norm: red.gradient_norm,
                    samples: state.pending_samples,
                    cumulative_budget: state.budget.spent(),
                    incumbent_estimate: state.incumbent.mean(),
                    incumbent: state.incumbent.point.clone(),
                    next_delta,
                });
                debug!(
                    "k={} delta={:.3e} {} r_hat={:.3e} r_tilde={:.3e} r={:.3e}",
                    state.k, delta, outcome, red.r_hat, red.r_tilde, red.r_model
                );
                state.pending_samples = 0;
                state.delta = next_delta;
                state.k += 1;
                Some(outcome)
            }
            Err(red) => {
                self.record_exhaustion(state, red);
                Some(Outcome::BudgetExhausted)
            }
        }
    }

    /// Model construction, subproblem, candidate evaluation and the
    /// acceptance test. On exhaustion returns whatever reductions were known.
    fn step(
        &self,
        state: &mut SolverState,
    ) -> std::result::Result<(Outcome, Reductions, Option<SampleRecord>), Reductions> {
        let delta = state.delta;
        let nan = Reductions::nan(delta);
        let rule = StoppingRule::for_iteration(&self.params.lambda, state.k, delta, state.kappa);
        let problem = self.problem;

        adaptive_sample(&mut state.incumbent, &rule, problem, &mut state.budget).map_err(|_| nan)?;

        let design = DesignSet::new(state.incumbent.point.clone(), delta).map_err(|_| nan)?;
        let mut records = Vec::with_capacity(design.len());
        records.push(state.incumbent.clone());
        for i in 1..design.len() {
            let mut rec = self.fresh_record(state, design.point(i));
            adaptive_sample(&mut rec, &rule, problem, &mut state.budget).map_err(|_| nan)?;
            records.push(rec);
        }
        let values: Vec<f64> = records.iter().map(SampleRecord::mean).collect();
        let model = match design.fit(&values) {
            Ok(m) => m,
            Err(e) => {
                warn!("model fit failed: {e}");
                return Err(nan);
            }
        };

        let sub = solve_trust_region(&model, delta);
        let candidate_point: Vec<f64> = state
            .incumbent
            .point
            .iter()
            .zip(&sub.step)
            .map(|(x, s)| x + s)
            .collect();
        let mut candidate = self.fresh_record(state, candidate_point);
        let partial = Reductions {
            r_model: sub.predicted_reduction,
            gradient_norm: model.gradient_norm(),
            ..nan
        };
        adaptive_sample(&mut candidate, &rule, problem, &mut state.budget).map_err(|_| partial)?;

        let (best, reds) = self.reductions(&records, &candidate, &model, &sub.step, delta);
        let outcome = classify(&reds, &self.params);
        let accepted = match outcome {
            Outcome::SuccessDirectSearch => Some(records.swap_remove(best)),
            Outcome::SuccessSubproblem => Some(candidate),
            _ => None,
        };
        Ok((outcome, reds, accepted))
    }

    fn reductions(
        &self,
        records: &[SampleRecord],
        candidate: &SampleRecord,
        model: &DiagonalQuadraticModel,
        step: &[f64],
        delta: f64,
    ) -> (usize, Reductions) {
        // Lowest index wins ties.
        let best = records
            .iter()
            .enumerate()
            .fold(0, |b, (i, r)| if r.mean() < records[b].mean() { i } else { b });
        let f_center = records[0].mean();
        let reds = Reductions {
            r_hat: f_center - records[best].mean(),
            r_tilde: f_center - candidate.mean(),
            r_model: model.intercept - model.value_at_step(step),
            gradient_norm: model.gradient_norm(),
            delta,
        };
        (best, reds)
    }

    /// Iterates until the budget is exhausted.
    pub fn run_from(&self, mut state: SolverState) -> SolverState {
        while self.iterate(&mut state).is_some() {}
        state
    }

    pub fn run(&self, budget: EvaluationBudget) -> SolverState {
        self.run_from(self.initialize(budget))
    }
}

impl Reductions {
    fn nan(delta: f64) -> Self {
        Self {
            r_hat: f64::NAN,
            r_tilde: f64::NAN,
            r_model: f64::NAN,
            gradient_norm: f64::NAN,
            delta,
        }
    }
}

/// Checks a finished run's trace: radius bounds and update factors,
/// acceptance conditions, and budget bookkeeping. `prior_spend` is what was
/// charged before the run started (tuning).
pub fn check_history(state: &SolverState, params: &SolverParams, prior_spend: u64) -> Result<()> {
    let fail = |k: u64, what: String| Err(Error::Invariant(format!("iteration {k}: {what}")));
    let delta_max = params.delta_max.unwrap_or(f64::INFINITY);
    let mut spent = prior_spend;
    for r in &state.history {
        if !(r.delta > 0.0 && r.delta <= delta_max) {
            return fail(r.k, format!("radius {} outside (0, {delta_max}]", r.delta));
        }
        let expected = match r.outcome {
            Outcome::Unsuccessful => r.delta * params.gamma_shrink,
            Outcome::BudgetExhausted => r.delta,
            _ => (r.delta * params.gamma_expand).min(delta_max),
        };
        if r.next_delta != expected {
            return fail(r.k, format!("radius update {} -> {} for {}", r.delta, r.next_delta, r.outcome));
        }
        let red = Reductions {
            r_hat: r.r_hat,
            r_tilde: r.r_tilde,
            r_model: r.r_model,
            gradient_norm: r.gradient_norm,
            delta: r.delta,
        };
        if r.outcome != Outcome::BudgetExhausted && classify(&red, params) != r.outcome {
            return fail(r.k, format!("recorded {} but reductions give {}", r.outcome, classify(&red, params)));
        }
        spent += r.samples;
        if spent != r.cumulative_budget {
            return fail(r.k, format!("cumulative budget {} but samples sum to {spent}", r.cumulative_budget));
        }
    }
    if spent != state.budget.spent() {
        return Err(Error::Invariant(format!(
            "budget reports {} spent, history accounts for {spent}",
            state.budget.spent()
        )));
    }
    Ok(())
}

/// Runs the solver from the problem's starting point until `budget`
/// replications have been spent.
pub fn run(problem: &dyn Problem, params: SolverParams, budget: u64) -> Result<SolverState> {
    let solver = Solver::new(problem, params)?;
    Ok(solver.run(EvaluationBudget::new(budget)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::NoisySphere;

    fn reds(r_hat: f64, r_tilde: f64, r_model: f64, g: f64, delta: f64) -> Reductions {
        Reductions {
            r_hat,
            r_tilde,
            r_model,
            gradient_norm: g,
            delta,
        }
    }

    #[test]
    fn direct_search_branch() {
        let p = SolverParams::default();
        assert_eq!(classify(&reds(1.0, 0.5, 1.0, 1.0, 1.0), &p), Outcome::SuccessDirectSearch);
        let off = SolverParams {
            direct_search: false,
            ..p
        };
        assert_eq!(classify(&reds(1.0, 0.5, 1.0, 1.0, 1.0), &off), Outcome::SuccessSubproblem);
    }

    #[test]
    fn subproblem_branch() {
        let p = SolverParams::default();
        assert_eq!(classify(&reds(0.05, 0.8, 1.0, 10.0, 1.0), &p), Outcome::SuccessSubproblem);
    }

    #[test]
    fn unsuccessful_branch() {
        let p = SolverParams::default();
        assert_eq!(classify(&reds(0.05, 0.3, 1.0, 10.0, 1.0), &p), Outcome::Unsuccessful);
        // Criticality: mu ||G|| < delta blocks the model step.
        assert_eq!(classify(&reds(0.0, 1.0, 1.0, 1e-4, 1.0), &p), Outcome::Unsuccessful);
    }

    #[test]
    fn zero_budget_runs_nothing() {
        let p = NoisySphere::new(3, 1.0, vec![0.0; 3]).unwrap();
        let state = run(&p, SolverParams::default(), 0).unwrap();
        assert!(state.history.is_empty());
        assert_eq!(state.incumbent_point(), p.initial_point().as_slice());
    }

    #[test]
    fn deterministic_sphere_first_iteration_succeeds() {
        let p = NoisySphere::new(4, 0.0, vec![0.0; 4])
            .unwrap()
            .with_initial_point(vec![5.0; 4])
            .unwrap();
        let params = SolverParams {
            delta_init: Some(2.0),
            delta_max: Some(20.0),
            ..Default::default()
        };
        let solver = Solver::new(&p, params).unwrap();
        let mut state = solver.initialize(EvaluationBudget::new(10_000));
        let outcome = solver.iterate(&mut state).unwrap();
        assert!(outcome.is_success(), "{outcome}");
        let rec = &state.history[0];
        // The model is exact, so the subproblem's estimate matches the model.
        assert!((rec.r_tilde - rec.r_model).abs() < 1e-9);
        let dist = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(dist(state.incumbent_point()) < dist(&[5.0; 4]));
        assert_eq!(state.delta, 3.0);
    }

    #[test]
    fn same_seed_same_history() {
        let p = NoisySphere::new(3, 1.0, vec![0.0; 3]).unwrap();
        let a = run(&p, SolverParams::default(), 5_000).unwrap();
        let b = run(&p, SolverParams::default(), 5_000).unwrap();
        assert_eq!(format!("{:?}", a.history), format!("{:?}", b.history));
        assert!(!a.history.is_empty());
    }

    #[test]
    fn bookkeeping_and_radius_dynamics() {
        let p = NoisySphere::new(5, 1.0, vec![0.0; 5]).unwrap();
        let params = SolverParams::default();
        let state = run(&p, params.clone(), 20_000).unwrap();
        let total: u64 = state.history.iter().map(|r| r.samples).sum();
        assert_eq!(total, state.budget.spent());
        assert_eq!(state.budget.spent(), 20_000);
        let dmax = Solver::new(&p, params.clone()).unwrap().params().delta_max.unwrap();
        let mut prev = 0;
        for r in &state.history {
            assert!(r.cumulative_budget >= prev);
            prev = r.cumulative_budget;
            assert!(r.delta > 0.0 && r.delta <= dmax);
            let ratio = r.next_delta / r.delta;
            match r.outcome {
                Outcome::Unsuccessful => assert_eq!(r.next_delta, r.delta * params.gamma_shrink),
                Outcome::BudgetExhausted => assert_eq!(ratio, 1.0),
                _ => assert_eq!(r.next_delta, (r.delta * params.gamma_expand).min(dmax)),
            }
        }
        assert_eq!(state.history.last().unwrap().outcome, Outcome::BudgetExhausted);
        let resolved = Solver::new(&p, params).unwrap().params().clone();
        check_history(&state, &resolved, 0).unwrap();
        let mut broken = state.clone();
        broken.history[0].samples += 1;
        assert!(matches!(check_history(&broken, &resolved, 0), Err(Error::Invariant(_))));
    }
}
