//! Macro-replicated experiments: tuning, solver runs, post-replication of
//! every recommendation, mean trajectories and solvability profiles.
//!
//! All variants of an experiment share one tuning run per macro-replication
//! and the same oracle streams, so they start from identical design-point
//! estimates. Post-replications use a separate stream that is also common
//! to every recommendation of a macro-replication.

pub mod output;
pub mod profile;
pub mod random_search;
pub mod stats;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

pub use output::{IterationRow, ResultRow, TrajectoryRow};
pub use profile::{fraction_grid, solvability_profile, value_at_budget, ProfilePoint};
pub use random_search::{random_search, SearchStep};

use crate::error::{Error, Result};
use crate::oracle::{EvaluationBudget, Problem, ProblemSpec};
use crate::rng::{stream_for, StreamKey, StreamPurpose};
use crate::sampling::RunningStats;
use crate::solver::{check_history, tune_and_initialize, Solver, SolverParams, StreamOrigin, TuningReport};
use output::{fmt_real, write_csv_file, ITERATIONS_HEADER, PROFILE_HEADER, RESULTS_HEADER, TRAJECTORY_HEADER};

/// Substream offset of the random-search baseline within the oracle stream.
const RANDOM_SEARCH_SERIAL: u64 = 1 << 48;

#[derive(Debug, Clone, PartialEq)]
pub enum VariantKind {
    /// The trust-region solver. Unset `delta_init`, `delta_max` and `kappa`
    /// are taken from the shared tuning run.
    Solver(SolverParams),
    RandomSearch { reps_per_point: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantSpec {
    pub name: String,
    pub kind: VariantKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: String,
    pub problem: ProblemSpec,
    pub variants: Vec<VariantSpec>,
    /// Replications per macro-replication, tuning included.
    pub budget: u64,
    pub macroreps: u64,
    pub postreps: u64,
    pub seed: u64,
    /// Relative optimality gap for the solvability profile.
    pub alpha: f64,
    /// Parameters for the shared tuning run.
    pub tuning: SolverParams,
    /// Number of budget fractions in the trajectory and profile grids.
    pub grid_points: usize,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.macroreps < 1 {
            return Err(Error::config("experiment.macroreps", "must be at least 1"));
        }
        if self.postreps < 1 {
            return Err(Error::config("experiment.postreps", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("experiment.alpha", format!("{} is not in (0, 1]", self.alpha)));
        }
        if self.variants.is_empty() {
            return Err(Error::config("experiment.variants", "at least one variant is required"));
        }
        let mut seen = HashSet::new();
        for v in &self.variants {
            if !seen.insert(v.name.as_str()) {
                return Err(Error::config("experiment.variants", format!("duplicate variant {:?}", v.name)));
            }
            match &v.kind {
                VariantKind::Solver(p) => p
                    .validate()
                    .map_err(|e| Error::config(format!("variant.{}", v.name), e.to_string()))?,
                VariantKind::RandomSearch { reps_per_point } if *reps_per_point == 0 => {
                    return Err(Error::config(
                        format!("variant.{}.reps_per_point", v.name),
                        "must be at least 1",
                    ));
                }
                VariantKind::RandomSearch { .. } => {}
            }
        }
        self.tuning
            .validate()
            .map_err(|e| Error::config("solver", e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    /// Sorted by (variant order, macro-rep, iteration).
    pub rows: Vec<ResultRow>,
    pub iterations: Vec<IterationRow>,
    /// One entry per macro-rep when any solver variant is present.
    pub tuning: Vec<TuningReport>,
    pub trajectory: Vec<TrajectoryRow>,
    /// `(variant, profile)`; empty when no optimal value is available.
    pub profile: Vec<(String, Vec<ProfilePoint>)>,
    pub f_star: Option<f64>,
    pub f_star_is_proxy: bool,
}

impl ExperimentResult {
    pub fn run_rows(&self, variant: &str, macro_rep: u64) -> Vec<&ResultRow> {
        self.rows
            .iter()
            .filter(|r| r.variant == variant && r.macro_rep == macro_rep)
            .collect()
    }

    pub fn run_iterations(&self, variant: &str, macro_rep: u64) -> Vec<&IterationRow> {
        self.iterations
            .iter()
            .filter(|r| r.variant == variant && r.macro_rep == macro_rep)
            .collect()
    }

    /// Post-replicated curve of one run.
    pub fn curve(&self, variant: &str, macro_rep: u64) -> Vec<(u64, f64)> {
        self.run_rows(variant, macro_rep)
            .iter()
            .map(|r| (r.cumulative_budget, r.post_mean))
            .collect()
    }

    pub fn curves(&self, variant: &str) -> Vec<Vec<(u64, f64)>> {
        (0..self.spec.macroreps).map(|r| self.curve(variant, r)).collect()
    }

    pub fn results_csv(&self) -> Result<String> {
        output::results_to_string(&self.rows)
    }

    /// Writes `results.csv`, `iterations.csv`, `trajectory.csv` and
    /// `profile.csv` into `dir` and returns their paths.
    pub fn write_csvs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let id = &self.spec.id;
        let problem = self.spec.problem.name();
        let results = dir.join("results.csv");
        write_csv_file(&results, &RESULTS_HEADER, self.rows.iter().map(ResultRow::to_record))?;
        let iterations = dir.join("iterations.csv");
        write_csv_file(&iterations, &ITERATIONS_HEADER, self.iterations.iter().map(IterationRow::to_record))?;
        let trajectory = dir.join("trajectory.csv");
        write_csv_file(
            &trajectory,
            &TRAJECTORY_HEADER,
            self.trajectory.iter().map(|t| {
                vec![
                    id.clone(),
                    t.variant.clone(),
                    problem.to_string(),
                    fmt_real(t.fraction),
                    fmt_real(t.budget),
                    t.runs.to_string(),
                    fmt_real(t.mean),
                    fmt_real(t.ci_lower),
                    fmt_real(t.ci_upper),
                ]
            }),
        )?;
        let profile = dir.join("profile.csv");
        write_profile_csv(&profile, id, problem, &self.profile)?;
        Ok(vec![results, iterations, trajectory, profile])
    }
}

pub fn write_profile_csv(path: &Path, id: &str, problem: &str, profile: &[(String, Vec<ProfilePoint>)]) -> Result<()> {
    write_csv_file(
        path,
        &PROFILE_HEADER,
        profile.iter().flat_map(|(variant, points)| {
            points.iter().map(move |p| {
                vec![
                    id.to_string(),
                    variant.clone(),
                    problem.to_string(),
                    fmt_real(p.fraction),
                    fmt_real(p.budget),
                    p.solved.to_string(),
                    p.runs.to_string(),
                    fmt_real(p.solved_fraction),
                    fmt_real(p.ci_lower),
                    fmt_real(p.ci_upper),
                ]
            })
        }),
    )
}

/// A recommendation before post-replication.
struct Recommendation {
    iteration: u64,
    cumulative_budget: u64,
    delta: f64,
    outcome: String,
    point: Vec<f64>,
}

struct RunOutput {
    variant: usize,
    macro_rep: u64,
    rows: Vec<ResultRow>,
    iterations: Vec<IterationRow>,
}

/// `(mean, standard error)` of `postreps` replications at `x`. Every call
/// for the same macro-rep starts from the same stream.
fn post_replicate(problem: &dyn Problem, x: &[f64], postreps: u64, seed: u64, macro_rep: u64) -> (f64, f64) {
    let mut rng = stream_for(StreamKey::new(macro_rep, StreamPurpose::PostReplication, 0), seed);
    let mut stats = RunningStats::new();
    for _ in 0..postreps {
        stats.push(problem.evaluate(x, &mut rng));
    }
    let se = if stats.count() < 2 { f64::NAN } else { stats.std_error() };
    (stats.mean(), se)
}

fn solver_recommendations(
    problem: &dyn Problem,
    params: SolverParams,
    tuning: &TuningReport,
    spec: &ExperimentSpec,
    macro_rep: u64,
) -> Result<(Vec<Recommendation>, Vec<crate::solver::IterationRecord>)> {
    let solver = Solver::new(problem, params)?.with_origin(StreamOrigin::oracle(spec.seed, macro_rep));
    let spent = tuning.pilot_spend.min(spec.budget);
    let state = solver.run_from(solver.initialize(EvaluationBudget::with_spent(spec.budget, spent)));
    check_history(&state, solver.params(), spent)?;
    let mut recs = vec![Recommendation {
        iteration: 0,
        cumulative_budget: 0,
        delta: solver.params().delta_init.expect("resolved by Solver::new"),
        outcome: "initial".into(),
        point: solver.initial_point().to_vec(),
    }];
    recs.extend(state.history.iter().map(|r| Recommendation {
        iteration: r.k + 1,
        cumulative_budget: r.cumulative_budget,
        delta: r.next_delta,
        outcome: r.outcome.to_string(),
        point: r.incumbent.clone(),
    }));
    Ok((recs, state.history))
}

fn random_search_recommendations(
    problem: &dyn Problem,
    reps_per_point: u64,
    spec: &ExperimentSpec,
    macro_rep: u64,
) -> Vec<Recommendation> {
    let stream = stream_for(
        StreamKey::new(macro_rep, StreamPurpose::Oracle, RANDOM_SEARCH_SERIAL),
        spec.seed,
    );
    random_search(problem, spec.budget, reps_per_point, stream)
        .into_iter()
        .enumerate()
        .map(|(i, s)| Recommendation {
            iteration: i as u64,
            cumulative_budget: s.cumulative_budget,
            delta: f64::NAN,
            outcome: if i == 0 { "initial".into() } else { "improved".into() },
            point: s.point,
        })
        .collect()
}

fn run_one(
    problem: &dyn Problem,
    spec: &ExperimentSpec,
    variant: usize,
    macro_rep: u64,
    tuning: Option<&(SolverParams, TuningReport)>,
) -> Result<RunOutput> {
    let v = &spec.variants[variant];
    let (recs, history) = match &v.kind {
        VariantKind::Solver(params) => {
            let (tuned, report) = tuning.expect("tuning runs whenever a solver variant exists");
            let params = SolverParams {
                seed: spec.seed,
                delta_max: params.delta_max.or(tuned.delta_max),
                delta_init: params.delta_init.or(tuned.delta_init),
                kappa: params.kappa.or(tuned.kappa),
                ..params.clone()
            };
            solver_recommendations(problem, params, report, spec, macro_rep)?
        }
        VariantKind::RandomSearch { reps_per_point } => (
            random_search_recommendations(problem, *reps_per_point, spec, macro_rep),
            Vec::new(),
        ),
    };

    let problem_name = spec.problem.name().to_string();
    let mut rows: Vec<ResultRow> = Vec::with_capacity(recs.len());
    for rec in recs {
        let (post_mean, post_stderr) = match rows.last() {
            Some(prev) if prev.incumbent == rec.point => (prev.post_mean, prev.post_stderr),
            _ => post_replicate(problem, &rec.point, spec.postreps, spec.seed, macro_rep),
        };
        rows.push(ResultRow {
            experiment_id: spec.id.clone(),
            variant: v.name.clone(),
            problem: problem_name.clone(),
            macro_rep,
            iteration: rec.iteration,
            cumulative_budget: rec.cumulative_budget,
            delta_k: rec.delta,
            outcome: rec.outcome,
            incumbent: rec.point,
            post_mean,
            post_stderr,
        });
    }
    let iterations = history
        .into_iter()
        .map(|record| IterationRow {
            experiment_id: spec.id.clone(),
            variant: v.name.clone(),
            problem: problem_name.clone(),
            macro_rep,
            record,
        })
        .collect();
    Ok(RunOutput {
        variant,
        macro_rep,
        rows,
        iterations,
    })
}

fn tune(problem: &dyn Problem, spec: &ExperimentSpec, macro_rep: u64) -> Result<(SolverParams, TuningReport)> {
    let params = SolverParams {
        seed: spec.seed,
        ..spec.tuning.clone()
    };
    let (solver, _, report) = tune_and_initialize(problem, &params, spec.budget, macro_rep)?;
    Ok((solver.params().clone(), report))
}

/// Runs every variant for every macro-replication and post-replicates each
/// recommendation. Output does not depend on the thread count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let problem = spec
        .problem
        .build()
        .map_err(|e| Error::config("problem", e.to_string()))?;
    let problem = problem.as_ref();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| Error::config("experiment.threads", e.to_string()))?;

    let needs_tuning = spec
        .variants
        .iter()
        .any(|v| matches!(v.kind, VariantKind::Solver(_)));
    let reps: Vec<u64> = (0..spec.macroreps).collect();
    let tunings: Vec<(SolverParams, TuningReport)> = if needs_tuning {
        pool.install(|| reps.par_iter().map(|&r| tune(problem, spec, r)).collect::<Result<_>>())?
    } else {
        Vec::new()
    };

    let jobs: Vec<(usize, u64)> = (0..spec.variants.len())
        .flat_map(|v| reps.iter().map(move |&r| (v, r)))
        .collect();
    let mut outputs: Vec<RunOutput> = pool.install(|| {
        jobs.par_iter()
            .map(|&(v, r)| run_one(problem, spec, v, r, tunings.get(r as usize)))
            .collect::<Result<_>>()
    })?;
    outputs.sort_by_key(|o| (o.variant, o.macro_rep));

    let mut rows = Vec::new();
    let mut iterations = Vec::new();
    for o in outputs {
        rows.extend(o.rows);
        iterations.extend(o.iterations);
    }

    let (f_star, f_star_is_proxy) = match problem.optimum_value() {
        Some(f) => (Some(f), false),
        None => {
            let best = rows.iter().map(|r| r.post_mean).fold(f64::INFINITY, f64::min);
            if best.is_finite() {
                info!("{}: no known optimum; using best observed estimate {best:.6e}", spec.problem.name());
                (Some(best), true)
            } else {
                warn!("{}: no optimum and no finite estimates", spec.problem.name());
                (None, false)
            }
        }
    };

    let mut result = ExperimentResult {
        spec: spec.clone(),
        rows,
        iterations,
        tuning: tunings.into_iter().map(|(_, t)| t).collect(),
        trajectory: Vec::new(),
        profile: Vec::new(),
        f_star,
        f_star_is_proxy,
    };
    let grid = fraction_grid(spec.grid_points);
    for v in &spec.variants {
        let curves = result.curves(&v.name);
        for &t in &grid {
            let level = t * spec.budget as f64;
            let values: Vec<f64> = curves.iter().map(|c| value_at_budget(c, level)).collect();
            let iv = stats::mean_interval(&values);
            result.trajectory.push(TrajectoryRow {
                variant: v.name.clone(),
                fraction: t,
                budget: level,
                runs: iv.n,
                mean: iv.mean,
                ci_lower: iv.lower(),
                ci_upper: iv.upper(),
            });
        }
        let points = solvability_profile(&curves, spec.budget, spec.alpha, f_star, &grid);
        if !points.is_empty() {
            result.profile.push((v.name.clone(), points));
        }
    }
    Ok(result)
}
