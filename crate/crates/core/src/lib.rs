//! Adaptive-sampling trust-region optimization for noisy simulation
//! oracles, with coordinate-basis diagonal quadratic models and direct
//! coordinate search, plus an experiment harness.

mod error;
pub mod config;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod selftest;
pub mod sampling;
pub mod solver;
pub mod subproblem;

pub use error::{Error, Result};
pub use model::{DesignSet, DiagonalQuadraticModel};
pub use oracle::{EvaluationBudget, Problem, ProblemSpec};
pub use rng::{stream_for, RngState, StreamKey, StreamPurpose};
pub use sampling::{LambdaSchedule, RunningStats, SampleRecord, StoppingRule};
pub use solver::{IterationRecord, Outcome, Solver, SolverParams, SolverState};
pub use subproblem::{cauchy_step, solve_trust_region, StepResult};
