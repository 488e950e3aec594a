//! Stochastic simulation oracles.
//!
//! A [`Problem`] turns a point and a random stream into one noisy replication
//! `F(x, xi)`. The solver never sees objective values from anywhere else, and
//! every replication it asks for is charged to an [`EvaluationBudget`].

mod rosenbrock;
mod san;
mod sphere;

use std::fmt;

pub use rosenbrock::Rosenbrock;
pub use san::{StochasticActivityNetwork, SAN_ARCS, SAN_NODES};
pub use sphere::NoisySphere;

use crate::error::{Error, Result};
use crate::rng::RngState;

/// Box used for radius estimation and random search when a problem has none.
pub const DEFAULT_BOX_HALF_WIDTH: f64 = 10.0;

/// A stochastic objective `f(x) = E[F(x, xi)]`.
///
/// Implementations must be deterministic in the stream: the same point and
/// the same starting state always yield the same value and the same final
/// state.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// One replication of the simulation at `x`.
    fn evaluate(&self, x: &[f64], rng: &mut RngState) -> f64;

    /// Analytic `f(x)` when known.
    fn true_objective(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Optimal value `f*` when known.
    fn optimum_value(&self) -> Option<f64> {
        None
    }

    fn initial_point(&self) -> Vec<f64>;

    /// Per-coordinate `(lo, hi)` bounds, used only for radius estimation and
    /// the random-search baseline.
    fn bounding_box(&self) -> Option<Vec<(f64, f64)>> {
        None
    }

    /// The bounding box, or `[-10, 10]^d` when the problem has none.
    fn search_box(&self) -> Vec<(f64, f64)> {
        self.bounding_box().unwrap_or_else(|| {
            vec![(-DEFAULT_BOX_HALF_WIDTH, DEFAULT_BOX_HALF_WIDTH); self.dim()]
        })
    }
}

/// Signal that no replications remain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetExhausted;

impl fmt::Display for BudgetExhausted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("evaluation budget exhausted")
    }
}

impl std::error::Error for BudgetExhausted {}

impl From<BudgetExhausted> for Error {
    fn from(_: BudgetExhausted) -> Self {
        Error::BudgetExhausted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvaluationBudget {
    total: u64,
    spent: u64,
}

impl EvaluationBudget {
    pub fn new(total: u64) -> Self {
        Self { total, spent: 0 }
    }

    /// A budget of which `spent` units are already used up elsewhere.
    pub fn with_spent(total: u64, spent: u64) -> Self {
        assert!(spent <= total, "spent {spent} exceeds total {total}");
        Self { total, spent }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn spent(&self) -> u64 {
        self.spent
    }

    pub fn remaining(&self) -> u64 {
        self.total - self.spent
    }

    pub fn is_exhausted(&self) -> bool {
        self.spent >= self.total
    }

    /// Charges one replication.
    pub fn charge(&mut self) -> Result<(), BudgetExhausted> {
        if self.spent >= self.total {
            return Err(BudgetExhausted);
        }
        self.spent += 1;
        Ok(())
    }
}

/// Runs one replication at `x`, charging it to `budget`.
pub fn evaluate_with_budget<P: Problem + ?Sized>(
    problem: &P,
    x: &[f64],
    rng: &mut RngState,
    budget: &mut EvaluationBudget,
) -> Result<f64, BudgetExhausted> {
    budget.charge()?;
    Ok(problem.evaluate(x, rng))
}

/// Parameters naming one of the built-in problems.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Sphere {
        dim: usize,
        noise_variance: f64,
    },
    Rosenbrock {
        dim: usize,
        xi_mean: f64,
        xi_variance: f64,
    },
    San,
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Sphere { .. } => "sphere",
            ProblemSpec::Rosenbrock { .. } => "rosenbrock",
            ProblemSpec::San => "san",
        }
    }

    pub fn build(&self) -> Result<Box<dyn Problem>> {
        Ok(match *self {
            ProblemSpec::Sphere {
                dim,
                noise_variance,
            } => Box::new(NoisySphere::new(dim, noise_variance, vec![0.0; dim])?),
            ProblemSpec::Rosenbrock {
                dim,
                xi_mean,
                xi_variance,
            } => Box::new(Rosenbrock::new(dim, xi_mean, xi_variance)?),
            ProblemSpec::San => Box::new(StochasticActivityNetwork::new()),
        })
    }
}
