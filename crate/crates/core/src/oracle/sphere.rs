use crate::error::{Error, Result};
use crate::rng::RngState;

use super::Problem;

/// `F(x, xi) = ||x - x*||^2 + xi` with `xi ~ N(0, noise_variance)`.
#[derive(Debug, Clone)]
pub struct NoisySphere {
    optimum: Vec<f64>,
    noise_variance: f64,
    initial: Vec<f64>,
}

/// Offset of the default starting point from the optimum, per coordinate.
pub const SPHERE_START_OFFSET: f64 = 2.0;

impl NoisySphere {
    /// Sphere centred at `optimum`, started `2` units away along every axis.
    pub fn new(dim: usize, noise_variance: f64, optimum: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "sphere dimension must be at least 1"));
        }
        if optimum.len() != dim {
            return Err(Error::invalid(
                "optimum",
                format!("expected {dim} coordinates, got {}", optimum.len()),
            ));
        }
        if !(noise_variance >= 0.0) {
            return Err(Error::invalid("noise_variance", "must be non-negative"));
        }
        let initial = optimum.iter().map(|v| v + SPHERE_START_OFFSET).collect();
        Ok(Self {
            optimum,
            noise_variance,
            initial,
        })
    }

    pub fn with_initial_point(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.optimum.len() {
            return Err(Error::invalid("initial_point", "dimension mismatch"));
        }
        self.initial = x0;
        Ok(self)
    }

    pub fn optimum(&self) -> &[f64] {
        &self.optimum
    }

    fn distance_sq(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.optimum)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

impl Problem for NoisySphere {
    fn name(&self) -> &str {
        "sphere"
    }

    fn dim(&self) -> usize {
        self.optimum.len()
    }

    fn evaluate(&self, x: &[f64], rng: &mut RngState) -> f64 {
        let noise = rng
            .next_normal(0.0, self.noise_variance)
            .expect("variance validated at construction");
        self.distance_sq(x) + noise
    }

    fn true_objective(&self, x: &[f64]) -> Option<f64> {
        Some(self.distance_sq(x))
    }

    fn optimum_value(&self) -> Option<f64> {
        Some(0.0)
    }

    fn initial_point(&self) -> Vec<f64> {
        self.initial.clone()
    }
}
