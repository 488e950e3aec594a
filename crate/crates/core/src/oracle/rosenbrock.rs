use crate::error::{Error, Result};
use crate::rng::RngState;

use super::Problem;

/// Rosenbrock function with multiplicative noise on every squared term:
///
/// `F(x, xi) = sum_i 100 (x_{i+1} - xi_i x_i^2)^2 + (xi_i x_i - 1)^2`
///
/// with `xi_i ~ N(xi_mean, xi_variance)` drawn independently per replication.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    dim: usize,
    xi_mean: f64,
    xi_variance: f64,
}

impl Rosenbrock {
    pub fn new(dim: usize, xi_mean: f64, xi_variance: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("dim", format!("rosenbrock needs dim >= 2, got {dim}")));
        }
        if !(xi_variance >= 0.0) || !xi_mean.is_finite() {
            return Err(Error::invalid(
                "xi_variance",
                "noise mean must be finite and variance non-negative",
            ));
        }
        Ok(Self {
            dim,
            xi_mean,
            xi_variance,
        })
    }

    /// The integrand for a fixed noise vector (`xi.len() == dim - 1`).
    pub fn evaluate_with_xi(x: &[f64], xi: &[f64]) -> f64 {
        debug_assert_eq!(xi.len() + 1, x.len());
        x.windows(2)
            .zip(xi)
            .map(|(w, &z)| {
                let a = 100.0 * (w[1] - z * w[0] * w[0]).powi(2);
                let b = (z * w[0] - 1.0).powi(2);
                a + b
            })
            .sum()
    }
}

impl Problem for Rosenbrock {
    fn name(&self) -> &str {
        "rosenbrock"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64], rng: &mut RngState) -> f64 {
        let xi: Vec<f64> = (0..self.dim - 1)
            .map(|_| {
                rng.next_normal(self.xi_mean, self.xi_variance)
                    .expect("variance validated at construction")
            })
            .collect();
        Self::evaluate_with_xi(x, &xi)
    }

    fn true_objective(&self, x: &[f64]) -> Option<f64> {
        let m1 = self.xi_mean;
        let m2 = self.xi_variance + m1 * m1;
        Some(
            x.windows(2)
                .map(|w| {
                    let (a, b) = (w[0], w[1]);
                    let a2 = a * a;
                    100.0 * (b * b - 2.0 * b * m1 * a2 + m2 * a2 * a2) + m2 * a2 - 2.0 * m1 * a
                        + 1.0
                })
                .sum(),
        )
    }

    /// The classical `(-1.2, 1, -1.2, 1, ...)` start.
    fn initial_point(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| if i % 2 == 0 { -1.2 } else { 1.0 })
            .collect()
    }
}
