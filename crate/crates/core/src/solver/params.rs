use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::LambdaSchedule;

/// Constants of the trust-region loop.
///
/// `delta_init`, `delta_max` and `kappa` may be left unset; tuning (or the
/// fallbacks in [`Solver::new`](super::Solver::new)) fills them in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Model fitness threshold in (0, 1).
    pub eta: f64,
    /// Sufficient-reduction constant for direct-search acceptance.
    pub theta: f64,
    /// Criticality threshold: the model step is accepted only if `mu ||G|| >= delta`.
    pub mu: f64,
    pub gamma_expand: f64,
    pub gamma_shrink: f64,
    /// Adaptive sampling constant.
    pub kappa: Option<f64>,
    /// Floor applied when `kappa` is derived from the initial estimate.
    pub kappa_min: f64,
    pub delta_init: Option<f64>,
    pub delta_max: Option<f64>,
    pub lambda: LambdaSchedule,
    pub direct_search: bool,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            eta: 0.5,
            theta: 0.1,
            mu: 1000.0,
            gamma_expand: 1.5,
            gamma_shrink: 0.75,
            kappa: None,
            kappa_min: 1e-2,
            delta_init: None,
            delta_max: None,
            lambda: LambdaSchedule::default(),
            direct_search: true,
            seed: 12345,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} must be positive and finite")))
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::invalid("eta", format!("{} is not in (0, 1)", self.eta)));
        }
        positive("theta", self.theta)?;
        positive("mu", self.mu)?;
        if !(self.gamma_expand > 1.0) || !self.gamma_expand.is_finite() {
            return Err(Error::invalid("gamma_expand", format!("{} must exceed 1", self.gamma_expand)));
        }
        if !(self.gamma_shrink > 0.0 && self.gamma_shrink < 1.0) {
            return Err(Error::invalid("gamma_shrink", format!("{} is not in (0, 1)", self.gamma_shrink)));
        }
        if let Some(k) = self.kappa {
            positive("kappa", k)?;
        }
        positive("kappa_min", self.kappa_min)?;
        if let Some(d) = self.delta_init {
            positive("delta_init", d)?;
        }
        if let Some(d) = self.delta_max {
            positive("delta_max", d)?;
        }
        if let (Some(d0), Some(dm)) = (self.delta_init, self.delta_max) {
            if d0 > dm {
                return Err(Error::invalid(
                    "delta_init",
                    format!("{d0} exceeds delta_max = {dm}"),
                ));
            }
        }
        self.lambda.validate()
    }

    /// `kappa` derived from an initial estimate `f0` at radius `delta0`.
    pub fn kappa_from_estimate(&self, f0: f64, delta0: f64) -> f64 {
        (f0.abs() / (delta0 * delta0)).max(self.kappa_min)
    }
}
