//! Trust-region subproblem for diagonal quadratic models.
//!
//! [`solve_trust_region`] returns the global minimizer of
//! `q(s) = s'G + s' diag(H) s / 2` over `||s|| <= delta`. With a diagonal
//! Hessian the optimality conditions reduce to the scalar secular equation
//!
//! ```text
//! sum_i G_i^2 / (H_i + nu)^2 = delta^2,    nu >= max(0, -min_i H_i)
//! ```
//!
//! which is solved by safeguarded Newton iteration on `1/||s(nu)|| - 1/delta`.
//! The result is never worse than the Cauchy step.

use log::warn;

use crate::model::{norm, DiagonalQuadraticModel};

/// Components with `|G_i| <= HARD_CASE_RTOL * ||G||` count as zero when
/// checking for the hard case.
pub const HARD_CASE_RTOL: f64 = 1e-14;
/// Relative accuracy of `||s(nu)||` against the radius.
pub const BOUNDARY_RTOL: f64 = 1e-10;
pub const MAX_ROOT_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub step: Vec<f64>,
    /// `M(center) - M(center + step)`.
    pub predicted_reduction: f64,
    /// `||G|| min(||G|| / ||H||, delta) / 2`, the floor every step must reach.
    pub cauchy_reduction: f64,
}

/// Lower bound on the Cauchy decrease; `||G|| / ||H||` is infinite when
/// `H = 0`.
pub fn cauchy_bound(model: &DiagonalQuadraticModel, delta: f64) -> f64 {
    let g = model.gradient_norm();
    let h = model.hessian_norm();
    let ratio = if h == 0.0 { f64::INFINITY } else { g / h };
    0.5 * g * ratio.min(delta)
}

fn reduction(model: &DiagonalQuadraticModel, step: &[f64]) -> f64 {
    // Evaluate q(0) - q(s) directly rather than through the intercept.
    -step
        .iter()
        .zip(model.gradient.iter().zip(&model.hessian_diag))
        .map(|(s, (g, h))| s * g + 0.5 * h * s * s)
        .sum::<f64>()
}

/// Minimizes the model along `-G` within the ball.
pub fn cauchy_step(model: &DiagonalQuadraticModel, delta: f64) -> StepResult {
    let g_norm = model.gradient_norm();
    let bound = cauchy_bound(model, delta);
    if g_norm == 0.0 {
        return StepResult {
            step: vec![0.0; model.dim()],
            predicted_reduction: 0.0,
            cauchy_reduction: bound,
        };
    }
    // Curvature along the unit steepest-descent direction.
    let curvature: f64 = model
        .gradient
        .iter()
        .zip(&model.hessian_diag)
        .map(|(g, h)| h * g * g)
        .sum::<f64>()
        / (g_norm * g_norm);
    let t = if curvature > 0.0 {
        (g_norm / curvature).min(delta)
    } else {
        delta
    };
    let step: Vec<f64> = model.gradient.iter().map(|g| -t * g / g_norm).collect();
    StepResult {
        predicted_reduction: reduction(model, &step),
        step,
        cauchy_reduction: bound,
    }
}

/// Step `s_i(nu) = -G_i / (H_i + nu)`, with zeros for the listed indices.
fn shifted_step(model: &DiagonalQuadraticModel, nu: f64, skip: &[bool]) -> Vec<f64> {
    model
        .gradient
        .iter()
        .zip(&model.hessian_diag)
        .zip(skip)
        .map(|((g, h), &sk)| if sk { 0.0 } else { -g / (h + nu) })
        .collect()
}

/// Global minimizer of the diagonal model over the ball of radius `delta`.
pub fn solve_trust_region(model: &DiagonalQuadraticModel, delta: f64) -> StepResult {
    let d = model.dim();
    let g_norm = model.gradient_norm();
    let h_min = model.hessian_diag.iter().copied().fold(f64::INFINITY, f64::min);
    let cauchy = cauchy_step(model, delta);

    let finish = |step: Vec<f64>| -> StepResult {
        let predicted = reduction(model, &step);
        if predicted < cauchy.predicted_reduction {
            return cauchy.clone();
        }
        StepResult {
            step,
            predicted_reduction: predicted,
            cauchy_reduction: cauchy.cauchy_reduction,
        }
    };

    // Interior Newton step for a positive definite model.
    if h_min > 0.0 {
        let s = shifted_step(model, 0.0, &vec![false; d]);
        if norm(&s) <= delta {
            return finish(s);
        }
    }

    let nu_low = (-h_min).max(0.0);
    // Coordinates in the eigenspace of the smallest eigenvalue.
    let at_min: Vec<bool> = model.hessian_diag.iter().map(|&h| h == h_min).collect();
    let zero_tol = HARD_CASE_RTOL * g_norm;
    let hard = at_min
        .iter()
        .zip(&model.gradient)
        .all(|(&m, g)| !m || g.abs() <= zero_tol);

    if hard {
        // ||s(nu)|| stays bounded as nu -> nu_low. When that limit is inside
        // the ball, the minimizer sits at nu = nu_low with an extra boundary
        // component along the minimum-curvature axis.
        let s_low = shifted_step(model, nu_low, &at_min);
        let s_low_norm = norm(&s_low);
        if s_low_norm <= delta {
            let mut step = s_low;
            if h_min <= 0.0 {
                let j = at_min.iter().position(|&m| m).expect("non-empty");
                let tau = (delta * delta - s_low_norm * s_low_norm).max(0.0).sqrt();
                step[j] = if model.gradient[j] > 0.0 { -tau } else { tau };
            } else {
                for (s, (&m, (g, h))) in step
                    .iter_mut()
                    .zip(at_min.iter().zip(model.gradient.iter().zip(&model.hessian_diag)))
                {
                    if m {
                        *s = -g / h;
                    }
                }
            }
            return finish(step);
        }
    }

    if g_norm == 0.0 {
        // Only reachable with H >= 0 everywhere, where s = 0 is optimal.
        return finish(vec![0.0; d]);
    }

    match secular_root(model, delta, nu_low) {
        Some(nu) => {
            let mut step = shifted_step(model, nu, &vec![false; d]);
            let n = norm(&step);
            if n > delta {
                let scale = delta / n;
                step.iter_mut().for_each(|s| *s *= scale);
            }
            finish(step)
        }
        None => {
            warn!("secular equation did not converge in {MAX_ROOT_ITERATIONS} iterations; using the Cauchy step");
            cauchy
        }
    }
}

/// Finds `nu > nu_low` with `||s(nu)|| = delta`.
fn secular_root(model: &DiagonalQuadraticModel, delta: f64, nu_low: f64) -> Option<f64> {
    let d = model.dim();
    let none = vec![false; d];
    let g_norm = model.gradient_norm();
    let h_min = model.hessian_diag.iter().copied().fold(f64::INFINITY, f64::min);
    // For nu >= hi every |H_i + nu| >= ||G|| / delta, so ||s(nu)|| <= delta.
    let mut lo = nu_low;
    let mut hi = (g_norm / delta - h_min).max(nu_low);
    if hi <= lo {
        hi = lo + g_norm / delta;
    }

    // phi(nu) = 1/||s(nu)|| - 1/delta is increasing and nearly linear in nu.
    let phi = |nu: f64| -> (f64, f64) {
        let s = shifted_step(model, nu, &none);
        let sn = norm(&s);
        // d||s||/dnu = -sum s_i^2 / (H_i + nu) / ||s||
        let dsn: f64 = -s
            .iter()
            .zip(&model.hessian_diag)
            .map(|(si, h)| si * si / (h + nu))
            .sum::<f64>()
            / sn;
        (1.0 / sn - 1.0 / delta, -dsn / (sn * sn))
    };

    let mut nu = hi;
    for _ in 0..MAX_ROOT_ITERATIONS {
        let s_norm = norm(&shifted_step(model, nu, &none));
        if nu > lo && (s_norm - delta).abs() <= BOUNDARY_RTOL * delta {
            return Some(nu);
        }
        let (f, df) = phi(nu);
        if f.is_finite() && f < 0.0 {
            lo = lo.max(nu);
        } else if f > 0.0 {
            hi = hi.min(nu);
        }
        let newton = nu - f / df;
        nu = if f.is_finite() && df.is_finite() && df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            return Some(hi);
        }
    }
    None
}
