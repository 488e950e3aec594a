//! Quadratic interpolation models with diagonal Hessian on a coordinate
//! design set.
//!
//! The design set around `x0` with radius `delta` is
//! `[x0, x0 + delta e_1, ..., x0 + delta e_d, x0 - delta e_1, ..., x0 - delta e_d]`.
//! On that set the interpolation system has a closed-form solution:
//!
//! ```text
//! beta_0 = F(x0)
//! G_i    = (F(x0 + delta e_i) - F(x0 - delta e_i)) / (2 delta)
//! H_i    = (F(x0 + delta e_i) + F(x0 - delta e_i) - 2 F(x0)) / delta^2
//! ```
//!
//! Nothing here samples; callers pass in whatever estimates they have.

use crate::error::{Error, Result};

/// Relative radius below which central differences carry no information.
pub const MIN_RELATIVE_RADIUS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSet {
    center: Vec<f64>,
    radius: f64,
}

impl DesignSet {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("center", "design center must have at least one coordinate"));
        }
        if radius == 0.0 {
            return Err(Error::DegenerateGeometry {
                radius,
                center_norm: norm(&center),
            });
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid("radius", format!("{radius} must be positive and finite")));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Number of design points, `2d + 1`.
    pub fn len(&self) -> usize {
        2 * self.dim() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The `i`-th design point, `0 <= i <= 2d`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        let d = self.dim();
        assert!(i <= 2 * d, "design index {i} out of range for d = {d}");
        let mut p = self.center.clone();
        match i {
            0 => {}
            i if i <= d => p[i - 1] += self.radius,
            i => p[i - d - 1] -= self.radius,
        }
        p
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Fits the diagonal quadratic to one estimate per design point, in
    /// design order.
    pub fn fit(&self, values: &[f64]) -> Result<DiagonalQuadraticModel> {
        self.fit_with_gradient_sign(values, 1.0)
    }

    /// `fit` with the central differences multiplied by `sign`; the self
    /// test uses `-1` to check that it notices.
    pub(crate) fn fit_with_gradient_sign(&self, values: &[f64], sign: f64) -> Result<DiagonalQuadraticModel> {
        let d = self.dim();
        if values.len() != self.len() {
            return Err(Error::invalid(
                "values",
                format!("expected {} estimates, got {}", self.len(), values.len()),
            ));
        }
        let center_norm = norm(&self.center);
        if self.radius < MIN_RELATIVE_RADIUS * (1.0 + center_norm) {
            return Err(Error::DegenerateGeometry {
                radius: self.radius,
                center_norm,
            });
        }
        let f0 = values[0];
        let (plus, minus) = values[1..].split_at(d);
        let h = self.radius;
        let gradient = plus
            .iter()
            .zip(minus)
            .map(|(fp, fm)| sign * (fp - fm) / (2.0 * h))
            .collect();
        let hessian_diag = plus
            .iter()
            .zip(minus)
            .map(|(fp, fm)| (fp + fm - 2.0 * f0) / (h * h))
            .collect();
        Ok(DiagonalQuadraticModel {
            center: self.center.clone(),
            intercept: f0,
            gradient,
            hessian_diag,
            radius: self.radius,
        })
    }
}

/// `M(x0 + s) = beta_0 + s'G + s' diag(H) s / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalQuadraticModel {
    pub center: Vec<f64>,
    pub intercept: f64,
    pub gradient: Vec<f64>,
    pub hessian_diag: Vec<f64>,
    pub radius: f64,
}

impl DiagonalQuadraticModel {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Model value at the step `s` from the center.
    pub fn value_at_step(&self, s: &[f64]) -> f64 {
        let lin: f64 = s.iter().zip(&self.gradient).map(|(a, g)| a * g).sum();
        let quad: f64 = s
            .iter()
            .zip(&self.hessian_diag)
            .map(|(a, h)| a * a * h)
            .sum();
        self.intercept + lin + 0.5 * quad
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.value_at_step(&self.step_to(x))
    }

    /// `G + diag(H) (x - center)`.
    pub fn gradient_at(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center)
            .zip(self.gradient.iter().zip(&self.hessian_diag))
            .map(|((xi, ci), (g, h))| g + h * (xi - ci))
            .collect()
    }

    pub fn gradient_norm(&self) -> f64 {
        norm(&self.gradient)
    }

    /// Spectral norm of the diagonal Hessian.
    pub fn hessian_norm(&self) -> f64 {
        self.hessian_diag.iter().fold(0.0, |m, h| m.max(h.abs()))
    }

    fn step_to(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, c)| a - c).collect()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn fit_fn(center: &[f64], radius: f64, f: impl Fn(&[f64]) -> f64) -> DiagonalQuadraticModel {
        let ds = DesignSet::new(center.to_vec(), radius).unwrap();
        let values: Vec<f64> = ds.points().iter().map(|p| f(p)).collect();
        ds.fit(&values).unwrap()
    }

    #[test]
    fn design_points_two_dims() {
        let ds = DesignSet::new(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(
            ds.points(),
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![-1.0, 0.0],
                vec![0.0, -1.0]
            ]
        );
        let ds = DesignSet::new(vec![3.0], 0.5).unwrap();
        assert_eq!(ds.points(), vec![vec![3.0], vec![3.5], vec![2.5]]);
    }

    #[test]
    fn design_points_lie_in_ball() {
        let mut rng = RngState::from_seed(9);
        for d in 1..12 {
            let center: Vec<f64> = (0..d).map(|_| rng.next_range(-5.0, 5.0)).collect();
            let radius = rng.next_range(0.01, 3.0);
            let ds = DesignSet::new(center.clone(), radius).unwrap();
            let pts = ds.points();
            assert_eq!(pts.len(), 2 * d + 1);
            let max_dist = pts
                .iter()
                .map(|p| norm(&p.iter().zip(&center).map(|(a, b)| a - b).collect::<Vec<_>>()))
                .fold(0.0, f64::max);
            assert!((max_dist - radius).abs() <= 1e-12 * (1.0 + radius));
            for i in 1..=d {
                let (p, m) = (&pts[i], &pts[i + d]);
                for j in 0..d {
                    if j == i - 1 {
                        assert!((p[j] - center[j] - radius).abs() < 1e-12);
                        assert!((center[j] - m[j] - radius).abs() < 1e-12);
                    } else {
                        assert_eq!(p[j], center[j]);
                        assert_eq!(m[j], center[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn constant_function() {
        let m = fit_fn(&[1.0, -2.0, 4.0], 0.3, |_| 7.0);
        assert_eq!(m.intercept, 7.0);
        assert!(m.gradient.iter().all(|&g| g == 0.0));
        assert!(m.hessian_diag.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn sum_of_squares() {
        let m = fit_fn(&[0.0; 3], 1.0, |x| x.iter().map(|v| v * v).sum());
        assert_eq!(m.intercept, 0.0);
        assert_eq!(m.gradient, vec![0.0; 3]);
        assert_eq!(m.hessian_diag, vec![2.0; 3]);
    }

    #[test]
    fn linear_function() {
        let m = fit_fn(&[0.0; 3], 0.5, |x| x[0]);
        assert_eq!(m.gradient, vec![1.0, 0.0, 0.0]);
        assert_eq!(m.hessian_diag, vec![0.0; 3]);
    }

    #[test]
    fn cubic_gradient_error_is_delta_squared() {
        // ((0.1)^3 - (-0.1)^3) / 0.2 = 0.01 while the true derivative is 0.
        let m = fit_fn(&[0.0], 0.1, |x| x[0].powi(3));
        assert!((m.gradient[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn interpolates_design_values() {
        let mut rng = RngState::from_seed(21);
        for d in [1usize, 4, 9] {
            let center: Vec<f64> = (0..d).map(|_| rng.next_range(-2.0, 2.0)).collect();
            let ds = DesignSet::new(center, 0.7).unwrap();
            let values: Vec<f64> = (0..ds.len()).map(|_| rng.next_range(-10.0, 10.0)).collect();
            let m = ds.fit(&values).unwrap();
            let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (p, v) in ds.points().iter().zip(&values) {
                assert!((m.value(p) - v).abs() <= 1e-10 * scale);
            }
            assert_eq!(m.value(ds.center()), values[0]);
        }
    }

    #[test]
    fn value_and_gradient() {
        let m = DiagonalQuadraticModel {
            center: vec![0.0, 0.0],
            intercept: 1.0,
            gradient: vec![1.0, 0.0],
            hessian_diag: vec![0.0, 0.0],
            radius: 1.0,
        };
        assert_eq!(m.value(&[1.0, 0.0]), 2.0);
        assert_eq!(m.gradient_at(&[0.0, 0.0]), m.gradient);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngState::from_seed(33);
        let d = 5;
        let m = DiagonalQuadraticModel {
            center: (0..d).map(|_| rng.next_range(-1.0, 1.0)).collect(),
            intercept: rng.next_range(-1.0, 1.0),
            gradient: (0..d).map(|_| rng.next_range(-3.0, 3.0)).collect(),
            hessian_diag: (0..d).map(|_| rng.next_range(-3.0, 3.0)).collect(),
            radius: 1.0,
        };
        let h = 1e-6;
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|_| rng.next_range(-2.0, 2.0)).collect();
            let g = m.gradient_at(&x);
            for i in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (m.value(&xp) - m.value(&xm)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6, "coordinate {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn degenerate_radius_rejected() {
        let ds = DesignSet::new(vec![1e6, 0.0], 1e-9).unwrap();
        assert!(matches!(ds.fit(&[0.0; 5]), Err(Error::DegenerateGeometry { .. })));
        assert!(matches!(
            DesignSet::new(vec![0.0], 0.0),
            Err(Error::DegenerateGeometry { .. })
        ));
        assert!(DesignSet::new(vec![0.0], -1.0).is_err());
    }

    #[test]
    fn wrong_value_count_rejected() {
        let ds = DesignSet::new(vec![0.0, 0.0], 1.0).unwrap();
        assert!(ds.fit(&[0.0; 4]).is_err());
    }
}
