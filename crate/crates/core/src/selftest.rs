//! A quick invariant suite runnable from the command line.

use std::time::Instant;

use crate::model::{DesignSet, DiagonalQuadraticModel};
use crate::rng::RngState;
use crate::sampling::{sample_until, RunningStats, StoppingRule};
use crate::subproblem::{cauchy_bound, solve_trust_region};

/// Deliberate defects for checking that the suite notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Negates the central-difference gradient.
    FlipGradientSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub module: &'static str,
    pub invariant: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn name(&self) -> String {
        format!("{}/{}", self.module, self.invariant)
    }
}

const FIRST_OUTPUTS: [f64; 5] = [
    0.12701112204657714,
    0.3185275653967945,
    0.3091860155832701,
    0.8258468629271135,
    0.22162991578202287,
];

fn check(module: &'static str, invariant: &'static str, f: impl FnOnce() -> Result<(), String>) -> CheckResult {
    let (passed, detail) = match f() {
        Ok(()) => (true, String::new()),
        Err(d) => (false, d),
    };
    CheckResult {
        module,
        invariant,
        passed,
        detail,
    }
}

fn rng_reference() -> Result<(), String> {
    let mut rng = RngState::default_seed();
    for (i, &want) in FIRST_OUTPUTS.iter().enumerate() {
        let got = rng.next_uniform();
        if got.to_bits() != want.to_bits() {
            return Err(format!("output {i}: {got} != {want}"));
        }
    }
    Ok(())
}

fn rng_jump() -> Result<(), String> {
    let start = RngState::from_seed(77);
    let mut a = start.clone();
    a.advance(1 << 10);
    a.advance(1 << 10);
    let mut b = start.clone();
    b.advance(1 << 11);
    let mut c = start;
    for _ in 0..(1 << 11) {
        c.next_uniform();
    }
    if a != b || b != c {
        return Err("jump-ahead composition disagrees with stepping".into());
    }
    Ok(())
}

fn fit(ds: &DesignSet, values: &[f64], fault: Fault) -> DiagonalQuadraticModel {
    let sign = if fault == Fault::FlipGradientSign { -1.0 } else { 1.0 };
    ds.fit_with_gradient_sign(values, sign).expect("valid design")
}

fn model_exactness(fault: Fault) -> Result<(), String> {
    let mut rng = RngState::from_seed(101);
    for d in [1usize, 2, 10, 50] {
        for _ in 0..20 {
            let center: Vec<f64> = (0..d).map(|_| rng.next_range(-1.0, 1.0)).collect();
            let b0 = rng.next_range(-5.0, 5.0);
            let g: Vec<f64> = (0..d).map(|_| rng.next_range(-5.0, 5.0)).collect();
            let h: Vec<f64> = (0..d).map(|_| rng.next_range(-5.0, 5.0)).collect();
            let truth = DiagonalQuadraticModel {
                center: center.clone(),
                intercept: b0,
                gradient: g.clone(),
                hessian_diag: h.clone(),
                radius: 1.0,
            };
            let ds = DesignSet::new(center, rng.next_range(0.05, 2.0)).expect("positive radius");
            let values: Vec<f64> = ds.points().iter().map(|p| truth.value(p)).collect();
            let m = fit(&ds, &values, fault);
            let err = m
                .gradient
                .iter()
                .zip(&g)
                .chain(m.hessian_diag.iter().zip(&h))
                .map(|(a, b)| (a - b).abs())
                .fold((m.intercept - b0).abs(), f64::max);
            if err > 1e-10 {
                return Err(format!("d={d}: coefficient error {err:e}"));
            }
        }
    }
    Ok(())
}

fn central_difference_gradient(fault: Fault) -> Result<(), String> {
    // f = sum x^3; gradient error must be at most sqrt(d) delta^2.
    let d = 5;
    let mut rng = RngState::from_seed(202);
    let x0: Vec<f64> = (0..d).map(|_| rng.next_range(-0.4, 0.4)).collect();
    for delta in [0.2, 0.1, 0.05, 0.025] {
        let ds = DesignSet::new(x0.clone(), delta).expect("positive radius");
        let values: Vec<f64> = ds.points().iter().map(|p| p.iter().map(|v| v.powi(3)).sum()).collect();
        let m = fit(&ds, &values, fault);
        let err = m
            .gradient
            .iter()
            .zip(&x0)
            .map(|(g, x)| (g - 3.0 * x * x).powi(2))
            .sum::<f64>()
            .sqrt();
        let bound = (d as f64).sqrt() * delta * delta;
        if err > bound * (1.0 + 1e-9) {
            return Err(format!("delta={delta}: error {err:e} exceeds {bound:e}"));
        }
    }
    Ok(())
}

fn random_model(rng: &mut RngState, d: usize) -> DiagonalQuadraticModel {
    DiagonalQuadraticModel {
        center: vec![0.0; d],
        intercept: 0.0,
        gradient: (0..d).map(|_| rng.next_range(-2.0, 2.0)).collect(),
        hessian_diag: (0..d).map(|_| rng.next_range(-3.0, 3.0)).collect(),
        radius: 1.0,
    }
}

fn subproblem_brute_force() -> Result<(), String> {
    let mut rng = RngState::from_seed(303);
    for case in 0..60 {
        let d = 1 + case % 3;
        let m = random_model(&mut rng, d);
        let delta = rng.next_range(0.2, 2.0);
        let got = m.value_at_step(&solve_trust_region(&m, delta).step);
        for _ in 0..20_000 {
            // Uniform direction, radius biased toward the boundary.
            let dir: Vec<f64> = (0..d).map(|_| rng.next_normal(0.0, 1.0).expect("unit variance")).collect();
            let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = delta * rng.next_uniform().powf(1.0 / d as f64);
            let s: Vec<f64> = dir.iter().map(|v| v * r / n).collect();
            let v = m.value_at_step(&s);
            if v < got - 1e-6 {
                return Err(format!("case {case}: found {v} below returned {got}"));
            }
        }
    }
    Ok(())
}

fn subproblem_cauchy() -> Result<(), String> {
    let mut rng = RngState::from_seed(404);
    for case in 0..2_000 {
        let d = 1 + case % 20;
        let m = random_model(&mut rng, d);
        let delta = rng.next_range(0.01, 5.0);
        let res = solve_trust_region(&m, delta);
        let bound = cauchy_bound(&m, delta);
        if res.predicted_reduction < bound - 1e-12 * (1.0 + res.predicted_reduction.abs()) {
            return Err(format!("case {case}: reduction {} < bound {bound}", res.predicted_reduction));
        }
    }
    Ok(())
}

fn brute_force_n(values: &[f64], start: usize, rule: &StoppingRule) -> Option<usize> {
    (start.max(1)..=values.len()).find(|&n| {
        if (n as u64) < rule.min_samples() {
            return false;
        }
        let prefix = &values[..n];
        let mean = prefix.iter().sum::<f64>() / n as f64;
        let var = prefix.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        (var / n as f64).sqrt() <= rule.tolerance
    })
}

fn sampling_minimality() -> Result<(), String> {
    let mut rng = RngState::from_seed(505);
    for case in 0..300 {
        let len = 400;
        let scale = rng.next_range(0.1, 3.0);
        let values: Vec<f64> = (0..len).map(|_| rng.next_normal(1.0, scale * scale).expect("variance")).collect();
        let rule = StoppingRule::new(2 + case % 7, rng.next_range(0.05, 1.0));
        let expected = brute_force_n(&values, 0, &rule);
        let mut stats = RunningStats::new();
        let mut it = values.iter();
        let got = sample_until(&mut stats, &rule, || it.next().copied().ok_or(crate::oracle::BudgetExhausted));
        let got = got.ok().map(|n| n as usize);
        if got != expected {
            return Err(format!("case {case}: rule stopped at {got:?}, prefix scan gives {expected:?}"));
        }
    }
    Ok(())
}

/// Runs every check and reports each one.
pub fn run(fault: Fault) -> Vec<CheckResult> {
    let started = Instant::now();
    let results = vec![
        check("rng", "reference_outputs", rng_reference),
        check("rng", "jump_composition", rng_jump),
        check("model", "interpolation_exactness", || model_exactness(fault)),
        check("model", "central_difference_gradient", || central_difference_gradient(fault)),
        check("subproblem", "global_optimality", subproblem_brute_force),
        check("subproblem", "cauchy_decrease", subproblem_cauchy),
        check("sampling", "rule_minimality", sampling_minimality),
    ];
    log::debug!("self test finished in {:?}", started.elapsed());
    results
}
