//! Flat `dotted.key = value` configuration.
//!
//! One setting per line; values are JSON (`0.5`, `true`, `null`,
//! `["a", "b"]`, `"text"`), and a bare word is read as a string. Lines
//! starting with `#` are comments. Unknown keys are rejected.
//!
//! Per-variant overrides use `variant.<name>.<key>`, where `<key>` is
//! `kind` (`solver` or `random_search`), `reps_per_point`, or any `solver.*`
//! key without its prefix.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::harness::{ExperimentSpec, VariantKind, VariantSpec};
use crate::oracle::ProblemSpec;
use crate::sampling::LambdaSchedule;
use crate::solver::SolverParams;

pub struct KeyInfo {
    pub key: &'static str,
    /// Default as JSON text.
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(key: &'static str, default: &'static str, help: &'static str) -> KeyInfo {
    KeyInfo { key, default, help }
}

pub const KEYS: &[KeyInfo] = &[
    key("experiment.id", "\"default\"", "label written to every CSV row"),
    key("experiment.budget", "1000", "oracle replications per macro-replication, tuning included"),
    key("experiment.macroreps", "1", "number of macro-replications (m)"),
    key("experiment.postreps", "1", "post-replications per recommendation (l)"),
    key("experiment.seed", "12345", "master seed for every random stream"),
    key("experiment.alpha", "0.1", "relative optimality gap for the solvability profile"),
    key("experiment.threads", "0", "worker threads; 0 uses all cores"),
    key("experiment.grid_points", "11", "budget fractions in trajectory.csv and profile.csv"),
    key("experiment.variants", "[\"astrodf\"]", "variant names, in output order"),
    key("problem.name", "\"sphere\"", "sphere, rosenbrock or san"),
    key("problem.dim", "null", "dimension; null means 10 for sphere, 20 for rosenbrock, 13 for san"),
    key("problem.noise_variance", "1.0", "sphere: variance of the additive noise"),
    key("problem.xi_mean", "1.0", "rosenbrock: mean of the multiplicative noise"),
    key("problem.xi_variance", "0.01", "rosenbrock: variance of the multiplicative noise"),
    key("solver.eta", "0.5", "model fitness threshold in (0, 1)"),
    key("solver.theta", "0.1", "sufficient reduction constant for direct search"),
    key("solver.mu", "1000.0", "criticality threshold"),
    key("solver.gamma_expand", "1.5", "radius expansion factor after a success"),
    key("solver.gamma_shrink", "0.75", "radius shrink factor after a failure"),
    key("solver.kappa", "null", "adaptive sampling constant; null tunes it"),
    key("solver.kappa_min", "0.01", "lower bound on the tuned kappa"),
    key("solver.delta_init", "null", "initial radius; null tunes it by pilot runs"),
    key("solver.delta_max", "null", "radius cap; null estimates it from the search box"),
    key("solver.lambda_base", "4", "minimum sample size per point"),
    key("solver.lambda_exponent", "1.5", "growth exponent of the sample size floor"),
    key("solver.lambda_scale", "2.0", "scale of the sample size floor"),
    key("solver.direct_search", "true", "accept the best design point when it beats the model step"),
    key("random_search.reps_per_point", "10", "replications per random-search point"),
];

/// Keys accepted under `variant.<name>.` besides the solver keys.
const VARIANT_EXTRA_KEYS: &[&str] = &["kind", "reps_per_point"];

fn default_of(key: &str) -> Option<Value> {
    KEYS.iter()
        .find(|k| k.key == key)
        .map(|k| serde_json::from_str(k.default).expect("registry defaults are valid JSON"))
}

fn is_solver_subkey(sub: &str) -> bool {
    KEYS.iter().any(|k| k.key.strip_prefix("solver.") == Some(sub))
}

/// `(variant name, sub-key)` for a `variant.*` key.
fn split_variant_key(key: &str) -> Option<(&str, &str)> {
    let rest = key.strip_prefix("variant.")?;
    let (name, sub) = rest.rsplit_once('.')?;
    (!name.is_empty()).then_some((name, sub))
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.iter().any(|k| k.key == key) {
        return Ok(());
    }
    if let Some((_, sub)) = split_variant_key(key) {
        if is_solver_subkey(sub) || VARIANT_EXTRA_KEYS.contains(&sub) {
            return Ok(());
        }
        return Err(Error::config(key, format!("unknown variant setting `{sub}`")));
    }
    Err(Error::config(key, "unknown key"))
}

/// Parses a raw value: JSON first, then a bare word as a string.
pub fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn type_error(key: &str, expected: &str, v: &Value) -> Error {
    Error::config(key, format!("expected {expected}, found {v}"))
}

/// Explicit settings; everything else falls back to the registry defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, Value>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::config(
                    line,
                    format!("line {}: expected `key = value`", lineno + 1),
                ));
            };
            cfg.set(k.trim(), parse_value(v))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: Value) -> Result<()> {
        check_key(key)?;
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "expected key=value"))?;
        self.set(k.trim(), parse_value(v))
    }

    /// Later settings win.
    pub fn merge(&mut self, other: &Config) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Value {
        self.values
            .get(key)
            .cloned()
            .or_else(|| default_of(key))
            .unwrap_or(Value::Null)
    }

    fn f64_at(&self, key: &str) -> Result<f64> {
        let v = self.get(key);
        v.as_f64().ok_or_else(|| type_error(key, "a number", &v))
    }

    fn opt_f64_at(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            Value::Null => Ok(None),
            v => v.as_f64().map(Some).ok_or_else(|| type_error(key, "a number or null", &v)),
        }
    }

    fn u64_at(&self, key: &str) -> Result<u64> {
        let v = self.get(key);
        v.as_u64().ok_or_else(|| type_error(key, "a non-negative integer", &v))
    }

    fn bool_at(&self, key: &str) -> Result<bool> {
        let v = self.get(key);
        v.as_bool().ok_or_else(|| type_error(key, "true or false", &v))
    }

    fn string_at(&self, key: &str) -> Result<String> {
        match self.get(key) {
            Value::String(s) => Ok(s),
            v => Err(type_error(key, "a string", &v)),
        }
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn id(&self) -> Result<String> {
        self.string_at("experiment.id")
    }

    /// The budget only if it was given explicitly.
    pub fn budget_if_set(&self) -> Result<Option<u64>> {
        if self.is_set("experiment.budget") {
            self.budget().map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.u64_at("experiment.seed")
    }

    pub fn budget(&self) -> Result<u64> {
        self.u64_at("experiment.budget")
    }

    pub fn threads(&self) -> Result<usize> {
        Ok(self.u64_at("experiment.threads")? as usize)
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let name = self.string_at("problem.name")?;
        let dim = match self.get("problem.dim") {
            Value::Null => None,
            _ => Some(self.u64_at("problem.dim")? as usize),
        };
        let spec = match name.as_str() {
            "sphere" => ProblemSpec::Sphere {
                dim: dim.unwrap_or(10),
                noise_variance: self.f64_at("problem.noise_variance")?,
            },
            "rosenbrock" => ProblemSpec::Rosenbrock {
                dim: dim.unwrap_or(20),
                xi_mean: self.f64_at("problem.xi_mean")?,
                xi_variance: self.f64_at("problem.xi_variance")?,
            },
            "san" => {
                if dim.is_some_and(|d| d != 13) {
                    return Err(Error::config("problem.dim", "san is fixed at 13 dimensions"));
                }
                ProblemSpec::San
            }
            other => {
                return Err(Error::config(
                    "problem.name",
                    format!("unknown problem {other:?} (expected sphere, rosenbrock or san)"),
                ))
            }
        };
        spec.build().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::config(format!("problem.{name}"), reason),
            e => Error::config("problem", e.to_string()),
        })?;
        Ok(spec)
    }

    /// Solver parameters from `prefix` + solver sub-keys, falling back to
    /// the `solver.*` keys.
    fn params_with(&self, lookup: &dyn Fn(&str) -> String) -> Result<SolverParams> {
        let f = |sub: &str| self.f64_at(&lookup(sub));
        let of = |sub: &str| self.opt_f64_at(&lookup(sub));
        let params = SolverParams {
            eta: f("eta")?,
            theta: f("theta")?,
            mu: f("mu")?,
            gamma_expand: f("gamma_expand")?,
            gamma_shrink: f("gamma_shrink")?,
            kappa: of("kappa")?,
            kappa_min: f("kappa_min")?,
            delta_init: of("delta_init")?,
            delta_max: of("delta_max")?,
            lambda: LambdaSchedule {
                base: self.u64_at(&lookup("lambda_base"))?,
                exponent: f("lambda_exponent")?,
                scale: f("lambda_scale")?,
            },
            direct_search: self.bool_at(&lookup("direct_search"))?,
            seed: self.seed()?,
        };
        params.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::config(lookup(&name.replace('.', "_")), reason),
            e => e,
        })?;
        Ok(params)
    }

    pub fn solver_params(&self) -> Result<SolverParams> {
        self.params_with(&|sub| format!("solver.{sub}"))
    }

    fn variant_params(&self, name: &str) -> Result<SolverParams> {
        self.params_with(&|sub| {
            let vk = format!("variant.{name}.{sub}");
            if self.values.contains_key(&vk) {
                vk
            } else {
                format!("solver.{sub}")
            }
        })
    }

    pub fn variant_names(&self) -> Result<Vec<String>> {
        let v = self.get("experiment.variants");
        let names: Option<Vec<String>> = v
            .as_array()
            .map(|a| a.iter().map(|s| s.as_str().map(str::to_string)).collect())
            .unwrap_or(None);
        names.ok_or_else(|| type_error("experiment.variants", "a list of names", &v))
    }

    pub fn experiment_spec(&self) -> Result<ExperimentSpec> {
        let names = self.variant_names()?;
        for k in self.values.keys() {
            if let Some((name, _)) = split_variant_key(k) {
                if !names.iter().any(|n| n == name) {
                    return Err(Error::config(k.as_str(), format!("variant {name:?} is not listed in experiment.variants")));
                }
            }
        }
        let mut variants = Vec::with_capacity(names.len());
        for name in names {
            let kind_key = format!("variant.{name}.kind");
            let kind = match self.values.get(&kind_key) {
                Some(Value::String(s)) => s.clone(),
                Some(v) => return Err(type_error(&kind_key, "a string", v)),
                None if name == "random_search" => "random_search".into(),
                None => "solver".into(),
            };
            let kind = match kind.as_str() {
                "solver" => VariantKind::Solver(self.variant_params(&name)?),
                "random_search" => {
                    let rk = format!("variant.{name}.reps_per_point");
                    let reps = if self.values.contains_key(&rk) {
                        self.u64_at(&rk)?
                    } else {
                        self.u64_at("random_search.reps_per_point")?
                    };
                    VariantKind::RandomSearch { reps_per_point: reps }
                }
                other => {
                    return Err(Error::config(kind_key, format!("unknown kind {other:?} (expected solver or random_search)")))
                }
            };
            variants.push(VariantSpec { name, kind });
        }
        let spec = ExperimentSpec {
            id: self.id()?,
            problem: self.problem_spec()?,
            variants,
            budget: self.budget()?,
            macroreps: self.u64_at("experiment.macroreps")?,
            postreps: self.u64_at("experiment.postreps")?,
            seed: self.seed()?,
            alpha: self.f64_at("experiment.alpha")?,
            tuning: self.solver_params()?,
            grid_points: self.u64_at("experiment.grid_points")? as usize,
            threads: self.threads()?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Every registry key with its effective value, followed by the
    /// explicit variant settings, in a form [`Config::parse`] accepts.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            let _ = writeln!(out, "{} = {}", k.key, self.get(k.key));
        }
        for (k, v) in &self.values {
            if k.starts_with("variant.") {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }
}

/// Help text listing every key with its default.
pub fn key_listing() -> String {
    let width = KEYS.iter().map(|k| k.key.len()).max().unwrap_or(0);
    let mut out = String::from("Config keys (default in brackets):\n");
    for k in KEYS {
        let _ = writeln!(out, "  {:width$}  [{}]  {}", k.key, k.default, k.help);
    }
    let _ = writeln!(
        out,
        "  variant.<name>.<key>  per-variant override of any solver.* key, or kind / reps_per_point"
    );
    out
}
