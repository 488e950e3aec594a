use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use astrodf::config::{key_listing, parse_value, Config};
use astrodf::harness::output::{read_results, write_csv_file, IterationRow, ITERATIONS_HEADER};
use astrodf::harness::{fraction_grid, run_experiment, solvability_profile, write_profile_csv};
use astrodf::selftest::{self, Fault};
use astrodf::solver::{check_history, tune_and_initialize};
use astrodf::Error;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "astrodf", version, about = "Adaptive-sampling trust-region solver for noisy simulation oracles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tune and run the solver once; writes iterations.csv.
    Solve(Common),
    /// Run a macro-replicated experiment; writes results, iterations, trajectory and profile CSVs.
    Experiment {
        /// Experiment spec file (same format as --config).
        spec: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Recompute profile.csv from an existing results.csv.
    Profile {
        /// results.csv to read; defaults to <out>/results.csv.
        #[arg(long)]
        results: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the fast invariant suite.
    Selftest {
        #[arg(long, hide = true, env = "ASTRODF_SELFTEST_FAULT")]
        inject_fault: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    dim: Option<u64>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    macroreps: Option<u64>,
    #[arg(long)]
    postreps: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<u64>,
    #[arg(long)]
    no_direct_search: bool,
    /// Output directory.
    #[arg(long, env = "ASTRODF_OUT", default_value = "astrodf-out")]
    out: PathBuf,
}

impl Common {
    fn resolve(&self, spec: Option<&Path>) -> astrodf::Result<Config> {
        let mut cfg = Config::new();
        for path in spec.into_iter().chain(self.config.as_deref()) {
            cfg.merge(&Config::from_file(path)?);
        }
        let flags: [(&str, Option<String>); 8] = [
            ("problem.name", self.problem.clone()),
            ("problem.dim", self.dim.map(|v| v.to_string())),
            ("experiment.budget", self.budget.map(|v| v.to_string())),
            ("experiment.seed", self.seed.map(|v| v.to_string())),
            ("experiment.macroreps", self.macroreps.map(|v| v.to_string())),
            ("experiment.postreps", self.postreps.map(|v| v.to_string())),
            ("experiment.threads", self.threads.map(|v| v.to_string())),
            ("solver.direct_search", self.no_direct_search.then(|| "false".to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, parse_value(&v))?;
            }
        }
        for s in &self.set {
            cfg.set_assignment(s)?;
        }
        Ok(cfg)
    }

    fn start(&self, spec: Option<&Path>) -> astrodf::Result<Config> {
        let cfg = self.resolve(spec)?;
        fs::create_dir_all(&self.out)?;
        fs::write(self.out.join("resolved_config"), cfg.resolved())?;
        Ok(cfg)
    }
}

fn solve(common: &Common) -> astrodf::Result<()> {
    let cfg = common.start(None)?;
    let problem_spec = cfg.problem_spec()?;
    let problem = problem_spec.build()?;
    let params = cfg.solver_params()?;
    let budget = cfg.budget()?;
    let (solver, state, report) = tune_and_initialize(problem.as_ref(), &params, budget, 0)?;
    let state = solver.run_from(state);
    check_history(&state, solver.params(), report.pilot_spend.min(budget))?;

    let id = cfg.id()?;
    let rows = state.history.iter().map(|r| {
        IterationRow {
            experiment_id: id.clone(),
            variant: "solve".into(),
            problem: problem_spec.name().into(),
            macro_rep: 0,
            record: r.clone(),
        }
        .to_record()
    });
    write_csv_file(&common.out.join("iterations.csv"), &ITERATIONS_HEADER, rows)?;

    let x = state.incumbent_point();
    println!("problem: {} (d = {})", problem_spec.name(), problem.dim());
    println!("iterations: {}", state.history.len());
    println!("budget spent: {} (tuning {})", state.budget.spent(), report.pilot_spend);
    println!("final radius: {:.6e}", state.delta);
    println!("incumbent estimate: {:.6e}", state.incumbent.mean());
    if let Some(f) = problem.true_objective(x) {
        println!("true objective at incumbent: {f:.6e}");
    }
    Ok(())
}

fn experiment(spec_path: Option<&Path>, common: &Common) -> astrodf::Result<()> {
    let cfg = common.start(spec_path)?;
    let spec = cfg.experiment_spec()?;
    let result = run_experiment(&spec)?;
    for path in result.write_csvs(&common.out)? {
        println!("wrote {}", path.display());
    }
    for v in &spec.variants {
        let finals: Vec<f64> = result
            .curves(&v.name)
            .iter()
            .filter_map(|c| c.last().map(|p| p.1))
            .collect();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        println!("{}: mean final post-replicated objective {mean:.6e}", v.name);
    }
    Ok(())
}

fn profile(results: Option<&Path>, common: &Common) -> astrodf::Result<()> {
    let cfg = common.start(None)?;
    let path = results.map_or_else(|| common.out.join("results.csv"), Path::to_path_buf);
    let file = fs::File::open(&path).map_err(|e| Error::Config {
        key: "--results".into(),
        reason: format!("{}: {e}", path.display()),
    })?;
    let rows = read_results(file)?;
    let Some(first) = rows.first() else {
        return Err(Error::Config {
            key: "--results".into(),
            reason: "results file has no rows".into(),
        });
    };
    let (id, problem_name) = (first.experiment_id.clone(), first.problem.clone());

    let mut by_variant: Vec<(String, BTreeMap<u64, Vec<(u64, f64)>>)> = Vec::new();
    for r in &rows {
        if !by_variant.iter().any(|(v, _)| *v == r.variant) {
            by_variant.push((r.variant.clone(), BTreeMap::new()));
        }
        let entry = by_variant.iter_mut().find(|(v, _)| *v == r.variant).expect("inserted above");
        entry.1.entry(r.macro_rep).or_default().push((r.cumulative_budget, r.post_mean));
    }

    let mut problem_cfg = cfg.clone();
    problem_cfg.set_assignment(&format!("problem.name={problem_name}"))?;
    let f_star = match problem_cfg.problem_spec()?.build()?.optimum_value() {
        Some(f) => f,
        None => {
            let best = rows.iter().map(|r| r.post_mean).fold(f64::INFINITY, f64::min);
            println!("{problem_name}: no known optimum; using best observed estimate {best:.6e}");
            best
        }
    };
    let budget = cfg
        .budget_if_set()?
        .unwrap_or_else(|| rows.iter().map(|r| r.cumulative_budget).max().unwrap_or(0));
    let alpha = cfg.experiment_spec()?.alpha;
    let grid = fraction_grid(cfg.experiment_spec()?.grid_points);
    let profile: Vec<_> = by_variant
        .into_iter()
        .map(|(v, runs)| {
            let curves: Vec<Vec<(u64, f64)>> = runs.into_values().collect();
            let points = solvability_profile(&curves, budget, alpha, Some(f_star), &grid);
            (v, points)
        })
        .collect();
    let out = common.out.join("profile.csv");
    write_profile_csv(&out, &id, &problem_name, &profile)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn selftest(fault: Option<&str>) -> ExitCode {
    let fault = match fault {
        None | Some("") | Some("none") => Fault::None,
        Some("flip-gradient-sign") => Fault::FlipGradientSign,
        Some(other) => {
            eprintln!("error: unknown fault {other:?} (expected flip-gradient-sign)");
            return ExitCode::from(2);
        }
    };
    let results = selftest::run(fault);
    let mut failed = 0;
    for r in &results {
        if r.passed {
            println!("PASS {}", r.name());
        } else {
            failed += 1;
            println!("FAIL {}: {}", r.name(), r.detail);
        }
    }
    if failed == 0 {
        println!("all {} checks passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} checks failed", results.len());
        ExitCode::FAILURE
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidParameter { .. } => 2,
        Error::Invariant(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let keys = key_listing();
    let mut command = Cli::command().after_help(keys.clone());
    for name in ["solve", "experiment", "profile"] {
        command = command.mut_subcommand(name, |c| c.after_help(keys.clone()));
    }
    let cli = match Cli::from_arg_matches(&command.get_matches()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Solve(common) => solve(common),
        Command::Experiment { spec, common } => experiment(spec.as_deref(), common),
        Command::Profile { results, common } => profile(results.as_deref(), common),
        Command::Selftest { inject_fault } => return selftest(inject_fault.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
