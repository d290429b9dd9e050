use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use bome::experiment::{gradcheck_spec, ExperimentConfig, PROBLEMS};
use bome::gradcheck::{check_oracle, probe_ranges, random_points, DEFAULT_H, DEFAULT_REL_TOL};
use bome::{build_problem, emit_summary_json, emit_trace_csv, parse_config, run_plan, Termination, Trace};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

/// Environment variable that overrides the output directory of config files.
const OUTPUT_DIR_ENV: &str = "BOME_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "results";

#[derive(Parser)]
#[command(name = "bome", version, about = "First-order bilevel optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment. Any sweep in the config is ignored.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the cross product of the config's sweep, in parallel.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Finite-difference check of a built-in problem's gradients.
    Gradcheck {
        problem: String,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_REL_TOL)]
        tol: f64,
    },
    /// List built-in problems.
    ListProblems,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long = "T")]
    inner_iters: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// `gradnorm` or `value`
    #[arg(long)]
    barrier: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; takes precedence over the environment and the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> anyhow::Result<()> {
        let pairs: [(&str, Option<Value>); 7] = [
            ("eta", self.eta.map(Value::from)),
            ("T", self.inner_iters.map(Value::from)),
            ("alpha", self.alpha.map(Value::from)),
            ("xi", self.xi.map(Value::from)),
            ("iters", self.iters.map(Value::from)),
            ("barrier", self.barrier.clone().map(Value::from)),
            ("seed", self.seed.map(Value::from)),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.apply_override(key, &v).with_context(|| format!("--{key}"))?;
            }
        }
        cfg.validate()?;
        Ok(())
    }
}

fn output_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUTPUT_DIR_ENV).filter(|s| !s.is_empty()) {
        return PathBuf::from(p);
    }
    cfg.output_path
        .as_deref()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn load(path: &Path, overrides: &Overrides) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn describe(i: usize, t: &Trace) -> String {
    let kkt = t
        .final_kkt_value()
        .map(|k| format!("{k:.3e}"))
        .unwrap_or_else(|| "-".into());
    let mut line = format!(
        "[{i}] {} {} iters={} final_f={:.6e} final_kkt={kkt} termination={:?}",
        t.problem_name,
        t.method,
        t.records.len(),
        t.final_f,
        t.termination
    );
    if let Some(e) = &t.error {
        line.push_str(&format!(" error=\"{e}\""));
    }
    line
}

/// Runs a plan, writes one CSV per run plus `summary.json`. Returns whether
/// every run finished without a numerical error.
fn execute(plan: &[ExperimentConfig], out_dir: &Path) -> anyhow::Result<bool> {
    let results = run_plan(plan);
    let mut traces = Vec::with_capacity(results.len());
    for (i, (cfg, result)) in plan.iter().zip(results).enumerate() {
        let trace = result.with_context(|| format!("run {i} ({})", cfg.label()))?;
        let name = if plan.len() == 1 {
            format!("{}.csv", cfg.label())
        } else {
            format!("{}_{i:04}.csv", cfg.label())
        };
        emit_trace_csv(&trace, &out_dir.join(name))?;
        println!("{}", describe(i, &trace));
        traces.push(trace);
    }
    let summary = out_dir.join("summary.json");
    emit_summary_json(&traces, &summary)?;
    println!("wrote {} trace(s) and {}", traces.len(), summary.display());
    Ok(traces.iter().all(|t| t.termination != Termination::NumericalError))
}

fn gradcheck(problem: &str, points: usize, seed: u64, tol: f64) -> anyhow::Result<bool> {
    let oracle = build_problem(&gradcheck_spec(problem), seed)?;
    let (vr, tr) = probe_ranges(problem);
    let pts = random_points(oracle.dims(), points, seed, vr, tr);
    let (rf, rg) = check_oracle(oracle.as_ref(), &pts, DEFAULT_H, tol);
    println!("{problem} grad_f {rf}");
    println!("{problem} grad_g {rg}");
    Ok(rf.passed && rg.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, overrides } => load(&config, &overrides).and_then(|mut cfg| {
            cfg.sweep.clear();
            let dir = output_dir(overrides.out.as_deref(), &cfg);
            execute(&[cfg], &dir)
        }),
        Command::Sweep { config, overrides } => load(&config, &overrides).and_then(|cfg| {
            if cfg.sweep.is_empty() {
                bail!("{} has no sweep; use `bome run`", config.display());
            }
            let dir = output_dir(overrides.out.as_deref(), &cfg);
            execute(&cfg.sweep_plan()?, &dir)
        }),
        Command::Gradcheck {
            problem,
            points,
            seed,
            tol,
        } => gradcheck(&problem, points, seed, tol),
        Command::ListProblems => {
            for (name, about) in PROBLEMS {
                println!("{name:<12} {about}");
            }
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
