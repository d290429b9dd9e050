//! First-order bilevel optimization through the value-function gap.
//!
//! The bilevel problem `min_v f(v, theta*(v))`, with `theta*(v)` minimizing
//! `g(v, .)`, is rewritten as the constrained problem
//! `min f(v, theta)` subject to `q(v, theta) = g(v, theta) - g*(v) <= 0`.
//! The solver estimates `q` with a few inner gradient steps and takes a
//! dynamic-barrier step that decreases `f` while driving `q` toward zero.
//! Only first-order oracles of `f` and `g` are required.
//!
//! ```
//! use bome::problems::MinimaxProblem;
//! use bome::{run, JointPoint, Method, SolverConfig};
//!
//! let cfg = SolverConfig { max_iters: 200, ..SolverConfig::with_step(0.1) };
//! let start = JointPoint::new(vec![1.0], vec![1.0]).unwrap();
//! let trace = run(&MinimaxProblem, &start, &cfg, Method::Bome).unwrap();
//! assert!(trace.final_point.norm() < 1e-3);
//! ```

pub mod baselines;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod inner;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod problems;
pub mod runner;
pub mod step;
pub mod types;
pub mod vecops;

pub use baselines::{gda_step, ogd_step, BaselineKind};
pub use error::{BomeError, Result};
pub use experiment::{build_problem, parse_config, resolve_start, run_experiment, run_plan, ExperimentConfig, ProblemSpec, StartSpec};
pub use gradcheck::{check_gradient, check_oracle, check_plug_in_estimator, GradCheckReport};
pub use inner::{attraction_point, inner_descent, Attraction, InnerResult};
pub use io::{emit_summary_json, emit_trace_csv, read_trace_csv, RunSummary};
pub use metrics::{kkt_attraction, kkt_exact, kkt_proxy, KktReport, KktVariant};
pub use oracle::{BilevelOracle, ValueFunction};
pub use runner::{run, run_grid, running_min_kkt, Job, Method, Termination, Trace};
pub use step::{barrier_solution, bome_step, BarrierSolution, MomentumState};
pub use types::{
    validate_config, BarrierKind, JointGradient, JointPoint, ProblemMetadata, SolverConfig, StepDiagnostics,
};
