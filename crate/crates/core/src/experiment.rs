//! Experiment descriptions: JSON config parsing, sweep expansion, and the
//! registry that turns a problem name into an oracle and a start point.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{BomeError, Result};
use crate::inner::inner_descent;
use crate::oracle::BilevelOracle;
use crate::problems::{
    CoresetProblem, DegenerateLlsProblem, DoubleWellProblem, HypercleanGenerator, MinimaxProblem,
    RidgeRegProblem,
};
use rayon::prelude::*;

use crate::runner::{run, Method, Trace};
use crate::types::{validate_config, BarrierKind, JointPoint, SolverConfig};

pub const MAX_SWEEP_RUNS: usize = 10_000;

/// Name and one-line description of every built-in problem.
pub const PROBLEMS: &[(&str, &str)] = &[
    ("coreset", "closest point to a target inside a softmax-weighted convex hull (v: 4, theta: 2)"),
    ("minimax", "bilinear game min_v v*theta, theta in argmax v*theta' (v: 1, theta: 1)"),
    ("lls", "degenerate inner level g = (theta_1 - v)^2 (v: 1, theta: 2)"),
    ("hyperclean", "per-example weights on a corrupted synthetic classification set"),
    ("ridge", "per-feature learnable ridge penalty on synthetic regression data"),
    ("double_well", "1-D double-well inner problem (attraction-point measure only)"),
];

/// Solver fields as written in JSON. Everything is optional; missing fields
/// take the defaults of [`SolverConfig`], with `alpha` following `xi`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(rename = "T", alias = "inner_iters", skip_serializing_if = "Option::is_none")]
    pub inner_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier: Option<BarrierKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SolverSpec {
    pub fn resolve(&self) -> SolverConfig {
        let d = SolverConfig::default();
        let xi = self.xi.unwrap_or(d.outer_step);
        let separate = match (self.xi_v, self.xi_theta) {
            (None, None) => None,
            (a, b) => Some((a.unwrap_or(xi), b.unwrap_or(xi))),
        };
        SolverConfig {
            outer_step: xi,
            inner_step: self.alpha.unwrap_or(xi),
            inner_iters: self.inner_iters.unwrap_or(d.inner_iters),
            eta: self.eta.unwrap_or(d.eta),
            barrier: self.barrier.unwrap_or(d.barrier),
            max_iters: self.iters.unwrap_or(d.max_iters),
            separate_outer_steps: separate,
            momentum: self.momentum.unwrap_or(d.momentum),
            kkt_eval_every: self.kkt_every.unwrap_or(d.kkt_eval_every),
            stop_kkt_tol: self.kkt_tol,
            rng_seed: self.seed.unwrap_or(d.rng_seed),
        }
    }
}

/// `"coreset"` or `{"name": "coreset", ...params}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    Name(String),
    Detailed {
        name: String,
        #[serde(flatten)]
        params: Map<String, Value>,
    },
}

impl ProblemSpec {
    pub fn name(&self) -> &str {
        match self {
            ProblemSpec::Name(n) | ProblemSpec::Detailed { name: n, .. } => n,
        }
    }

    pub fn params(&self) -> Map<String, Value> {
        match self {
            ProblemSpec::Name(_) => Map::new(),
            ProblemSpec::Detailed { params, .. } => params.clone(),
        }
    }
}

/// A named preset (`"start1"`, `"default"`, ...) or explicit vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartSpec {
    Preset(String),
    Explicit { v: Vec<f64>, theta: Vec<f64> },
}

impl Default for StartSpec {
    fn default() -> Self {
        StartSpec::Preset("default".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub start: StartSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sweep: BTreeMap<String, Vec<Value>>,
}

impl ExperimentConfig {
    pub fn solver(&self) -> SolverConfig {
        self.solver.resolve()
    }

    /// Sets one field by its sweep/flag name.
    pub fn apply_override(&mut self, key: &str, value: &Value) -> Result<()> {
        fn de<T: serde::de::DeserializeOwned>(key: &str, value: &Value) -> Result<T> {
            serde_json::from_value(value.clone())
                .map_err(|e| BomeError::Parse(format!("bad value {value} for '{key}': {e}")))
        }
        let s = &mut self.solver;
        match key {
            "xi" => s.xi = Some(de(key, value)?),
            "alpha" => s.alpha = Some(de(key, value)?),
            "T" | "inner_iters" => s.inner_iters = Some(de(key, value)?),
            "eta" => s.eta = Some(de(key, value)?),
            "barrier" => {
                s.barrier = Some(match value {
                    Value::String(text) => text.parse()?,
                    _ => de(key, value)?,
                })
            }
            "iters" => s.iters = Some(de(key, value)?),
            "xi_v" => s.xi_v = Some(de(key, value)?),
            "xi_theta" => s.xi_theta = Some(de(key, value)?),
            "momentum" => s.momentum = Some(de(key, value)?),
            "kkt_every" => s.kkt_every = Some(de(key, value)?),
            "kkt_tol" => s.kkt_tol = Some(de(key, value)?),
            "seed" => s.seed = Some(de(key, value)?),
            "start" => self.start = de(key, value)?,
            "method" => {
                let text: String = de(key, value)?;
                self.method = text.parse()?;
            }
            other => {
                return Err(BomeError::Parse(format!("unknown sweep/override field '{other}'")))
            }
        }
        Ok(())
    }

    /// Collects every violated constraint.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !PROBLEMS.iter().any(|(n, _)| *n == self.problem.name()) {
            errs.push(format!("problem: unknown problem '{}'", self.problem.name()));
        } else if let Err(e) = check_problem_params(self.problem.name(), &self.problem.params()) {
            errs.push(format!("problem: {e}"));
        }
        if let Err(BomeError::InvalidConfig(list)) = validate_config(&self.solver(), None) {
            errs.extend(list.into_iter().map(|e| format!("solver: {e}")));
        }
        let runs: usize = self
            .sweep
            .values()
            .map(Vec::len)
            .try_fold(1usize, |acc, n| acc.checked_mul(n))
            .unwrap_or(usize::MAX);
        if runs > MAX_SWEEP_RUNS {
            errs.push(format!("sweep: {runs} runs exceeds the limit of {MAX_SWEEP_RUNS}"));
        }
        for (key, values) in &self.sweep {
            if values.is_empty() {
                errs.push(format!("sweep: '{key}' has no values"));
            }
            for v in values {
                let mut probe = self.clone();
                probe.sweep.clear();
                if let Err(e) = probe.apply_override(key, v) {
                    errs.push(format!("sweep: {e}"));
                } else if let Err(BomeError::InvalidConfig(list)) =
                    validate_config(&probe.solver(), None)
                {
                    errs.extend(list.into_iter().map(|e| format!("sweep {key}={v}: {e}")));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(BomeError::InvalidConfig(errs))
        }
    }

    /// Cross product of the sweep, in lexicographic key order with the last
    /// key varying fastest. Without a sweep, a single run.
    pub fn sweep_plan(&self) -> Result<Vec<ExperimentConfig>> {
        let mut base = self.clone();
        base.sweep.clear();
        let mut plan = vec![base];
        for (key, values) in &self.sweep {
            let mut next = Vec::with_capacity(plan.len() * values.len());
            for cfg in &plan {
                for v in values {
                    let mut c = cfg.clone();
                    c.apply_override(key, v)?;
                    next.push(c);
                }
            }
            plan = next;
        }
        Ok(plan)
    }

    /// Short label like `coreset_bome` used for output file names.
    pub fn label(&self) -> String {
        format!("{}_{}", self.problem.name(), self.method)
    }
}

/// Parses and validates a JSON experiment description.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        BomeError::Parse(format!(
            "config parse error at line {}, column {} (field '{}'): {}",
            inner.line(),
            inner.column(),
            path,
            inner
        ))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn check_problem_params(name: &str, params: &Map<String, Value>) -> Result<()> {
    let allowed: &[&str] = match name {
        "coreset" => &["target", "vertices"],
        "hyperclean" => &[
            "m_train", "m_val", "features", "corrupt_frac", "classes", "separation", "ridge_c", "data_seed",
        ],
        "ridge" => &["m_train", "m_val", "features", "noise", "data_seed"],
        "double_well" => &["tilt"],
        _ => &[],
    };
    let unknown: Vec<&String> = params.keys().filter(|k| !allowed.contains(&k.as_str())).collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(BomeError::Parse(format!(
            "unknown parameter(s) {unknown:?} for '{name}' (allowed: {allowed:?})"
        )))
    }
}

fn param<T: serde::de::DeserializeOwned>(params: &Map<String, Value>, key: &str, default: T) -> Result<T> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| BomeError::Parse(format!("problem parameter '{key}': {e}"))),
    }
}

/// Builds the oracle for a problem spec. Synthetic data uses `data_seed` when
/// given, otherwise the solver seed.
pub fn build_problem(spec: &ProblemSpec, seed: u64) -> Result<Box<dyn BilevelOracle>> {
    let params = spec.params();
    check_problem_params(spec.name(), &params)?;
    Ok(match spec.name() {
        "coreset" => {
            let d = CoresetProblem::default();
            Box::new(CoresetProblem {
                target: param(&params, "target", d.target)?,
                vertices: param(&params, "vertices", d.vertices)?,
            })
        }
        "minimax" => Box::new(MinimaxProblem),
        "lls" => Box::new(DegenerateLlsProblem),
        "double_well" => Box::new(DoubleWellProblem::tilted(param(&params, "tilt", 0.0)?)),
        "hyperclean" => {
            let d = HypercleanGenerator::default();
            let gen = HypercleanGenerator {
                seed: param(&params, "data_seed", seed)?,
                m_train: param(&params, "m_train", d.m_train)?,
                m_val: param(&params, "m_val", d.m_val)?,
                features: param(&params, "features", d.features)?,
                corrupt_frac: param(&params, "corrupt_frac", d.corrupt_frac)?,
                classes: param(&params, "classes", d.classes)?,
                separation: param(&params, "separation", d.separation)?,
                ridge_c: param(&params, "ridge_c", d.ridge_c)?,
            };
            Box::new(gen.generate()?)
        }
        "ridge" => Box::new(RidgeRegProblem::synthetic(
            param(&params, "data_seed", seed)?,
            param(&params, "m_train", 40)?,
            param(&params, "m_val", 40)?,
            param(&params, "features", 10)?,
            param(&params, "noise", 0.5)?,
        )?),
        other => return Err(BomeError::InvalidProblem(format!("unknown problem '{other}'"))),
    })
}

/// Problem spec used for finite-difference checks. `hyperclean` is shrunk to
/// 20 training examples: with hundreds of terms in `g`, round-off in central
/// differences swamps the smallest per-example losses.
pub fn gradcheck_spec(problem: &str) -> ProblemSpec {
    match problem {
        "hyperclean" => ProblemSpec::Detailed {
            name: problem.to_string(),
            params: serde_json::json!({"m_train": 20, "m_val": 10})
                .as_object()
                .cloned()
                .unwrap_or_default(),
        },
        _ => ProblemSpec::Name(problem.to_string()),
    }
}

/// Preset names accepted by [`resolve_start`] for a problem.
pub fn start_presets(problem: &str) -> &'static [&'static str] {
    match problem {
        "coreset" => &["default", "start1", "start2", "start3"],
        "hyperclean" => &["default", "pretrained"],
        "ridge" => &["default", "zero", "pretrained"],
        _ => &["default"],
    }
}

/// Resolves a start spec against an oracle.
///
/// * coreset: `start1..start3` put `theta` at the three reference points with
///   `v = 0` (`default` = `start1`);
/// * minimax: `(1, 1)`; lls: `v = 0, theta = (0, 0)`; double_well: `(0, 0.5)`;
/// * hyperclean: all weights `0.5`, `theta` from 500 inner steps on that
///   weighting (`default` = `pretrained`);
/// * ridge: `zero` (default) or `pretrained` = inner optimum at `v = 0`.
pub fn resolve_start(oracle: &dyn BilevelOracle, start: &StartSpec) -> Result<JointPoint> {
    let (m, n) = oracle.dims();
    let name = oracle.name();
    let p = match start {
        StartSpec::Explicit { v, theta } => JointPoint::new(v.clone(), theta.clone())?,
        StartSpec::Preset(preset) => match (name, preset.as_str()) {
            ("coreset", "default" | "start1") => CoresetProblem::start(0)?,
            ("coreset", "start2") => CoresetProblem::start(1)?,
            ("coreset", "start3") => CoresetProblem::start(2)?,
            ("minimax", "default") => JointPoint::new(vec![1.0], vec![1.0])?,
            ("lls", "default") => JointPoint::new(vec![0.0], vec![0.0, 0.0])?,
            ("double_well", "default") => JointPoint::new(vec![0.0], vec![0.5])?,
            ("ridge", "default" | "zero") => JointPoint::new(vec![0.0; m], vec![0.0; n])?,
            ("ridge", "pretrained") => {
                let v = vec![0.0; m];
                let theta = oracle.exact_inner_opt(&v)?;
                JointPoint::new(v, theta)?
            }
            ("hyperclean", "default" | "pretrained") => {
                let v = vec![0.5; m];
                let origin = JointPoint {
                    v: v.clone(),
                    theta: vec![0.0; n],
                };
                let alpha = 1.0 / theta_curvature(oracle, &origin).max(1e-3);
                let inner = inner_descent(oracle, &v, &origin.theta, 500, alpha)?;
                JointPoint::new(v, inner.theta_t)?
            }
            (_, other) => {
                return Err(BomeError::Parse(format!(
                    "unknown start preset '{other}' for '{name}' (known: {:?})",
                    start_presets(name)
                )))
            }
        },
    };
    if p.dims() != (m, n) {
        return Err(BomeError::Dimension(format!(
            "start has dims {:?}, problem '{name}' expects {:?}",
            p.dims(),
            (m, n)
        )));
    }
    Ok(p)
}

/// Builds the problem and start for one config and runs it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Trace> {
    let solver = cfg.solver();
    let oracle = build_problem(&cfg.problem, solver.rng_seed)?;
    let start = resolve_start(oracle.as_ref(), &cfg.start)?;
    run(oracle.as_ref(), &start, &solver, cfg.method)
}

/// Runs every entry of a sweep plan in parallel, each against its own oracle.
/// Results come back in plan order.
pub fn run_plan(plan: &[ExperimentConfig]) -> Vec<Result<Trace>> {
    plan.par_iter().map(run_experiment).collect()
}

/// Largest eigenvalue of `grad_theta^2 g` at `point`, by power iteration on
/// finite-difference Hessian-vector products.
fn theta_curvature(oracle: &dyn BilevelOracle, point: &JointPoint) -> f64 {
    let n = point.theta.len();
    let base = oracle.grad_g(point).dtheta;
    let eps = 1e-6;
    let mut u: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..50 {
        let norm = crate::vecops::norm(&u);
        if norm == 0.0 {
            break;
        }
        u.iter_mut().for_each(|x| *x /= norm);
        let mut probe = point.clone();
        crate::vecops::axpy(eps, &u, &mut probe.theta);
        let hu: Vec<f64> = oracle
            .grad_g(&probe)
            .dtheta
            .iter()
            .zip(&base)
            .map(|(a, b)| (a - b) / eps)
            .collect();
        lambda = crate::vecops::dot(&u, &hu);
        u = hu;
    }
    lambda.abs()
}
