//! Outer loop: drives the solver (or a baseline) and records a [`Trace`].

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{gda_step, ogd_step};
use crate::error::{BomeError, Result};
use crate::inner::inner_descent;
use crate::metrics::{kkt_exact, kkt_proxy, KktReport};
use crate::oracle::{check_point, BilevelOracle};
use crate::step::{bome_step, grad_q_hat, MomentumState};
use crate::types::{validate_config, JointGradient, JointPoint, SolverConfig, StepDiagnostics};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Bome,
    NaiveGda,
    OptimisticGd,
}

impl std::str::FromStr for Method {
    type Err = BomeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bome" => Ok(Method::Bome),
            "naive_gda" | "gda" => Ok(Method::NaiveGda),
            "optimistic_gd" | "ogd" => Ok(Method::OptimisticGd),
            other => Err(BomeError::Parse(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Bome => "bome",
            Method::NaiveGda => "naive_gda",
            Method::OptimisticGd => "optimistic_gd",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIters,
    KktTol,
    NumericalError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<StepDiagnostics>,
    pub config_snapshot: SolverConfig,
    pub problem_name: String,
    pub method: Method,
    pub termination: Termination,
    pub error: Option<String>,
    /// Point after the last applied update.
    pub final_point: JointPoint,
    pub final_f: f64,
    /// Measure at `final_point`: exact when the oracle supports it.
    pub final_kkt: Option<KktReport>,
    /// Copied from the problem metadata, when declared.
    pub known_optimum: Option<JointPoint>,
}

impl Trace {
    pub fn total_wall_micros(&self) -> u64 {
        self.records.iter().map(|r| r.wall_time_micros).sum()
    }

    pub fn final_kkt_value(&self) -> Option<f64> {
        self.final_kkt.as_ref().map(|r| r.total)
    }
}

/// Exact measure when the oracle has a value function, otherwise the proxy.
pub fn monitored_kkt<O: BilevelOracle + ?Sized>(
    oracle: &O,
    point: &JointPoint,
    cfg: &SolverConfig,
) -> Result<KktReport> {
    if oracle.has_exact_value() {
        kkt_exact(oracle, point)
    } else {
        kkt_proxy(oracle, point, cfg)
    }
}

/// q_hat and |grad q_hat| at a point, for baseline traces.
fn plug_in_monitor<O: BilevelOracle + ?Sized>(
    oracle: &O,
    point: &JointPoint,
    cfg: &SolverConfig,
) -> Result<(f64, f64)> {
    let inner = inner_descent(oracle, &point.v, &point.theta, cfg.inner_iters, cfg.inner_step)?;
    let gq = grad_q_hat(oracle, &point.v, &point.theta, &inner.theta_t);
    Ok((inner.g_before - inner.g_after, gq.norm()))
}

/// Runs `method` from `start` for up to `cfg.max_iters` iterations.
///
/// Row `k` of the trace describes the point *before* update `k`. The measure
/// is evaluated on rows with `k % kkt_eval_every == 0`, on the last row, and
/// at the final point. A numerical failure ends the run with the trace kept.
pub fn run<O: BilevelOracle + ?Sized>(
    oracle: &O,
    start: &JointPoint,
    cfg: &SolverConfig,
    method: Method,
) -> Result<Trace> {
    validate_config(cfg, oracle.metadata())?;
    start.validate()?;
    check_point(oracle, start)?;

    let mut records = Vec::with_capacity(cfg.max_iters);
    let mut point = start.clone();
    let mut momentum = MomentumState::new();
    let mut ogd_prev: Option<JointGradient> = None;
    let mut termination = Termination::MaxIters;
    let mut error = None;

    for k in 0..cfg.max_iters {
        let started = Instant::now();
        let f_value = oracle.f(&point);
        let outcome: Result<(JointPoint, f64, f64, f64, f64, f64)> = match method {
            Method::Bome => bome_step(oracle, &point, cfg, &mut momentum).map(|(next, sol)| {
                let norm = sol.delta.norm();
                (next, sol.q_hat, sol.lambda, sol.phi, norm, sol.grad_qhat.norm())
            }),
            Method::NaiveGda | Method::OptimisticGd => {
                plug_in_monitor(oracle, &point, cfg).and_then(|(q_hat, gq)| {
                    let next = if method == Method::NaiveGda {
                        gda_step(oracle, &point, cfg.outer_step)
                    } else {
                        let (next, g) = ogd_step(oracle, &point, ogd_prev.as_ref(), cfg.outer_step);
                        ogd_prev = Some(g);
                        next
                    };
                    let moved = point.distance(&next) / cfg.outer_step;
                    if next.is_finite() {
                        Ok((next, q_hat, 0.0, 0.0, moved, gq))
                    } else {
                        Err(BomeError::Numerical("iterate became non-finite".into()))
                    }
                })
            }
        };
        let (next, q_hat, lambda, phi, delta_norm, grad_qhat_norm) = match outcome {
            Ok(o) => o,
            Err(BomeError::Numerical(msg)) => {
                termination = Termination::NumericalError;
                error = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        };

        let last = k + 1 == cfg.max_iters;
        let kkt_value = if k % cfg.kkt_eval_every == 0 || last {
            match monitored_kkt(oracle, &point, cfg) {
                Ok(r) => Some(r.total),
                Err(BomeError::Numerical(msg)) => {
                    termination = Termination::NumericalError;
                    error = Some(msg);
                    break;
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        records.push(StepDiagnostics {
            iter_k: k,
            f_value,
            q_hat,
            lambda,
            phi,
            delta_norm,
            grad_qhat_norm,
            kkt_value,
            wall_time_micros: started.elapsed().as_micros() as u64,
        });
        if let (Some(tol), Some(v)) = (cfg.stop_kkt_tol, kkt_value) {
            if v < tol {
                termination = Termination::KktTol;
                break;
            }
        }
        point = next;
    }

    let final_kkt = if termination == Termination::NumericalError {
        None
    } else {
        monitored_kkt(oracle, &point, cfg).ok()
    };
    Ok(Trace {
        records,
        config_snapshot: cfg.clone(),
        problem_name: oracle.name().to_string(),
        method,
        termination,
        error,
        final_f: oracle.f(&point),
        final_point: point,
        final_kkt,
        known_optimum: oracle.metadata().and_then(|m| m.known_optimum.clone()),
    })
}

/// `(k, min_{j <= k} K_j)` over every evaluated row, followed by the final
/// point's measure (indexed by the number of rows) when present.
pub fn running_min_kkt(trace: &Trace) -> Result<Vec<(usize, f64)>> {
    let mut evals: Vec<(usize, f64)> = trace
        .records
        .iter()
        .filter_map(|r| r.kkt_value.map(|v| (r.iter_k, v)))
        .collect();
    if let Some(v) = trace.final_kkt_value() {
        evals.push((trace.records.len(), v));
    }
    if evals.is_empty() {
        return Err(BomeError::NoKktEvaluations);
    }
    let mut best = f64::INFINITY;
    Ok(evals
        .into_iter()
        .map(|(k, v)| {
            best = best.min(v);
            (k, best)
        })
        .collect())
}

/// One entry of a sweep.
#[derive(Clone, Debug)]
pub struct Job {
    pub start: JointPoint,
    pub config: SolverConfig,
    pub method: Method,
}

/// Runs jobs in parallel against one shared (immutable) oracle. Results come
/// back in job order.
pub fn run_grid<O: BilevelOracle + ?Sized>(oracle: &O, jobs: &[Job]) -> Vec<Result<Trace>> {
    jobs.par_iter()
        .map(|j| run(oracle, &j.start, &j.config, j.method))
        .collect()
}
