//! One outer iteration of the dynamic-barrier method.
//!
//! Given the current point `(v_k, theta_k)`:
//!
//! 1. run `T` inner gradient steps on `g(v_k, .)` from `theta_k` to get `theta_T`;
//! 2. form `q_hat(v, theta) = g(v, theta) - g(v, theta_T)` with `theta_T` frozen;
//! 3. move along `delta = grad f + lambda * grad q_hat`, where `lambda` is the
//!    closed-form multiplier of the barrier subproblem
//!    `min |grad f - delta|^2  s.t.  <grad q_hat, delta> >= phi`.

use serde::{Deserialize, Serialize};

use crate::error::{BomeError, Result};
use crate::inner::{inner_descent, InnerResult};
use crate::oracle::{check_point, BilevelOracle};
use crate::types::{BarrierKind, JointGradient, JointPoint, SolverConfig};

/// Squared-norm floor for the singular case `grad q_hat = 0`.
pub const SINGULAR_NORM_SQ: f64 = 1e-24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierSolution {
    pub lambda: f64,
    pub phi: f64,
    pub delta: JointGradient,
    pub grad_f: JointGradient,
    pub grad_qhat: JointGradient,
    pub q_hat: f64,
    pub inner: InnerResult,
}

/// `g(v, theta) - g(v, theta_t)`
pub fn q_hat_value<O: BilevelOracle + ?Sized>(
    oracle: &O,
    v: &[f64],
    theta: &[f64],
    theta_t: &[f64],
) -> f64 {
    let at = |t: &[f64]| {
        oracle.g(&JointPoint {
            v: v.to_vec(),
            theta: t.to_vec(),
        })
    };
    at(theta) - at(theta_t)
}

/// Gradient of `q_hat` at `(v, theta)` with `theta_t` treated as a constant.
///
/// The `v` block is `grad_v g(v, theta) - grad_v g(v, theta_t)`; the `theta`
/// block is just `grad_theta g(v, theta)`.
pub fn grad_q_hat<O: BilevelOracle + ?Sized>(
    oracle: &O,
    v: &[f64],
    theta: &[f64],
    theta_t: &[f64],
) -> JointGradient {
    let here = oracle.grad_g(&JointPoint {
        v: v.to_vec(),
        theta: theta.to_vec(),
    });
    let frozen = oracle.grad_g(&JointPoint {
        v: v.to_vec(),
        theta: theta_t.to_vec(),
    });
    JointGradient {
        dv: here.dv.iter().zip(&frozen.dv).map(|(a, b)| a - b).collect(),
        dtheta: here.dtheta,
    }
}

pub fn compute_phi(kind: BarrierKind, eta: f64, q_hat: f64, grad_qhat_norm: f64) -> f64 {
    match kind {
        BarrierKind::GradNormSq => eta * grad_qhat_norm * grad_qhat_norm,
        // raw q_hat may be a hair below zero from round-off
        BarrierKind::Value => eta * q_hat.max(0.0),
    }
}

/// `max((phi - <grad_f, grad_q>) / |grad_q|^2, 0)`, or 0 when `grad_q` vanishes.
pub fn compute_lambda(grad_f: &JointGradient, grad_qhat: &JointGradient, phi: f64) -> f64 {
    let n2 = grad_qhat.norm_sq();
    if n2 <= SINGULAR_NORM_SQ {
        return 0.0;
    }
    ((phi - grad_f.dot(grad_qhat)) / n2).max(0.0)
}

/// Heavy-ball accumulator owned by a run.
#[derive(Clone, Debug, Default)]
pub struct MomentumState {
    buf: Option<JointGradient>,
}

impl MomentumState {
    pub fn new() -> Self {
        Self::default()
    }

    /// `buf <- beta * buf + delta`; returns the direction to apply.
    fn push(&mut self, beta: f64, delta: &JointGradient) -> JointGradient {
        if beta == 0.0 {
            return delta.clone();
        }
        let next = match self.buf.take() {
            Some(mut b) => {
                b = b.scaled(beta);
                b.add_scaled(1.0, delta);
                b
            }
            None => delta.clone(),
        };
        self.buf = Some(next.clone());
        next
    }
}

/// Solves the barrier subproblem at `point` without moving.
pub fn barrier_solution<O: BilevelOracle + ?Sized>(
    oracle: &O,
    point: &JointPoint,
    cfg: &SolverConfig,
) -> Result<BarrierSolution> {
    check_point(oracle, point)?;
    let inner = inner_descent(
        oracle,
        &point.v,
        &point.theta,
        cfg.inner_iters,
        cfg.inner_step,
    )?;
    let q_hat = inner.g_before - inner.g_after;
    let grad_qhat = grad_q_hat(oracle, &point.v, &point.theta, &inner.theta_t);
    let grad_f = oracle.grad_f(point);
    grad_f.check_dims(point, "grad_f")?;
    grad_qhat.check_dims(point, "grad_q_hat")?;

    let phi = compute_phi(cfg.barrier, cfg.eta, q_hat, grad_qhat.norm());
    let lambda = compute_lambda(&grad_f, &grad_qhat, phi);
    let mut delta = grad_f.clone();
    if lambda > 0.0 {
        delta.add_scaled(lambda, &grad_qhat);
    }
    if !delta.is_finite() {
        return Err(BomeError::Numerical(format!(
            "non-finite update direction (lambda = {lambda}, q_hat = {q_hat})"
        )));
    }
    Ok(BarrierSolution {
        lambda,
        phi,
        delta,
        grad_f,
        grad_qhat,
        q_hat,
        inner,
    })
}

/// One full iteration: barrier solution, optional heavy-ball, block-wise step.
pub fn bome_step<O: BilevelOracle + ?Sized>(
    oracle: &O,
    point: &JointPoint,
    cfg: &SolverConfig,
    momentum: &mut MomentumState,
) -> Result<(JointPoint, BarrierSolution)> {
    let sol = barrier_solution(oracle, point, cfg)?;
    let dir = momentum.push(cfg.momentum, &sol.delta);
    let (xi_v, xi_theta) = cfg.block_steps();
    let mut next = point.clone();
    crate::vecops::axpy(-xi_v, &dir.dv, &mut next.v);
    crate::vecops::axpy(-xi_theta, &dir.dtheta, &mut next.theta);
    if !next.is_finite() {
        return Err(BomeError::Numerical("iterate became non-finite".into()));
    }
    Ok((next, sol))
}
