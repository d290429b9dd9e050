//! Inner-loop gradient descent on `g(v, .)` with `v` held fixed.

use serde::{Deserialize, Serialize};

use crate::error::{BomeError, Result};
use crate::oracle::BilevelOracle;
use crate::types::JointPoint;
use crate::vecops;

/// Gradient norm below which the inner loop stops early.
pub const STATIONARY_EPS: f64 = 1e-14;

pub const DEFAULT_ATTRACTION_TOL: f64 = 1e-10;
pub const DEFAULT_ATTRACTION_MAX_ITERS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerResult {
    pub theta_t: Vec<f64>,
    pub g_before: f64,
    pub g_after: f64,
    pub steps_taken: usize,
}

/// Runs `theta <- theta - alpha * grad_theta g(v, theta)` for `t_steps` steps
/// starting from `theta0`.
pub fn inner_descent<O: BilevelOracle + ?Sized>(
    oracle: &O,
    v: &[f64],
    theta0: &[f64],
    t_steps: usize,
    alpha: f64,
) -> Result<InnerResult> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(BomeError::InvalidConfig(vec![format!(
            "alpha must be > 0, got {alpha}"
        )]));
    }
    let mut p = JointPoint {
        v: v.to_vec(),
        theta: theta0.to_vec(),
    };
    let g_before = oracle.g(&p);
    let mut steps_taken = 0;
    for _ in 0..t_steps {
        let grad = oracle.grad_g(&p).dtheta;
        if !vecops::all_finite(&grad) {
            return Err(BomeError::Numerical(format!(
                "non-finite inner gradient after {steps_taken} steps"
            )));
        }
        if vecops::norm(&grad) < STATIONARY_EPS {
            break;
        }
        vecops::axpy(-alpha, &grad, &mut p.theta);
        steps_taken += 1;
    }
    let g_after = if steps_taken == 0 { g_before } else { oracle.g(&p) };
    Ok(InnerResult {
        theta_t: p.theta,
        g_before,
        g_after,
        steps_taken,
    })
}

/// Outcome of running the inner recursion to stationarity.
#[derive(Clone, Debug, PartialEq)]
pub enum Attraction {
    Converged { theta: Vec<f64>, iters: usize },
    NotConverged { theta: Vec<f64>, iters: usize, grad_norm: f64 },
}

impl Attraction {
    pub fn theta(&self) -> &[f64] {
        match self {
            Attraction::Converged { theta, .. } | Attraction::NotConverged { theta, .. } => theta,
        }
    }

    pub fn into_result(self) -> Result<Vec<f64>> {
        match self {
            Attraction::Converged { theta, .. } => Ok(theta),
            Attraction::NotConverged {
                iters, grad_norm, ..
            } => Err(BomeError::NotConverged { iters, grad_norm }),
        }
    }
}

/// Limit of inner gradient descent started at `theta0`, i.e. the attraction
/// point of `(v, theta0)` for step size `alpha`.
pub fn attraction_point<O: BilevelOracle + ?Sized>(
    oracle: &O,
    v: &[f64],
    theta0: &[f64],
    alpha: f64,
    grad_tol: f64,
    max_iters: usize,
) -> Result<Attraction> {
    if !(alpha > 0.0 && grad_tol > 0.0) {
        return Err(BomeError::InvalidConfig(vec![format!(
            "attraction_point needs alpha > 0 and grad_tol > 0 (got {alpha}, {grad_tol})"
        )]));
    }
    let mut p = JointPoint {
        v: v.to_vec(),
        theta: theta0.to_vec(),
    };
    let mut iters = 0;
    loop {
        let grad = oracle.grad_g(&p).dtheta;
        if !vecops::all_finite(&grad) {
            return Err(BomeError::Numerical(format!(
                "non-finite inner gradient after {iters} iterations"
            )));
        }
        let gn = vecops::norm(&grad);
        if gn < grad_tol {
            return Ok(Attraction::Converged {
                theta: p.theta,
                iters,
            });
        }
        if iters >= max_iters {
            return Ok(Attraction::NotConverged {
                theta: p.theta,
                iters,
                grad_norm: gn,
            });
        }
        vecops::axpy(-alpha, &grad, &mut p.theta);
        iters += 1;
    }
}
