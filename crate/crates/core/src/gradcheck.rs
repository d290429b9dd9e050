//! Finite-difference verification of analytic gradients.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::inner::inner_descent;
use crate::oracle::BilevelOracle;
use crate::step::grad_q_hat;
use crate::types::{JointGradient, JointPoint};

pub const DEFAULT_H: f64 = 1e-5;
pub const DEFAULT_REL_TOL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_coordinate: usize,
    pub worst_point: usize,
    pub points_checked: usize,
    /// Indices of points where `fn` was not finite at some probe.
    pub nonfinite_points: Vec<usize>,
    pub passed: bool,
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<8} points={:<4} max_rel_err={:.3e} (point {}, coord {}){}",
            if self.passed { "PASS" } else { "FAIL" },
            self.points_checked,
            self.max_rel_error,
            self.worst_point,
            self.worst_coordinate,
            if self.nonfinite_points.is_empty() {
                String::new()
            } else {
                format!(" nonfinite at {:?}", self.nonfinite_points)
            }
        )
    }
}

/// Compares `grad` against central differences of `func` at every point.
///
/// Relative error per coordinate is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn check_gradient<F, G>(func: F, grad: G, points: &[Vec<f64>], h: f64, rel_tol: f64) -> GradCheckReport
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_coordinate: 0,
        worst_point: 0,
        points_checked: 0,
        nonfinite_points: Vec::new(),
        passed: true,
    };
    for (pi, x) in points.iter().enumerate() {
        let analytic = grad(x);
        let mut probe = x.clone();
        let mut finite = true;
        for i in 0..x.len() {
            probe[i] = x[i] + h;
            let up = func(&probe);
            probe[i] = x[i] - h;
            let down = func(&probe);
            probe[i] = x[i];
            if !(up.is_finite() && down.is_finite() && analytic[i].is_finite()) {
                finite = false;
                continue;
            }
            let numeric = (up - down) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
            let err = (analytic[i] - numeric).abs() / denom;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_coordinate = i;
                report.worst_point = pi;
            }
        }
        if !finite {
            report.nonfinite_points.push(pi);
        }
        report.points_checked += 1;
    }
    report.passed = report.max_rel_error < rel_tol && report.nonfinite_points.is_empty();
    report
}

/// Checks both `grad_f` and `grad_g` of an oracle over the joint variable.
pub fn check_oracle<O: BilevelOracle + ?Sized>(
    oracle: &O,
    points: &[JointPoint],
    h: f64,
    rel_tol: f64,
) -> (GradCheckReport, GradCheckReport) {
    let (m, _) = oracle.dims();
    let flat: Vec<Vec<f64>> = points.iter().map(JointPoint::to_flat).collect();
    let rf = check_gradient(
        |x| oracle.f(&JointPoint::from_flat(m, x)),
        |x| oracle.grad_f(&JointPoint::from_flat(m, x)).to_flat(),
        &flat,
        h,
        rel_tol,
    );
    let rg = check_gradient(
        |x| oracle.g(&JointPoint::from_flat(m, x)),
        |x| oracle.grad_g(&JointPoint::from_flat(m, x)).to_flat(),
        &flat,
        h,
        rel_tol,
    );
    (rf, rg)
}

/// Checks the `v` block of the stop-gradient estimator: the analytic
/// `grad_v q_hat` must match central differences of
/// `v -> g(v, theta) - g(v, theta_t)` with `theta_t` frozen.
pub fn check_stop_gradient<O: BilevelOracle + ?Sized>(
    oracle: &O,
    point: &JointPoint,
    theta_t: &[f64],
    h: f64,
    rel_tol: f64,
) -> GradCheckReport {
    let q = |v: &[f64]| {
        oracle.g(&JointPoint {
            v: v.to_vec(),
            theta: point.theta.clone(),
        }) - oracle.g(&JointPoint {
            v: v.to_vec(),
            theta: theta_t.to_vec(),
        })
    };
    check_gradient(
        q,
        |v| grad_q_hat(oracle, v, &point.theta, theta_t).dv,
        std::slice::from_ref(&point.v),
        h,
        rel_tol,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlugInRow {
    pub inner_iters: usize,
    pub mean_error: f64,
}

/// Table of `|grad q_hat - grad q|` averaged over `points`, one row per `T`.
/// `grad q` comes from the oracle's exact value function.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlugInTable {
    pub rows: Vec<PlugInRow>,
}

impl PlugInTable {
    pub fn is_non_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].mean_error <= w[0].mean_error)
    }

    /// `error(T_{i+1}) / error(T_i)` for consecutive rows.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| w[1].mean_error / w[0].mean_error)
            .collect()
    }
}

impl fmt::Display for PlugInTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6}  {:>14}", "T", "mean_error")?;
        for r in &self.rows {
            writeln!(f, "{:>6}  {:>14.6e}", r.inner_iters, r.mean_error)?;
        }
        Ok(())
    }
}

pub fn check_plug_in_estimator<O: BilevelOracle + ?Sized>(
    oracle: &O,
    points: &[JointPoint],
    t_values: &[usize],
    alpha: f64,
) -> Result<PlugInTable> {
    // exact gradients do not depend on T
    let mut exact = Vec::with_capacity(points.len());
    for p in points {
        let vf = oracle.exact_value(&p.v)?;
        let gg = oracle.grad_g(p);
        exact.push(JointGradient {
            dv: gg.dv.iter().zip(&vf.grad_v).map(|(a, b)| a - b).collect(),
            dtheta: gg.dtheta,
        });
    }
    let mut rows = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let mut total = 0.0;
        for (p, ex) in points.iter().zip(&exact) {
            let inner = inner_descent(oracle, &p.v, &p.theta, t, alpha)?;
            let mut diff = grad_q_hat(oracle, &p.v, &p.theta, &inner.theta_t);
            diff.add_scaled(-1.0, ex);
            total += diff.norm();
        }
        rows.push(PlugInRow {
            inner_iters: t,
            mean_error: total / points.len().max(1) as f64,
        });
    }
    Ok(PlugInTable { rows })
}

/// Uniform random probe points with `v` in `v_range` and `theta` in
/// `theta_range`, coordinatewise.
pub fn random_points(
    dims: (usize, usize),
    count: usize,
    seed: u64,
    v_range: (f64, f64),
    theta_range: (f64, f64),
) -> Vec<JointPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| JointPoint {
            v: (0..dims.0).map(|_| rng.random_range(v_range.0..v_range.1)).collect(),
            theta: (0..dims.1)
                .map(|_| rng.random_range(theta_range.0..theta_range.1))
                .collect(),
        })
        .collect()
}

/// Probe ranges that keep built-in problems away from their kinks: the
/// clipped example weights of `hyperclean` stay strictly inside `(0, 1)`.
pub fn probe_ranges(problem: &str) -> ((f64, f64), (f64, f64)) {
    match problem {
        "hyperclean" => ((0.05, 0.95), (-1.0, 1.0)),
        _ => ((-2.0, 2.0), (-2.0, 2.0)),
    }
}
