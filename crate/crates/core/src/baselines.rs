//! First-order reference methods for min-max problems: simultaneous
//! gradient descent-ascent and optimistic gradient descent.
//!
//! Both treat `f` as a payoff minimized over `v` and maximized over `theta`,
//! which is the mini-max reading of `g = -f`.

use serde::{Deserialize, Serialize};

use crate::oracle::BilevelOracle;
use crate::types::{JointGradient, JointPoint};
use crate::vecops;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    NaiveGda,
    OptimisticGd,
}

/// Descent field `(d_v f, -d_theta f)`.
pub fn minimax_field<O: BilevelOracle + ?Sized>(oracle: &O, point: &JointPoint) -> JointGradient {
    let mut g = oracle.grad_f(point);
    for x in &mut g.dtheta {
        *x = -*x;
    }
    g
}

/// `v <- v - xi d_v f`, `theta <- theta + xi d_theta f`, simultaneously.
pub fn gda_step<O: BilevelOracle + ?Sized>(oracle: &O, point: &JointPoint, xi: f64) -> JointPoint {
    let field = minimax_field(oracle, point);
    let mut next = point.clone();
    vecops::axpy(-xi, &field.dv, &mut next.v);
    vecops::axpy(-xi, &field.dtheta, &mut next.theta);
    next
}

/// `w <- w - 2 xi G_k + xi G_{k-1}` on the descent field. Pass `None` on the
/// first step (then `G_{-1} = G_0`). Returns the new point and `G_k` for the
/// next call.
pub fn ogd_step<O: BilevelOracle + ?Sized>(
    oracle: &O,
    point: &JointPoint,
    prev: Option<&JointGradient>,
    xi: f64,
) -> (JointPoint, JointGradient) {
    let field = minimax_field(oracle, point);
    let prev = prev.unwrap_or(&field);
    let mut next = point.clone();
    vecops::axpy(-2.0 * xi, &field.dv, &mut next.v);
    vecops::axpy(xi, &prev.dv, &mut next.v);
    vecops::axpy(-2.0 * xi, &field.dtheta, &mut next.theta);
    vecops::axpy(xi, &prev.dtheta, &mut next.theta);
    (next, field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::MinimaxProblem;

    fn pt(v: f64, t: f64) -> JointPoint {
        JointPoint::new(vec![v], vec![t]).unwrap()
    }

    /// Exact 2x2 linear maps for the bilinear game, independent of the oracle.
    fn gda_linear(w: [f64; 2], xi: f64) -> [f64; 2] {
        [w[0] - xi * w[1], w[1] + xi * w[0]]
    }

    fn ogd_linear(w: [f64; 2], prev: [f64; 2], xi: f64) -> ([f64; 2], [f64; 2]) {
        let g = [w[1], -w[0]];
        (
            [w[0] - 2.0 * xi * g[0] + xi * prev[0], w[1] - 2.0 * xi * g[1] + xi * prev[1]],
            g,
        )
    }

    #[test]
    fn gda_single_step() {
        let n = gda_step(&MinimaxProblem, &pt(1.0, 1.0), 0.1);
        assert!((n.v[0] - 0.9).abs() < 1e-15);
        assert!((n.theta[0] - 1.1).abs() < 1e-15);
        assert_eq!(gda_step(&MinimaxProblem, &pt(0.0, 0.0), 0.1), pt(0.0, 0.0));
    }

    #[test]
    fn gda_diverges_monotonically() {
        let mut p = pt(1.0, 1.0);
        let mut w = [1.0, 1.0];
        let mut last = p.norm();
        for _ in 0..500 {
            p = gda_step(&MinimaxProblem, &p, 0.05);
            w = gda_linear(w, 0.05);
            assert!(p.norm() > last);
            last = p.norm();
        }
        // |w_k| = (1 + xi^2)^(k/2) |w_0|
        let expected = 2f64.sqrt() * (1.0 + 0.05f64.powi(2)).powf(250.0);
        assert!((p.norm() - expected).abs() < 1e-9 * expected);
        assert!((p.v[0] - w[0]).abs() < 1e-12 && (p.theta[0] - w[1]).abs() < 1e-12);
    }

    #[test]
    fn ogd_with_equal_history_is_gda() {
        let p = pt(0.7, -1.3);
        let field = minimax_field(&MinimaxProblem, &p);
        let (n, _) = ogd_step(&MinimaxProblem, &p, Some(&field), 0.1);
        let gda = gda_step(&MinimaxProblem, &p, 0.1);
        assert!(n.distance(&gda) < 1e-15);
        let (first, _) = ogd_step(&MinimaxProblem, &p, None, 0.1);
        assert_eq!(first, n);
    }

    #[test]
    fn ogd_origin_is_fixed() {
        let (n, g) = ogd_step(&MinimaxProblem, &pt(0.0, 0.0), None, 0.05);
        assert_eq!(n, pt(0.0, 0.0));
        assert_eq!(g, JointGradient::zeros(1, 1));
    }

    #[test]
    fn ogd_contracts_to_origin() {
        let mut p = pt(1.0, 1.0);
        let mut prev = None;
        let mut w = [1.0, 1.0];
        let mut wprev = [1.0, -1.0];
        let mut norms = Vec::new();
        for _ in 0..5000 {
            let (n, g) = ogd_step(&MinimaxProblem, &p, prev.as_ref(), 0.05);
            p = n;
            prev = Some(g);
            let (nw, g) = ogd_linear(w, wprev, 0.05);
            w = nw;
            wprev = g;
            norms.push(p.norm());
        }
        assert!((p.v[0] - w[0]).abs() < 1e-12 && (p.theta[0] - w[1]).abs() < 1e-12);
        // slow spiral: ~0.115 after 2000 steps, below 1e-2 by 5000
        assert!((norms[1999] - 0.1153).abs() < 1e-3, "{}", norms[1999]);
        assert!(norms[4999] < 1e-2);
    }
}
