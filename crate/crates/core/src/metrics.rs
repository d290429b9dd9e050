//! Stationarity measures.
//!
//! All three variants share the decomposition
//! `K(v, theta) = min_{lambda >= 0} |grad f + lambda grad q|^2 + q`
//! and differ only in which `q` they plug in:
//!
//! * [`kkt_exact`]: `q = g - g*` with the exact value function;
//! * [`kkt_proxy`]: the plug-in `q_hat` the solver itself uses;
//! * [`kkt_attraction`]: `q = g(v, theta) - g(v, theta_attr)` where
//!   `theta_attr` is where inner gradient descent from `theta` ends up.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::inner::{attraction_point, inner_descent};
use crate::oracle::{check_point, BilevelOracle};
use crate::step::{grad_q_hat, SINGULAR_NORM_SQ};
use crate::types::{JointGradient, JointPoint, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KktVariant {
    Exact,
    Proxy,
    Attraction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `min_{lambda >= 0} |grad f + lambda grad q|^2`
    pub local_improvement: f64,
    /// `q`
    pub feasibility: f64,
    pub total: f64,
    pub lambda_star: f64,
    pub variant: KktVariant,
}

/// Minimizer of `|grad_f + lambda grad_q|^2` over `lambda >= 0`.
pub fn closed_form_lambda_star(grad_f: &JointGradient, grad_q: &JointGradient) -> f64 {
    let n2 = grad_q.norm_sq();
    if n2 <= SINGULAR_NORM_SQ {
        return 0.0;
    }
    (-grad_f.dot(grad_q) / n2).max(0.0)
}

pub fn kkt_from_parts(
    grad_f: &JointGradient,
    grad_q: &JointGradient,
    q: f64,
    variant: KktVariant,
) -> KktReport {
    let lambda_star = closed_form_lambda_star(grad_f, grad_q);
    let mut r = grad_f.clone();
    r.add_scaled(lambda_star, grad_q);
    // never exceed the lambda = 0 value, which round-off could otherwise violate
    let local_improvement = r.norm_sq().min(grad_f.norm_sq());
    KktReport {
        local_improvement,
        feasibility: q,
        total: local_improvement + q,
        lambda_star,
        variant,
    }
}

/// Exact measure, using the oracle's value function.
pub fn kkt_exact<O: BilevelOracle + ?Sized>(oracle: &O, point: &JointPoint) -> Result<KktReport> {
    check_point(oracle, point)?;
    let vf = oracle.exact_value(&point.v)?;
    let gg = oracle.grad_g(point);
    let q = oracle.g(point) - vf.value;
    let grad_q = JointGradient {
        dv: gg.dv.iter().zip(&vf.grad_v).map(|(a, b)| a - b).collect(),
        dtheta: gg.dtheta,
    };
    Ok(kkt_from_parts(
        &oracle.grad_f(point),
        &grad_q,
        q,
        KktVariant::Exact,
    ))
}

/// Measure computed from `q_hat` with the run's own `(T, alpha)`.
pub fn kkt_proxy<O: BilevelOracle + ?Sized>(
    oracle: &O,
    point: &JointPoint,
    cfg: &SolverConfig,
) -> Result<KktReport> {
    check_point(oracle, point)?;
    let inner = inner_descent(
        oracle,
        &point.v,
        &point.theta,
        cfg.inner_iters,
        cfg.inner_step,
    )?;
    let grad_q = grad_q_hat(oracle, &point.v, &point.theta, &inner.theta_t);
    Ok(kkt_from_parts(
        &oracle.grad_f(point),
        &grad_q,
        inner.g_before - inner.g_after,
        KktVariant::Proxy,
    ))
}

/// Measure relative to the attraction point of `(v, theta)`.
pub fn kkt_attraction<O: BilevelOracle + ?Sized>(
    oracle: &O,
    point: &JointPoint,
    alpha: f64,
    grad_tol: f64,
    max_iters: usize,
) -> Result<KktReport> {
    check_point(oracle, point)?;
    let theta_attr =
        attraction_point(oracle, &point.v, &point.theta, alpha, grad_tol, max_iters)?.into_result()?;
    let q = oracle.g(point) - oracle.g(&point.with_theta(theta_attr.clone()));
    let grad_q = grad_q_hat(oracle, &point.v, &point.theta, &theta_attr);
    Ok(kkt_from_parts(
        &oracle.grad_f(point),
        &grad_q,
        q,
        KktVariant::Attraction,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::BomeError;
    use crate::problems::{CoresetProblem, DoubleWellProblem, MinimaxProblem, RidgeRegProblem};
    use proptest::prelude::*;

    fn grad(dv: &[f64], dt: &[f64]) -> JointGradient {
        JointGradient::new(dv.to_vec(), dt.to_vec())
    }

    #[test]
    fn orthogonal_gradients_give_zero_lambda() {
        assert_eq!(closed_form_lambda_star(&grad(&[1.0], &[0.0]), &grad(&[0.0], &[1.0])), 0.0);
    }

    #[test]
    fn exact_cancellation() {
        let q = grad(&[0.6], &[-0.8]);
        let f = q.scaled(-2.0);
        let r = kkt_from_parts(&f, &q, 0.0, KktVariant::Exact);
        assert!((r.lambda_star - 2.0).abs() < 1e-15);
        assert!(r.local_improvement < 1e-30);
    }

    fn grid_refine_min(f: &JointGradient, q: &JointGradient) -> f64 {
        let h = |l: f64| {
            let mut d = f.clone();
            d.add_scaled(l, q);
            d.norm_sq()
        };
        let hi = 4.0 * f.norm() / q.norm() + 1.0;
        let (mut best, n) = (0.0, 4000);
        for i in 0..=n {
            let l = hi * i as f64 / n as f64;
            if h(l) < h(best) {
                best = l;
            }
        }
        let (mut a, mut b) = ((best - hi / n as f64).max(0.0), best + hi / n as f64);
        for _ in 0..300 {
            let c = a + (b - a) / 3.0;
            let d = b - (b - a) / 3.0;
            if h(c) <= h(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    proptest! {
        #[test]
        fn lambda_star_matches_scalar_search(
            fv in prop::collection::vec(-1.0..1.0f64, 5),
            qv in prop::collection::vec(-1.0..1.0f64, 5),
        ) {
            let f = grad(&fv[..2], &fv[2..]);
            let q = grad(&qv[..2], &qv[2..]);
            prop_assume!(q.norm() > 1e-3);
            let l = closed_form_lambda_star(&f, &q);
            let search = grid_refine_min(&f, &q);
            // the search can only locate a flat minimum to ~sqrt(eps) in lambda
            prop_assert!((l - search).abs() < 1e-6 / q.norm());
            let h = |l: f64| { let mut d = f.clone(); d.add_scaled(l, &q); d.norm_sq() };
            prop_assert!(h(l) <= h(search) + 1e-15);
        }

        #[test]
        fn lambda_star_scale_consistent(
            fv in prop::collection::vec(-1.0..1.0f64, 4),
            qv in prop::collection::vec(-1.0..1.0f64, 4),
            c in 0.1..10.0f64,
        ) {
            let f = grad(&fv[..1], &fv[1..]);
            let q = grad(&qv[..1], &qv[1..]);
            prop_assume!(q.norm() > 1e-3);
            let a = kkt_from_parts(&f, &q, 0.0, KktVariant::Exact);
            let b = kkt_from_parts(&f, &q.scaled(c), 0.0, KktVariant::Exact);
            prop_assert!((a.lambda_star / c - b.lambda_star).abs() <= 1e-12 * (1.0 + a.lambda_star));
            prop_assert!((a.local_improvement - b.local_improvement).abs() <= 1e-12 * (1.0 + a.local_improvement));
            prop_assert!(a.local_improvement <= f.norm_sq());
            prop_assert!(a.local_improvement >= 0.0);
        }
    }

    #[test]
    fn minimax_origin_is_stationary_for_proxy() {
        let p = JointPoint::new(vec![0.0], vec![0.0]).unwrap();
        let r = kkt_proxy(&MinimaxProblem, &p, &SolverConfig::default()).unwrap();
        assert_eq!(r.total, 0.0);
    }

    #[test]
    fn exact_requires_capability() {
        let p = JointPoint::new(vec![0.0], vec![0.0]).unwrap();
        assert!(matches!(
            kkt_exact(&MinimaxProblem, &p),
            Err(BomeError::MissingCapability(_))
        ));
    }

    #[test]
    fn exact_feasibility_zero_on_inner_optimum() {
        let prob = CoresetProblem::default();
        let v = vec![0.4, -1.0, 0.2, 0.9];
        let theta = prob.exact_inner_opt(&v).unwrap();
        let r = kkt_exact(&prob, &JointPoint::new(v, theta).unwrap()).unwrap();
        assert_eq!(r.feasibility, 0.0);
        assert_eq!(r.variant, KktVariant::Exact);
    }

    #[test]
    fn proxy_with_zero_inner_steps_has_no_feasibility_term() {
        let prob = CoresetProblem::default();
        let cfg = SolverConfig {
            inner_iters: 0,
            ..SolverConfig::default()
        };
        let p = JointPoint::new(vec![0.1; 4], vec![2.0, -1.0]).unwrap();
        let r = kkt_proxy(&prob, &p, &cfg).unwrap();
        assert_eq!(r.feasibility, 0.0);
        let gf = prob.grad_f(&p);
        let gg = prob.grad_g(&p);
        // grad q_hat reduces to (0, grad_theta g)
        let expected = kkt_from_parts(
            &gf,
            &JointGradient::new(vec![0.0; 4], gg.dtheta),
            0.0,
            KktVariant::Proxy,
        );
        assert_eq!(r.local_improvement, expected.local_improvement);
        assert_eq!(r.total, r.local_improvement);
    }

    #[test]
    fn proxy_approaches_exact_geometrically_in_t() {
        let prob = RidgeRegProblem::synthetic(5, 30, 30, 6, 0.1).unwrap();
        let l = prob.theta_smoothness(&[0.0; 6]);
        let p = JointPoint::new(vec![0.2; 6], vec![1.0; 6]).unwrap();
        let exact = kkt_exact(&prob, &p).unwrap().total;
        let mut cfg = SolverConfig::with_step(1.0 / (2.0 * l));
        let mut gaps = Vec::new();
        for t in [1, 2, 4, 8, 16] {
            cfg.inner_iters = t;
            gaps.push((kkt_proxy(&prob, &p, &cfg).unwrap().total - exact).abs());
        }
        for w in gaps.windows(2) {
            assert!(w[1] < w[0], "{gaps:?}");
        }
        assert!(gaps[4] < 0.5 * gaps[0]);
    }

    #[test]
    fn attraction_equals_exact_on_unimodal() {
        let prob = CoresetProblem::default();
        let p = JointPoint::new(vec![0.3, 0.0, -0.5, 0.2], vec![1.0, 1.0]).unwrap();
        let a = kkt_attraction(&prob, &p, 0.1, 1e-10, 100_000).unwrap();
        let e = kkt_exact(&prob, &p).unwrap();
        assert!((a.total - e.total).abs() < 1e-8);
        assert_eq!(a.variant, KktVariant::Attraction);
    }

    #[test]
    fn attraction_uses_local_basin() {
        // g = (theta^2 - 1)^2 + s * theta, tilted so the two minima differ
        let prob = DoubleWellProblem::tilted(0.3);
        let p = JointPoint::new(vec![0.0], vec![0.6]).unwrap();
        let r = kkt_attraction(&prob, &p, 0.01, 1e-12, 200_000).unwrap();
        // per-basin minima: roots of 4t^3 - 4t + s = 0
        let roots = cubic_roots(0.3);
        let right = roots.iter().cloned().fold(f64::MIN, f64::max);
        let left = roots.iter().cloned().fold(f64::MAX, f64::min);
        let gfun = |t: f64| (t * t - 1.0).powi(2) + 0.3 * t;
        assert!((r.feasibility - (gfun(0.6) - gfun(right))).abs() < 1e-9);
        // global minimum is the left well here, which would give a larger q
        assert!(gfun(left) < gfun(right));
        assert!(r.feasibility < gfun(0.6) - gfun(left));
    }

    #[test]
    fn attraction_at_local_min_has_zero_feasibility() {
        let prob = DoubleWellProblem::default();
        let p = JointPoint::new(vec![0.0], vec![-1.0]).unwrap();
        let r = kkt_attraction(&prob, &p, 0.01, 1e-10, 1000).unwrap();
        assert_eq!(r.feasibility, 0.0);
    }

    /// Real roots of 4t^3 - 4t + s by bisection on the three monotone pieces.
    fn cubic_roots(s: f64) -> Vec<f64> {
        let h = |t: f64| 4.0 * t * t * t - 4.0 * t + s;
        let c = 1.0 / 3f64.sqrt();
        [(-3.0, -c), (-c, c), (c, 3.0)]
            .iter()
            .map(|&(mut a, mut b)| {
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if h(a) * h(m) <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                0.5 * (a + b)
            })
            .collect()
    }
}
