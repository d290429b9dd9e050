use std::sync::OnceLock;

use crate::error::Result;
use crate::oracle::{BilevelOracle, ValueFunction};
use crate::types::{JointGradient, JointPoint, ProblemMetadata};

/// Problem with a degenerate inner level: `f = |theta - [v; 1]|^2`,
/// `g = (theta_1 - v)^2`. Every `theta` with `theta_1 = v` minimizes `g`, so
/// there is no unique inner optimum, but the value function is known: `g* = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DegenerateLlsProblem;

impl BilevelOracle for DegenerateLlsProblem {
    fn name(&self) -> &str {
        "lls"
    }

    fn dims(&self) -> (usize, usize) {
        (1, 2)
    }

    fn f(&self, p: &JointPoint) -> f64 {
        (p.theta[0] - p.v[0]).powi(2) + (p.theta[1] - 1.0).powi(2)
    }

    fn grad_f(&self, p: &JointPoint) -> JointGradient {
        let d = p.theta[0] - p.v[0];
        JointGradient::new(vec![-2.0 * d], vec![2.0 * d, 2.0 * (p.theta[1] - 1.0)])
    }

    fn g(&self, p: &JointPoint) -> f64 {
        (p.theta[0] - p.v[0]).powi(2)
    }

    fn grad_g(&self, p: &JointPoint) -> JointGradient {
        let d = p.theta[0] - p.v[0];
        JointGradient::new(vec![-2.0 * d], vec![2.0 * d, 0.0])
    }

    fn has_exact_value(&self) -> bool {
        true
    }

    fn exact_value(&self, _v: &[f64]) -> Result<ValueFunction> {
        Ok(ValueFunction {
            value: 0.0,
            grad_v: vec![0.0],
        })
    }

    fn metadata(&self) -> Option<&ProblemMetadata> {
        static META: OnceLock<ProblemMetadata> = OnceLock::new();
        Some(META.get_or_init(|| ProblemMetadata {
            smoothness_l: Some(4.0),
            known_optimum: Some(JointPoint {
                v: vec![1.0],
                theta: vec![1.0, 1.0],
            }),
            known_f_opt: Some(0.0),
            ..Default::default()
        }))
    }
}
