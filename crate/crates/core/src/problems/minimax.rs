use std::sync::OnceLock;

use crate::oracle::BilevelOracle;
use crate::types::{JointGradient, JointPoint, ProblemMetadata};

/// Bilinear game `min_v v*theta` with `theta` in `argmax v*theta'`, written as
/// `f = v*theta`, `g = -v*theta`. The inner argmax is unbounded for `v != 0`,
/// so there is no closed-form inner optimum. The solution is the origin.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MinimaxProblem;

impl BilevelOracle for MinimaxProblem {
    fn name(&self) -> &str {
        "minimax"
    }

    fn dims(&self) -> (usize, usize) {
        (1, 1)
    }

    fn f(&self, p: &JointPoint) -> f64 {
        p.v[0] * p.theta[0]
    }

    fn grad_f(&self, p: &JointPoint) -> JointGradient {
        JointGradient::new(vec![p.theta[0]], vec![p.v[0]])
    }

    fn g(&self, p: &JointPoint) -> f64 {
        -p.v[0] * p.theta[0]
    }

    fn grad_g(&self, p: &JointPoint) -> JointGradient {
        JointGradient::new(vec![-p.theta[0]], vec![-p.v[0]])
    }

    fn metadata(&self) -> Option<&ProblemMetadata> {
        static META: OnceLock<ProblemMetadata> = OnceLock::new();
        Some(META.get_or_init(|| ProblemMetadata {
            smoothness_l: Some(1.0),
            known_optimum: Some(JointPoint {
                v: vec![0.0],
                theta: vec![0.0],
            }),
            known_f_opt: Some(0.0),
            ..Default::default()
        }))
    }
}
