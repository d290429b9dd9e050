use crate::error::Result;
use crate::oracle::BilevelOracle;
use crate::types::{JointGradient, JointPoint};

/// `g = |theta - c|^2` (independent of `v`), `f = (|v|^2 + |theta|^2) / 2`.
/// One-dimensional `v`. Useful for checking inner-loop recursions.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedQuadratic {
    pub center: Vec<f64>,
}

impl ShiftedQuadratic {
    pub fn new(center: Vec<f64>) -> Self {
        ShiftedQuadratic { center }
    }
}

impl BilevelOracle for ShiftedQuadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dims(&self) -> (usize, usize) {
        (1, self.center.len())
    }

    fn f(&self, p: &JointPoint) -> f64 {
        0.5 * (p.v[0] * p.v[0] + p.theta.iter().map(|t| t * t).sum::<f64>())
    }

    fn grad_f(&self, p: &JointPoint) -> JointGradient {
        JointGradient::new(p.v.clone(), p.theta.clone())
    }

    fn g(&self, p: &JointPoint) -> f64 {
        p.theta
            .iter()
            .zip(&self.center)
            .map(|(t, c)| (t - c) * (t - c))
            .sum()
    }

    fn grad_g(&self, p: &JointPoint) -> JointGradient {
        JointGradient::new(
            vec![0.0],
            p.theta
                .iter()
                .zip(&self.center)
                .map(|(t, c)| 2.0 * (t - c))
                .collect(),
        )
    }

    fn has_exact_inner_opt(&self) -> bool {
        true
    }

    fn exact_inner_opt(&self, _v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.center.clone())
    }
}

/// One-dimensional double well `g = (theta^2 - 1)^2 + tilt * theta` with
/// `f = (v^2 + (theta - 2)^2) / 2`. The inner problem has two local minima, so
/// only the attraction-point measure is meaningful.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DoubleWellProblem {
    pub tilt: f64,
}

impl DoubleWellProblem {
    pub fn tilted(tilt: f64) -> Self {
        DoubleWellProblem { tilt }
    }
}

impl BilevelOracle for DoubleWellProblem {
    fn name(&self) -> &str {
        "double_well"
    }

    fn dims(&self) -> (usize, usize) {
        (1, 1)
    }

    fn f(&self, p: &JointPoint) -> f64 {
        0.5 * (p.v[0] * p.v[0] + (p.theta[0] - 2.0).powi(2))
    }

    fn grad_f(&self, p: &JointPoint) -> JointGradient {
        JointGradient::new(vec![p.v[0]], vec![p.theta[0] - 2.0])
    }

    fn g(&self, p: &JointPoint) -> f64 {
        let t = p.theta[0];
        (t * t - 1.0).powi(2) + self.tilt * t
    }

    fn grad_g(&self, p: &JointPoint) -> JointGradient {
        let t = p.theta[0];
        JointGradient::new(vec![0.0], vec![4.0 * t * (t * t - 1.0) + self.tilt])
    }
}
