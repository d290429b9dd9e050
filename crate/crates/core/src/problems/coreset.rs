use crate::error::{BomeError, Result};
use crate::oracle::BilevelOracle;
use crate::problems::softmax;
use crate::types::{JointGradient, JointPoint};

/// Closest point to `target` inside the convex hull of four vertices.
///
/// `f = |theta - x0|^2` and `g = |theta - X softmax(v)|^2`, so the inner
/// problem keeps `theta` on the hull (parameterized by softmax weights) while
/// the outer problem pulls it toward `x0`. `v` has 4 entries, `theta` has 2.
#[derive(Clone, Debug, PartialEq)]
pub struct CoresetProblem {
    pub target: [f64; 2],
    /// Columns `x1..x4`.
    pub vertices: [[f64; 2]; 4],
}

impl Default for CoresetProblem {
    fn default() -> Self {
        CoresetProblem {
            target: [3.0, -2.0],
            vertices: [[1.0, 3.0], [3.0, 1.0], [-2.0, 2.0], [-3.0, 2.0]],
        }
    }
}

impl CoresetProblem {
    /// The three reference starting values of `theta` (with `v = 0`).
    pub const START_THETAS: [[f64; 2]; 3] = [[0.0, 3.0], [-3.0, 1.0], [3.5, 1.0]];

    pub fn start(index: usize) -> Result<JointPoint> {
        let t = Self::START_THETAS.get(index).ok_or_else(|| {
            BomeError::InvalidProblem(format!("coreset has starts 0..=2, got {index}"))
        })?;
        JointPoint::new(vec![0.0; 4], t.to_vec())
    }

    /// `X w` for a weight vector `w`.
    pub fn combine(&self, w: &[f64]) -> [f64; 2] {
        let mut c = [0.0; 2];
        for (x, wj) in self.vertices.iter().zip(w) {
            c[0] += x[0] * wj;
            c[1] += x[1] * wj;
        }
        c
    }

    fn residual(&self, p: &JointPoint) -> ([f64; 2], Vec<f64>) {
        let s = softmax(&p.v);
        let c = self.combine(&s);
        ([p.theta[0] - c[0], p.theta[1] - c[1]], s)
    }
}

impl BilevelOracle for CoresetProblem {
    fn name(&self) -> &str {
        "coreset"
    }

    fn dims(&self) -> (usize, usize) {
        (4, 2)
    }

    fn f(&self, p: &JointPoint) -> f64 {
        (p.theta[0] - self.target[0]).powi(2) + (p.theta[1] - self.target[1]).powi(2)
    }

    fn grad_f(&self, p: &JointPoint) -> JointGradient {
        JointGradient::new(
            vec![0.0; 4],
            vec![
                2.0 * (p.theta[0] - self.target[0]),
                2.0 * (p.theta[1] - self.target[1]),
            ],
        )
    }

    fn g(&self, p: &JointPoint) -> f64 {
        let (r, _) = self.residual(p);
        r[0] * r[0] + r[1] * r[1]
    }

    fn grad_g(&self, p: &JointPoint) -> JointGradient {
        let (r, s) = self.residual(p);
        // -2 J^T X^T r with J = diag(s) - s s^T (symmetric)
        let xr: Vec<f64> = self
            .vertices
            .iter()
            .map(|x| x[0] * r[0] + x[1] * r[1])
            .collect();
        let mean: f64 = s.iter().zip(&xr).map(|(a, b)| a * b).sum();
        let dv = s
            .iter()
            .zip(&xr)
            .map(|(sj, xj)| -2.0 * sj * (xj - mean))
            .collect();
        JointGradient::new(dv, vec![2.0 * r[0], 2.0 * r[1]])
    }

    fn has_exact_inner_opt(&self) -> bool {
        true
    }

    fn exact_inner_opt(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.combine(&softmax(v)).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_inner_opt_at_zero_is_vertex_mean() {
        let t = CoresetProblem::default().exact_inner_opt(&[0.0; 4]).unwrap();
        assert!((t[0] + 0.25).abs() < 1e-15);
        assert!((t[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn starts() {
        assert_eq!(CoresetProblem::start(0).unwrap().theta, vec![0.0, 3.0]);
        assert!(CoresetProblem::start(3).is_err());
    }
}
