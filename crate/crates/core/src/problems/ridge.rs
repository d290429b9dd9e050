use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{BomeError, Result};
use crate::oracle::BilevelOracle;
use crate::types::{JointGradient, JointPoint};

/// Learnable per-feature regularization for least squares.
///
/// Inner: `g(v, theta) = |A theta - y|^2 + |diag(exp(v)) theta|^2`.
/// Outer: `f(v, theta) = |A_val theta - y_val|^2`.
///
/// `v` and `theta` both have one entry per feature. The inner problem is
/// strictly convex for every finite `v`, and its minimizer solves
/// `(A^T A + diag(exp(2v))) theta = A^T y`.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeRegProblem {
    pub train_a: DMatrix<f64>,
    pub train_y: DVector<f64>,
    pub val_a: DMatrix<f64>,
    pub val_y: DVector<f64>,
    gram: DMatrix<f64>,
    aty: DVector<f64>,
}

impl RidgeRegProblem {
    pub fn new(
        train_a: DMatrix<f64>,
        train_y: DVector<f64>,
        val_a: DMatrix<f64>,
        val_y: DVector<f64>,
    ) -> Result<Self> {
        let p = train_a.ncols();
        if p == 0 || train_a.nrows() != train_y.len() || val_a.nrows() != val_y.len() || val_a.ncols() != p {
            return Err(BomeError::InvalidProblem(format!(
                "ridge: inconsistent shapes train {}x{} / {}, val {}x{} / {}",
                train_a.nrows(),
                train_a.ncols(),
                train_y.len(),
                val_a.nrows(),
                val_a.ncols(),
                val_y.len()
            )));
        }
        let gram = train_a.transpose() * &train_a;
        let aty = train_a.transpose() * &train_y;
        Ok(RidgeRegProblem {
            train_a,
            train_y,
            val_a,
            val_y,
            gram,
            aty,
        })
    }

    /// Random linear-model regression data. Rows are scaled by `1/sqrt(m)` so
    /// that the squared losses behave like mean squared errors.
    ///
    /// Only a third of the true coefficients are nonzero, so feature-wise
    /// regularization has something to learn.
    pub fn synthetic(seed: u64, m_train: usize, m_val: usize, p: usize, noise: f64) -> Result<Self> {
        if m_train == 0 || m_val == 0 || p == 0 {
            return Err(BomeError::InvalidProblem(
                "ridge: sizes must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let w: Vec<f64> = (0..p)
            .map(|j| if j % 3 == 0 { 1.0 + normal().abs() } else { 0.0 })
            .collect();
        let mut split = |m: usize| {
            let scale = 1.0 / (m as f64).sqrt();
            let a = DMatrix::from_fn(m, p, |_, _| normal());
            let y = DVector::from_fn(m, |i, _| {
                let clean: f64 = (0..p).map(|j| a[(i, j)] * w[j]).sum();
                clean + noise * normal()
            });
            (a * scale, y * scale)
        };
        let (ta, ty) = split(m_train);
        let (va, vy) = split(m_val);
        Self::new(ta, ty, va, vy)
    }

    pub fn num_features(&self) -> usize {
        self.train_a.ncols()
    }

    fn inner_hessian_half(&self, v: &[f64]) -> DMatrix<f64> {
        let mut h = self.gram.clone();
        for (j, vj) in v.iter().enumerate() {
            h[(j, j)] += (2.0 * vj).exp();
        }
        h
    }

    /// Extreme eigenvalues of `grad_theta^2 g(v, .) = 2 (A^T A + diag(exp(2v)))`.
    pub fn theta_hessian_spectrum(&self, v: &[f64]) -> (f64, f64) {
        let eig = (self.inner_hessian_half(v) * 2.0).symmetric_eigenvalues();
        (eig.min(), eig.max())
    }

    /// Lipschitz constant of `grad_theta g(v, .)`.
    pub fn theta_smoothness(&self, v: &[f64]) -> f64 {
        self.theta_hessian_spectrum(v).1
    }

    /// PL constant of `g(v, .)`: `|grad|^2 >= kappa (g - g*)` with
    /// `kappa = 2 * lambda_min(Hessian)`.
    pub fn theta_pl_constant(&self, v: &[f64]) -> f64 {
        2.0 * self.theta_hessian_spectrum(v).0
    }

    fn split_theta(&self, p: &JointPoint) -> DVector<f64> {
        DVector::from_column_slice(&p.theta)
    }
}

impl BilevelOracle for RidgeRegProblem {
    fn name(&self) -> &str {
        "ridge"
    }

    fn dims(&self) -> (usize, usize) {
        let p = self.num_features();
        (p, p)
    }

    fn f(&self, p: &JointPoint) -> f64 {
        (&self.val_a * self.split_theta(p) - &self.val_y).norm_squared()
    }

    fn grad_f(&self, p: &JointPoint) -> JointGradient {
        let r = &self.val_a * self.split_theta(p) - &self.val_y;
        let gt = self.val_a.transpose() * r * 2.0;
        JointGradient::new(vec![0.0; p.v.len()], gt.as_slice().to_vec())
    }

    fn g(&self, p: &JointPoint) -> f64 {
        let fit = (&self.train_a * self.split_theta(p) - &self.train_y).norm_squared();
        let reg: f64 = p
            .v
            .iter()
            .zip(&p.theta)
            .map(|(v, t)| (2.0 * v).exp() * t * t)
            .sum();
        fit + reg
    }

    fn grad_g(&self, p: &JointPoint) -> JointGradient {
        let r = &self.train_a * self.split_theta(p) - &self.train_y;
        let mut gt = self.train_a.transpose() * r * 2.0;
        let mut dv = Vec::with_capacity(p.v.len());
        for (j, (v, t)) in p.v.iter().zip(&p.theta).enumerate() {
            let e = (2.0 * v).exp();
            gt[j] += 2.0 * e * t;
            dv.push(2.0 * e * t * t);
        }
        JointGradient::new(dv, gt.as_slice().to_vec())
    }

    fn has_exact_inner_opt(&self) -> bool {
        true
    }

    fn exact_inner_opt(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.num_features() {
            return Err(BomeError::Dimension(format!(
                "ridge: v has {} entries, expected {}",
                v.len(),
                self.num_features()
            )));
        }
        let chol = self.inner_hessian_half(v).cholesky().ok_or_else(|| {
            BomeError::Numerical("ridge: normal equations are not positive definite".into())
        })?;
        let theta = chol.solve(&self.aty);
        if !theta.iter().all(|x| x.is_finite()) {
            return Err(BomeError::Numerical("ridge: non-finite inner optimum".into()));
        }
        Ok(theta.as_slice().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prob() -> RidgeRegProblem {
        RidgeRegProblem::synthetic(7, 40, 20, 6, 0.1).unwrap()
    }

    #[test]
    fn weak_regularization_approaches_least_squares() {
        let p = prob();
        let theta = p.exact_inner_opt(&[-20.0; 6]).unwrap();
        let ls = p.gram.clone().lu().solve(&p.aty).unwrap();
        for (a, b) in theta.iter().zip(ls.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn strong_regularization_shrinks_to_zero() {
        let theta = prob().exact_inner_opt(&[20.0; 6]).unwrap();
        assert!(theta.iter().all(|t| t.abs() < 1e-12));
    }

    #[test]
    fn closed_form_is_stationary() {
        let p = prob();
        for v in [[0.0; 6], [-1.0, 0.5, 2.0, -0.3, 0.0, 1.0]] {
            let theta = p.exact_inner_opt(&v).unwrap();
            let g = p.grad_g(&JointPoint::new(v.to_vec(), theta).unwrap());
            let n: f64 = g.dtheta.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(n < 1e-8, "{n}");
        }
    }

    #[test]
    fn same_seed_same_data() {
        assert_eq!(prob(), prob());
        assert_ne!(prob(), RidgeRegProblem::synthetic(8, 40, 20, 6, 0.1).unwrap());
    }
}
