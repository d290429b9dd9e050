//! The contract a bilevel problem implements.
//!
//! A problem supplies the outer objective `f`, the inner objective `g` and
//! their analytic gradients with respect to `(v, theta)`. Problems whose inner
//! minimizer is available in closed form also expose it, which unlocks the
//! exact stationarity measure in [`crate::metrics::kkt_exact`].

use crate::error::{BomeError, Result};
use crate::types::{JointGradient, JointPoint, ProblemMetadata};

/// Exact value function `g*(v) = min_theta g(v, theta)` and its gradient.
///
/// By Danskin's identity the gradient only needs the partial derivative of `g`
/// in `v` at the minimizer, never the derivative of the minimizer itself.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunction {
    pub value: f64,
    pub grad_v: Vec<f64>,
}

pub trait BilevelOracle: Send + Sync {
    fn name(&self) -> &str;

    /// `(m, n)`: dimensions of the outer and inner variables.
    fn dims(&self) -> (usize, usize);

    fn f(&self, p: &JointPoint) -> f64;
    fn grad_f(&self, p: &JointPoint) -> JointGradient;
    fn g(&self, p: &JointPoint) -> f64;
    fn grad_g(&self, p: &JointPoint) -> JointGradient;

    fn has_exact_inner_opt(&self) -> bool {
        false
    }

    /// `theta*(v) = argmin_theta g(v, theta)`, when available in closed form.
    fn exact_inner_opt(&self, _v: &[f64]) -> Result<Vec<f64>> {
        Err(BomeError::MissingCapability("exact_inner_opt"))
    }

    fn has_exact_value(&self) -> bool {
        self.has_exact_inner_opt()
    }

    /// Defaults to evaluating `g` and `grad_v g` at `exact_inner_opt(v)`.
    /// Problems with a non-unique inner minimizer override this directly.
    fn exact_value(&self, v: &[f64]) -> Result<ValueFunction> {
        let theta_star = self.exact_inner_opt(v)?;
        let p = JointPoint {
            v: v.to_vec(),
            theta: theta_star,
        };
        Ok(ValueFunction {
            value: self.g(&p),
            grad_v: self.grad_g(&p).dv,
        })
    }

    fn metadata(&self) -> Option<&ProblemMetadata> {
        None
    }
}

/// Checks that `p` has the dimensions the oracle expects.
pub fn check_point<O: BilevelOracle + ?Sized>(oracle: &O, p: &JointPoint) -> Result<()> {
    if p.dims() != oracle.dims() {
        return Err(BomeError::Dimension(format!(
            "point dims {:?} do not match problem '{}' dims {:?}",
            p.dims(),
            oracle.name(),
            oracle.dims()
        )));
    }
    Ok(())
}
