//! Domain types shared by every part of the solver.

use serde::{Deserialize, Serialize};

use crate::error::{BomeError, Result};
use crate::vecops;

/// A point `(v, theta)`: outer variable `v` and inner variable `theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointPoint {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
}

impl JointPoint {
    /// Builds a point, rejecting empty blocks and non-finite entries.
    pub fn new(v: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        let p = JointPoint { v, theta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.v.is_empty() || self.theta.is_empty() {
            return Err(BomeError::Dimension(format!(
                "point blocks must be non-empty (m = {}, n = {})",
                self.v.len(),
                self.theta.len()
            )));
        }
        if !self.is_finite() {
            return Err(BomeError::Numerical("point has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.v.len(), self.theta.len())
    }

    pub fn is_finite(&self) -> bool {
        vecops::all_finite(&self.v) && vecops::all_finite(&self.theta)
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> JointPoint {
        JointPoint {
            v: self.v.clone(),
            theta,
        }
    }

    /// `[v; theta]` as one vector.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.v.len() + self.theta.len());
        out.extend_from_slice(&self.v);
        out.extend_from_slice(&self.theta);
        out
    }

    pub fn from_flat(m: usize, flat: &[f64]) -> JointPoint {
        JointPoint {
            v: flat[..m].to_vec(),
            theta: flat[m..].to_vec(),
        }
    }

    pub fn norm(&self) -> f64 {
        (vecops::norm_sq(&self.v) + vecops::norm_sq(&self.theta)).sqrt()
    }

    pub fn distance(&self, other: &JointPoint) -> f64 {
        let dv = vecops::distance(&self.v, &other.v);
        let dt = vecops::distance(&self.theta, &other.theta);
        (dv * dv + dt * dt).sqrt()
    }
}

/// Gradient with respect to `(v, theta)`, split into its two blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointGradient {
    pub dv: Vec<f64>,
    pub dtheta: Vec<f64>,
}

impl JointGradient {
    pub fn new(dv: Vec<f64>, dtheta: Vec<f64>) -> Self {
        JointGradient { dv, dtheta }
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        JointGradient {
            dv: vec![0.0; m],
            dtheta: vec![0.0; n],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dv.len(), self.dtheta.len())
    }

    pub fn dot(&self, other: &JointGradient) -> f64 {
        vecops::dot(&self.dv, &other.dv) + vecops::dot(&self.dtheta, &other.dtheta)
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self += c * other`
    pub fn add_scaled(&mut self, c: f64, other: &JointGradient) {
        vecops::axpy(c, &other.dv, &mut self.dv);
        vecops::axpy(c, &other.dtheta, &mut self.dtheta);
    }

    pub fn scaled(&self, c: f64) -> JointGradient {
        JointGradient {
            dv: self.dv.iter().map(|x| c * x).collect(),
            dtheta: self.dtheta.iter().map(|x| c * x).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        vecops::all_finite(&self.dv) && vecops::all_finite(&self.dtheta)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dv.len() + self.dtheta.len());
        out.extend_from_slice(&self.dv);
        out.extend_from_slice(&self.dtheta);
        out
    }

    pub(crate) fn check_dims(&self, p: &JointPoint, what: &str) -> Result<()> {
        if self.dims() != p.dims() {
            return Err(BomeError::Dimension(format!(
                "{what}: gradient dims {:?} do not match point dims {:?}",
                self.dims(),
                p.dims()
            )));
        }
        Ok(())
    }
}

/// Constants a problem may declare about itself. Only tests and
/// [`validate_config`] read these; the update rule never does.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemMetadata {
    /// Lipschitz constant of the gradients of `f` and `g`.
    pub smoothness_l: Option<f64>,
    /// PL constant of `g(v, .)`.
    pub pl_constant_kappa: Option<f64>,
    /// Bound on the gradient magnitudes.
    pub bound_m: Option<f64>,
    pub known_optimum: Option<JointPoint>,
    pub known_f_opt: Option<f64>,
}

impl ProblemMetadata {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for (name, val) in [
            ("smoothness_l", self.smoothness_l),
            ("pl_constant_kappa", self.pl_constant_kappa),
            ("bound_m", self.bound_m),
        ] {
            if let Some(x) = val {
                if !(x > 0.0 && x.is_finite()) {
                    errs.push(format!("{name} must be strictly positive, got {x}"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(BomeError::InvalidConfig(errs))
        }
    }
}

/// Choice of the control barrier `phi_k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    /// `phi = eta * |grad q_hat|^2`
    #[default]
    #[serde(alias = "gradnorm")]
    GradNormSq,
    /// `phi = eta * max(q_hat, 0)`
    Value,
}

impl std::str::FromStr for BarrierKind {
    type Err = BomeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradnorm" | "grad_norm_sq" | "gradnormsq" => Ok(BarrierKind::GradNormSq),
            "value" => Ok(BarrierKind::Value),
            other => Err(BomeError::Parse(format!(
                "unknown barrier kind '{other}' (expected gradnorm or value)"
            ))),
        }
    }
}

/// All solver hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Outer step size `xi`.
    pub outer_step: f64,
    /// Inner step size `alpha`.
    pub inner_step: f64,
    /// Number of inner gradient steps `T`.
    pub inner_iters: usize,
    pub eta: f64,
    pub barrier: BarrierKind,
    /// Outer iteration budget `K`.
    pub max_iters: usize,
    /// Separate `(xi_v, xi_theta)`; both default to `outer_step`.
    pub separate_outer_steps: Option<(f64, f64)>,
    /// Heavy-ball coefficient applied to the combined direction.
    pub momentum: f64,
    pub kkt_eval_every: usize,
    pub stop_kkt_tol: Option<f64>,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::with_step(0.05)
    }
}

impl SolverConfig {
    /// Defaults with `xi = alpha = step`.
    pub fn with_step(step: f64) -> Self {
        SolverConfig {
            outer_step: step,
            inner_step: step,
            inner_iters: 10,
            eta: 0.5,
            barrier: BarrierKind::GradNormSq,
            max_iters: 1000,
            separate_outer_steps: None,
            momentum: 0.0,
            kkt_eval_every: 10,
            stop_kkt_tol: None,
            rng_seed: 0,
        }
    }

    /// `(xi_v, xi_theta)`
    pub fn block_steps(&self) -> (f64, f64) {
        self.separate_outer_steps
            .unwrap_or((self.outer_step, self.outer_step))
    }
}

/// Checks a configuration. Hard violations are errors; step sizes that exceed
/// `1/L` for a declared smoothness constant only produce warnings.
pub fn validate_config(cfg: &SolverConfig, meta: Option<&ProblemMetadata>) -> Result<Vec<String>> {
    let mut errs = Vec::new();
    let positive = |name: &str, x: f64, errs: &mut Vec<String>| {
        if !(x > 0.0 && x.is_finite()) {
            errs.push(format!("{name} must be > 0, got {x}"));
        }
    };
    positive("xi", cfg.outer_step, &mut errs);
    positive("alpha", cfg.inner_step, &mut errs);
    positive("eta", cfg.eta, &mut errs);
    if let Some((xv, xt)) = cfg.separate_outer_steps {
        positive("xi_v", xv, &mut errs);
        positive("xi_theta", xt, &mut errs);
    }
    if cfg.max_iters == 0 {
        errs.push("iters must be >= 1".into());
    }
    if !(0.0..1.0).contains(&cfg.momentum) {
        errs.push(format!("momentum must lie in [0, 1), got {}", cfg.momentum));
    }
    if cfg.kkt_eval_every == 0 {
        errs.push("kkt_every must be >= 1".into());
    }
    if let Some(tol) = cfg.stop_kkt_tol {
        positive("kkt_tol", tol, &mut errs);
    }
    if !errs.is_empty() {
        return Err(BomeError::InvalidConfig(errs));
    }

    let mut warnings = Vec::new();
    if let Some(l) = meta.and_then(|m| m.smoothness_l) {
        let bound = 1.0 / l;
        let (xv, xt) = cfg.block_steps();
        if cfg.outer_step > bound || xv > bound || xt > bound {
            warnings.push(format!(
                "ξ > 1/L: outer step {} exceeds 1/L = {bound}",
                cfg.outer_step.max(xv).max(xt)
            ));
        }
        if cfg.inner_step > bound {
            warnings.push(format!(
                "α > 1/L: inner step {} exceeds 1/L = {bound}",
                cfg.inner_step
            ));
        }
    }
    Ok(warnings)
}

/// Per-iteration record of one outer step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub iter_k: usize,
    pub f_value: f64,
    pub q_hat: f64,
    pub lambda: f64,
    pub phi: f64,
    pub delta_norm: f64,
    pub grad_qhat_norm: f64,
    pub kkt_value: Option<f64>,
    pub wall_time_micros: u64,
}
