//! Data hyper-cleaning on synthetic Gaussian clusters.
//!
//! Each training example `i` gets a weight `clip(v_i, [0, 1])`. The inner
//! problem trains a multinomial logistic model on the weighted training set
//! with ridge penalty `c |theta|^2`; the outer problem is the unweighted
//! validation cross-entropy. Driving corrupted examples' weights toward zero is
//! what a good outer solution looks like.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{BomeError, Result};
use crate::oracle::BilevelOracle;
use crate::problems::{clip01, clip01_grad, softmax};
use crate::types::{JointGradient, JointPoint};

pub const DEFAULT_RIDGE_C: f64 = 0.001;

#[derive(Clone, Debug, PartialEq)]
pub struct HypercleanProblem {
    /// `m_tr x p`
    pub train_features: DMatrix<f64>,
    /// Possibly corrupted labels.
    pub train_labels: Vec<usize>,
    pub val_features: DMatrix<f64>,
    pub val_labels: Vec<usize>,
    pub classes: usize,
    pub ridge_c: f64,
    /// Ground truth: which training labels were corrupted. Never read by the oracle.
    pub corruption_mask: Vec<bool>,
}

impl HypercleanProblem {
    pub fn new(
        train_features: DMatrix<f64>,
        train_labels: Vec<usize>,
        val_features: DMatrix<f64>,
        val_labels: Vec<usize>,
        classes: usize,
        ridge_c: f64,
        corruption_mask: Vec<bool>,
    ) -> Result<Self> {
        let p = train_features.ncols();
        let bad = |msg: String| Err(BomeError::InvalidProblem(format!("hyperclean: {msg}")));
        if classes < 2 {
            return bad(format!("need at least 2 classes, got {classes}"));
        }
        if train_features.nrows() != train_labels.len()
            || val_features.nrows() != val_labels.len()
            || val_features.ncols() != p
            || corruption_mask.len() != train_labels.len()
        {
            return bad("inconsistent shapes".into());
        }
        if ridge_c.is_nan() || ridge_c < 0.0 {
            return bad(format!("ridge_c must be >= 0, got {ridge_c}"));
        }
        for (split, labels) in [("train", &train_labels), ("val", &val_labels)] {
            if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
                return bad(format!("{split} label {y} out of range"));
            }
            for c in 0..classes {
                if !labels.contains(&c) {
                    return bad(format!("class {c} absent from {split} split"));
                }
            }
        }
        Ok(HypercleanProblem {
            train_features,
            train_labels,
            val_features,
            val_labels,
            classes,
            ridge_c,
            corruption_mask,
        })
    }

    pub fn num_train(&self) -> usize {
        self.train_labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.train_features.ncols()
    }

    /// Length of `theta`: a `classes x (p + 1)` weight matrix with bias,
    /// stored row-major.
    pub fn theta_len(&self) -> usize {
        self.classes * (self.num_features() + 1)
    }

    fn logits(&self, theta: &[f64], x: &DMatrix<f64>, i: usize) -> Vec<f64> {
        let p = self.num_features();
        (0..self.classes)
            .map(|c| {
                let row = &theta[c * (p + 1)..(c + 1) * (p + 1)];
                row[p] + (0..p).map(|j| row[j] * x[(i, j)]).sum::<f64>()
            })
            .collect()
    }

    /// Cross-entropy of example `i` and its softmax probabilities.
    fn example_loss(&self, theta: &[f64], x: &DMatrix<f64>, y: usize, i: usize) -> (f64, Vec<f64>) {
        let z = self.logits(theta, x, i);
        let mx = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + z.iter().map(|zi| (zi - mx).exp()).sum::<f64>().ln();
        (lse - z[y], softmax(&z))
    }

    /// Adds `scale * grad_theta loss_i` into `out`.
    fn accumulate_grad(&self, out: &mut [f64], probs: &[f64], x: &DMatrix<f64>, y: usize, i: usize, scale: f64) {
        let p = self.num_features();
        for (c, &pc) in probs.iter().enumerate() {
            let coef = scale * (pc - if c == y { 1.0 } else { 0.0 });
            if coef == 0.0 {
                continue;
            }
            let row = &mut out[c * (p + 1)..(c + 1) * (p + 1)];
            for j in 0..p {
                row[j] += coef * x[(i, j)];
            }
            row[p] += coef;
        }
    }

    /// Per-example training losses (unweighted).
    pub fn train_losses(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.num_train())
            .map(|i| self.example_loss(theta, &self.train_features, self.train_labels[i], i).0)
            .collect()
    }

    /// Mean validation cross-entropy, i.e. `f`.
    pub fn validation_loss(&self, theta: &[f64]) -> f64 {
        let m = self.val_labels.len();
        (0..m)
            .map(|i| self.example_loss(theta, &self.val_features, self.val_labels[i], i).0)
            .sum::<f64>()
            / m as f64
    }

    pub fn validation_accuracy(&self, theta: &[f64]) -> f64 {
        let m = self.val_labels.len();
        let hits = (0..m)
            .filter(|&i| {
                let z = self.logits(theta, &self.val_features, i);
                let arg = (0..z.len()).fold(0, |b, c| if z[c] > z[b] { c } else { b });
                arg == self.val_labels[i]
            })
            .count();
        hits as f64 / m as f64
    }

    /// Upper bound on the Lipschitz constant of `grad_theta g` when all
    /// weights are at most 1: the logistic Hessian in the logits is bounded
    /// by 1/2, so `L <= sum_i |x_i~|^2 / 2 + 2c`.
    pub fn theta_smoothness_bound(&self) -> f64 {
        let x = &self.train_features;
        let s: f64 = (0..x.nrows())
            .map(|i| 1.0 + (0..x.ncols()).map(|j| x[(i, j)] * x[(i, j)]).sum::<f64>())
            .sum();
        0.5 * s + 2.0 * self.ridge_c
    }

    /// Writes one split as CSV: `feature_0..feature_{p-1},label,is_corrupted`.
    pub fn write_csv(&self, path: &Path, train: bool) -> Result<()> {
        let (x, y) = if train {
            (&self.train_features, &self.train_labels)
        } else {
            (&self.val_features, &self.val_labels)
        };
        let file = std::fs::File::create(path)
            .map_err(|e| BomeError::io(format!("creating {}", path.display()), e))?;
        let mut w = std::io::BufWriter::new(file);
        let wrap = |e| BomeError::io(format!("writing {}", path.display()), e);
        let mut header: Vec<String> = (0..x.ncols()).map(|j| format!("feature_{j}")).collect();
        header.push("label".into());
        header.push("is_corrupted".into());
        writeln!(w, "{}", header.join(",")).map_err(wrap)?;
        for i in 0..x.nrows() {
            let mut row: Vec<String> = (0..x.ncols()).map(|j| format!("{:.17e}", x[(i, j)])).collect();
            row.push(y[i].to_string());
            let corrupted = train && self.corruption_mask[i];
            row.push(corrupted.to_string());
            writeln!(w, "{}", row.join(",")).map_err(wrap)?;
        }
        w.flush().map_err(wrap)
    }
}

impl BilevelOracle for HypercleanProblem {
    fn name(&self) -> &str {
        "hyperclean"
    }

    fn dims(&self) -> (usize, usize) {
        (self.num_train(), self.theta_len())
    }

    fn f(&self, p: &JointPoint) -> f64 {
        self.validation_loss(&p.theta)
    }

    fn grad_f(&self, p: &JointPoint) -> JointGradient {
        let m = self.val_labels.len();
        let mut gt = vec![0.0; self.theta_len()];
        for i in 0..m {
            let (_, probs) = self.example_loss(&p.theta, &self.val_features, self.val_labels[i], i);
            self.accumulate_grad(&mut gt, &probs, &self.val_features, self.val_labels[i], i, 1.0 / m as f64);
        }
        JointGradient::new(vec![0.0; self.num_train()], gt)
    }

    fn g(&self, p: &JointPoint) -> f64 {
        let weighted: f64 = self
            .train_losses(&p.theta)
            .iter()
            .zip(&p.v)
            .map(|(l, v)| clip01(*v) * l)
            .sum();
        weighted + self.ridge_c * p.theta.iter().map(|t| t * t).sum::<f64>()
    }

    fn grad_g(&self, p: &JointPoint) -> JointGradient {
        let mut gt: Vec<f64> = p.theta.iter().map(|t| 2.0 * self.ridge_c * t).collect();
        let mut dv = vec![0.0; self.num_train()];
        for (i, dv_i) in dv.iter_mut().enumerate() {
            let y = self.train_labels[i];
            let (loss, probs) = self.example_loss(&p.theta, &self.train_features, y, i);
            *dv_i = clip01_grad(p.v[i]) * loss;
            let w = clip01(p.v[i]);
            if w > 0.0 {
                self.accumulate_grad(&mut gt, &probs, &self.train_features, y, i, w);
            }
        }
        JointGradient::new(dv, gt)
    }
}

/// Parameters for [`HypercleanGenerator::generate`].
#[derive(Clone, Debug, PartialEq)]
pub struct HypercleanGenerator {
    pub seed: u64,
    pub m_train: usize,
    pub m_val: usize,
    pub features: usize,
    pub corrupt_frac: f64,
    pub classes: usize,
    /// Distance of each class mean from the origin.
    pub separation: f64,
    pub ridge_c: f64,
}

impl Default for HypercleanGenerator {
    fn default() -> Self {
        HypercleanGenerator {
            seed: 0,
            m_train: 300,
            m_val: 100,
            features: 10,
            corrupt_frac: 0.3,
            classes: 2,
            separation: 1.5,
            ridge_c: DEFAULT_RIDGE_C,
        }
    }
}

impl HypercleanGenerator {
    /// Class-balanced Gaussian clusters. Exactly `round(corrupt_frac * m_train)`
    /// training labels are replaced by a uniformly drawn *different* class.
    pub fn generate(&self) -> Result<HypercleanProblem> {
        if !(0.0..1.0).contains(&self.corrupt_frac) {
            return Err(BomeError::InvalidProblem(format!(
                "hyperclean: corrupt_frac must lie in [0, 1), got {}",
                self.corrupt_frac
            )));
        }
        if self.features == 0 || self.classes < 2 {
            return Err(BomeError::InvalidProblem(
                "hyperclean: need features >= 1 and classes >= 2".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let p = self.features;
        let means: Vec<Vec<f64>> = (0..self.classes)
            .map(|_| {
                let d: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = d.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                d.iter().map(|x| self.separation * x / n).collect()
            })
            .collect();
        let sample = |m: usize, rng: &mut ChaCha8Rng| {
            let labels: Vec<usize> = (0..m).map(|i| i % self.classes).collect();
            let x = DMatrix::from_fn(m, p, |i, j| {
                let z: f64 = StandardNormal.sample(rng);
                means[labels[i]][j] + z
            });
            (x, labels)
        };
        let (train_x, mut train_y) = sample(self.m_train, &mut rng);
        let (val_x, val_y) = sample(self.m_val, &mut rng);

        let n_corrupt = (self.corrupt_frac * self.m_train as f64).round() as usize;
        let mut idx: Vec<usize> = (0..self.m_train).collect();
        idx.shuffle(&mut rng);
        let mut mask = vec![false; self.m_train];
        for &i in &idx[..n_corrupt] {
            let shift = rng.random_range(1..self.classes);
            train_y[i] = (train_y[i] + shift) % self.classes;
            mask[i] = true;
        }
        HypercleanProblem::new(train_x, train_y, val_x, val_y, self.classes, self.ridge_c, mask)
    }
}

/// Two-class instance with the default separation and ridge coefficient.
pub fn make_synthetic_hyperclean(
    seed: u64,
    m_train: usize,
    m_val: usize,
    features: usize,
    corrupt_frac: f64,
) -> Result<HypercleanProblem> {
    HypercleanGenerator {
        seed,
        m_train,
        m_val,
        features,
        corrupt_frac,
        ..Default::default()
    }
    .generate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> HypercleanProblem {
        make_synthetic_hyperclean(1, 20, 10, 3, 0.3).unwrap()
    }

    #[test]
    fn unit_weights_without_ridge_give_plain_training_loss() {
        let mut prob = small();
        prob.ridge_c = 0.0;
        let theta: Vec<f64> = (0..prob.theta_len()).map(|k| 0.1 * k as f64 - 0.3).collect();
        let p = JointPoint::new(vec![1.0; 20], theta.clone()).unwrap();
        let plain: f64 = prob.train_losses(&theta).iter().sum();
        assert!((prob.g(&p) - plain).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_weights_leave_only_ridge_gradient() {
        let prob = small();
        let theta: Vec<f64> = (0..prob.theta_len()).map(|k| 0.2 * k as f64).collect();
        let v: Vec<f64> = (0..20).map(|i| -(i as f64) * 0.1).collect();
        let g = prob.grad_g(&JointPoint::new(v, theta.clone()).unwrap());
        for (gt, t) in g.dtheta.iter().zip(&theta) {
            assert_eq!(*gt, 2.0 * prob.ridge_c * t);
        }
        assert!(g.dv.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn corruption_count_and_label_change() {
        let gen = HypercleanGenerator {
            seed: 4,
            m_train: 50,
            m_val: 10,
            features: 2,
            corrupt_frac: 0.4,
            ..Default::default()
        };
        let prob = gen.generate().unwrap();
        assert_eq!(prob.corruption_mask.iter().filter(|&&c| c).count(), 20);
        for i in 0..50 {
            let original = i % 2;
            assert_eq!(prob.train_labels[i] != original, prob.corruption_mask[i]);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(make_synthetic_hyperclean(0, 20, 10, 3, 1.0).is_err());
        // one validation example cannot cover two classes
        assert!(make_synthetic_hyperclean(0, 20, 1, 3, 0.0).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(small(), small());
    }

    #[test]
    fn csv_export_has_expected_columns() {
        let prob = small();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.csv");
        prob.write_csv(&path, true).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "feature_0,feature_1,feature_2,label,is_corrupted"
        );
        assert_eq!(lines.count(), 20);
    }
}
