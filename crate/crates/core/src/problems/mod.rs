//! Built-in benchmark problems, each with analytic gradients.

mod coreset;
mod hyperclean;
mod lls;
mod minimax;
mod ridge;
mod simple;

pub use coreset::CoresetProblem;
pub use hyperclean::{make_synthetic_hyperclean, HypercleanGenerator, HypercleanProblem};
pub use lls::DegenerateLlsProblem;
pub use minimax::MinimaxProblem;
pub use ridge::RidgeRegProblem;
pub use simple::{DoubleWellProblem, ShiftedQuadratic};

/// Numerically stable softmax (max-subtracted).
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| (x - mx).exp()).collect();
    let s: f64 = out.iter().sum();
    for x in &mut out {
        *x /= s;
    }
    out
}

/// `clip(x, [0, 1])`
#[inline]
pub fn clip01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Derivative of [`clip01`]: 1 strictly inside (0, 1), 0 elsewhere.
#[inline]
pub fn clip01_grad(x: f64) -> f64 {
    if x > 0.0 && x < 1.0 {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_input_gives_uniform_output() {
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
        for t in [-700.0, -3.5, 42.0, 900.0] {
            let s = softmax(&[t; 4]);
            assert!(s.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn one_hot_logit_matches_reference() {
        // e / (e + 3) and 1 / (e + 3) from a 35-digit mpmath evaluation
        let big: f64 = "0.475366886418671691097653482610".parse().unwrap();
        let small: f64 = "0.174877704527109436300782172463".parse().unwrap();
        let s = softmax(&[1.0, 0.0, 0.0, 0.0]);
        assert!((s[0] - big).abs() < 1e-15);
        for x in &s[1..] {
            assert!((x - small).abs() < 1e-15);
        }
    }

    #[test]
    fn clip_conventions() {
        assert_eq!(clip01(-0.5), 0.0);
        assert_eq!(clip01(1.5), 1.0);
        assert_eq!(clip01_grad(0.0), 0.0);
        assert_eq!(clip01_grad(1.0), 0.0);
        assert_eq!(clip01_grad(0.5), 1.0);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(v in prop::collection::vec(-50.0..50.0f64, 1..8)) {
            let s = softmax(&v);
            prop_assert!(s.iter().all(|&x| x > 0.0));
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
