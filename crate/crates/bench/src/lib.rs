//! Fixtures shared by the benchmarks.

use bome::problems::{CoresetProblem, HypercleanGenerator, HypercleanProblem};
use bome::{JointPoint, SolverConfig};

pub fn coreset_start() -> (CoresetProblem, JointPoint) {
    (CoresetProblem::default(), CoresetProblem::start(0).expect("preset start"))
}

/// A hyper-cleaning instance with `m_train` examples and its pretrained start.
pub fn hyperclean_instance(m_train: usize) -> (HypercleanProblem, JointPoint) {
    let problem = HypercleanGenerator {
        m_train,
        m_val: m_train / 3,
        ..HypercleanGenerator::default()
    }
    .generate()
    .expect("generator parameters are valid");
    let start = bome::resolve_start(&problem, &bome::StartSpec::Preset("pretrained".into())).expect("start");
    (problem, start)
}

pub fn config(step: f64, inner_iters: usize) -> SolverConfig {
    SolverConfig {
        inner_iters,
        ..SolverConfig::with_step(step)
    }
}
