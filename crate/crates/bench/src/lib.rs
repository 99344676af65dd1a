//! Shared fixtures for the benchmarks.

use rkhs_inverse::experiments::{gen_dataset, SimulationModel};
use rkhs_inverse::pseudo_gram::SpectralKernelModel;
use rkhs_inverse::{Kernel, PseudoGram, QuadratureRule, SpectralOperator};

/// Heat operator, Wendland kernel and default quadrature, as in the study.
pub fn study_model() -> SpectralKernelModel {
    let op = SpectralOperator::heat(0.01).expect("valid operator");
    let kernel = Kernel::wendland(1, 0.3).expect("valid kernel");
    SpectralKernelModel::new(op, kernel, QuadratureRule::default()).expect("model builds")
}

/// Assembled `M` and one noisy response vector for the equidistant design of size `n`.
pub fn study_problem(model: &SpectralKernelModel, n: usize, delta: f64, seed: u64) -> (PseudoGram, Vec<f64>) {
    let sim = SimulationModel::new(n, delta, *model.operator(), model.rule()).expect("simulation model");
    let pg = model.assemble(&sim.design()).expect("assembly");
    let data = gen_dataset(&sim, seed).expect("dataset");
    (pg, data.y)
}
