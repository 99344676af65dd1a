use std::sync::Arc;

use approx::assert_abs_diff_eq;
use rkhs_inverse::experiments::{equidistant_design, f0_eval, l1_error_values, SimulationModel};
use rkhs_inverse::operators::sine_basis;
use rkhs_inverse::pseudo_gram::SpectralKernelModel;
use rkhs_inverse::solvers::{solve_least_squares, solve_pinball_dual_cd};
use rkhs_inverse::{
    gram_matrix, FitProblem, Kernel, Loss, QuadratureRule, RkmPredictor, SolverOptions, SpectralOperator,
};

fn heat_model() -> Arc<SpectralKernelModel> {
    let op = SpectralOperator::heat(0.01).unwrap();
    Arc::new(SpectralKernelModel::new(op, Kernel::wendland(1, 0.3).unwrap(), QuadratureRule::default()).unwrap())
}

#[test]
fn identity_rkm_is_an_ordinary_kernel_machine() {
    let kernel = Kernel::wendland(1, 0.3).unwrap();
    let model =
        Arc::new(SpectralKernelModel::new(SpectralOperator::identity(), kernel, QuadratureRule::default()).unwrap());
    let z = equidistant_design(25);
    let pg = model.assemble(&z).unwrap();
    assert_eq!(pg.matrix(), &gram_matrix(&kernel, &z).unwrap());
    let y: Vec<f64> = z.iter().map(|&x| (6.0 * x).sin()).collect();
    let p = FitProblem::new(pg.matrix(), &y, Loss::least_squares(), 1e-3).unwrap();
    let fit = solve_least_squares(&p).unwrap();
    let pred = RkmPredictor::new(model, &z, fit.alpha.clone()).unwrap();
    for x in [0.0, 0.31, 0.5, 0.97] {
        let direct: f64 = z.iter().zip(&fit.alpha).map(|(zi, a)| a * kernel.eval(&x, zi)).sum();
        assert_abs_diff_eq!(pred.predict(x).unwrap(), direct, epsilon = 1e-12);
    }
}

#[test]
fn in_sample_predictor_matches_m_alpha_through_the_operator() {
    // (A f̂)(z_i) = (Mα)_i, so applying A to the coefficient form of f̂ reproduces Mα.
    let model = heat_model();
    let z = equidistant_design(40);
    let pg = model.assemble(&z).unwrap();
    let y: Vec<f64> = z.iter().map(|&x| f0_eval(x) * 0.2).collect();
    let p =
        FitProblem::new(pg.matrix(), &y, Loss::absolute(), 1e-3).unwrap().with_factor(pg.factor().unwrap()).unwrap();
    let fit = solve_pinball_dual_cd(&p, &SolverOptions::default()).unwrap();
    assert!(fit.report.converged);
    let m_alpha = pg.matrix() * nalgebra::DVector::from_vec(fit.alpha.clone());
    let iqs = model.iqs().unwrap();
    let sigma = model.operator().eigenvalues();
    let beta: Vec<f64> = (0..sigma.len())
        .map(|q| sigma[q] * z.iter().zip(&fit.alpha).map(|(&zi, a)| a * sine_basis(q + 1, zi)).sum::<f64>())
        .collect();
    for (i, &zi) in z.iter().enumerate() {
        let af: f64 = (0..sigma.len())
            .map(|s| sigma[s] * sine_basis(s + 1, zi) * (0..sigma.len()).map(|q| iqs[(q, s)] * beta[q]).sum::<f64>())
            .sum();
        assert_abs_diff_eq!(af, m_alpha[i], epsilon = 1e-10);
    }
}

#[test]
fn noiseless_heat_fit_recovers_f0() {
    let model = heat_model();
    let sim = SimulationModel::new(200, 0.0, *model.operator(), model.rule()).unwrap();
    let z = sim.design();
    let y: Vec<f64> = z.iter().map(|&x| sim.signal(x).unwrap()).collect();
    let pg = model.assemble(&z).unwrap();
    let p =
        FitProblem::new(pg.matrix(), &y, Loss::absolute(), 1e-6).unwrap().with_factor(pg.factor().unwrap()).unwrap();
    let fit = solve_pinball_dual_cd(&p, &SolverOptions::default()).unwrap();
    let pred = RkmPredictor::new(model, &z, fit.alpha).unwrap();
    let grid: Vec<f64> = (0..513).map(|i| i as f64 / 512.0).collect();
    let est = pred.predict_grid(&grid, None).unwrap();
    let truth: Vec<f64> = grid.iter().map(|&x| f0_eval(x)).collect();
    let l1 = l1_error_values(&est, &truth).unwrap();
    assert!(l1 < 0.1, "L1 {l1}");
}
