//! Simulation study for the backward heat conduction problem.
//!
//! Data follow `y_i = (A f₀)(z_i) + s_δ(z_i) ε_i` on the equidistant design
//! `z_i = (i−1)/n`, with `f₀(x) = −10 x (x−1) sin(4πx)`, `s_δ(z) = δ z (z−1)`
//! and standard normal errors. Both estimators are tuned by 5-fold
//! cross-validation and scored by the `L1` distance to `f₀`.

mod cv;
mod data;
mod selfcal;
mod stats;
mod study;

pub use cv::{fold_assignment, kfold_select, rkm_cv, sce_cv, CvOutcome, CvPlan};
pub use data::{
    equidistant_design, f0_eval, gen_dataset, l1_error, l1_error_values, scale_fn, Dataset, SimulationModel,
};
pub use selfcal::{normal_excess_risk, self_calibration_check, SelfCalibrationReport};
pub use stats::{quantile, Summary};
pub use study::{
    fit_rkm_cv, run_experiment, Cell, Estimator, ExperimentConfig, ExperimentResult, RunRecord, RunSummary,
};
