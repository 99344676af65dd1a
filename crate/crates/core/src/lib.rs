//! Regularized kernel methods for statistical inverse regression.
//!
//! The observation model is `y_i = (A f₀)(z_i) + noise` for a known compact
//! forward operator `A`. A regularized kernel method (RKM) estimates `f₀`
//! directly in an RKHS by minimizing the empirical risk of `A f` plus a ridge
//! penalty. By the empirical representer theorem the minimizer lives in the
//! span of `x ↦ (A Φ(x))(z_i)`, which turns the fit into an ordinary kernel
//! machine on the *pseudo kernel matrix* `M`.
//!
//! Modules:
//!
//! * [`kernels`]: Wendland and Gaussian kernels, Gram matrices, scale heuristic.
//! * [`operators`]: spectrally described forward operators (heat, identity).
//! * [`pseudo_gram`]: quadrature and assembly of `M` and the prediction integrals.
//! * [`losses`]: convex regression losses with right-derivative subgradients.
//! * [`solvers`]: closed-form least squares and box-constrained dual coordinate descent.
//! * [`estimators`]: the RKM predictor and the spectral cut-off baseline.
//! * [`experiments`]: data generation, cross-validation and the simulation study.

// Guards like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod kernels;
pub mod losses;
pub mod operators;
pub mod pseudo_gram;
pub mod solvers;

pub use error::{Error, Result};
pub use estimators::{sce_fit, RkmPredictor, SceEstimate};
pub use kernels::{gram_matrix, median_distance_scale, rkhs_norm_sq, Kernel, Point, WendlandSpec};
pub use losses::Loss;
pub use operators::{BasisExpansion, OperatorKind, SpectralOperator};
pub use pseudo_gram::{assemble_m, PseudoGram, QuadratureRule};
pub use solvers::{FitProblem, RkmFit, SolverOptions, SolverReport};

/// Dense matrix type used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
