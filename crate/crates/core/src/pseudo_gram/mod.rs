//! The pseudo kernel matrix `M` and the prediction integrals.
//!
//! For a diagonal operator with eigenvalues `σ_q` in the sine basis,
//!
//! ```text
//! M_ij   = Σ_q Σ_s σ_q σ_s I_qs v_q(z_j) v_s(z_i),   I_qs = ∫∫ k(x₁,x₂) v_q(x₁) v_s(x₂)
//! f̂(x)  = Σ_q σ_q I_q(x) Σ_i α_i v_q(z_i),           I_q(x) = ∫ k(x₁,x) v_q(x₁)
//! ```
//!
//! All integrals use a composite Gauss–Legendre rule. The identity operator
//! is handled in closed form: `M` is then the ordinary Gram matrix.

pub mod quadrature;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, Kernel};
use crate::operators::{check_unit, sine_basis, SpectralOperator};
pub use quadrature::{integrate_1d, QuadratureRule};

/// Largest tolerated `|M_ij − M_ji|` before symmetrization.
pub const SKEW_TOLERANCE: f64 = 1e-10;

/// Single `I_qs` entry by tensor quadrature.
pub fn compute_iqs(kernel: &Kernel, q: usize, s: usize, rule: &QuadratureRule) -> Result<f64> {
    let (xs, ws) = rule.nodes_weights();
    let vq: Vec<f64> = xs.iter().zip(&ws).map(|(&x, &w)| w * sine_basis(q, x)).collect();
    let vs: Vec<f64> = xs.iter().zip(&ws).map(|(&x, &w)| w * sine_basis(s, x)).collect();
    let mut total = 0.0;
    for (a, &x1) in xs.iter().enumerate() {
        let mut inner = 0.0;
        for (b, &x2) in xs.iter().enumerate() {
            inner += kernel.eval(&x1, &x2) * vs[b];
        }
        total += vq[a] * inner;
    }
    if !total.is_finite() {
        return Err(Error::Numeric(format!("I_({q},{s}) quadrature is not finite")));
    }
    Ok(total)
}

/// The full `jmax × jmax` matrix of `I_qs`.
///
/// Computed as `W K Wᵀ` with `W_qa = w_a v_q(x_a)`; every entry is summed in a
/// fixed order, so the result does not depend on the thread count.
pub fn iqs_matrix(kernel: &Kernel, jmax: usize, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
    let (xs, ws) = rule.nodes_weights();
    let n = xs.len();
    // Row-major: weighted[q * n + a].
    let weighted: Vec<f64> =
        (1..=jmax).flat_map(|q| xs.iter().zip(&ws).map(move |(&x, &w)| w * sine_basis(q, x))).collect();
    // projected[b * jmax + q] = Σ_a W_qa k(x_a, x_b)
    let projected: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|b| {
            let column: Vec<f64> = xs.iter().map(|x| kernel.eval(x, &xs[b])).collect();
            (0..jmax)
                .map(|q| {
                    let row = &weighted[q * n..(q + 1) * n];
                    row.iter().zip(&column).map(|(w, k)| w * k).sum()
                })
                .collect()
        })
        .collect();
    let entries: Vec<f64> = (0..jmax * jmax)
        .into_par_iter()
        .map(|idx| {
            let (q, s) = (idx / jmax, idx % jmax);
            let ws_row = &weighted[s * n..(s + 1) * n];
            (0..n).map(|b| projected[b][q] * ws_row[b]).sum()
        })
        .collect();
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("I_qs quadrature produced non-finite values".into()));
    }
    Ok(DMatrix::from_row_slice(jmax, jmax, &entries))
}

/// Monte-Carlo estimate of `I_qs` with its standard error, for cross-checking the quadrature.
pub fn compute_iqs_monte_carlo(kernel: &Kernel, q: usize, s: usize, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..samples {
        let x1: f64 = rng.random();
        let x2: f64 = rng.random();
        let v = kernel.eval(&x1, &x2) * sine_basis(q, x1) * sine_basis(s, x2);
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (samples.max(2) - 1) as f64;
    (mean, (var / samples as f64).sqrt())
}

/// `I_q(x) = ∫ k(x₁, x) v_q(x₁) dx₁`.
///
/// Panels entirely outside the kernel's support around `x` are skipped.
pub fn compute_iq_x(kernel: &Kernel, q: usize, x: f64, rule: &QuadratureRule) -> Result<f64> {
    check_unit(x)?;
    let (xs, ws) = rule.nodes_weights();
    Ok(iq_x_on_nodes(kernel, &[q], x, rule, &xs, &ws)[0])
}

fn iq_x_on_nodes(kernel: &Kernel, qs: &[usize], x: f64, rule: &QuadratureRule, xs: &[f64], ws: &[f64]) -> Vec<f64> {
    let per = rule.nodes_per_panel();
    let h = 1.0 / rule.panels() as f64;
    let (first, last) = match kernel.support_radius() {
        Some(r) => {
            let lo = ((x - r) / h).floor().max(0.0) as usize;
            let hi = (((x + r) / h).ceil() as usize).min(rule.panels());
            (lo, hi)
        }
        None => (0, rule.panels()),
    };
    let mut out = vec![0.0; qs.len()];
    for idx in first * per..last * per {
        let kw = ws[idx] * kernel.eval(&xs[idx], &x);
        if kw == 0.0 {
            continue;
        }
        for (o, &q) in out.iter_mut().zip(qs) {
            *o += kw * sine_basis(q, xs[idx]);
        }
    }
    out
}

/// `I_q(x_g)` for every grid point and `q = 1..=jmax`, as a `grid × jmax` matrix.
pub fn iq_matrix(kernel: &Kernel, jmax: usize, grid: &[f64], rule: &QuadratureRule) -> Result<DMatrix<f64>> {
    for &x in grid {
        check_unit(x)?;
    }
    let (xs, ws) = rule.nodes_weights();
    let qs: Vec<usize> = (1..=jmax).collect();
    let rows: Vec<Vec<f64>> = grid.par_iter().map(|&x| iq_x_on_nodes(kernel, &qs, x, rule, &xs, &ws)).collect();
    Ok(DMatrix::from_fn(grid.len(), jmax, |g, q| rows[g][q]))
}

/// Operator, kernel and quadrature with the design-independent integrals cached.
///
/// `I_qs` depends only on the kernel, so one model serves every design size.
#[derive(Debug, Clone)]
pub struct SpectralKernelModel {
    operator: SpectralOperator,
    kernel: Kernel,
    rule: QuadratureRule,
    iqs: Option<DMatrix<f64>>,
    /// `Σ G^{1/2}` with `G = I_qs` (negative eigenvalues clamped), used for low-rank factors.
    half: Option<DMatrix<f64>>,
}

impl SpectralKernelModel {
    pub fn new(operator: SpectralOperator, kernel: Kernel, rule: QuadratureRule) -> Result<Self> {
        if operator.is_identity() {
            return Ok(Self { operator, kernel, rule, iqs: None, half: None });
        }
        let iqs = iqs_matrix(&kernel, operator.jmax(), &rule)?;
        let sym = (&iqs + iqs.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let g_half = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals);
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(operator.eigenvalues()));
        let half = sigma * g_half;
        Ok(Self { operator, kernel, rule, iqs: Some(iqs), half: Some(half) })
    }

    pub fn operator(&self) -> &SpectralOperator {
        &self.operator
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn iqs(&self) -> Option<&DMatrix<f64>> {
        self.iqs.as_ref()
    }

    /// `B_iq = σ_q v_q(z_i)`.
    fn weighted_basis(&self, design: &[f64]) -> DMatrix<f64> {
        let sigma = self.operator.eigenvalues();
        DMatrix::from_fn(design.len(), sigma.len(), |i, q| sigma[q] * sine_basis(q + 1, design[i]))
    }

    /// Assembles `M` for the given design.
    pub fn assemble(&self, design: &[f64]) -> Result<PseudoGram> {
        if design.is_empty() {
            return Err(Error::Argument("design must contain at least one point".into()));
        }
        for &z in design {
            check_unit(z)?;
        }
        let Some(iqs) = &self.iqs else {
            let m = gram_matrix(&self.kernel, design)?;
            return Ok(PseudoGram {
                m,
                factor: None,
                design: design.to_vec(),
                iqs: None,
                provenance: Some(self.provenance()),
            });
        };
        let b = self.weighted_basis(design);
        let n = design.len();
        // M_ij = Σ_q Σ_s B_jq I_qs B_is
        let bi = &b * iqs.transpose();
        let entries: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                let mut acc = 0.0;
                for q in 0..b.ncols() {
                    acc += b[(j, q)] * bi[(i, q)];
                }
                acc
            })
            .collect();
        let raw = DMatrix::from_row_slice(n, n, &entries);
        let skew = max_skew(&raw);
        if skew > SKEW_TOLERANCE {
            return Err(Error::Numeric(format!(
                "pseudo kernel matrix skew {skew:.3e} exceeds {SKEW_TOLERANCE:e}; refine the quadrature"
            )));
        }
        let m = (&raw + raw.transpose()) * 0.5;
        let factor = self.half.as_ref().map(|h| {
            let sine = DMatrix::from_fn(n, h.nrows(), |i, q| sine_basis(q + 1, design[i]));
            sine * h
        });
        Ok(PseudoGram {
            m,
            factor,
            design: design.to_vec(),
            iqs: Some(iqs.clone()),
            provenance: Some(self.provenance()),
        })
    }

    fn provenance(&self) -> Provenance {
        Provenance { operator: self.operator, kernel: self.kernel, rule: self.rule }
    }

    /// Prediction integrals `I_q(x)` on a grid.
    pub fn iq_grid(&self, grid: &[f64]) -> Result<DMatrix<f64>> {
        iq_matrix(&self.kernel, self.operator.jmax(), grid, &self.rule)
    }
}

/// Operator, kernel and rule a matrix was assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub operator: SpectralOperator,
    pub kernel: Kernel,
    pub rule: QuadratureRule,
}

/// `M` together with what produced it.
#[derive(Debug, Clone)]
pub struct PseudoGram {
    m: DMatrix<f64>,
    factor: Option<DMatrix<f64>>,
    design: Vec<f64>,
    iqs: Option<DMatrix<f64>>,
    provenance: Option<Provenance>,
}

impl PseudoGram {
    /// Wraps a user-supplied matrix (e.g. read from disk); only symmetry is enforced.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Argument(format!("M must be square and nonempty, got {}x{}", m.nrows(), m.ncols())));
        }
        let skew = max_skew(&m);
        if skew > SKEW_TOLERANCE * (1.0 + m.amax()) {
            return Err(Error::Numeric(format!("matrix is not symmetric (skew {skew:.3e})")));
        }
        Ok(Self { m: (&m + m.transpose()) * 0.5, factor: None, design: Vec::new(), iqs: None, provenance: None })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// `F` with `M ≈ F Fᵀ` (rank ≤ jmax), when the operator is spectral.
    pub fn factor(&self) -> Option<&DMatrix<f64>> {
        self.factor.as_ref()
    }

    pub fn design(&self) -> &[f64] {
        &self.design
    }

    pub fn iqs(&self) -> Option<&DMatrix<f64>> {
        self.iqs.as_ref()
    }

    /// `None` for matrices supplied from outside.
    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }
}

/// Assembles the pseudo kernel matrix for one design.
pub fn assemble_m(
    operator: &SpectralOperator,
    kernel: &Kernel,
    design: &[f64],
    rule: &QuadratureRule,
) -> Result<PseudoGram> {
    SpectralKernelModel::new(*operator, *kernel, *rule)?.assemble(design)
}

/// Largest `|A_ij − A_ji|`.
pub fn max_skew(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.min()
}
