//! Minimizers of the reduced objective
//!
//! ```text
//! α ↦ (1/n) Σ_i L(y_i, (Mα)_i) + λ αᵀ M α
//! ```
//!
//! Least squares has the closed form `(M + nλ/c I) α = y` (`c` the loss scale).
//! For piecewise-linear losses with a kink at the response (absolute deviation,
//! pinball) the Fenchel dual is the box-constrained quadratic program
//!
//! ```text
//! maximize λ (2 αᵀy − αᵀMα)   subject to   −h_hi/(2nλ) ≤ α_i ≤ −h_lo/(2nλ)
//! ```
//!
//! where `[h_lo, h_hi]` is the range of subgradients of the loss; the dual
//! optimum is also a primal minimizer. It is solved by cyclic coordinate ascent,
//! warm-started on low-rank problems by a smoothed Newton method in the factor space.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{arg_err, Error, Result};
use crate::losses::{Loss, LossKind};

/// Diagonal entries at or below this are treated as zero and their coordinates frozen.
pub const FROZEN_DIAGONAL: f64 = 1e-14;

/// Largest free set on which the dual solver takes an exact subspace step.
const SUBSPACE_LIMIT: usize = 64;

/// One regularized empirical-risk problem on a pseudo kernel matrix.
#[derive(Debug, Clone, Copy)]
pub struct FitProblem<'a> {
    gram: &'a DMatrix<f64>,
    factor: Option<&'a DMatrix<f64>>,
    y: &'a [f64],
    loss: Loss,
    lambda: f64,
}

impl<'a> FitProblem<'a> {
    pub fn new(gram: &'a DMatrix<f64>, y: &'a [f64], loss: Loss, lambda: f64) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return arg_err("fit problem needs at least one observation");
        }
        if gram.nrows() != n || gram.ncols() != n {
            return arg_err(format!("M is {}x{} but there are {} responses", gram.nrows(), gram.ncols(), n));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive and finite, got {lambda}")));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return arg_err(format!("response {i} is not finite"));
        }
        Ok(Self { gram, factor: None, y, loss, lambda })
    }

    /// Attaches `F` with `M = F Fᵀ`; the coordinate solver then runs in `O(rank)` per update.
    pub fn with_factor(mut self, factor: &'a DMatrix<f64>) -> Result<Self> {
        if factor.nrows() != self.n() {
            return arg_err(format!("factor has {} rows, expected {}", factor.nrows(), self.n()));
        }
        self.factor = Some(factor);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        self.gram
    }

    pub fn y(&self) -> &[f64] {
        self.y
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Cost parameter `C = 1/(2nλ)`.
    pub fn cost(&self) -> f64 {
        1.0 / (2.0 * self.n() as f64 * self.lambda)
    }

    /// Per-coordinate box of the dual, `[−h_hi, −h_lo] · C`.
    pub fn dual_box(&self) -> Result<(f64, f64)> {
        if !self.loss.is_quantile_type() {
            return arg_err("dual box is only defined for absolute-deviation and pinball losses");
        }
        let (lo, hi) = self.loss.subgradient_range().expect("bounded subgradients");
        let c = self.cost();
        Ok((-hi * c, -lo * c))
    }

    fn check_len(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.n() {
            return arg_err(format!("coefficient vector has length {}, expected {}", alpha.len(), self.n()));
        }
        Ok(())
    }

    fn response(&self, alpha: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|i| (0..n).map(|j| self.gram[(i, j)] * alpha[j]).sum()).collect()
    }

    /// `(1/n) Σ L(y_i, (Mα)_i) + λ αᵀMα`.
    pub fn objective_value(&self, alpha: &[f64]) -> Result<f64> {
        self.check_len(alpha)?;
        let u = self.response(alpha);
        Ok(self.objective_from_response(alpha, &u))
    }

    fn objective_from_response(&self, alpha: &[f64], u: &[f64]) -> f64 {
        let n = self.n() as f64;
        let risk: f64 = self.y.iter().zip(u).map(|(&y, &t)| self.loss.value(y, t)).sum::<f64>() / n;
        let penalty: f64 = alpha.iter().zip(u).map(|(a, t)| a * t).sum();
        risk + self.lambda * penalty
    }

    /// Dual objective `λ (2 αᵀy − αᵀMα)`; a lower bound on the primal optimum for feasible `α`.
    pub fn dual_value(&self, alpha: &[f64]) -> Result<f64> {
        self.check_len(alpha)?;
        let u = self.response(alpha);
        Ok(self.dual_from_response(alpha, &u))
    }

    fn dual_from_response(&self, alpha: &[f64], u: &[f64]) -> f64 {
        let lin: f64 = alpha.iter().zip(self.y).map(|(a, y)| a * y).sum();
        let quad: f64 = alpha.iter().zip(u).map(|(a, t)| a * t).sum();
        self.lambda * (2.0 * lin - quad)
    }

    /// Largest distance between `−2nλα_i` and the loss subdifferential at `(Mα)_i`,
    /// where a response within that same distance of `(Mα)_i` may be used instead.
    ///
    /// Zero exactly when `α` satisfies the optimality conditions.
    pub fn kkt_residual(&self, alpha: &[f64]) -> Result<f64> {
        self.check_len(alpha)?;
        if !self.loss.is_quantile_type() {
            return arg_err("KKT residual is defined for absolute-deviation and pinball losses");
        }
        let u = self.response(alpha);
        Ok(self.kkt_from_response(alpha, &u))
    }

    fn kkt_from_response(&self, alpha: &[f64], u: &[f64]) -> f64 {
        let (lo, hi) = self.loss.subgradient_range().expect("bounded subgradients");
        let two_n_lambda = 2.0 * self.n() as f64 * self.lambda;
        let mut worst: f64 = 0.0;
        for i in 0..self.n() {
            let h = -two_n_lambda * alpha[i];
            let gap = (self.y[i] - u[i]).abs();
            // Moving the fitted value onto the kink: subdifferential is the whole range.
            let at_kink = gap.max((lo - h).max(h - hi).max(0.0));
            // Staying on the current side of the kink: the subdifferential is a single slope.
            let off_kink = if u[i] > self.y[i] {
                (h - hi).abs()
            } else if u[i] < self.y[i] {
                (h - lo).abs()
            } else {
                f64::INFINITY
            };
            worst = worst.max(at_kink.min(off_kink));
        }
        worst
    }
}

/// `F` with `F Fᵀ ≈ M` from the eigendecomposition of a symmetric PSD matrix,
/// keeping eigenvalues above `rel_tol` times the largest one.
///
/// Lets the dual solver take its low-rank path on a matrix that was read back
/// from disk without its spectral construction.
pub fn psd_factor(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() || m.is_empty() {
        return arg_err(format!("expected a nonempty square matrix, got {}×{}", m.nrows(), m.ncols()));
    }
    let eig = m.clone().symmetric_eigen();
    let top = eig.eigenvalues.max();
    if !(top > 0.0) {
        return Ok(DMatrix::zeros(m.nrows(), 1));
    }
    let keep: Vec<usize> = (0..m.nrows()).filter(|&c| eig.eigenvalues[c] > rel_tol * top).collect();
    Ok(DMatrix::from_fn(m.nrows(), keep.len(), |i, k| eig.eigenvectors[(i, keep[k])] * eig.eigenvalues[keep[k]].sqrt()))
}

/// Coordinate visiting order for the dual solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepOrder {
    #[default]
    Cyclic,
    /// A fresh permutation per sweep, from a seeded generator.
    Shuffled { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// Defaults to `10 n + 1000`.
    pub max_sweeps: Option<usize>,
    pub warm_start: Option<Vec<f64>>,
    pub order: SweepOrder,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_sweeps: None, warm_start: None, order: SweepOrder::Cyclic }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_sweeps(mut self, sweeps: usize) -> Self {
        self.max_sweeps = Some(sweeps);
        self
    }

    pub fn with_warm_start(mut self, alpha: Vec<f64>) -> Self {
        self.warm_start = Some(alpha);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub sweeps: usize,
    /// Stationarity residual at the returned coefficients.
    pub residual: f64,
    pub converged: bool,
    /// Coordinates held at zero because their diagonal entry vanishes.
    pub frozen: Vec<usize>,
    /// Dual objective at the returned coefficients (quantile-type losses).
    pub dual_value: Option<f64>,
}

/// Solved coefficient vector with the objective it attains.
#[derive(Debug, Clone, PartialEq)]
pub struct RkmFit {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub lambda: f64,
    pub loss: Loss,
    /// `C = 1/(2nλ)`.
    pub cost: f64,
    pub report: SolverReport,
}

/// Closed-form least-squares fit via a Cholesky factorization of `M + (nλ/c) I`.
pub fn solve_least_squares(p: &FitProblem) -> Result<RkmFit> {
    if !matches!(p.loss.kind(), LossKind::LeastSquares) {
        return arg_err("closed-form solver requires the least-squares loss");
    }
    let n = p.n();
    let shift = n as f64 * p.lambda / p.loss.scale();
    let mut system = p.gram.clone();
    for i in 0..n {
        system[(i, i)] += shift;
    }
    let chol = system.cholesky().ok_or_else(|| {
        Error::Numeric("M + nλI is not positive definite; M violates positive semi-definiteness".into())
    })?;
    let alpha: Vec<f64> = chol.solve(&nalgebra::DVector::from_column_slice(p.y)).iter().copied().collect();
    let u = p.response(&alpha);
    // Stationarity: M [(M + shift I) α − y] = 0.
    let inner: Vec<f64> = (0..n).map(|i| u[i] + shift * alpha[i] - p.y[i]).collect();
    let residual = p.response(&inner).iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    Ok(RkmFit {
        objective: p.objective_from_response(&alpha, &u),
        alpha,
        lambda: p.lambda,
        loss: p.loss,
        cost: p.cost(),
        report: SolverReport { sweeps: 0, residual, converged: true, frozen: Vec::new(), dual_value: None },
    })
}

/// `Mα` maintained under single-coordinate updates.
trait ResponseState {
    fn diag(&self, i: usize) -> f64;
    fn response(&self, i: usize) -> f64;
    fn update(&mut self, i: usize, delta: f64);
    fn reset(&mut self, alpha: &[f64]);
}

struct DenseState<'a> {
    gram: &'a DMatrix<f64>,
    u: Vec<f64>,
}

impl ResponseState for DenseState<'_> {
    fn diag(&self, i: usize) -> f64 {
        self.gram[(i, i)]
    }

    fn response(&self, i: usize) -> f64 {
        self.u[i]
    }

    fn update(&mut self, i: usize, delta: f64) {
        let col = self.gram.column(i);
        for (u, m) in self.u.iter_mut().zip(col.iter()) {
            *u += delta * m;
        }
    }

    fn reset(&mut self, alpha: &[f64]) {
        let n = alpha.len();
        for i in 0..n {
            self.u[i] = (0..n).map(|j| self.gram[(i, j)] * alpha[j]).sum();
        }
    }
}

/// `w = Fᵀα`, so `(Mα)_i = F_i · w`.
struct FactorState {
    rows: Vec<Vec<f64>>,
    norms: Vec<f64>,
    w: Vec<f64>,
}

impl FactorState {
    fn new(factor: &DMatrix<f64>) -> Self {
        let rows: Vec<Vec<f64>> = (0..factor.nrows()).map(|i| factor.row(i).iter().copied().collect()).collect();
        let norms = rows.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
        Self { rows, norms, w: vec![0.0; factor.ncols()] }
    }
}

impl ResponseState for FactorState {
    fn diag(&self, i: usize) -> f64 {
        self.norms[i]
    }

    fn response(&self, i: usize) -> f64 {
        self.rows[i].iter().zip(&self.w).map(|(a, b)| a * b).sum()
    }

    fn update(&mut self, i: usize, delta: f64) {
        for (w, f) in self.w.iter_mut().zip(&self.rows[i]) {
            *w += delta * f;
        }
    }

    fn reset(&mut self, alpha: &[f64]) {
        self.w.iter_mut().for_each(|w| *w = 0.0);
        for (i, a) in alpha.iter().enumerate() {
            for (w, f) in self.w.iter_mut().zip(&self.rows[i]) {
                *w += a * f;
            }
        }
    }
}

/// Dual coordinate ascent for absolute-deviation and pinball losses.
///
/// Each coordinate update is `α_i ← clip(α_i + (y_i − (Mα)_i)/M_ii)`. Stops once
/// the largest projected dual gradient, recomputed from scratch, is at most `tol`;
/// otherwise returns the last iterate with `converged = false`.
pub fn solve_pinball_dual_cd(p: &FitProblem, opts: &SolverOptions) -> Result<RkmFit> {
    let (lo, hi) = p.dual_box()?;
    if !(opts.tol > 0.0) {
        return Err(Error::Config(format!("solver tolerance must be positive, got {}", opts.tol)));
    }
    let n = p.n();
    let max_sweeps = opts.max_sweeps.unwrap_or(10 * n + 1000);
    let mut alpha = match &opts.warm_start {
        Some(a) => {
            p.check_len(a)?;
            a.iter().map(|v| v.clamp(lo, hi)).collect()
        }
        None => vec![0.0; n],
    };
    match p.factor {
        Some(f) => {
            alpha = smoothed_newton(f, p.y, &alpha, lo, hi, opts.tol);
            run_dual_cd(p, FactorState::new(f), &mut alpha, lo, hi, max_sweeps, opts)
        }
        None => run_dual_cd(p, DenseState { gram: p.gram, u: vec![0.0; n] }, &mut alpha, lo, hi, max_sweeps, opts),
    }
}

/// Warm start for the factored dual `max 2αᵀy − ‖Fᵀα‖²` over the box.
///
/// Adds `−ε‖α‖²` to the dual, which smooths the primal in `w = Fᵀα ∈ ℝ^r` into
/// `‖w‖² + Σ_i φ_ε(y_i − f_iᵀw)` with `φ_ε(t) = max_{α∈[lo,hi]} (2αt − εα²)`.
/// That problem is solved by Newton's method while `ε` is driven down to the
/// point where free coordinates interpolate to within `tol/10`; the maximizing
/// `α_i = clip((y_i − f_iᵀw)/ε)` is returned.
fn smoothed_newton(f: &DMatrix<f64>, y: &[f64], start: &[f64], lo: f64, hi: f64, tol: f64) -> Vec<f64> {
    let n = f.nrows();
    let r = f.ncols();
    let live: Vec<bool> = (0..n).map(|i| f.row(i).norm_squared() > FROZEN_DIAGONAL).collect();
    let yv = DVector::from_column_slice(y);
    let bound = lo.abs().max(hi.abs());
    let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if ymax == 0.0 || bound == 0.0 {
        return vec![0.0; n];
    }
    let eps_final = tol / (10.0 * bound);
    let mut eps = (ymax / bound).max(eps_final);
    let mut w = f.transpose() * DVector::from_column_slice(start);

    let coeffs = |w: &DVector<f64>, eps: f64| -> DVector<f64> {
        let resid = &yv - f * w;
        DVector::from_fn(n, |i, _| if live[i] { (resid[i] / eps).clamp(lo, hi) } else { 0.0 })
    };
    let free_pattern = |a: &DVector<f64>| a.iter().map(|&v| v > lo && v < hi).collect::<Vec<bool>>();
    loop {
        let mut previous: Option<Vec<bool>> = None;
        for _ in 0..100 {
            let a = coeffs(&w, eps);
            let pattern = free_pattern(&a);
            let grad = 2.0 * (&w - f.transpose() * &a);
            let mut hess = DMatrix::<f64>::identity(r, r) * 2.0;
            for i in 0..n {
                if live[i] && a[i] > lo && a[i] < hi {
                    let row = f.row(i);
                    hess.ger(2.0 / eps, &row.transpose(), &row.transpose(), 1.0);
                }
            }
            let Some(chol) = hess.cholesky() else { break };
            let step = chol.solve(&grad);
            let decrement = grad.dot(&step);
            if !(decrement > 1e-24 * (1.0 + w.norm_squared())) {
                break;
            }
            // Directional derivative of the smoothed primal along −step is monotone in t.
            let slope = |t: f64| {
                let wt = &w - t * &step;
                let at = coeffs(&wt, eps);
                -2.0 * (wt - f.transpose() * at).dot(&step)
            };
            let s1 = slope(1.0);
            let t = if s1 <= 0.0 { 1.0 } else { root_of_increasing(&slope, slope(0.0), s1) };
            if t == 0.0 {
                break;
            }
            w -= t * &step;
            // A full step on an unchanged quadratic piece is exact.
            if t == 1.0 && previous.as_ref() == Some(&pattern) {
                break;
            }
            previous = Some(pattern);
        }
        if eps <= eps_final {
            break;
        }
        eps = (eps * 0.01).max(eps_final);
    }
    coeffs(&w, eps).iter().copied().collect()
}

/// Root in `[0, 1]` of a nondecreasing function with `f(0) < 0 < f(1)`, by the
/// Illinois variant of regula falsi; returns a point where `f ≤ 0`.
fn root_of_increasing(f: &dyn Fn(f64) -> f64, f0: f64, f1: f64) -> f64 {
    if !(f0 < 0.0) {
        return 0.0;
    }
    let (mut a, mut fa, mut b, mut fb) = (0.0, f0, 1.0, f1);
    let mut side = 0;
    for _ in 0..60 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c);
        if fc <= 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if fc == 0.0 || b - a <= 1e-12 * b {
            break;
        }
    }
    a
}

/// `d ↦ dᵀ M_FF d` for a direction on the free coordinates.
type QuadForm = Box<dyn Fn(&DVector<f64>) -> f64>;

/// Newton step of the dual restricted to the free coordinates, using the
/// pseudo-inverse of `M_FF`, followed by a projected backtracking search.
/// The step with the largest dual gain among the projected candidates and the
/// step to the first box face is applied.
fn subspace_step<S: ResponseState>(p: &FitProblem, state: &mut S, alpha: &mut [f64], free: &[usize], lo: f64, hi: f64) {
    let k = free.len();
    let g = DVector::from_fn(k, |a, _| p.y[free[a]] - state.response(free[a]));
    let (basis, weights, quad): (DMatrix<f64>, Vec<f64>, QuadForm) = match p.factor {
        Some(f) => {
            let rows = DMatrix::from_fn(k, f.ncols(), |a, c| f[(free[a], c)]);
            let svd = rows.clone().svd(true, false);
            let u = svd.u.expect("left singular vectors requested");
            let w = svd.singular_values.iter().map(|s| s * s).collect();
            let rows_t = rows.transpose();
            (u, w, Box::new(move |d: &DVector<f64>| (&rows_t * d).norm_squared()))
        }
        None if k <= SUBSPACE_LIMIT => {
            let sub = DMatrix::from_fn(k, k, |a, b| p.gram[(free[a], free[b])]);
            let eig = sub.clone().symmetric_eigen();
            let w = eig.eigenvalues.iter().copied().collect();
            (eig.eigenvectors, w, Box::new(move |d: &DVector<f64>| d.dot(&(&sub * d))))
        }
        None => return,
    };
    let top = weights.iter().copied().fold(0.0, f64::max);
    if !(top > 0.0) {
        return;
    }
    let mut d = DVector::zeros(k);
    for (c, &mu) in weights.iter().enumerate() {
        if mu > top * 1e-12 {
            let v = basis.column(c);
            d += v * (v.dot(&g) / mu);
        }
    }
    let dg = d.dot(&g);
    let dmd = quad(&d);
    if !(dg > 0.0 && dmd > 0.0) {
        return;
    }
    let newton = dg / dmd;
    let gain = |delta: &DVector<f64>| 2.0 * delta.dot(&g) - quad(delta);
    let projected = |t: f64| DVector::from_fn(k, |a, _| (alpha[free[a]] + t * d[a]).clamp(lo, hi) - alpha[free[a]]);

    let mut face = newton;
    for (a, &i) in free.iter().enumerate() {
        if d[a] > 0.0 {
            face = face.min((hi - alpha[i]) / d[a]);
        } else if d[a] < 0.0 {
            face = face.min((lo - alpha[i]) / d[a]);
        }
    }
    let mut best = projected(face.max(0.0));
    let mut best_gain = gain(&best);
    let mut t = newton;
    while t > face {
        let cand = projected(t);
        let cg = gain(&cand);
        if cg > best_gain {
            best = cand;
            best_gain = cg;
            break;
        }
        t *= 0.5;
    }
    if !(best_gain > 0.0) {
        return;
    }
    for (a, &i) in free.iter().enumerate() {
        let delta = best[a];
        if delta != 0.0 {
            alpha[i] += delta;
            state.update(i, delta);
        }
    }
}

fn run_dual_cd<S: ResponseState>(
    p: &FitProblem,
    mut state: S,
    alpha: &mut Vec<f64>,
    lo: f64,
    hi: f64,
    max_sweeps: usize,
    opts: &SolverOptions,
) -> Result<RkmFit> {
    let n = p.n();
    let frozen: Vec<usize> = (0..n).filter(|&i| state.diag(i) <= FROZEN_DIAGONAL).collect();
    for &i in &frozen {
        alpha[i] = 0.0;
    }
    let active: Vec<usize> = (0..n).filter(|&i| state.diag(i) > FROZEN_DIAGONAL).collect();
    let mut order = active.clone();
    let mut rng = match opts.order {
        SweepOrder::Shuffled { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        SweepOrder::Cyclic => None,
    };
    state.reset(alpha);

    let violation = |state: &S, alpha: &[f64], i: usize| {
        let g = p.y[i] - state.response(i);
        if alpha[i] <= lo {
            g.max(0.0)
        } else if alpha[i] >= hi {
            (-g).max(0.0)
        } else {
            g.abs()
        }
    };

    let mut sweeps = 0;
    let mut converged = false;
    let mut last_dual = f64::NEG_INFINITY;
    while sweeps < max_sweeps {
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        let mut worst: f64 = 0.0;
        for &i in &order {
            let g = p.y[i] - state.response(i);
            worst = worst.max(violation(&state, alpha, i));
            let target = (alpha[i] + g / state.diag(i)).clamp(lo, hi);
            let delta = target - alpha[i];
            if delta != 0.0 {
                alpha[i] = target;
                state.update(i, delta);
            }
        }
        let free: Vec<usize> = active.iter().copied().filter(|&i| alpha[i] > lo && alpha[i] < hi).collect();
        if !free.is_empty() && free.len() <= SUBSPACE_LIMIT {
            subspace_step(p, &mut state, alpha, &free, lo, hi);
        }
        sweeps += 1;
        if cfg!(debug_assertions) {
            let u: Vec<f64> = (0..n).map(|i| state.response(i)).collect();
            let dual = p.dual_from_response(alpha, &u);
            debug_assert!(
                dual >= last_dual - 1e-9 * (1.0 + dual.abs()),
                "dual objective decreased: {last_dual} -> {dual}"
            );
            last_dual = dual;
        }
        if worst <= opts.tol {
            // Confirm on a freshly recomputed response to rule out accumulated drift.
            state.reset(alpha);
            let fresh = active.iter().map(|&i| violation(&state, alpha, i)).fold(0.0, f64::max);
            if fresh <= opts.tol {
                converged = true;
                break;
            }
        }
    }

    let u = p.response(alpha);
    let residual = p.kkt_from_response(alpha, &u);
    Ok(RkmFit {
        objective: p.objective_from_response(alpha, &u),
        lambda: p.lambda,
        loss: p.loss,
        cost: p.cost(),
        report: SolverReport { sweeps, residual, converged, frozen, dual_value: Some(p.dual_from_response(alpha, &u)) },
        alpha: std::mem::take(alpha),
    })
}
