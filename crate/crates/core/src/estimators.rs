//! The RKM predictor and the spectral cut-off baseline.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use crate::error::{arg_err, Result};
use crate::kernels::{Kernel, KernelDescriptor};
use crate::operators::{check_unit, sine_basis, SpectralOperator};
use crate::pseudo_gram::{QuadratureRule, SpectralKernelModel};

/// `f̂ = Σ_i α_i (AΦ(·))(z_i)`.
#[derive(Debug, Clone)]
pub struct RkmPredictor {
    alpha: Vec<f64>,
    design: Vec<f64>,
    model: Arc<SpectralKernelModel>,
    /// `β_q = σ_q Σ_i α_i v_q(z_i)`
    beta: Vec<f64>,
}

impl RkmPredictor {
    pub fn new(model: Arc<SpectralKernelModel>, design: &[f64], alpha: Vec<f64>) -> Result<Self> {
        if design.len() != alpha.len() {
            return arg_err(format!("{} coefficients for {} design points", alpha.len(), design.len()));
        }
        for &z in design {
            check_unit(z)?;
        }
        let sigma = model.operator().eigenvalues();
        let beta = sigma
            .iter()
            .enumerate()
            .map(|(q, s)| s * design.iter().zip(&alpha).map(|(&z, a)| a * sine_basis(q + 1, z)).sum::<f64>())
            .collect();
        Ok(Self { alpha, design: design.to_vec(), model, beta })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn design(&self) -> &[f64] {
        &self.design
    }

    pub fn model(&self) -> &SpectralKernelModel {
        &self.model
    }

    /// `f̂(x) = Σ_q σ_q I_q(x) Σ_i α_i v_q(z_i)`; a direct kernel sum for the identity operator.
    pub fn predict(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        if self.model.operator().is_identity() {
            return Ok(self.kernel_sum(x));
        }
        let iq = self.model.iq_grid(&[x])?;
        Ok(self.combine(&iq, 0))
    }

    /// Predictions on a grid, reusing cached prediction integrals when a cache is supplied.
    pub fn predict_grid(&self, grid: &[f64], cache: Option<&IqCache>) -> Result<Vec<f64>> {
        for &x in grid {
            check_unit(x)?;
        }
        if self.model.operator().is_identity() {
            return Ok(grid.iter().map(|&x| self.kernel_sum(x)).collect());
        }
        let iq = match cache {
            Some(c) => c.get_or_compute(&self.model, grid)?,
            None => Arc::new(self.model.iq_grid(grid)?),
        };
        Ok((0..grid.len()).map(|g| self.combine(&iq, g)).collect())
    }

    fn kernel_sum(&self, x: f64) -> f64 {
        let k = self.model.kernel();
        self.design.iter().zip(&self.alpha).map(|(z, a)| a * k.eval(&x, z)).sum()
    }

    fn combine(&self, iq: &DMatrix<f64>, row: usize) -> f64 {
        self.beta.iter().enumerate().map(|(q, b)| b * iq[(row, q)]).sum()
    }
}

/// Cache of `I_q(x)` grids keyed by kernel, quadrature, truncation and grid values.
#[derive(Debug, Default)]
pub struct IqCache {
    entries: Mutex<HashMap<IqKey, Arc<DMatrix<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct IqKey {
    kernel: String,
    rule: QuadratureRule,
    jmax: usize,
    grid: Vec<u64>,
}

impl IqCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(&self, model: &SpectralKernelModel, grid: &[f64]) -> Result<Arc<DMatrix<f64>>> {
        let key = IqKey {
            kernel: kernel_key(model.kernel()),
            rule: *model.rule(),
            jmax: model.operator().jmax(),
            grid: grid.iter().map(|x| x.to_bits()).collect(),
        };
        if let Some(hit) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let computed = Arc::new(model.iq_grid(grid)?);
        let mut map = self.entries.lock().expect("cache lock");
        Ok(Arc::clone(map.entry(key).or_insert(computed)))
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn kernel_key(k: &Kernel) -> String {
    match KernelDescriptor::from(*k) {
        KernelDescriptor::Wendland { d, scale } => format!("wendland:{d}:{:x}", scale.to_bits()),
        KernelDescriptor::Rbf { bandwidth } => format!("rbf:{:x}", bandwidth.to_bits()),
    }
}

/// `f̂_J = Σ_{j≤J} (b̂_j/σ_j) v_j` with `b̂_j = (1/n) Σ_i v_j(z_i) y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceEstimate {
    pub level: usize,
    pub b_hat: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Empirical singular-value coefficients up to level `J`.
pub fn sce_fit(op: &SpectralOperator, design: &[f64], y: &[f64], level: usize) -> Result<SceEstimate> {
    if level == 0 || level > op.jmax() {
        return arg_err(format!("cut-off level {level} outside 1..={}", op.jmax()));
    }
    if design.len() != y.len() || design.is_empty() {
        return arg_err(format!("{} design points for {} responses", design.len(), y.len()));
    }
    for &z in design {
        check_unit(z)?;
    }
    let n = design.len() as f64;
    let b_hat =
        (1..=level).map(|j| design.iter().zip(y).map(|(&z, y)| sine_basis(j, z) * y).sum::<f64>() / n).collect();
    let sigma = op.eigenvalues()[..level].to_vec();
    Ok(SceEstimate { level, b_hat, sigma })
}

impl SceEstimate {
    pub fn predict(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.b_hat.iter().zip(&self.sigma).enumerate().map(|(i, (b, s))| b / s * sine_basis(i + 1, x)).sum())
    }

    /// `(A f̂_J)(z) = Σ_{j≤J} b̂_j v_j(z)`.
    pub fn fitted_response(&self, z: f64) -> f64 {
        self.b_hat.iter().enumerate().map(|(i, b)| b * sine_basis(i + 1, z)).sum()
    }

    /// Noise amplification of the highest retained mode, `1/σ_J`.
    pub fn amplification(&self) -> f64 {
        1.0 / self.sigma[self.level - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernel;
    use approx::assert_abs_diff_eq;

    fn model(op: SpectralOperator) -> Arc<SpectralKernelModel> {
        Arc::new(SpectralKernelModel::new(op, Kernel::wendland(1, 0.3).unwrap(), QuadratureRule::default()).unwrap())
    }

    #[test]
    fn zero_and_linear_predictor() {
        let m = model(SpectralOperator::heat(0.01).unwrap());
        let design = [0.1, 0.4, 0.8];
        let zero = RkmPredictor::new(m.clone(), &design, vec![0.0; 3]).unwrap();
        assert_eq!(zero.predict(0.3).unwrap(), 0.0);
        let a = RkmPredictor::new(m.clone(), &design, vec![0.5, -1.0, 2.0]).unwrap();
        let b = RkmPredictor::new(m, &design, vec![1.0, -2.0, 4.0]).unwrap();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let pa = a.predict_grid(&grid, None).unwrap();
        let pb = b.predict_grid(&grid, None).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(2.0 * x, *y);
        }
        assert_abs_diff_eq!(a.predict(0.35).unwrap(), a.predict_grid(&[0.35], None).unwrap()[0], epsilon = 1e-15);
        assert!(a.predict(1.2).is_err());
    }

    #[test]
    fn identity_operator_is_kernel_expansion() {
        let m = model(SpectralOperator::identity());
        let design = [0.05, 0.3, 0.5, 0.95];
        let alpha = vec![1.0, -0.5, 0.25, 2.0];
        let p = RkmPredictor::new(m, &design, alpha.clone()).unwrap();
        let k = Kernel::wendland(1, 0.3).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let direct: f64 = design.iter().zip(&alpha).map(|(z, a)| a * k.eval(&x, z)).sum();
            assert_abs_diff_eq!(p.predict(x).unwrap(), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn cache_is_keyed_by_descriptor() {
        let cache = IqCache::new();
        let grid = [0.0, 0.5, 1.0];
        let m1 = model(SpectralOperator::heat(0.01).unwrap());
        let m2 = model(SpectralOperator::heat(0.02).unwrap());
        let a = cache.get_or_compute(&m1, &grid).unwrap();
        let b = cache.get_or_compute(&m2, &grid).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
        cache.get_or_compute(&m1, &[0.25]).unwrap();
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn sce_basics() {
        let op = SpectralOperator::heat(0.01).unwrap();
        let design: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let est = sce_fit(&op, &design, &[0.0; 10], 4).unwrap();
        assert!(est.b_hat.iter().all(|&b| b == 0.0));
        assert_eq!(est.predict(0.3).unwrap(), 0.0);
        assert!(sce_fit(&op, &design, &[0.0; 10], 0).is_err());
        assert!(sce_fit(&op, &design, &[0.0; 10], 31).is_err());
        assert!(sce_fit(&op, &design, &[0.0; 9], 3).is_err());

        let sigma1 = op.eigenvalue(1).unwrap();
        let est = SceEstimate { level: 1, b_hat: vec![sigma1], sigma: vec![sigma1] };
        for x in [0.0, 0.2, 0.5, 0.9] {
            assert_abs_diff_eq!(est.predict(x).unwrap(), sine_basis(1, x), epsilon = 1e-15);
        }
    }

    #[test]
    fn sce_recovers_first_mode() {
        let op = SpectralOperator::heat(0.01).unwrap();
        let n = 1000;
        let design: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let y: Vec<f64> = design.iter().map(|&z| sine_basis(1, z)).collect();
        let est = sce_fit(&op, &design, &y, 1).unwrap();
        assert_abs_diff_eq!(est.b_hat[0], 1.0, epsilon = 1e-2);
    }
}
