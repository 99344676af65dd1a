use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{arg_err, Result};
use crate::operators::{project_to_basis, BasisExpansion, SpectralOperator};
use crate::pseudo_gram::QuadratureRule;

/// `f₀(x) = −10 x (x−1) sin(4πx)`.
pub fn f0_eval(x: f64) -> f64 {
    -10.0 * x * (x - 1.0) * (4.0 * PI * x).sin()
}

/// `s_δ(z) = δ z (z−1)`; vanishes at both ends and is bounded by `δ/4`.
pub fn scale_fn(delta: f64, z: f64) -> f64 {
    delta * z * (z - 1.0)
}

/// `z_i = (i−1)/n`, `i = 1..=n`.
pub fn equidistant_design(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / n as f64).collect()
}

/// The heteroscedastic inverse-regression model of the study.
#[derive(Debug, Clone)]
pub struct SimulationModel {
    pub n: usize,
    pub delta: f64,
    pub operator: SpectralOperator,
    /// `⟨f₀, v_j⟩`, `j = 1..=jmax`.
    pub f0_coeffs: BasisExpansion,
}

impl SimulationModel {
    pub fn new(n: usize, delta: f64, operator: SpectralOperator, rule: &QuadratureRule) -> Result<Self> {
        if n < 2 {
            return arg_err(format!("sample size must be at least 2, got {n}"));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return arg_err(format!("noise scale delta must be nonnegative, got {delta}"));
        }
        let f0_coeffs = project_to_basis(f0_eval, operator.jmax(), rule)?;
        Ok(Self { n, delta, operator, f0_coeffs })
    }

    pub fn design(&self) -> Vec<f64> {
        equidistant_design(self.n)
    }

    /// `(A f₀)(z)`.
    pub fn signal(&self, z: f64) -> Result<f64> {
        self.operator.apply_forward(&self.f0_coeffs, z)
    }
}

/// One simulated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    /// Noise-free responses `(A f₀)(z_i)`.
    pub signal: Vec<f64>,
}

/// Draws a dataset; the errors come from a ChaCha20 stream seeded with `seed`.
pub fn gen_dataset(model: &SimulationModel, seed: u64) -> Result<Dataset> {
    let z = model.design();
    let signal = z.iter().map(|&zi| model.signal(zi)).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let y = z
        .iter()
        .zip(&signal)
        .map(|(&zi, &s)| {
            let eps: f64 = StandardNormal.sample(&mut rng);
            s + scale_fn(model.delta, zi) * eps
        })
        .collect();
    Ok(Dataset { z, y, signal })
}

/// Composite trapezoid approximation of `∫₀¹ |f₀ − f̂|` on `grid` equidistant points.
pub fn l1_error<F, G>(f_hat: F, f0: G, grid: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if grid < 2 {
        return arg_err("L1 grid needs at least two points");
    }
    let xs = unit_grid(grid);
    let est: Vec<f64> = xs.iter().map(|&x| f_hat(x)).collect();
    let truth: Vec<f64> = xs.iter().map(|&x| f0(x)).collect();
    l1_error_values(&est, &truth)
}

/// Trapezoid `L1` distance between two functions sampled on the same equidistant grid of `[0,1]`.
pub fn l1_error_values(est: &[f64], truth: &[f64]) -> Result<f64> {
    if est.len() != truth.len() || est.len() < 2 {
        return arg_err("L1 distance needs two equal-length samples of at least two points");
    }
    let h = 1.0 / (est.len() - 1) as f64;
    let d: Vec<f64> = est.iter().zip(truth).map(|(a, b)| (a - b).abs()).collect();
    let inner: f64 = d[1..d.len() - 1].iter().sum();
    Ok(h * (inner + 0.5 * (d[0] + d[d.len() - 1])))
}

pub(crate) fn unit_grid(points: usize) -> Vec<f64> {
    let h = 1.0 / (points - 1) as f64;
    (0..points).map(|i| if i + 1 == points { 1.0 } else { i as f64 * h }).collect()
}
