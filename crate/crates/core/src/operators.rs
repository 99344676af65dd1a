//! Forward operators given by a singular system on `[0,1]`.
//!
//! Every operator here acts diagonally in the sine basis
//! `v_j(z) = √2 sin(jπz)`: `A f = Σ σ_j ⟨f, v_j⟩ u_j` with `u_j = v_j`.
//! The heat operator maps an initial temperature profile to the profile at
//! time `T` under Dirichlet boundary conditions, `σ_j = exp(−j²π²T)`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::pseudo_gram::quadrature::QuadratureRule;

/// Default series truncation; the heat spectrum is far below f64 resolution past it.
pub const DEFAULT_JMAX: usize = 30;

/// `v_j(z) = √2 sin(jπz)` without domain checks.
#[inline]
pub fn sine_basis(j: usize, z: f64) -> f64 {
    SQRT_2 * (j as f64 * PI * z).sin()
}

/// `v_j(z) = √2 sin(jπz)` for `j ≥ 1`, `z ∈ [0,1]`.
pub fn sine_basis_eval(j: usize, z: f64) -> Result<f64> {
    if j == 0 {
        return arg_err("sine basis indices start at 1");
    }
    check_unit(z)?;
    Ok(sine_basis(j, z))
}

pub(crate) fn check_unit(z: f64) -> Result<()> {
    if (0.0..=1.0).contains(&z) {
        Ok(())
    } else {
        arg_err(format!("point {z} lies outside [0, 1]"))
    }
}

/// Spectrum of a diagonal operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    /// Backward heat conduction at diffusion time `T`.
    Heat {
        diffusion_time: f64,
    },
    Identity,
    /// Polynomially decaying spectrum `σ_j = j^{−rate}`.
    CustomDecay {
        rate: f64,
    },
}

/// A compact operator `A` described by its eigenvalues in the sine basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorDescriptor", into = "OperatorDescriptor")]
pub struct SpectralOperator {
    kind: OperatorKind,
    jmax: usize,
}

impl SpectralOperator {
    pub fn new(kind: OperatorKind, jmax: usize) -> Result<Self> {
        if jmax == 0 {
            return Err(Error::Config("series truncation jmax must be at least 1".into()));
        }
        match kind {
            OperatorKind::Heat { diffusion_time } if !(diffusion_time > 0.0 && diffusion_time.is_finite()) => {
                return Err(Error::Config(format!(
                    "heat operator needs a positive diffusion time, got {diffusion_time}"
                )));
            }
            OperatorKind::CustomDecay { rate } if !(rate >= 0.0 && rate.is_finite()) => {
                return Err(Error::Config(format!("decay rate must be nonnegative, got {rate}")));
            }
            _ => {}
        }
        Ok(Self { kind, jmax })
    }

    pub fn heat(diffusion_time: f64) -> Result<Self> {
        Self::new(OperatorKind::Heat { diffusion_time }, DEFAULT_JMAX)
    }

    pub fn identity() -> Self {
        Self { kind: OperatorKind::Identity, jmax: DEFAULT_JMAX }
    }

    pub fn with_jmax(self, jmax: usize) -> Result<Self> {
        Self::new(self.kind, jmax)
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn jmax(&self) -> usize {
        self.jmax
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, OperatorKind::Identity)
    }

    #[inline]
    fn sigma(&self, j: usize) -> f64 {
        let j = j as f64;
        match self.kind {
            OperatorKind::Heat { diffusion_time } => (-j * j * PI * PI * diffusion_time).exp(),
            OperatorKind::Identity => 1.0,
            OperatorKind::CustomDecay { rate } => j.powf(-rate),
        }
    }

    /// `σ_j` for `1 ≤ j ≤ jmax`.
    pub fn eigenvalue(&self, j: usize) -> Result<f64> {
        if j == 0 || j > self.jmax {
            return arg_err(format!("eigenvalue index {j} outside 1..={}", self.jmax));
        }
        Ok(self.sigma(j))
    }

    /// `(σ_1, …, σ_jmax)`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.jmax).map(|j| self.sigma(j)).collect()
    }

    /// Coefficients of `A f` in the `u_j` basis: `σ_j c_j`.
    pub fn forward_coeffs(&self, f: &BasisExpansion) -> Vec<f64> {
        f.0.iter().take(self.jmax).enumerate().map(|(i, c)| self.sigma(i + 1) * c).collect()
    }

    /// `(A f)(z) = Σ_j σ_j c_j v_j(z)`, truncated at `jmax`.
    pub fn apply_forward(&self, f: &BasisExpansion, z: f64) -> Result<f64> {
        check_unit(z)?;
        Ok(self.forward_coeffs(f).iter().enumerate().map(|(i, c)| c * sine_basis(i + 1, z)).sum())
    }

    /// `A* g` for `g` given by its `u_j` coefficients: `Σ σ_j g_j v_j`.
    pub fn apply_adjoint_coeffs(&self, g: &[f64]) -> Result<BasisExpansion> {
        if g.len() > self.jmax {
            return arg_err(format!("{} adjoint coefficients exceed the truncation jmax = {}", g.len(), self.jmax));
        }
        Ok(BasisExpansion(g.iter().enumerate().map(|(i, c)| self.sigma(i + 1) * c).collect()))
    }
}

/// Serialized form: `{"kind":"heat","T":0.01,"jmax":30}`, `{"kind":"identity"}`,
/// `{"kind":"decay","rate":1.0,"jmax":30}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OperatorDescriptor {
    Heat {
        #[serde(rename = "T")]
        t: f64,
        #[serde(default = "default_jmax")]
        jmax: usize,
    },
    Identity {
        #[serde(default = "default_jmax")]
        jmax: usize,
    },
    Decay {
        rate: f64,
        #[serde(default = "default_jmax")]
        jmax: usize,
    },
}

fn default_jmax() -> usize {
    DEFAULT_JMAX
}

impl TryFrom<OperatorDescriptor> for SpectralOperator {
    type Error = Error;

    fn try_from(d: OperatorDescriptor) -> Result<Self> {
        match d {
            OperatorDescriptor::Heat { t, jmax } => Self::new(OperatorKind::Heat { diffusion_time: t }, jmax),
            OperatorDescriptor::Identity { jmax } => Self::new(OperatorKind::Identity, jmax),
            OperatorDescriptor::Decay { rate, jmax } => Self::new(OperatorKind::CustomDecay { rate }, jmax),
        }
    }
}

impl From<SpectralOperator> for OperatorDescriptor {
    fn from(op: SpectralOperator) -> Self {
        let jmax = op.jmax;
        match op.kind {
            OperatorKind::Heat { diffusion_time } => OperatorDescriptor::Heat { t: diffusion_time, jmax },
            OperatorKind::Identity => OperatorDescriptor::Identity { jmax },
            OperatorKind::CustomDecay { rate } => OperatorDescriptor::Decay { rate, jmax },
        }
    }
}

/// `f = Σ_j c_j v_j`, coefficients indexed from `j = 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BasisExpansion(pub Vec<f64>);

impl BasisExpansion {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// The single basis function `v_j`.
    pub fn unit(j: usize, len: usize) -> Self {
        let mut c = vec![0.0; len];
        c[j - 1] = 1.0;
        Self(c)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Σ c_j v_j(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().enumerate().map(|(i, c)| c * sine_basis(i + 1, x)).sum()
    }
}

/// `c_j = ∫₀¹ f v_j` for `j = 1..=count`, checked against a twice-refined rule.
pub fn project_to_basis<F>(f: F, count: usize, rule: &QuadratureRule) -> Result<BasisExpansion>
where
    F: Fn(f64) -> f64,
{
    let coarse = project_with(&f, count, rule)?;
    let fine = project_with(&f, count, &rule.refined())?;
    let residual = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let magnitude = fine.iter().map(|c| c.abs()).fold(1.0, f64::max);
    if residual > 1e-6 * magnitude {
        return Err(Error::Numeric(format!(
            "basis projection did not converge: refinement changed coefficients by {residual:.3e}"
        )));
    }
    Ok(BasisExpansion(fine))
}

fn project_with<F: Fn(f64) -> f64>(f: &F, count: usize, rule: &QuadratureRule) -> Result<Vec<f64>> {
    let (nodes, weights) = rule.nodes_weights();
    let values: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("integrand is not finite at node {} (x = {})", i, nodes[i])));
    }
    Ok((1..=count)
        .map(|j| nodes.iter().zip(&weights).zip(&values).map(|((&x, &w), &v)| w * v * sine_basis(j, x)).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn sine_basis_values() {
        assert_abs_diff_eq!(sine_basis_eval(1, 0.5).unwrap(), SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(sine_basis_eval(2, 0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sine_basis_eval(3, 0.25).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sine_basis_eval(4, 1.0).unwrap(), 0.0, epsilon = 1e-14);
        assert!(sine_basis_eval(1, 1.2).is_err());
        assert!(sine_basis_eval(1, -0.01).is_err());
        assert!(sine_basis_eval(0, 0.5).is_err());
    }

    #[test]
    fn heat_eigenvalues() {
        let op = SpectralOperator::heat(0.01).unwrap();
        assert_abs_diff_eq!(op.eigenvalue(1).unwrap(), (-PI * PI * 0.01).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(op.eigenvalue(1).unwrap(), 0.90602, epsilon = 5e-6);
        assert_abs_diff_eq!(op.eigenvalue(5).unwrap(), 0.08480, epsilon = 5e-6);
        assert!(op.eigenvalue(0).is_err());
        assert!(op.eigenvalue(31).is_err());
        assert_eq!(SpectralOperator::identity().eigenvalue(7).unwrap(), 1.0);
        assert!(SpectralOperator::heat(0.0).is_err());
    }

    #[test]
    fn monotone_spectra() {
        for op in [
            SpectralOperator::heat(0.01).unwrap(),
            SpectralOperator::new(OperatorKind::CustomDecay { rate: 1.5 }, 40).unwrap(),
        ] {
            let s = op.eigenvalues();
            assert!(s.iter().all(|&x| x > 0.0));
            assert!(s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn forward_application() {
        let v1 = BasisExpansion::unit(1, 30);
        let id = SpectralOperator::identity();
        assert_abs_diff_eq!(id.apply_forward(&v1, 0.5).unwrap(), SQRT_2, epsilon = 1e-15);
        let heat = SpectralOperator::heat(0.01).unwrap();
        let got = heat.apply_forward(&v1, 0.5).unwrap();
        assert_abs_diff_eq!(got, heat.eigenvalue(1).unwrap() * SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(got, 1.281303, epsilon = 1e-6);
        assert_eq!(heat.apply_forward(&BasisExpansion::zeros(30), 0.3).unwrap(), 0.0);
        assert!(heat.apply_forward(&v1, 1.5).is_err());
    }

    #[test]
    fn adjoint_application() {
        let id = SpectralOperator::identity();
        assert_eq!(id.apply_adjoint_coeffs(&[1.0, 0.0]).unwrap().0, vec![1.0, 0.0]);
        let heat = SpectralOperator::heat(0.01).unwrap();
        let mut e1 = vec![0.0; 30];
        e1[0] = 1.0;
        let a = heat.apply_adjoint_coeffs(&e1).unwrap();
        assert_abs_diff_eq!(a.0[0], 0.90602, epsilon = 5e-6);
        assert!(a.0[1..].iter().all(|&c| c == 0.0));
        assert!(heat.apply_adjoint_coeffs(&[0.0; 30]).unwrap().0.iter().all(|&c| c == 0.0));
        assert!(heat.apply_adjoint_coeffs(&[0.0; 31]).is_err());
    }

    #[test]
    fn truncation_does_not_touch_leading_terms() {
        let a = SpectralOperator::heat(0.02).unwrap().with_jmax(10).unwrap();
        let b = a.with_jmax(40).unwrap();
        assert_eq!(a.eigenvalues()[..], b.eigenvalues()[..10]);
    }

    #[test]
    fn projection_oracles() {
        let rule = QuadratureRule::default();
        let p = project_to_basis(|x| sine_basis(2, x), 6, &rule).unwrap();
        for (i, c) in p.0.iter().enumerate() {
            assert_abs_diff_eq!(*c, if i == 1 { 1.0 } else { 0.0 }, epsilon = 1e-8);
        }
        let ones = project_to_basis(|_| 1.0, 8, &rule).unwrap();
        for (i, c) in ones.0.iter().enumerate() {
            let j = (i + 1) as f64;
            let exact = SQRT_2 * (1.0 - (j * PI).cos()) / (j * PI);
            assert_abs_diff_eq!(*c, exact, epsilon = 1e-12);
        }
        assert!(matches!(project_to_basis(|x| if x > 0.5 { f64::NAN } else { 0.0 }, 3, &rule), Err(Error::Numeric(_))));
    }

    #[test]
    fn descriptor_forms() {
        let op: SpectralOperator = serde_json::from_str(r#"{"kind":"heat","T":0.01,"jmax":30}"#).unwrap();
        assert_eq!(op, SpectralOperator::heat(0.01).unwrap());
        let id: SpectralOperator = serde_json::from_str(r#"{"kind":"identity"}"#).unwrap();
        assert!(id.is_identity());
        assert!(serde_json::from_str::<SpectralOperator>(r#"{"kind":"heat","T":-1}"#).is_err());
    }

    proptest! {
        #[test]
        fn adjoint_identity(f in prop::collection::vec(-5.0f64..5.0, 30), g in prop::collection::vec(-5.0f64..5.0, 30), t in 0.001f64..0.1) {
            let op = SpectralOperator::heat(t).unwrap();
            let f = BasisExpansion(f);
            let af = op.forward_coeffs(&f);
            let lhs: f64 = af.iter().zip(&g).map(|(a, b)| a * b).sum();
            let adj = op.apply_adjoint_coeffs(&g).unwrap();
            let rhs: f64 = f.0.iter().zip(&adj.0).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn identity_is_neutral(c in prop::collection::vec(-3.0f64..3.0, 1..30), z in 0.0f64..=1.0) {
            let f = BasisExpansion(c);
            let got = SpectralOperator::identity().apply_forward(&f, z).unwrap();
            prop_assert!((got - f.eval(z)).abs() <= 1e-12);
        }
    }
}
