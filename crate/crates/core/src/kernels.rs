//! Positive-definite kernels on `[0,1]^d`.
//!
//! The Wendland family `k_{d,m}(x,x') = φ_{d,m}(‖x−x'‖ / scale)` is compactly
//! supported; `φ_{d,m}` is the truncated polynomial `p_{d,m}` for the minimal
//! smoothness index that keeps the RKHS a Sobolev space on `ℝ^d`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};

/// A location in the covariate space.
pub trait Point: Sync {
    fn dist_sq(&self, other: &Self) -> f64;

    fn dist(&self, other: &Self) -> f64 {
        self.dist_sq(other).sqrt()
    }
}

impl Point for f64 {
    #[inline]
    fn dist_sq(&self, other: &Self) -> f64 {
        (self - other) * (self - other)
    }

    #[inline]
    fn dist(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
}

impl<const N: usize> Point for [f64; N] {
    fn dist_sq(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

impl Point for Vec<f64> {
    fn dist_sq(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Smoothness index paired with dimension `d` (`(d+1)/2` for odd `d`, `d/2+1` for even `d`).
pub fn wendland_smoothness(dim: usize) -> Result<usize> {
    match dim {
        1..=5 if dim % 2 == 1 => Ok(dim.div_ceil(2)),
        1..=5 => Ok(dim / 2 + 1),
        _ => Err(Error::Config(format!("Wendland kernels are tabulated for dimensions 1..=5, got {dim}"))),
    }
}

/// Evaluates `φ_{d,m}(r)`: the Wendland polynomial on `[0,1]`, zero beyond.
pub fn wendland_poly_eval(dim: usize, smoothness: usize, r: f64) -> Result<f64> {
    if wendland_smoothness(dim).ok() != Some(smoothness) {
        return Err(Error::Config(format!("no tabulated Wendland polynomial for (d, m) = ({dim}, {smoothness})")));
    }
    if !(r >= 0.0) {
        return arg_err(format!("Wendland radius must be nonnegative, got {r}"));
    }
    Ok(phi(smoothness, r))
}

#[inline]
fn phi(smoothness: usize, r: f64) -> f64 {
    if r >= 1.0 {
        return 0.0;
    }
    let s = 1.0 - r;
    match smoothness {
        1 => s.powi(3) * (3.0 * r + 1.0),
        2 => s.powi(6) * ((35.0 * r + 18.0) * r + 3.0),
        3 => s.powi(9) * (((693.0 * r + 477.0) * r + 135.0) * r + 15.0),
        _ => unreachable!("smoothness validated at construction"),
    }
}

/// A rescaled Wendland kernel `φ_{d,m}(‖x−x'‖/scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WendlandSpec {
    dim: usize,
    smoothness: usize,
    scale: f64,
}

impl WendlandSpec {
    pub fn new(dim: usize, scale: f64) -> Result<Self> {
        let smoothness = wendland_smoothness(dim)?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("Wendland scale must be positive and finite, got {scale}")));
        }
        Ok(Self { dim, smoothness, scale })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> usize {
        self.smoothness
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `p_{d,m}(0)`, the kernel's value on the diagonal.
    pub fn peak(&self) -> f64 {
        phi(self.smoothness, 0.0)
    }
}

/// A symmetric positive-definite kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelDescriptor", into = "KernelDescriptor")]
pub enum Kernel {
    Wendland(WendlandSpec),
    /// `exp(−‖x−x'‖² / (2 bandwidth²))`
    GaussianRbf {
        bandwidth: f64,
    },
}

impl Kernel {
    pub fn wendland(dim: usize, scale: f64) -> Result<Self> {
        WendlandSpec::new(dim, scale).map(Kernel::Wendland)
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Config(format!("RBF bandwidth must be positive and finite, got {bandwidth}")));
        }
        Ok(Kernel::GaussianRbf { bandwidth })
    }

    /// Kernel value as a function of the distance between the two arguments.
    #[inline]
    pub fn radial(&self, dist: f64) -> f64 {
        match *self {
            Kernel::Wendland(w) => phi(w.smoothness, dist / w.scale),
            Kernel::GaussianRbf { bandwidth } => (-dist * dist / (2.0 * bandwidth * bandwidth)).exp(),
        }
    }

    #[inline]
    pub fn eval<P: Point>(&self, x: &P, y: &P) -> f64 {
        self.radial(x.dist(y))
    }

    /// Radius beyond which the kernel vanishes identically, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match *self {
            Kernel::Wendland(w) => Some(w.scale),
            Kernel::GaussianRbf { .. } => None,
        }
    }

    pub fn diagonal_value(&self) -> f64 {
        self.radial(0.0)
    }
}

/// Serialized form: `{"kind":"wendland","d":1,"scale":0.3}` or `{"kind":"rbf","bandwidth":0.2}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelDescriptor {
    Wendland { d: usize, scale: f64 },
    Rbf { bandwidth: f64 },
}

impl TryFrom<KernelDescriptor> for Kernel {
    type Error = Error;

    fn try_from(desc: KernelDescriptor) -> Result<Self> {
        match desc {
            KernelDescriptor::Wendland { d, scale } => Kernel::wendland(d, scale),
            KernelDescriptor::Rbf { bandwidth } => Kernel::gaussian(bandwidth),
        }
    }
}

impl From<Kernel> for KernelDescriptor {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::Wendland(w) => KernelDescriptor::Wendland { d: w.dim, scale: w.scale },
            Kernel::GaussianRbf { bandwidth } => KernelDescriptor::Rbf { bandwidth },
        }
    }
}

/// `K[i][j] = k(points[i], points[j])`. Rows are filled in parallel.
pub fn gram_matrix<P: Point>(kernel: &Kernel, points: &[P]) -> Result<DMatrix<f64>> {
    let n = points.len();
    if n == 0 {
        return arg_err("Gram matrix needs at least one point");
    }
    let rows: Vec<Vec<f64>> =
        (0..n).into_par_iter().map(|i| (0..n).map(|j| kernel.eval(&points[i], &points[j])).collect()).collect();
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Median of all `n²` pairwise distances, self-distances included.
///
/// Even counts take the mean of the two middle values.
pub fn median_distance_scale<P: Point>(points: &[P]) -> Result<f64> {
    if points.len() < 2 {
        return arg_err("median distance heuristic needs at least two points");
    }
    let mut d: Vec<f64> = points.iter().flat_map(|a| points.iter().map(move |b| a.dist(b))).collect();
    d.sort_by(f64::total_cmp);
    let m = d.len();
    Ok(if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) })
}

/// `cᵀ K c` for a finite expansion `Σ c_i k(·, x_i)`.
pub fn rkhs_norm_sq(gram: &DMatrix<f64>, coeffs: &[f64]) -> Result<f64> {
    let n = coeffs.len();
    if gram.nrows() != n || gram.ncols() != n {
        return arg_err(format!("Gram matrix is {}x{} but {} coefficients were given", gram.nrows(), gram.ncols(), n));
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += gram[(i, j)] * coeffs[j];
        }
        total += coeffs[i] * row;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn table_polynomials_at_reference_points() {
        assert_eq!(wendland_poly_eval(1, 1, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(wendland_poly_eval(1, 1, 0.5).unwrap(), 0.3125, epsilon = 1e-15);
        assert_abs_diff_eq!(wendland_poly_eval(2, 2, 0.5).unwrap(), 0.32421875, epsilon = 1e-15);
        assert_eq!(wendland_poly_eval(1, 1, 1.7).unwrap(), 0.0);
        assert_eq!(wendland_poly_eval(3, 2, 0.0).unwrap(), 3.0);
        assert_eq!(wendland_poly_eval(4, 3, 0.0).unwrap(), 15.0);
        assert_eq!(wendland_poly_eval(5, 3, 0.0).unwrap(), 15.0);
    }

    #[test]
    fn unsupported_pairs_are_config_errors() {
        assert!(matches!(wendland_poly_eval(1, 2, 0.1), Err(Error::Config(_))));
        assert!(matches!(wendland_poly_eval(6, 3, 0.1), Err(Error::Config(_))));
        assert!(matches!(wendland_poly_eval(0, 1, 0.1), Err(Error::Config(_))));
        assert!(WendlandSpec::new(1, 0.0).is_err());
        assert!(Kernel::gaussian(-1.0).is_err());
    }

    #[test]
    fn continuous_at_support_edge() {
        for (d, m) in [(1, 1), (2, 2), (3, 2), (4, 3), (5, 3)] {
            let left = wendland_poly_eval(d, m, 1.0 - 1e-9).unwrap();
            assert!(left.abs() < 1e-20, "d={d}: {left}");
            assert_eq!(wendland_poly_eval(d, m, 1.0).unwrap(), 0.0);
            assert_eq!(wendland_poly_eval(d, m, 1.0 + 1e-9).unwrap(), 0.0);
        }
    }

    #[test]
    fn rescaled_kernel_values() {
        let k = Kernel::wendland(1, 0.3).unwrap();
        assert_eq!(k.eval(&0.42, &0.42), 1.0);
        assert_abs_diff_eq!(k.eval(&0.2, &0.35), 0.3125, epsilon = 1e-12);
        assert_eq!(k.eval(&0.0, &0.31), 0.0);
    }

    #[test]
    fn gram_small_cases() {
        let k = Kernel::wendland(2, 0.5).unwrap();
        let g = gram_matrix(&k, &[[0.1, 0.2]]).unwrap();
        assert_eq!(g[(0, 0)], 3.0);
        let k1 = Kernel::wendland(1, 0.3).unwrap();
        let g = gram_matrix(&k1, &[0.4, 0.4]).unwrap();
        assert_eq!(g, DMatrix::from_element(2, 2, 1.0));
        assert!(gram_matrix::<f64>(&k1, &[]).is_err());
    }

    #[test]
    fn median_heuristic() {
        assert_eq!(median_distance_scale(&[0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(median_distance_scale(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(median_distance_scale(&[0.5]).is_err());
        // Brute-force oracle on the equidistant design z_i = (i-1)/n.
        let n = 100;
        let z: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let mut all = Vec::new();
        for a in &z {
            for b in &z {
                all.push((a - b).abs());
            }
        }
        all.sort_by(f64::total_cmp);
        let oracle = 0.5 * (all[all.len() / 2 - 1] + all[all.len() / 2]);
        let got = median_distance_scale(&z).unwrap();
        assert_eq!(got, oracle);
        assert!((got - 0.29).abs() < 0.006, "{got}");
    }

    #[test]
    fn rkhs_norm_cases() {
        let k = Kernel::wendland(1, 0.3).unwrap();
        let pts = [0.1, 0.25, 0.4, 0.55, 0.9];
        let g = gram_matrix(&k, &pts).unwrap();
        assert_eq!(rkhs_norm_sq(&g, &[0.0; 5]).unwrap(), 0.0);
        let c = [0.3, -1.2, 0.7, 2.0, -0.4];
        let mut oracle = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                oracle += c[i] * c[j] * k.eval(&pts[i], &pts[j]);
            }
        }
        assert_abs_diff_eq!(rkhs_norm_sq(&g, &c).unwrap(), oracle, epsilon = 1e-12);
        let g1 = gram_matrix(&k, &[0.5]).unwrap();
        assert_abs_diff_eq!(rkhs_norm_sq(&g1, &[1.5]).unwrap(), 2.25, epsilon = 1e-15);
        assert!(rkhs_norm_sq(&g, &[1.0; 4]).is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        let k: Kernel = serde_json::from_str(r#"{"kind":"wendland","d":1,"scale":0.3}"#).unwrap();
        assert_eq!(k, Kernel::wendland(1, 0.3).unwrap());
        let back = serde_json::to_string(&k).unwrap();
        assert_eq!(serde_json::from_str::<Kernel>(&back).unwrap(), k);
        assert!(serde_json::from_str::<Kernel>(r#"{"kind":"wendland","d":9,"scale":0.3}"#).is_err());
        assert!(serde_json::from_str::<Kernel>(r#"{"kind":"rbf","bandwidth":0.2,"x":1}"#).is_err());
    }

    fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
        m.clone().symmetric_eigen().eigenvalues.min()
    }

    proptest! {
        #[test]
        fn symmetric_and_psd(pts in prop::collection::vec(0.0f64..1.0, 1..64), d in 1usize..=5, scale in 0.05f64..1.5) {
            let k = Kernel::wendland(d, scale).unwrap();
            let g = gram_matrix(&k, &pts).unwrap();
            for i in 0..pts.len() {
                prop_assert_eq!(g[(i, i)], k.diagonal_value());
                for j in 0..pts.len() {
                    prop_assert_eq!(g[(i, j)], g[(j, i)]);
                    if (pts[i] - pts[j]).abs() >= scale {
                        prop_assert_eq!(g[(i, j)], 0.0);
                    }
                }
            }
            let tr = g.trace();
            prop_assert!(min_eigenvalue(&g) >= -1e-10 * tr.max(1.0));
        }

        #[test]
        fn gaussian_psd_in_2d(pts in prop::collection::vec(prop::array::uniform2(0.0f64..1.0), 1..40), bw in 0.05f64..1.0) {
            let k = Kernel::gaussian(bw).unwrap();
            let g = gram_matrix(&k, &pts).unwrap();
            prop_assert!(min_eigenvalue(&g) >= -1e-10 * g.trace().max(1.0));
        }
    }

    #[test]
    fn random_uniform_gram_is_psd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
        let g = gram_matrix(&Kernel::wendland(1, 0.3).unwrap(), &pts).unwrap();
        assert!(min_eigenvalue(&g) >= -1e-10);
    }
}
