use crate::error::{arg_err, Result};
use crate::pseudo_gram::quadrature::{integrate_1d, QuadratureRule};

/// Outcome of a numerical check of the quadratic lower bound on the excess
/// absolute-deviation risk.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfCalibrationReport {
    pub holds: bool,
    /// `max_t (bound(t) − excess(t))`, clamped below at zero.
    pub max_violation: f64,
    pub worst_t: f64,
}

/// `E|W − c|` for standard normal `W`.
fn normal_mean_abs(c: f64) -> f64 {
    let pdf = (-0.5 * c * c).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let cdf = 0.5 * statrs::function::erf::erfc(-c / std::f64::consts::SQRT_2);
    2.0 * pdf + c * (2.0 * cdf - 1.0)
}

/// Closed-form `E|Y − t| − E|Y − t*|` for `Y ~ t* + s N(0,1)`.
pub fn normal_excess_risk(t: f64, t_star: f64, s: f64) -> f64 {
    s * (normal_mean_abs((t - t_star) / s) - normal_mean_abs(0.0))
}

/// `∫|y − t| dP(y)` for `Y ~ t* + s N(0,1)`, by Gauss–Legendre quadrature on
/// `[t* − 12s, t* + 12s]` split at the kink `t`.
fn conditional_risk(t: f64, t_star: f64, s: f64, rule: &QuadratureRule) -> Result<f64> {
    let lo = t_star - 12.0 * s;
    let hi = t_star + 12.0 * s;
    let density = |y: f64| {
        let w = (y - t_star) / s;
        (-0.5 * w * w).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    };
    let piece = |a: f64, b: f64| -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        integrate_1d(
            |u| {
                let y = a + (b - a) * u;
                (b - a) * (y - t).abs() * density(y)
            },
            rule,
        )
    };
    let kink = t.clamp(lo, hi);
    Ok(piece(lo, kink)? + piece(kink, hi)?)
}

/// Checks `(c_h / 2s)(t − t*)² ≤ E|Y − t| − E|Y − t*|` at every grid point,
/// with `Y ~ t* + s_z N(0,1)` and the risk integrated numerically.
///
/// Grid points must lie strictly inside `(t* − a_h s_z, t* + a_h s_z)`.
pub fn self_calibration_check(
    t_star: f64,
    s_z: f64,
    a_h: f64,
    c_h: f64,
    grid: &[f64],
) -> Result<SelfCalibrationReport> {
    if !(s_z > 0.0 && s_z.is_finite()) {
        return arg_err(format!("scale must be positive, got {s_z}"));
    }
    if !(a_h > 0.0 && c_h > 0.0) {
        return arg_err("window half-width and density floor must be positive");
    }
    if grid.is_empty() {
        return arg_err("empty t grid");
    }
    let half = a_h * s_z;
    if let Some(t) = grid.iter().find(|&&t| !((t - t_star).abs() < half)) {
        return arg_err(format!("grid point {t} outside the window ({}, {})", t_star - half, t_star + half));
    }
    let rule = QuadratureRule::new(64, 16)?;
    let base = conditional_risk(t_star, t_star, s_z, &rule)?;
    let mut max_violation = 0.0;
    let mut worst_t = t_star;
    for &t in grid {
        let excess = conditional_risk(t, t_star, s_z, &rule)? - base;
        let bound = c_h / (2.0 * s_z) * (t - t_star).powi(2);
        let v = bound - excess;
        if v > max_violation {
            max_violation = v;
            worst_t = t;
        }
    }
    Ok(SelfCalibrationReport { holds: max_violation <= 1e-6, max_violation, worst_t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn phi(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    fn open_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
        (1..=points).map(|i| lo + (hi - lo) * i as f64 / (points + 1) as f64).collect()
    }

    #[test]
    fn numeric_risk_matches_closed_form() {
        let rule = QuadratureRule::new(64, 16).unwrap();
        for (t, ts, s) in [(0.1, 0.0, 0.25), (-0.3, 0.2, 0.5), (0.0, 0.0, 1.0), (2.0, 1.0, 0.7)] {
            let numeric = conditional_risk(t, ts, s, &rule).unwrap() - conditional_risk(ts, ts, s, &rule).unwrap();
            assert_abs_diff_eq!(numeric, normal_excess_risk(t, ts, s), epsilon = 1e-10);
        }
        assert_abs_diff_eq!(normal_mean_abs(0.0), (2.0 / std::f64::consts::PI).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn trivial_point() {
        let r = self_calibration_check(0.0, 0.25, 1.0, phi(1.0), &[0.0]).unwrap();
        assert!(r.holds);
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn bound_holds_for_normal_errors() {
        let grid = open_grid(-0.25, 0.25, 101);
        let r = self_calibration_check(0.0, 0.25, 1.0, phi(1.0), &grid).unwrap();
        assert!(r.holds && r.max_violation <= 1e-6, "{r:?}");
    }

    #[test]
    fn inflated_floor_fails() {
        let grid = open_grid(-0.25, 0.25, 101);
        // The normal density stays above φ(1) on the window with roughly a
        // threefold margin in the bound, so the control must exceed that.
        let r = self_calibration_check(0.0, 0.25, 1.0, 4.0 * phi(1.0), &grid).unwrap();
        assert!(!r.holds, "{r:?}");
        let doubled = self_calibration_check(0.0, 0.25, 1.0, 2.0 * phi(1.0), &grid).unwrap();
        assert!(doubled.holds);
    }

    #[test]
    fn window_is_enforced() {
        assert!(self_calibration_check(0.0, 0.25, 1.0, 0.2, &[0.25]).is_err());
        assert!(self_calibration_check(0.0, 0.25, 1.0, 0.2, &[-0.3]).is_err());
        assert!(self_calibration_check(0.0, 0.0, 1.0, 0.2, &[0.0]).is_err());
    }
}
