//! JSON run configuration. Unknown keys are rejected and every error names
//! the path of the offending key.

use std::path::PathBuf;

use rkhs_inverse::experiments::{equidistant_design, Cell, CvPlan, Estimator, ExperimentConfig};
use rkhs_inverse::{Kernel, Loss, QuadratureRule, SolverOptions, SpectralOperator};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Gram,
    Fit,
    Predict,
    Sce,
    Simulate,
    Selfcal,
}

/// Design points: `{"equidistant": 100}`, `{"file": "z.csv"}` or `{"points": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DesignSpec {
    Equidistant(usize),
    File(PathBuf),
    Points(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub cells: Vec<Cell>,
    pub runs: usize,
    #[serde(default = "default_l1_grid")]
    pub l1_grid: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub exclude_nonconverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfcalSpec {
    pub t_star: f64,
    pub s_z: f64,
    pub a_h: f64,
    /// Defaults to `φ(a_h)`, the standard normal density at the window edge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_h: Option<f64>,
    #[serde(default = "default_selfcal_points")]
    pub points: usize,
}

impl SelfcalSpec {
    pub fn c_h(&self) -> f64 {
        self.c_h.unwrap_or_else(|| (-0.5 * self.a_h * self.a_h).exp() / (2.0 * std::f64::consts::PI).sqrt())
    }

    /// `points` equally spaced values strictly inside the window.
    pub fn grid(&self) -> Vec<f64> {
        let w = self.a_h * self.s_z;
        let k = self.points as f64 + 1.0;
        (1..=self.points).map(|i| self.t_star - w + 2.0 * w * i as f64 / k).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default = "default_operator")]
    pub operator: SpectralOperator,
    #[serde(default = "default_kernel")]
    pub kernel: Kernel,
    /// Replace the kernel scale by the median pairwise distance of the design.
    #[serde(default)]
    pub median_scale: bool,
    #[serde(default = "Loss::absolute")]
    pub loss: Loss,
    #[serde(default)]
    pub quadrature: QuadratureRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSpec>,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// SCE cut-off; chosen by cross-validation when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(default)]
    pub cv: CvPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selfcal: Option<SelfcalSpec>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_operator() -> SpectralOperator {
    SpectralOperator::heat(0.01).expect("valid diffusion time")
}

fn default_kernel() -> Kernel {
    Kernel::wendland(1, 0.3).expect("valid Wendland kernel")
}

fn default_tol() -> f64 {
    1e-8
}

fn default_grid_points() -> usize {
    201
}

fn default_l1_grid() -> usize {
    2049
}

fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Rkm, Estimator::Sce]
}

fn default_selfcal_points() -> usize {
    101
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("{}").expect("empty config is valid")
    }
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(invalid("lambda", format!("must be positive, got {l}")));
            }
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_sweeps == Some(0) {
            return Err(invalid("max_sweeps", "must be at least 1"));
        }
        if self.grid_points < 2 {
            return Err(invalid("grid_points", "needs at least two points"));
        }
        if let Some(j) = self.level {
            if j == 0 || j > self.operator.jmax() {
                return Err(invalid("level", format!("{j} outside 1..={}", self.operator.jmax())));
            }
        }
        match &self.design {
            Some(DesignSpec::Equidistant(0)) => return Err(invalid("design.equidistant", "must be at least 1")),
            Some(DesignSpec::Points(p)) => check_design(p, "design.points")?,
            _ => {}
        }
        self.cv.validate().map_err(|e| invalid("cv", e))?;
        for j in &self.cv.j_grid {
            if *j > self.operator.jmax() {
                return Err(invalid("cv.j_grid", format!("level {j} exceeds jmax {}", self.operator.jmax())));
            }
        }
        if let Some(exp) = &self.experiment {
            self.experiment_config(exp, self.seed).validate().map_err(|e| invalid("experiment", e))?;
        }
        if let Some(sc) = &self.selfcal {
            for (name, v) in [("s_z", sc.s_z), ("a_h", sc.a_h), ("c_h", sc.c_h())] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(&format!("selfcal.{name}"), format!("must be positive, got {v}")));
                }
            }
            if sc.points == 0 {
                return Err(invalid("selfcal.points", "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { tol: self.tol, max_sweeps: self.max_sweeps, ..SolverOptions::default() }
    }

    pub fn experiment_config(&self, exp: &ExperimentSpec, seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(exp.cells.clone(), exp.runs, seed);
        cfg.operator = self.operator;
        cfg.kernel = self.kernel;
        cfg.quadrature = self.quadrature;
        cfg.cv = self.cv.clone();
        cfg.tol = self.tol;
        cfg.max_sweeps = self.max_sweeps;
        cfg.l1_grid = exp.l1_grid;
        cfg.estimators = exp.estimators.clone();
        cfg.exclude_nonconverged = exp.exclude_nonconverged;
        cfg
    }

    /// Design points, resolving `{"file": ..}` relative to the working directory.
    pub fn design_points(&self) -> CliResult<Vec<f64>> {
        let z = match &self.design {
            None => return Err(invalid("design", "required by this command")),
            Some(DesignSpec::Equidistant(n)) => equidistant_design(*n),
            Some(DesignSpec::Points(p)) => p.clone(),
            Some(DesignSpec::File(path)) => crate::csv_io::read_column(path, None)?,
        };
        check_design(&z, "design")?;
        Ok(z)
    }
}

fn check_design(z: &[f64], path: &str) -> CliResult<()> {
    if z.is_empty() {
        return Err(invalid(path, "no design points"));
    }
    if let Some(bad) = z.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid(path, format!("point {bad} ({}) outside [0, 1]", z[bad])));
    }
    Ok(())
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{path}: {}", e.into_inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn emit_config(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("configuration serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const REPRODUCTION: &str = r#"{
        "command": "simulate",
        "operator": {"kind": "heat", "T": 0.01, "jmax": 30},
        "kernel": {"kind": "wendland", "d": 1, "scale": 0.3},
        "loss": {"kind": "abs"},
        "quadrature": {"panels": 64, "nodes": 8},
        "cv": {"folds": 5, "a_grid": [0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1],
               "j_grid": [2, 3, 4, 5, 6, 7, 8, 9, 10]},
        "experiment": {"cells": [{"n": 100, "delta": 0.5}, {"n": 250, "delta": 0.5}], "runs": 200},
        "seed": 7
    }"#;

    #[test]
    fn identity_fit_defaults() {
        let cfg = parse_config(r#"{"command": "fit", "operator": {"kind": "identity"}, "lambda": 0.01}"#).unwrap();
        assert_eq!(cfg.operator.jmax(), 30);
        assert!(cfg.operator.is_identity());
        assert_eq!(cfg.quadrature, QuadratureRule::new(64, 8).unwrap());
        assert_eq!(cfg.tol, 1e-8);
        assert_eq!(cfg.lambda, Some(0.01));
        assert_eq!(cfg.loss, Loss::absolute());
    }

    #[test]
    fn nonpositive_lambda_names_the_key() {
        for text in [r#"{"lambda": 0}"#, r#"{"lambda": -1.5}"#] {
            let err = parse_config(text).unwrap_err();
            assert_eq!(err.exit_code(), 2);
            assert!(err.to_string().contains("lambda"), "{err}");
        }
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let err = parse_config(r#"{"lamda": 1}"#).unwrap_err().to_string();
        assert!(err.contains("lamda"), "{err}");
        let err = parse_config(r#"{"cv": {"folds": 5, "extra": 1}}"#).unwrap_err().to_string();
        assert!(err.contains("cv") && err.contains("extra"), "{err}");
        let err = parse_config(r#"{"kernel": {"kind": "wendland", "d": 1, "scale": "x"}}"#).unwrap_err().to_string();
        assert!(err.contains("kernel"), "{err}");
    }

    #[test]
    fn reproduction_config_round_trips() {
        let cfg = parse_config(REPRODUCTION).unwrap();
        let again = parse_config(&emit_config(&cfg)).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(emit_config(&cfg), emit_config(&again));
    }

    #[test]
    fn corpus_round_trips() {
        let corpus = [
            "{}",
            r#"{"command": "gram", "design": {"equidistant": 50}, "out": "m"}"#,
            r#"{"command": "fit", "loss": {"kind": "pinball", "tau": 0.25}, "lambda": 0.001,
                "inputs": {"m": "M.csv", "y": "y.csv"}, "max_sweeps": 500}"#,
            r#"{"command": "sce", "design": {"points": [0.1, 0.5, 0.9]}, "level": 4}"#,
            r#"{"command": "selfcal", "selfcal": {"t_star": 0, "s_z": 0.25, "a_h": 1}}"#,
            r#"{"kernel": {"kind": "rbf", "bandwidth": 0.2}, "loss": {"kind": "huber", "delta": 0.5, "scale": 2}}"#,
            REPRODUCTION,
        ];
        for text in corpus {
            let cfg = parse_config(text).unwrap_or_else(|e| panic!("{text}: {e}"));
            assert_eq!(parse_config(&emit_config(&cfg)).unwrap(), cfg, "{text}");
        }
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(parse_config(r#"{"level": 31}"#).unwrap_err().to_string().contains("level"));
        assert!(parse_config(r#"{"design": {"points": [0.5, 1.5]}}"#).unwrap_err().to_string().contains("design"));
        assert!(parse_config(r#"{"tol": 0}"#).is_err());
        assert!(parse_config(r#"{"experiment": {"cells": [], "runs": 3}}"#).is_err());
        assert!(parse_config(r#"{"operator": {"kind": "heat", "T": -1}}"#)
            .unwrap_err()
            .to_string()
            .contains("operator"));
    }

    #[test]
    fn selfcal_grid_is_inside_window() {
        let sc = SelfcalSpec { t_star: 1.0, s_z: 0.5, a_h: 2.0, c_h: None, points: 101 };
        let g = sc.grid();
        assert_eq!(g.len(), 101);
        assert!(g.iter().all(|t| (t - 1.0).abs() < 1.0));
        assert!((g[50] - 1.0).abs() < 1e-15);
    }
}
