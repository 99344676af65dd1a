use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{rkm_cv, sce_cv, CvOutcome, CvPlan};
use super::data::{f0_eval, gen_dataset, l1_error_values, unit_grid, SimulationModel};
use super::stats::Summary;
use crate::error::{Error, Result};
use crate::estimators::{sce_fit, IqCache, RkmPredictor};
use crate::kernels::Kernel;
use crate::losses::Loss;
use crate::operators::SpectralOperator;
use crate::pseudo_gram::{PseudoGram, QuadratureRule, SpectralKernelModel};
use crate::solvers::{solve_least_squares, solve_pinball_dual_cd, FitProblem, RkmFit, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub n: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Rkm,
    Sce,
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

fn default_l1_grid() -> usize {
    2049
}

fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Rkm, Estimator::Sce]
}

/// Simulation study settings. Run `r` of every cell uses seed `base_seed + r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub cells: Vec<Cell>,
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_operator")]
    pub operator: SpectralOperator,
    #[serde(default = "default_kernel")]
    pub kernel: Kernel,
    #[serde(default)]
    pub quadrature: QuadratureRule,
    #[serde(default)]
    pub cv: CvPlan,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_sweeps: Option<usize>,
    #[serde(default = "default_l1_grid")]
    pub l1_grid: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    /// Drop runs whose final fit did not converge from the summaries.
    #[serde(default)]
    pub exclude_nonconverged: bool,
}

impl ExperimentConfig {
    pub fn new(cells: Vec<Cell>, runs: usize, base_seed: u64) -> Self {
        Self {
            cells,
            runs,
            base_seed,
            operator: default_operator(),
            kernel: default_kernel(),
            quadrature: QuadratureRule::default(),
            cv: CvPlan::default(),
            tol: default_tol(),
            max_sweeps: None,
            l1_grid: default_l1_grid(),
            estimators: default_estimators(),
            exclude_nonconverged: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.cells.is_empty() {
            return Err(Error::Config("no experiment cells".into()));
        }
        for c in &self.cells {
            if c.n < self.cv.folds.max(2) {
                return Err(Error::Config(format!("cell n={} is smaller than the fold count", c.n)));
            }
            if !(c.delta >= 0.0 && c.delta.is_finite()) {
                return Err(Error::Config(format!("cell delta={} must be nonnegative", c.delta)));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.l1_grid < 2 {
            return Err(Error::Config("l1_grid needs at least two points".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators selected".into()));
        }
        self.cv.validate()
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { tol: self.tol, max_sweeps: self.max_sweeps, ..SolverOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub delta: f64,
    pub run: usize,
    pub seed: u64,
    pub estimator: Estimator,
    pub l1: f64,
    /// Selected `a` for the RKM, selected `J` for the cut-off estimator.
    pub chosen: f64,
    pub converged: bool,
    /// Fits inside cross-validation that hit the sweep limit.
    pub cv_nonconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n: usize,
    pub delta: f64,
    pub estimator: Estimator,
    pub summary: Summary,
    pub nonconverged: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub records: Vec<RunRecord>,
    pub summaries: Vec<RunSummary>,
}

impl ExperimentResult {
    pub fn summary(&self, n: usize, delta: f64, estimator: Estimator) -> Option<&RunSummary> {
        self.summaries.iter().find(|s| s.n == n && s.delta == delta && s.estimator == estimator)
    }
}

/// Chooses `a` by cross-validation and refits on the full sample.
pub fn fit_rkm_cv(
    pg: &PseudoGram,
    y: &[f64],
    loss: Loss,
    plan: &CvPlan,
    opts: &SolverOptions,
) -> Result<(RkmFit, CvOutcome<f64>)> {
    let outcome = rkm_cv(pg, y, loss, plan, opts)?;
    let lambda = plan.lambda(outcome.chosen, y.len());
    let mut problem = FitProblem::new(pg.matrix(), y, loss, lambda)?;
    if let Some(f) = pg.factor() {
        problem = problem.with_factor(f)?;
    }
    let fit =
        if loss.is_quantile_type() { solve_pinball_dual_cd(&problem, opts)? } else { solve_least_squares(&problem)? };
    Ok((fit, outcome))
}

struct CellContext {
    model: SimulationModel,
    skm: Arc<SpectralKernelModel>,
    pg: PseudoGram,
}

fn run_once(
    cfg: &ExperimentConfig,
    ctx: &CellContext,
    cache: &IqCache,
    grid: &[f64],
    truth: &[f64],
    run: usize,
) -> Result<Vec<RunRecord>> {
    let seed = cfg.base_seed.wrapping_add(run as u64);
    let data = gen_dataset(&ctx.model, seed)?;
    let mut out = Vec::with_capacity(cfg.estimators.len());
    let record = |estimator, l1, chosen, converged, cv_nonconverged| RunRecord {
        n: ctx.model.n,
        delta: ctx.model.delta,
        run,
        seed,
        estimator,
        l1,
        chosen,
        converged,
        cv_nonconverged,
    };
    for &est in &cfg.estimators {
        match est {
            Estimator::Rkm => {
                let (fit, cv) = fit_rkm_cv(&ctx.pg, &data.y, Loss::absolute(), &cfg.cv, &cfg.solver_options())?;
                let predictor = RkmPredictor::new(Arc::clone(&ctx.skm), &data.z, fit.alpha)?;
                let values = predictor.predict_grid(grid, Some(cache))?;
                let l1 = l1_error_values(&values, truth)?;
                out.push(record(est, l1, cv.chosen, fit.report.converged, cv.nonconverged));
            }
            Estimator::Sce => {
                let cv = sce_cv(&cfg.operator, &data.z, &data.y, &cfg.cv)?;
                let fit = sce_fit(&cfg.operator, &data.z, &data.y, cv.chosen)?;
                let values = grid.iter().map(|&x| fit.predict(x)).collect::<Result<Vec<_>>>()?;
                let l1 = l1_error_values(&values, truth)?;
                out.push(record(est, l1, cv.chosen as f64, true, 0));
            }
        }
    }
    Ok(out)
}

/// Runs every cell of the study. Runs are executed in parallel; records and
/// summaries come out in (cell, run, estimator) order regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let grid = unit_grid(cfg.l1_grid);
    let truth: Vec<f64> = grid.iter().map(|&x| f0_eval(x)).collect();
    let skm = Arc::new(SpectralKernelModel::new(cfg.operator, cfg.kernel, cfg.quadrature)?);
    let cache = IqCache::new();
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for cell in &cfg.cells {
        let model = SimulationModel::new(cell.n, cell.delta, cfg.operator, &cfg.quadrature)?;
        let pg = skm.assemble(&model.design())?;
        let ctx = CellContext { model, skm: Arc::clone(&skm), pg };
        let per_run: Vec<Vec<RunRecord>> = (0..cfg.runs)
            .into_par_iter()
            .map(|r| run_once(cfg, &ctx, &cache, &grid, &truth, r))
            .collect::<Result<_>>()?;
        let cell_records: Vec<RunRecord> = per_run.into_iter().flatten().collect();
        for &est in &cfg.estimators {
            let mine: Vec<&RunRecord> = cell_records.iter().filter(|r| r.estimator == est).collect();
            let nonconverged = mine.iter().filter(|r| !r.converged).count();
            let kept: Vec<f64> =
                mine.iter().filter(|r| r.converged || !cfg.exclude_nonconverged).map(|r| r.l1).collect();
            let summary = Summary::from_values(&kept).ok_or_else(|| {
                Error::Numeric(format!("every run of cell n={} delta={} was excluded", cell.n, cell.delta))
            })?;
            summaries.push(RunSummary {
                n: cell.n,
                delta: cell.delta,
                estimator: est,
                summary,
                nonconverged,
                excluded: mine.len() - kept.len(),
            });
        }
        records.extend(cell_records);
    }
    Ok(ExperimentResult { records, summaries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_fill_in() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"cells":[{"n":100,"delta":0.5}],"runs":3}"#).unwrap();
        assert_eq!(cfg, ExperimentConfig::new(vec![Cell { n: 100, delta: 0.5 }], 3, 0));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"cells":[],"runs":3,"bogus":1}"#).is_err());
        let mut bad = cfg.clone();
        bad.runs = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn small_study_is_deterministic() {
        let mut cfg = ExperimentConfig::new(vec![Cell { n: 40, delta: 0.5 }], 3, 11);
        cfg.l1_grid = 257;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 6);
        assert_eq!(a.summaries.len(), 2);
        for s in &a.summaries {
            let q = s.summary;
            assert!(q.q10 <= q.q25 && q.q25 <= q.median && q.median <= q.q75 && q.q75 <= q.q90);
            assert_eq!(q.count, 3);
        }
        assert_eq!(a.records[0].seed, 11);
        assert_eq!(a.records[2].seed, 12);
    }

    #[test]
    fn noiseless_rkm_with_tiny_lambda() {
        let rule = QuadratureRule::default();
        let model = SimulationModel::new(500, 0.0, default_operator(), &rule).unwrap();
        let data = gen_dataset(&model, 0).unwrap();
        let skm = Arc::new(SpectralKernelModel::new(default_operator(), default_kernel(), rule).unwrap());
        let pg = skm.assemble(&data.z).unwrap();
        let grid = unit_grid(2049);
        let truth: Vec<f64> = grid.iter().map(|&x| f0_eval(x)).collect();
        // Smallest grid value of the study, then far below it. At 1e-9 the box
        // is so wide that the solver stops on the sweep limit with a small
        // residual; the estimate is accurate either way.
        let smallest = CvPlan::default().lambda(1e-4, 500);
        for (lambda, must_converge) in [(smallest, true), (1e-9, false)] {
            let p = FitProblem::new(pg.matrix(), &data.y, Loss::absolute(), lambda)
                .unwrap()
                .with_factor(pg.factor().unwrap())
                .unwrap();
            let fit = solve_pinball_dual_cd(&p, &SolverOptions::default()).unwrap();
            assert!(fit.report.converged || !must_converge);
            assert!(fit.report.residual < 1e-4, "{:?}", fit.report);
            let pred = RkmPredictor::new(skm.clone(), &data.z, fit.alpha).unwrap().predict_grid(&grid, None).unwrap();
            let l1 = l1_error_values(&pred, &truth).unwrap();
            assert!(l1 <= 0.05, "lambda {lambda}: {l1}");
        }
    }

    #[test]
    fn noiseless_sce_choice_tracks_truncation_oracle() {
        let rule = QuadratureRule::default();
        let op = default_operator();
        let model = SimulationModel::new(500, 0.0, op, &rule).unwrap();
        let data = gen_dataset(&model, 0).unwrap();
        let plan = CvPlan::default();
        let cv = sce_cv(&op, &data.z, &data.y, &plan).unwrap();
        let grid = unit_grid(2049);
        let truth: Vec<f64> = grid.iter().map(|&x| f0_eval(x)).collect();
        let trunc: Vec<f64> = plan
            .j_grid
            .iter()
            .map(|&j| {
                let part = crate::operators::BasisExpansion(model.f0_coeffs.0[..j].to_vec());
                let v: Vec<f64> = grid.iter().map(|&x| part.eval(x)).collect();
                l1_error_values(&v, &truth).unwrap()
            })
            .collect();
        let best = plan.j_grid[(0..trunc.len()).min_by(|&a, &b| trunc[a].total_cmp(&trunc[b])).unwrap()];
        assert!(cv.chosen + 1 >= best, "chosen {} oracle {}", cv.chosen, best);
    }
}
