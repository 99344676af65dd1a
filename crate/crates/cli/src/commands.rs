use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rkhs_inverse::experiments::{
    f0_eval, normal_excess_risk, run_experiment, sce_cv, self_calibration_check, Estimator, ExperimentResult,
    SimulationModel,
};
use rkhs_inverse::kernels::KernelDescriptor;
use rkhs_inverse::pseudo_gram::SpectralKernelModel;
use rkhs_inverse::solvers::{psd_factor, solve_least_squares, solve_pinball_dual_cd};
use rkhs_inverse::{median_distance_scale, sce_fit, FitProblem, Kernel, RkmPredictor};

use crate::config::RunConfig;
use crate::csv_io::{emit_csv, read_column, read_matrix, read_table, Field, Table};
use crate::error::{CliError, CliResult};
use crate::plot::{emit_boxplot, emit_function_plot, Curve};

/// Eigenvalues below this fraction of the largest are dropped from the factor of a loaded `M`.
const FACTOR_REL_TOL: f64 = 1e-14;

/// Resolved invocation: the validated config plus the output directory.
pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn new(cfg: RunConfig) -> CliResult<Self> {
        let out = cfg.out.clone();
        std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
        Ok(Self { cfg, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn kernel_for(&self, design: &[f64]) -> CliResult<Kernel> {
        if !self.cfg.median_scale {
            return Ok(self.cfg.kernel);
        }
        let s = median_distance_scale(design)?;
        Ok(match KernelDescriptor::from(self.cfg.kernel) {
            KernelDescriptor::Wendland { d, .. } => Kernel::wendland(d, s)?,
            KernelDescriptor::Rbf { .. } => Kernel::gaussian(s)?,
        })
    }

    fn model(&self, design: &[f64]) -> CliResult<Arc<SpectralKernelModel>> {
        let kernel = self.kernel_for(design)?;
        Ok(Arc::new(SpectralKernelModel::new(self.cfg.operator, kernel, self.cfg.quadrature)?))
    }

    fn grid(&self) -> Vec<f64> {
        let k = self.cfg.grid_points - 1;
        (0..=k).map(|i| i as f64 / k as f64).collect()
    }

    fn input(&self, name: &str, path: &Option<PathBuf>) -> CliResult<PathBuf> {
        path.clone().ok_or_else(|| CliError::Config(format!("inputs.{name}: required by this command")))
    }
}

/// Reads the column named `name`, or the only column of a single-column file.
fn read_vector(path: &Path, name: &str) -> CliResult<Vec<f64>> {
    let (header, _) = read_table(path)?;
    if header.iter().any(|h| h == name) {
        read_column(path, Some(name))
    } else {
        read_column(path, None)
    }
}

pub fn gram(ctx: &Context) -> CliResult<String> {
    let z = ctx.cfg.design_points()?;
    let pg = ctx.model(&z)?.assemble(&z)?;
    emit_csv(&Table::from_matrix(pg.matrix(), "c"), &ctx.path("M.csv"))?;
    emit_csv(&Table::column("z", &z), &ctx.path("z.csv"))?;
    Ok(format!("M: {n}x{n} written to {}", ctx.path("M.csv").display(), n = z.len()))
}

pub fn fit(ctx: &Context) -> CliResult<String> {
    let cfg = &ctx.cfg;
    let lambda = cfg.lambda.ok_or_else(|| CliError::Config("lambda: required by fit".into()))?;
    let y = read_vector(&ctx.input("y", &cfg.inputs.y)?, "y")?;
    let m: DMatrix<f64> = match (&cfg.inputs.m, &cfg.design) {
        (Some(path), _) => read_matrix(path)?,
        (None, Some(_)) => {
            let z = cfg.design_points()?;
            ctx.model(&z)?.assemble(&z)?.into_matrix()
        }
        (None, None) => return Err(CliError::Config("inputs.m: required by fit when no design is given".into())),
    };
    let pg = rkhs_inverse::PseudoGram::from_matrix(m)?;
    let mut problem = FitProblem::new(pg.matrix(), &y, cfg.loss, lambda)?;
    let fit = if cfg.loss.is_quantile_type() {
        let factor = psd_factor(pg.matrix(), FACTOR_REL_TOL)?;
        problem = problem.with_factor(&factor)?;
        solve_pinball_dual_cd(&problem, &cfg.solver_options())?
    } else {
        solve_least_squares(&problem)?
    };
    emit_csv(&Table::column("alpha", &fit.alpha), &ctx.path("alpha.csv"))?;
    let r = &fit.report;
    let mut report = Table::new(["objective", "residual", "sweeps", "converged", "lambda", "box", "frozen"]);
    report.push(vec![
        fit.objective.into(),
        r.residual.into(),
        r.sweeps.into(),
        Field::Text(r.converged.to_string()),
        fit.lambda.into(),
        fit.cost.into(),
        r.frozen.len().into(),
    ])?;
    emit_csv(&report, &ctx.path("fit_report.csv"))?;
    let line = format!(
        "objective={:.12e} residual={:.3e} sweeps={} converged={}",
        fit.objective, r.residual, r.sweeps, r.converged
    );
    if !r.converged {
        return Err(CliError::Numeric(format!("solver did not converge: {line}")));
    }
    Ok(line)
}

pub fn predict(ctx: &Context) -> CliResult<String> {
    let cfg = &ctx.cfg;
    let z = cfg.design_points()?;
    let alpha = read_vector(&ctx.input("alpha", &cfg.inputs.alpha)?, "alpha")?;
    let predictor = RkmPredictor::new(ctx.model(&z)?, &z, alpha)?;
    let grid = ctx.grid();
    let values = predictor.predict_grid(&grid, None)?;
    let mut t = Table::new(["x", "f_hat"]);
    for (x, v) in grid.iter().zip(&values) {
        t.push(vec![(*x).into(), (*v).into()])?;
    }
    emit_csv(&t, &ctx.path("prediction.csv"))?;
    emit_function_plot(&[Curve::new("f_hat", grid.clone(), values)], &ctx.path("prediction.svg"))?;
    Ok(format!("{} predictions written to {}", grid.len(), ctx.path("prediction.csv").display()))
}

pub fn sce(ctx: &Context) -> CliResult<String> {
    let cfg = &ctx.cfg;
    let z = cfg.design_points()?;
    let y = read_vector(&ctx.input("y", &cfg.inputs.y)?, "y")?;
    let level = match cfg.level {
        Some(j) => j,
        None => sce_cv(&cfg.operator, &z, &y, &cfg.cv)?.chosen,
    };
    let est = sce_fit(&cfg.operator, &z, &y, level)?;
    let mut coeffs = Table::new(["j", "b_hat", "sigma"]);
    for (j, (b, s)) in est.b_hat.iter().zip(&est.sigma).enumerate() {
        coeffs.push(vec![(j + 1).into(), (*b).into(), (*s).into()])?;
    }
    emit_csv(&coeffs, &ctx.path("sce.csv"))?;
    let grid = ctx.grid();
    let values = grid.iter().map(|&x| est.predict(x)).collect::<rkhs_inverse::Result<Vec<_>>>()?;
    let mut t = Table::new(["x", "f_hat"]);
    for (x, v) in grid.iter().zip(&values) {
        t.push(vec![(*x).into(), (*v).into()])?;
    }
    emit_csv(&t, &ctx.path("sce_prediction.csv"))?;
    emit_function_plot(&[Curve::new(format!("SCE J={level}"), grid, values)], &ctx.path("sce_prediction.svg"))?;
    Ok(format!("level={level} amplification={:.6e}", est.amplification()))
}

fn estimator_name(e: Estimator) -> &'static str {
    match e {
        Estimator::Rkm => "rkm",
        Estimator::Sce => "sce",
    }
}

/// One row per δ, one column per (n, estimator), in the layout of the
/// median and 90% quantile tables.
fn cross_table(res: &ExperimentResult, pick: fn(&rkhs_inverse::experiments::Summary) -> f64) -> CliResult<Table> {
    let mut ns: Vec<usize> = res.summaries.iter().map(|s| s.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut deltas: Vec<f64> = res.summaries.iter().map(|s| s.delta).collect();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    let mut ests: Vec<Estimator> = Vec::new();
    for s in &res.summaries {
        if !ests.contains(&s.estimator) {
            ests.push(s.estimator);
        }
    }
    let mut header = vec!["delta".to_string()];
    for n in &ns {
        for e in &ests {
            header.push(format!("n{n}_{}", estimator_name(*e)));
        }
    }
    let mut t = Table::new(header);
    for &d in &deltas {
        let mut row = vec![Field::Num(d)];
        for &n in &ns {
            for &e in &ests {
                row.push(match res.summary(n, d, e) {
                    Some(s) => Field::Num(pick(&s.summary)),
                    None => Field::Text(String::new()),
                });
            }
        }
        t.push(row)?;
    }
    Ok(t)
}

pub fn simulate(ctx: &Context) -> CliResult<String> {
    let cfg = &ctx.cfg;
    let spec = cfg.experiment.as_ref().ok_or_else(|| CliError::Config("experiment: required by simulate".into()))?;
    let exp = cfg.experiment_config(spec, cfg.seed);
    let res = run_experiment(&exp)?;

    let mut runs =
        Table::new(["n", "delta", "run", "seed", "estimator", "l1", "chosen", "converged", "cv_nonconverged"]);
    for r in &res.records {
        runs.push(vec![
            r.n.into(),
            r.delta.into(),
            r.run.into(),
            Field::Int(r.seed as i64),
            estimator_name(r.estimator).into(),
            r.l1.into(),
            r.chosen.into(),
            Field::Text(r.converged.to_string()),
            r.cv_nonconverged.into(),
        ])?;
    }
    emit_csv(&runs, &ctx.path("runs.csv"))?;

    let mut summary = Table::new([
        "n",
        "delta",
        "estimator",
        "count",
        "mean",
        "q10",
        "q25",
        "median",
        "q75",
        "q90",
        "nonconverged",
        "excluded",
    ]);
    let mut groups = Vec::new();
    for s in &res.summaries {
        let q = &s.summary;
        summary.push(vec![
            s.n.into(),
            s.delta.into(),
            estimator_name(s.estimator).into(),
            q.count.into(),
            q.mean.into(),
            q.q10.into(),
            q.q25.into(),
            q.median.into(),
            q.q75.into(),
            q.q90.into(),
            s.nonconverged.into(),
            s.excluded.into(),
        ])?;
        groups.push((format!("{} n={} δ={}", estimator_name(s.estimator).to_uppercase(), s.n, s.delta), *q));
    }
    emit_csv(&summary, &ctx.path("summary.csv"))?;
    emit_csv(&cross_table(&res, |s| s.median)?, &ctx.path("table_median.csv"))?;
    emit_csv(&cross_table(&res, |s| s.q90)?, &ctx.path("table_q90.csv"))?;
    emit_boxplot(&groups, &ctx.path("summary.svg"))?;

    let model = SimulationModel::new(2, 0.0, cfg.operator, &cfg.quadrature)?;
    let grid = ctx.grid();
    let af0 = grid.iter().map(|&x| model.signal(x)).collect::<rkhs_inverse::Result<Vec<_>>>()?;
    let f0 = grid.iter().map(|&x| f0_eval(x)).collect();
    emit_function_plot(&[Curve::new("A f0", grid.clone(), af0), Curve::new("f0", grid, f0)], &ctx.path("figure1.svg"))?;

    let nonconverged: usize = res.summaries.iter().map(|s| s.nonconverged).sum();
    Ok(format!(
        "{} runs in {} cells; {} non-converged fits; summary in {}",
        exp.runs,
        exp.cells.len(),
        nonconverged,
        ctx.path("summary.csv").display()
    ))
}

pub fn selfcal(ctx: &Context) -> CliResult<String> {
    let sc = ctx.cfg.selfcal.as_ref().ok_or_else(|| CliError::Config("selfcal: required by selfcal".into()))?;
    let grid = sc.grid();
    let c_h = sc.c_h();
    let report = self_calibration_check(sc.t_star, sc.s_z, sc.a_h, c_h, &grid)?;
    let mut t = Table::new(["t", "excess_risk", "bound"]);
    for &x in &grid {
        let bound = c_h / (2.0 * sc.s_z) * (x - sc.t_star).powi(2);
        t.push(vec![x.into(), normal_excess_risk(x, sc.t_star, sc.s_z).into(), bound.into()])?;
    }
    emit_csv(&t, &ctx.path("selfcal.csv"))?;
    Ok(format!(
        "holds={} max_violation={:.3e} worst_t={:.6} c_h={:.6}",
        report.holds, report.max_violation, report.worst_t, c_h
    ))
}
