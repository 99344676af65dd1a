use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::estimators::sce_fit;
use crate::losses::Loss;
use crate::operators::SpectralOperator;
use crate::pseudo_gram::PseudoGram;
use crate::solvers::{solve_least_squares, solve_pinball_dual_cd, FitProblem, SolverOptions};

/// Cross-validation grids. `λ = ½ a n^{exponent}` for each `a` in `a_grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvPlan {
    pub folds: usize,
    pub a_grid: Vec<f64>,
    pub j_grid: Vec<usize>,
    pub lambda_exponent: f64,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self {
            folds: 5,
            a_grid: vec![1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1],
            j_grid: (2..=10).collect(),
            lambda_exponent: -0.45,
        }
    }
}

impl CvPlan {
    pub fn lambda(&self, a: f64, n: usize) -> f64 {
        0.5 * a * (n as f64).powf(self.lambda_exponent)
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.a_grid.is_empty() || self.a_grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Config("a_grid must be nonempty with positive entries".into()));
        }
        if self.j_grid.is_empty() || self.j_grid.contains(&0) {
            return Err(Error::Config("j_grid must be nonempty with positive levels".into()));
        }
        Ok(())
    }
}

/// Interleaved folds: observation `i` goes to fold `i mod folds`.
pub fn fold_assignment(n: usize, folds: usize) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return arg_err(format!("need at least 2 folds, got {folds}"));
    }
    if n < folds {
        return arg_err(format!("{n} observations cannot fill {folds} folds"));
    }
    let mut out = vec![Vec::new(); folds];
    for i in 0..n {
        out[i % folds].push(i);
    }
    Ok(out)
}

/// Result of a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome<T> {
    pub chosen: T,
    pub index: usize,
    /// Mean validation loss per grid value, averaged over folds.
    pub scores: Vec<f64>,
    /// Fits inside the search that hit the sweep limit.
    pub nonconverged: usize,
}

/// Generic k-fold grid search.
///
/// `fold_losses(train, valid)` returns one validation loss per grid value for
/// that split. The first grid value attaining the minimal mean loss wins.
pub fn kfold_select<T, F>(grid: &[T], n: usize, folds: usize, mut fold_losses: F) -> Result<CvOutcome<T>>
where
    T: Clone,
    F: FnMut(&[usize], &[usize]) -> Result<Vec<f64>>,
{
    if grid.is_empty() {
        return arg_err("cross-validation grid is empty");
    }
    let assignment = fold_assignment(n, folds)?;
    let mut totals = vec![0.0; grid.len()];
    for (k, valid) in assignment.iter().enumerate() {
        let train: Vec<usize> = assignment
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let losses = fold_losses(&train, valid)?;
        if losses.len() != grid.len() {
            return arg_err(format!("fold returned {} losses for {} grid values", losses.len(), grid.len()));
        }
        for (t, l) in totals.iter_mut().zip(&losses) {
            *t += l;
        }
    }
    let scores: Vec<f64> = totals.iter().map(|t| t / folds as f64).collect();
    let mut index = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[index] {
            index = i;
        }
    }
    Ok(CvOutcome { chosen: grid[index].clone(), index, scores, nonconverged: 0 })
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Selects `a` for the RKM by k-fold CV on a fixed pseudo kernel matrix.
///
/// Validation loss is the absolute deviation between held-out responses and
/// the fitted `(A f̂)(z)`. Within a fold the grid is solved in order with warm starts.
pub fn rkm_cv(pg: &PseudoGram, y: &[f64], loss: Loss, plan: &CvPlan, opts: &SolverOptions) -> Result<CvOutcome<f64>> {
    plan.validate()?;
    let m = pg.matrix();
    if m.nrows() != y.len() {
        return arg_err(format!("M has {} rows but there are {} responses", m.nrows(), y.len()));
    }
    let mut nonconverged = 0;
    let mut outcome = kfold_select(&plan.a_grid, y.len(), plan.folds, |train, valid| {
        let m_train = submatrix(m, train, train);
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let factors = pg.factor().map(|f| (select_rows(f, train), select_rows(f, valid)));
        let cross = if factors.is_none() { Some(submatrix(m, valid, train)) } else { None };
        let mut warm: Option<Vec<f64>> = None;
        let mut losses = Vec::with_capacity(plan.a_grid.len());
        for &a in &plan.a_grid {
            let lambda = plan.lambda(a, train.len());
            let mut problem = FitProblem::new(&m_train, &y_train, loss, lambda)?;
            if let Some((ft, _)) = &factors {
                problem = problem.with_factor(ft)?;
            }
            let fit = if loss.is_quantile_type() {
                let mut o = opts.clone();
                o.warm_start = warm.take();
                solve_pinball_dual_cd(&problem, &o)?
            } else {
                solve_least_squares(&problem)?
            };
            if !fit.report.converged {
                nonconverged += 1;
            }
            let predicted: Vec<f64> = match (&factors, &cross) {
                (Some((ft, fv)), _) => {
                    let w = ft.transpose() * nalgebra::DVector::from_column_slice(&fit.alpha);
                    (fv * w).iter().copied().collect()
                }
                (None, Some(c)) => (c * nalgebra::DVector::from_column_slice(&fit.alpha)).iter().copied().collect(),
                _ => unreachable!(),
            };
            let l = valid.iter().zip(&predicted).map(|(&i, p)| (y[i] - p).abs()).sum::<f64>() / valid.len() as f64;
            losses.push(l);
            warm = Some(fit.alpha);
        }
        Ok(losses)
    })?;
    outcome.nonconverged = nonconverged;
    Ok(outcome)
}

/// Selects the cut-off level `J` of the spectral estimator by k-fold CV.
pub fn sce_cv(op: &SpectralOperator, design: &[f64], y: &[f64], plan: &CvPlan) -> Result<CvOutcome<usize>> {
    plan.validate()?;
    if design.len() != y.len() {
        return arg_err(format!("{} design points for {} responses", design.len(), y.len()));
    }
    let top = *plan.j_grid.iter().max().expect("validated nonempty");
    kfold_select(&plan.j_grid, y.len(), plan.folds, |train, valid| {
        let zt: Vec<f64> = train.iter().map(|&i| design[i]).collect();
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let est = sce_fit(op, &zt, &yt, top)?;
        Ok(plan
            .j_grid
            .iter()
            .map(|&level| {
                let truncated = crate::estimators::SceEstimate {
                    level,
                    b_hat: est.b_hat[..level].to_vec(),
                    sigma: est.sigma[..level].to_vec(),
                };
                valid.iter().map(|&i| (y[i] - truncated.fitted_response(design[i])).abs()).sum::<f64>()
                    / valid.len() as f64
            })
            .collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_indices() {
        let f = fold_assignment(12, 5).unwrap();
        assert_eq!(f[0], vec![0, 5, 10]);
        assert_eq!(f[4], vec![4, 9]);
        let mut all: Vec<usize> = f.concat();
        all.sort();
        assert_eq!(all, (0..12).collect::<Vec<_>>());
        assert!(fold_assignment(4, 5).is_err());
    }

    #[test]
    fn default_grids() {
        let plan = CvPlan::default();
        assert_eq!(plan.folds, 5);
        assert_eq!(plan.a_grid, vec![1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1]);
        assert_eq!(plan.j_grid, (2..=10).collect::<Vec<_>>());
        assert!((plan.lambda(1e-2, 100) - 0.5 * 1e-2 * 100f64.powf(-0.45)).abs() < 1e-18);
    }

    #[test]
    fn grid_edge_cases() {
        let single = kfold_select(&[7usize], 10, 5, |_, _| Ok(vec![1.0])).unwrap();
        assert_eq!(single.chosen, 7);
        // Identical grid values score identically: the first occurrence wins.
        let dup = kfold_select(&[0.1, 0.1, 0.2], 10, 5, |_, _| Ok(vec![1.0, 1.0, 2.0])).unwrap();
        assert_eq!(dup.index, 0);
        let tie = kfold_select(&[3usize, 4, 5], 10, 5, |_, _| Ok(vec![2.0, 1.0, 1.0])).unwrap();
        assert_eq!(tie.chosen, 4);
        assert!(kfold_select::<usize, _>(&[], 10, 5, |_, _| Ok(vec![])).is_err());
        assert!(kfold_select(&[1usize], 3, 5, |_, _| Ok(vec![0.0])).is_err());
    }

    #[test]
    fn splits_are_disjoint_and_cover() {
        let mut seen = [0usize; 23];
        kfold_select(&[0usize], 23, 5, |train, valid| {
            assert_eq!(train.len() + valid.len(), 23);
            assert!(valid.iter().all(|v| !train.contains(v)));
            for &v in valid {
                seen[v] += 1;
            }
            Ok(vec![0.0])
        })
        .unwrap();
        assert!(seen.iter().all(|&c| c == 1));
    }
}
