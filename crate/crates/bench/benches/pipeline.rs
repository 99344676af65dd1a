use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rkhs_inverse::pseudo_gram::iqs_matrix;
use rkhs_inverse::solvers::solve_pinball_dual_cd;
use rkhs_inverse::{FitProblem, Kernel, Loss, QuadratureRule, SolverOptions};
use rkhs_inverse_bench::{study_model, study_problem};

fn iqs(c: &mut Criterion) {
    let kernel = Kernel::wendland(1, 0.3).unwrap();
    let rule = QuadratureRule::default();
    c.bench_function("iqs_matrix jmax=30", |b| b.iter(|| iqs_matrix(black_box(&kernel), 30, &rule).unwrap()));
}

fn assemble(c: &mut Criterion) {
    let model = study_model();
    let mut group = c.benchmark_group("assemble");
    for n in [100, 250, 500] {
        let z: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &z, |b, z| b.iter(|| model.assemble(z).unwrap()));
    }
    group.finish();
}

fn dual_cd(c: &mut Criterion) {
    let model = study_model();
    let mut group = c.benchmark_group("dual_cd abs");
    group.sample_size(20);
    for n in [100, 250] {
        let (pg, y) = study_problem(&model, n, 0.5, 1);
        let lambda = 0.5 * 1e-3 * (n as f64).powf(-0.45);
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| {
                let p = FitProblem::new(pg.matrix(), &y, Loss::absolute(), lambda)
                    .unwrap()
                    .with_factor(pg.factor().unwrap())
                    .unwrap();
                solve_pinball_dual_cd(&p, &SolverOptions::default()).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, iqs, assemble, dual_cd);
criterion_main!(benches);
