use rkhs_inverse_bench::{study_model, study_problem};

#[test]
fn study_problem_has_matching_shapes() {
    let model = study_model();
    let (pg, y) = study_problem(&model, 40, 0.5, 3);
    assert_eq!(pg.dim(), 40);
    assert_eq!(y.len(), 40);
    let f = pg.factor().expect("heat operator yields a factor");
    assert_eq!(f.nrows(), 40);
    assert!((f * f.transpose() - pg.matrix()).amax() < 1e-10);
}
