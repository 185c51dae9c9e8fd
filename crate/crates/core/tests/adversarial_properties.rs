use nalgebra::{DVector, SymmetricEigen};
use proptest::prelude::*;
use relconc::adversarial::{
    build_prox_trap, build_trap, build_weighted_prox_trap, prox_lambda_grid, sweep_prox_path,
};
use relconc::concavity::closed_form;
use relconc::solver::{iterate_prox, iterate_threshold};
use relconc::{ConcavityQuery, Error, Operator, SmoothObjective, StepRule};

fn trap_cases() -> Vec<(Operator, usize, usize, f64)> {
    vec![
        (Operator::hard(3), 3, 3, 1.5),
        (Operator::hard(4), 4, 1, 3.0),
        (Operator::soft(3), 3, 3, 1.0),
        (Operator::reciprocal(10, 0.0).unwrap(), 10, 9, 5.0),
        (Operator::reciprocal(4, 0.5).unwrap(), 4, 2, 4.0),
        (Operator::lq(5, 0.5).unwrap(), 5, 3, 3.0),
    ]
}

#[test]
fn traps_are_stationary_and_certified() {
    for (op, s, sp, kappa) in trap_cases() {
        let query = ConcavityQuery::minimal(s, sp).unwrap();
        let trap = build_trap(&op, query, 1.0 / kappa, 1.0).unwrap();
        let obj = &trap.objective;

        let eig = SymmetricEigen::new(obj.hessian().clone()).eigenvalues;
        assert!(eig.min() >= trap.alpha - 1e-9 && eig.max() <= trap.beta + 1e-9);

        let g = obj.grad(&trap.x0).unwrap();
        let next = op.apply(&(&trap.x0 - g / trap.beta)).unwrap();
        assert!((&next - &trap.x0).amax() <= 1e-9, "{:?} moved", op.shrink);

        let f_y = trap.f_y().unwrap();
        assert!(trap.f_x0().unwrap().abs() <= 1e-12);
        assert!(f_y < 0.0);
        assert!((f_y - trap.predicted_f_y()).abs() <= 1e-9 * (1.0 + f_y.abs()));
        assert!(trap.y.iter().filter(|v| **v != 0.0).count() <= sp);

        let trace = iterate_threshold(obj, &op, &trap.x0, StepRule::Fixed, 100).unwrap();
        assert!(trace
            .steps
            .iter()
            .all(|st| (&st.x - &trap.x0).amax() <= 1e-9));
    }
}

#[test]
fn traps_are_refused_below_the_threshold() {
    let op = Operator::reciprocal(4, 0.0).unwrap();
    let gamma = closed_form(&op, 0.25).unwrap().unwrap();
    let kappa = 0.9 / (2.0 * gamma);
    let err = build_trap(
        &op,
        ConcavityQuery::minimal(4, 1).unwrap(),
        1.0 / kappa,
        1.0,
    )
    .unwrap_err();
    assert!(matches!(err, Error::ConcavityTooSmall { .. }));
}

fn dense_vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![(-5.0f64..-0.01), (0.01f64..5.0)], 2..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prox_path_dichotomy(v in dense_vector()) {
        let trap = build_prox_trap(DVector::from_vec(v)).unwrap();
        prop_assert!(trap.c_condition_holds());
        for rec in sweep_prox_path(&trap, &prox_lambda_grid(&trap, 200)).unwrap() {
            prop_assert!(rec.satisfied, "lambda {} nnz {} f {} f_y {}", rec.lambda, rec.nnz, rec.f, rec.f_y);
        }
    }

    #[test]
    fn weighted_prox_path_dichotomy(v in dense_vector(), w in prop::collection::vec(0.1f64..3.0, 8)) {
        let d = v.len();
        let weights = DVector::from_iterator(d, w.into_iter().take(d));
        let trap = build_weighted_prox_trap(DVector::from_vec(v), weights).unwrap();
        prop_assert!(trap.c_condition_holds());
        for rec in sweep_prox_path(&trap, &prox_lambda_grid(&trap, 100)).unwrap() {
            prop_assert!(rec.satisfied);
        }
    }

    #[test]
    fn closed_form_path_matches_proximal_gradient(v in dense_vector(), frac in 0.0f64..1.3) {
        let trap = build_prox_trap(DVector::from_vec(v)).unwrap();
        let lambda = frac * trap.breakpoints().last().unwrap();
        let d = trap.v.len();
        let trace = iterate_prox(&trap.objective, lambda, &DVector::zeros(d), StepRule::Fixed, 5).unwrap();
        let exact = trap.prox_solution(lambda);
        prop_assert!((trace.last_x() - &exact).amax() <= 1e-12 * (1.0 + exact.amax()));
    }
}
