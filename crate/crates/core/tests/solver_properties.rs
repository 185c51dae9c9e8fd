use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relconc::concavity::{closed_form, gamma_reciprocal};
use relconc::solver::{best_sparse_value, compare_convergence_bound, iterate, iterate_threshold};
use relconc::{Operator, Quadratic, SmoothObjective, StepRule};

fn quadratic(d: usize, kappa: f64, seed: u64) -> Quadratic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Quadratic::random(d, 1.0 / kappa, 1.0, &mut rng).unwrap()
}

/// Smallest `s` for which reciprocal thresholding with `c = 0` certifies
/// condition number `kappa` at `s' = 1`.
fn certified_sparsity(kappa: f64) -> usize {
    (2..)
        .find(|&s| gamma_reciprocal(1.0 / s as f64, 0.0).unwrap() < 0.5 / kappa)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adaptive_steps_satisfy_curvature_condition(seed in any::<u64>(), kappa in 1.0f64..6.0, s in 1usize..5) {
        let obj = quadratic(8, kappa, seed);
        let op = Operator::reciprocal(s, 0.3).unwrap();
        let trace = iterate_threshold(&obj, &op, &DVector::zeros(8), StepRule::adaptive(), 40).unwrap();
        let mut prev = trace.x0.clone();
        for step in &trace.steps {
            prop_assert!(step.eta >= 1.0 / obj.beta() - 1e-15);
            let g = obj.grad(&prev).unwrap();
            let diff = &step.x - &prev;
            let rhs = obj.value(&prev).unwrap() + g.dot(&diff) + diff.norm_squared() / (2.0 * step.eta);
            prop_assert!(step.f <= rhs + 1e-10 * (1.0 + rhs.abs()));
            prev = step.x.clone();
        }
    }

    #[test]
    fn fixed_step_hard_thresholding_descends(seed in any::<u64>(), kappa in 1.0f64..20.0, s in 1usize..6) {
        let obj = quadratic(10, kappa, seed);
        let trace = iterate_threshold(&obj, &Operator::hard(s), &DVector::zeros(10), StepRule::Fixed, 60).unwrap();
        let mut f_prev = trace.f0;
        for step in &trace.steps {
            prop_assert!(step.f <= f_prev + 1e-10 * (1.0 + f_prev.abs()));
            f_prev = step.f;
        }
    }

    #[test]
    fn convergence_bound_under_both_rules(seed in any::<u64>(), kappa in 1.0f64..3.0) {
        let s = certified_sparsity(kappa);
        let d = s + 3;
        let obj = quadratic(d, kappa, seed);
        let op = Operator::reciprocal(s, 0.0).unwrap();
        let gamma = closed_form(&op, 1.0 / s as f64).unwrap().unwrap();
        let (y, f_y) = best_sparse_value(&obj, 1).unwrap();
        for rule in [StepRule::Fixed, StepRule::adaptive()] {
            let trace = iterate_threshold(&obj, &op, &DVector::zeros(d), rule, 150).unwrap();
            let ok = compare_convergence_bound(&trace, &y, f_y, gamma, obj.kappa(), obj.beta());
            prop_assert!(ok.iter().all(|b| *b), "{rule:?}: first violation at {:?}", ok.iter().position(|b| !b));
        }
    }

    #[test]
    fn fixed_points_dominate_sparse_competitors(seed in any::<u64>(), kappa in 1.0f64..4.0, sp in 1usize..3) {
        let s = 6;
        let d = 10;
        let obj = quadratic(d, kappa, seed);
        let op = Operator::hard(s);
        let trace = iterate(&obj, &op, &DVector::zeros(d), StepRule::Fixed, 20_000, Some(1e-13)).unwrap();
        prop_assume!(trace.fixed_point(1e-13).is_some());
        let x = trace.last_x().clone();
        let f_x = obj.value(&x).unwrap();
        let gamma = closed_form(&op, sp as f64 / s as f64).unwrap().unwrap();
        let slope = obj.beta() * (gamma - 0.5 / obj.kappa());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for subset in relconc::solver::combinations(d, sp) {
            let mut candidates = vec![obj.restricted_minimizer(&subset).unwrap()];
            for _ in 0..3 {
                let g: DVector<f64> = relconc::objective::gaussian_vector(sp, &mut rng);
                let mut y = DVector::zeros(d);
                for (k, &i) in subset.iter().enumerate() {
                    y[i] = 2.0 * g[k];
                }
                candidates.push(y);
            }
            for y in candidates {
                let bound = obj.value(&y).unwrap() + slope * (&y - &x).norm_squared();
                prop_assert!(f_x <= bound + 1e-8 * (1.0 + bound.abs()), "f(x) = {f_x} > {bound}");
            }
        }
    }
}

#[test]
fn traces_are_deterministic() {
    let run = || {
        let obj = quadratic(9, 3.0, 42);
        let op = Operator::lq(3, 0.5).unwrap();
        iterate_threshold(
            &obj,
            &op,
            &DVector::from_element(9, 0.1),
            StepRule::adaptive(),
            80,
        )
        .unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn best_sparse_value_matches_exhaustive_grid() {
    let obj = quadratic(4, 2.0, 7);
    let (_, best) = best_sparse_value(&obj, 1).unwrap();
    let mut brute = f64::INFINITY;
    for i in 0..4 {
        for k in -4000..=4000 {
            let mut y = DVector::zeros(4);
            y[i] = k as f64 * 1e-3;
            brute = brute.min(obj.value(&y).unwrap());
        }
    }
    assert!(
        best <= brute + 1e-12 && best >= brute - 1e-5,
        "{best} vs {brute}"
    );
}
