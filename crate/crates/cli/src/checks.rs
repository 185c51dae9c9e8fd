//! The numbered acceptance checks. [`Scale::Full`] runs them at their
//! stated sizes; [`Scale::Quick`] shrinks the Monte Carlo budgets for the
//! `validate` subcommand.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use relconc::adversarial::{build_prox_trap, build_trap, prox_lambda_grid, sweep_prox_path};
use relconc::concavity::{
    closed_form, concavity_ratio, empirical_concavity, gamma_hard, gamma_optimal,
    gamma_shrink_class,
};
use relconc::lowrank::{
    diag_embed, empirical_matrix_concavity, iterate_threshold_matrix, lift_apply,
    matrix_concavity_ratio, unvectorize, LiftedOperator, MatrixConcavityQuery,
};
use relconc::objective::gaussian_vector;
use relconc::regression::{
    binomial_slack, condition_scaling_experiment, coverage_experiment, validate_lemma10,
    BoundParams, DesignSpec, ScalingConfig,
};
use relconc::solver::{
    best_sparse_value, check_theorem1_bound, compare_convergence_bound, iterate, iterate_threshold,
};
use relconc::{
    ConcavityQuery, Operator, Quadratic, SearchBudget, SmoothObjective, StepRule, Vector,
};

use crate::commands::{cmd_concavity_curve, curve_violations, CurveArgs};
use crate::parse::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

impl Scale {
    fn pick(self, quick: usize, full: usize) -> usize {
        match self {
            Scale::Quick => quick,
            Scale::Full => full,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl Outcome {
    /// Passed and finished within its time limit.
    pub fn ok(&self) -> bool {
        self.passed && self.elapsed <= self.limit
    }

    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {}: {} ({:.2}s of {}s) {}",
            self.id,
            self.name,
            if self.ok() { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.limit.as_secs(),
            self.detail
        )
    }
}

type Check = fn(Scale) -> anyhow::Result<(bool, String)>;

/// `(id, name, time limit in seconds, check)` for every criterion.
pub const CHECKS: [(usize, &str, u64, Check); 12] = [
    (1, "closed-form concavity table", 1, closed_form_table),
    (
        2,
        "empirical vs closed-form sandwich",
        120,
        empirical_sandwich,
    ),
    (3, "continuity penalty", 10, continuity_penalty),
    (
        4,
        "convergence bound on random quadratics",
        60,
        convergence_bound,
    ),
    (5, "stationary traps", 5, stationary_traps),
    (6, "prox sweep dichotomy", 5, prox_sweep),
    (7, "matrix concavity transfer", 120, matrix_transfer),
    (8, "matrix convergence bound", 60, matrix_bound),
    (9, "regression bound coverage", 300, regression_coverage),
    (10, "condition-number slope", 600, kappa_slope),
    (11, "noise projection union bound", 120, noise_projection),
    (12, "concavity curve data", 1, curve_data),
];

pub fn run(id: usize, scale: Scale) -> Outcome {
    let (id, name, limit, check) = CHECKS[id - 1];
    let start = Instant::now();
    let (passed, detail) = check(scale).unwrap_or_else(|e| (false, format!("error: {e}")));
    Outcome {
        id,
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
        limit: Duration::from_secs(limit),
    }
}

fn rho_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| lo + i as f64 * step).collect()
}

pub fn closed_form_table(_: Scale) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for rho in rho_grid(0.05, 0.95, 0.05) {
        let opt = rho / (1.0 + rho);
        worst = worst
            .max((gamma_hard(rho)? - rho.sqrt() / 2.0).abs())
            .max((gamma_optimal(rho)? - opt).abs())
            .max((gamma_shrink_class(rho, (1.0 - rho) / 2.0)? - opt).abs());
    }
    Ok((worst <= 1e-12, format!("max deviation {worst:.2e}")))
}

fn sandwich_ops() -> anyhow::Result<Vec<(&'static str, Operator)>> {
    Ok(vec![
        ("hard", Operator::hard(1)),
        ("rt:0", Operator::reciprocal(1, 0.0)?),
        ("rt:0.5", Operator::reciprocal(1, 0.5)?),
        ("lq:2/3", Operator::lq(1, 2.0 / 3.0)?),
        ("lq:0.4", Operator::lq(1, 0.4)?),
    ])
}

pub fn empirical_sandwich(scale: Scale) -> anyhow::Result<(bool, String)> {
    let budget = SearchBudget::with_restarts(scale.pick(50, 1000));
    let mut failures = Vec::new();
    let mut cases = 0;
    for (label, base) in sandwich_ops()? {
        for (s, sp) in [(4, 1), (4, 2), (4, 4), (6, 3)] {
            let op = base.with_sparsity(s);
            let query = ConcavityQuery::minimal(s, sp)?;
            let cf = closed_form(&op, query.rho())?.expect("closed form exists");
            let rep = empirical_concavity(&op, query, budget, 7)?;
            let e = rep.empirical_max;
            cases += 1;
            if !(e >= cf - 1e-6 && e <= cf + 1e-9) {
                failures.push(format!("{label} ({s},{sp}): {e} vs {cf}"));
            }
        }
    }
    Ok((
        failures.is_empty(),
        format!("{cases} cases, failures: {failures:?}"),
    ))
}

pub fn continuity_penalty(scale: Scale) -> anyhow::Result<(bool, String)> {
    let budget = SearchBudget::with_restarts(scale.pick(50, 1000));
    let rep = empirical_concavity(&Operator::soft(2), ConcavityQuery::new(2, 1, 4)?, budget, 3)?;
    Ok((
        rep.empirical_max >= 1.0 - 1e-6,
        format!("empirical {:.9}", rep.empirical_max),
    ))
}

/// Smallest `s` with `gamma(1/s) < 1/(2 kappa)`.
fn sparsity_for(op: &Operator, kappa: f64) -> anyhow::Result<usize> {
    for s in 1..=200 {
        if let Some(g) = closed_form(&op.with_sparsity(s), 1.0 / s as f64)? {
            if g < 0.5 / kappa {
                return Ok(s);
            }
        }
    }
    anyhow::bail!("no sparsity level up to 200 meets the contraction condition")
}

pub fn convergence_bound(scale: Scale) -> anyhow::Result<(bool, String)> {
    let instances = scale.pick(10, 100);
    let steps = 200;
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut settings = Vec::new();
    for (label, base) in sandwich_ops()? {
        for kappa in [1.5, 2.0, 4.0] {
            let s = sparsity_for(&base, kappa)?;
            let op = base.with_sparsity(s);
            let d = s + 3;
            let gamma = closed_form(&op, 1.0 / s as f64)?.expect("closed form exists");
            settings.push(format!("{label}@{kappa}:s={s}"));
            let results = (0..instances as u64)
                .into_par_iter()
                .map(|k| -> anyhow::Result<usize> {
                    let mut rng = ChaCha8Rng::seed_from_u64(1000 * s as u64 + k);
                    let obj = Quadratic::random(d, 1.0 / kappa, 1.0, &mut rng)?;
                    let (y, f_y) = best_sparse_value(&obj, 1)?;
                    let x0 = Vector::zeros(d);
                    let trace = iterate_threshold(&obj, &op, &x0, StepRule::Fixed, steps)?;
                    let ok = check_theorem1_bound(&trace, &y, f_y, gamma, kappa, obj.beta())?;
                    Ok(ok.iter().filter(|b| !**b).count())
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            checked += instances * steps;
            violations += results.iter().sum::<usize>();
        }
    }
    Ok((
        violations == 0,
        format!(
            "{violations} violations in {checked} step checks; {}",
            settings.join(" ")
        ),
    ))
}

pub fn stationary_traps(_: Scale) -> anyhow::Result<(bool, String)> {
    let cases: [(&str, Operator, f64, usize, usize); 3] = [
        ("hard", Operator::hard(3), 1.5, 3, 3),
        ("soft", Operator::soft(3), 1.0, 3, 3),
        ("rt:0", Operator::reciprocal(10, 0.0)?, 5.0, 10, 9),
    ];
    let mut all = true;
    let mut notes = Vec::new();
    for (label, op, kappa, s, sp) in cases {
        let query = ConcavityQuery::minimal(s, sp)?;
        let trap = build_trap(&op, query, 1.0 / kappa, 1.0)?;
        let trace = iterate(&trap.objective, &op, &trap.x0, StepRule::Fixed, 100, None)?;
        let stuck = trace.steps.iter().filter(|st| st.x == trap.x0).count();
        let (f0, fy) = (trap.f_x0()?, trap.f_y()?);
        let ok = f0 == 0.0 && fy < -1e-10 && stuck == 100;
        all &= ok;
        notes.push(format!("{label}: f(x0)={f0:e} f(y)={fy:.3e} stuck={stuck}"));
    }
    Ok((all, notes.join("; ")))
}

pub fn prox_sweep(_: Scale) -> anyhow::Result<(bool, String)> {
    let mut total = 0;
    let mut exceptions = 0;
    for (d, seed) in [(2usize, 1u64), (5, 2)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vector = gaussian_vector(d, &mut rng);
        let inst = build_prox_trap(v)?;
        let grid = prox_lambda_grid(&inst, 100);
        let recs = sweep_prox_path(&inst, &grid)?;
        total += recs.len();
        exceptions += recs.iter().filter(|r| !r.satisfied).count();
    }
    Ok((
        exceptions == 0,
        format!("{total} lambdas, {exceptions} exceptions"),
    ))
}

pub fn matrix_transfer(scale: Scale) -> anyhow::Result<(bool, String)> {
    let budget = SearchBudget::with_restarts(scale.pick(50, 1000));
    let query = MatrixConcavityQuery::new(6, 6, 2, 1)?;
    let mut ok = true;
    let mut notes = Vec::new();
    for (label, op) in [
        ("hard", Operator::hard(2)),
        ("rt:0", Operator::reciprocal(2, 0.0)?),
    ] {
        let vector = closed_form(&op, 0.5)?.expect("closed form exists");
        let lifted = LiftedOperator::new(op.clone(), 6, 6)?;
        let rep = empirical_matrix_concavity(&lifted, query, budget, 11)?;
        let e = rep.empirical_max;
        ok &= e >= vector - 1e-9 && e <= vector + 1e-4;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let z: Vector = gaussian_vector(6, &mut rng);
            let mut y = Vector::zeros(6);
            y[rng.random_range(0..6)] = rng.random_range(-2.0..2.0);
            let Ok(v) = concavity_ratio(&y, &z, &op) else {
                continue;
            };
            let m = matrix_concavity_ratio(&diag_embed(&y, 6, 6), &diag_embed(&z, 6, 6), &lifted)?;
            worst = worst.max((v - m).abs());
        }
        ok &= worst <= 1e-12;
        notes.push(format!(
            "{label}: matrix {e:.9} vs vector {vector:.9}, diagonal gap {worst:.1e}"
        ));
    }
    Ok((ok, notes.join("; ")))
}

/// Best rank-`s'` value found by rank-`s'` hard thresholding from zero and
/// from the truncated unconstrained minimizer.
fn low_rank_comparator(
    obj: &Quadratic,
    n: usize,
    m: usize,
    rank: usize,
) -> anyhow::Result<(Vector, f64)> {
    let lifted = LiftedOperator::new(Operator::hard(rank), n, m)?;
    let start = lift_apply(&Operator::hard(rank), &unvectorize(&obj.minimizer()?, n, m))?;
    let mut best: Option<(Vector, f64)> = None;
    for x0 in [DMatrix::zeros(n, m), start] {
        let trace = iterate_threshold_matrix(obj, &lifted, &x0, StepRule::Fixed, 500)?;
        let f = obj.value(&trace.best_x)?;
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((trace.best_x.clone(), f));
        }
    }
    Ok(best.expect("two starts"))
}

/// Violated steps over `instances` random 8x8 problems with rank-3
/// reciprocal thresholding, comparator rank 1, and curvature `[1/kappa, 1]`.
fn matrix_bound_violations(
    instances: usize,
    kappa: f64,
    enforce: bool,
) -> anyhow::Result<(usize, f64)> {
    let (n, m, s) = (8, 8, 3);
    let op = Operator::reciprocal(s, 0.0)?;
    let gamma = closed_form(&op, 1.0 / s as f64)?.expect("closed form exists");
    let lifted = LiftedOperator::new(op, n, m)?;
    let counts = (0..instances as u64)
        .into_par_iter()
        .map(|k| -> anyhow::Result<usize> {
            let mut rng = ChaCha8Rng::seed_from_u64(77 + k);
            let obj = Quadratic::random(n * m, 1.0 / kappa, 1.0, &mut rng)?;
            let (y, f_y) = low_rank_comparator(&obj, n, m, 1)?;
            let trace = iterate_threshold_matrix(
                &obj,
                &lifted,
                &DMatrix::zeros(n, m),
                StepRule::Fixed,
                100,
            )?;
            let ok = if enforce {
                check_theorem1_bound(&trace, &y, f_y, gamma, kappa, obj.beta())?
            } else {
                compare_convergence_bound(&trace, &y, f_y, gamma, kappa, obj.beta())
            };
            Ok(ok.iter().filter(|b| !**b).count())
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok((counts.iter().sum(), gamma))
}

pub fn matrix_bound(scale: Scale) -> anyhow::Result<(bool, String)> {
    let instances = scale.pick(10, 50);
    let (stated, gamma) = matrix_bound_violations(instances, 2.0, false)?;
    let (valid, _) = matrix_bound_violations(instances, 1.5, true)?;
    let note = if gamma < 0.25 {
        String::new()
    } else {
        format!("gamma = {gamma:.4} >= 1/(2 kappa) = 0.25 at kappa = 2, bound compared without its hypothesis; ")
    };
    Ok((
        stated == 0 && valid == 0,
        format!(
            "{note}violations: {stated} at kappa = 2, {valid} at kappa = 1.5 (hypothesis holds)"
        ),
    ))
}

pub fn regression_coverage(scale: Scale) -> anyhow::Result<(bool, String)> {
    let reps = scale.pick(20, 200);
    let bound = BoundParams::standard(1.0)?;
    let op = Operator::reciprocal(1, 0.0)?;
    let cov = coverage_experiment(
        DesignSpec::iid(200, 1000),
        5,
        1.0,
        &op,
        StepRule::adaptive(),
        200,
        &bound,
        reps,
        2024,
    )?;
    let allowed = 0.05 + binomial_slack(0.05, reps);
    let mean = cov.records.iter().map(|r| r.1).sum::<f64>() / reps as f64;
    Ok((
        cov.rate() <= allowed,
        format!(
            "violation rate {:.4} (allowed {allowed:.4}); mean error {mean:.4} vs bound {:.4}",
            cov.rate(),
            cov.records[0].2
        ),
    ))
}

pub fn kappa_slope(scale: Scale) -> anyhow::Result<(bool, String)> {
    let config = ScalingConfig {
        reps: scale.pick(8, 50),
        ..ScalingConfig::default()
    };
    let table = condition_scaling_experiment(&config, &[Operator::reciprocal(1, 0.0)?], 99)?;
    let slope = table.slopes[0].1;
    let means: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("{}:{:.4}", r.kappa, r.mean_error))
        .collect();
    Ok((
        slope <= 1.3,
        format!("slope {slope:.3}; mean errors {}", means.join(" ")),
    ))
}

pub fn noise_projection(scale: Scale) -> anyhow::Result<(bool, String)> {
    let rate = validate_lemma10(10, 2, 50, 0.05, scale.pick(200, 2000), 5)?;
    Ok((rate <= 0.05, format!("violation rate {rate:.4}")))
}

pub fn curve_data(_: Scale) -> anyhow::Result<(bool, String)> {
    let args = CurveArgs {
        rho_grid: Grid(rho_grid(0.01, 0.99, 0.01)),
    };
    let rows = cmd_concavity_curve(&args, &mut std::io::sink())?;
    let bad = curve_violations(&rows);
    Ok((
        bad.is_empty(),
        format!("{} rows, violations: {bad:?}", rows.len()),
    ))
}
