//! Subcommand implementations. Each writes a CSV table to `out` and a short
//! human-readable summary to `log`, and returns the computed data.

use std::io::Write;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::Args;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use relconc::adversarial::{build_prox_trap, build_trap, prox_lambda_grid, sweep_prox_path};
use relconc::concavity::{
    closed_form, gamma_hard, gamma_lq, gamma_optimal, gamma_reciprocal, kappa_max,
};
use relconc::lowrank::{
    empirical_matrix_concavity, iterate_threshold_matrix, lowrank_lower_bound_witness,
    matrix_distance_objective, unvectorize, LiftedOperator, MatrixConcavityQuery,
};
use relconc::objective::gaussian_vector;
use relconc::regression::{
    binomial_slack, default_lasso_lambda, fit_iterative, fit_lasso_baseline, generate_instance,
    replicate_seed, BoundParams, DesignSpec,
};
use relconc::solver::{best_sparse_value, iterate, theorem1_rhs};
use relconc::{ConcavityQuery, Error, Quadratic, SearchBudget, SmoothObjective, Vector};

use crate::csv::{num, CsvWriter};
use crate::parse::{DesignArg, Grid, OperatorSpec, StepKind};

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    /// Sparsity ratios, `a:b:step`, inside (0, 1).
    #[arg(long = "rho-grid", default_value = "0.01:0.99:0.01")]
    pub rho_grid: Grid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub rho: f64,
    pub gamma_optimal: f64,
    pub gamma_rt_universal: f64,
    pub gamma_lq23: f64,
    pub gamma_hard: f64,
    pub kappa_max_optimal: f64,
    pub kappa_max_rt: f64,
    pub kappa_max_hard: f64,
}

/// Relative concavity of the optimal, universal reciprocal (`c = 0`), l_{2/3}
/// and hard operators, with the largest condition numbers they tolerate.
pub fn cmd_concavity_curve(args: &CurveArgs, out: &mut dyn Write) -> anyhow::Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for &rho in &args.rho_grid.0 {
        if !(rho > 0.0 && rho < 1.0) {
            bail!("rho = {rho} is outside (0, 1)");
        }
        let g_opt = gamma_optimal(rho)?;
        let g_rt = gamma_reciprocal(rho, 0.0)?;
        let g_hard = gamma_hard(rho)?;
        rows.push(CurveRow {
            rho,
            gamma_optimal: g_opt,
            gamma_rt_universal: g_rt,
            gamma_lq23: gamma_lq(rho, 2.0 / 3.0)?,
            gamma_hard: g_hard,
            kappa_max_optimal: kappa_max(g_opt)?,
            kappa_max_rt: kappa_max(g_rt)?,
            kappa_max_hard: kappa_max(g_hard)?,
        });
    }
    let mut w = CsvWriter::new(out, "concavity-curve", args)?;
    w.row(&[
        "rho",
        "gamma_optimal",
        "gamma_rt_universal",
        "gamma_lq23",
        "gamma_hard",
        "kappa_max_optimal",
        "kappa_max_rt",
        "kappa_max_hard",
    ])?;
    for r in &rows {
        w.row(&[
            num(r.rho),
            num(r.gamma_optimal),
            num(r.gamma_rt_universal),
            num(r.gamma_lq23),
            num(r.gamma_hard),
            num(r.kappa_max_optimal),
            num(r.kappa_max_rt),
            num(r.kappa_max_hard),
        ])?;
    }
    Ok(rows)
}

/// Row-wise checks on the curve: optimal <= reciprocal <= rho / min(1, 4(1 - rho)),
/// optimal <= hard, reciprocal < hard for rho <= 1/4, and the l_{2/3} column equal
/// to the reciprocal column. Returns a description of every failure.
pub fn curve_violations(rows: &[CurveRow]) -> Vec<String> {
    let mut bad = Vec::new();
    for r in rows {
        let upper = r.rho / (4.0 * (1.0 - r.rho)).min(1.0);
        if !(r.gamma_optimal <= r.gamma_rt_universal && r.gamma_rt_universal <= upper) {
            bad.push(format!(
                "rho={}: optimal <= reciprocal <= {upper} fails",
                r.rho
            ));
        }
        if r.gamma_optimal > r.gamma_hard {
            bad.push(format!("rho={}: optimal exceeds hard", r.rho));
        }
        if r.rho <= 0.25 + 1e-12 && r.gamma_rt_universal >= r.gamma_hard {
            bad.push(format!("rho={}: reciprocal does not beat hard", r.rho));
        }
        if (r.gamma_lq23 - r.gamma_rt_universal).abs() > 1e-12 {
            bad.push(format!("rho={}: l_2/3 and reciprocal differ", r.rho));
        }
    }
    bad
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[arg(long, default_value_t = 12)]
    pub d: usize,
    #[arg(long, default_value_t = 2.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 6)]
    pub s: usize,
    #[arg(long = "s-prime", default_value_t = 1)]
    pub s_prime: usize,
    #[arg(long, default_value = "rt")]
    pub operator: OperatorSpec,
    #[arg(long, value_enum, default_value_t = StepKind::Fixed)]
    pub step: StepKind,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeRow {
    pub t: usize,
    pub eta: f64,
    pub f: f64,
    pub running_min_f: f64,
    pub bound: Option<f64>,
}

/// Iterative thresholding on a random quadratic with spectrum in
/// `[1/kappa, 1]` from `x0 = 0`, compared against the best `s'`-sparse value.
pub fn cmd_converge(
    args: &ConvergeArgs,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> anyhow::Result<Vec<ConvergeRow>> {
    let op = args.operator.build(args.s)?;
    let query = ConcavityQuery::new(args.s, args.s_prime, args.d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let obj = Quadratic::random(args.d, 1.0 / args.kappa, 1.0, &mut rng)?;
    let (y, f_y) = best_sparse_value(&obj, args.s_prime)?;
    let x0 = Vector::zeros(args.d);
    let trace = iterate(&obj, &op, &x0, args.step.rule(), args.steps, None)?;
    let gamma = closed_form(&op, query.rho())?;
    let applies = gamma.filter(|g| *g < 0.5 / args.kappa);
    let dist2 = (&x0 - &y).norm_squared();
    let rows: Vec<ConvergeRow> = trace
        .steps
        .iter()
        .enumerate()
        .map(|(k, s)| ConvergeRow {
            t: k + 1,
            eta: s.eta,
            f: s.f,
            running_min_f: s.best_f,
            bound: applies.map(|g| theorem1_rhs(f_y, g, args.kappa, obj.beta(), dist2, k + 1)),
        })
        .collect();

    let mut w = CsvWriter::new(out, "converge", args)?;
    let mut header = vec!["t", "eta", "f", "running_min_f"];
    if applies.is_some() {
        header.push("theorem1_rhs");
    }
    w.row(&header)?;
    for r in &rows {
        let mut cells = vec![r.t.to_string(), num(r.eta), num(r.f), num(r.running_min_f)];
        if let Some(b) = r.bound {
            cells.push(num(b));
        }
        w.row(&cells)?;
    }
    let violations = rows
        .iter()
        .filter(|r| r.bound.is_some_and(|b| r.running_min_f > b + 1e-10))
        .count();
    match gamma {
        Some(g) if applies.is_some() => writeln!(
            log,
            "gamma = {g:.6} < 1/(2 kappa) = {:.6}; best {}-sparse f(y) = {f_y:.6e}; bound violations: {violations}",
            0.5 / args.kappa,
            args.s_prime
        )?,
        Some(g) => writeln!(log, "gamma = {g:.6} >= 1/(2 kappa) = {:.6}: no convergence bound", 0.5 / args.kappa)?,
        None => writeln!(log, "no closed-form concavity for {}: no convergence bound", args.operator)?,
    }
    Ok(rows)
}

#[derive(Debug, Clone, Args)]
pub struct TrapArgs {
    #[arg(long, default_value = "hard")]
    pub operator: OperatorSpec,
    #[arg(long, default_value_t = 1.5)]
    pub kappa: f64,
    /// Sparsity ratio `s'/s`; `s' = round(rho * s)`.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 4)]
    pub s: usize,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrapOutcome {
    Found {
        f_x0: f64,
        f_y: f64,
        ratio: f64,
        /// Iterations that returned exactly to `x0`.
        stagnant: usize,
        steps: usize,
    },
    NoTrap {
        gamma: f64,
        limit: f64,
    },
}

/// Builds the stationary trap (curvature bounds `[1/kappa, 1]`) and runs
/// iterative thresholding with step 1 from the trapped point.
pub fn cmd_trap(
    args: &TrapArgs,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> anyhow::Result<TrapOutcome> {
    let s_prime = (args.rho * args.s as f64).round() as usize;
    if s_prime == 0 {
        bail!("rho * s rounds to zero; increase --s or --rho");
    }
    let op = args.operator.build(args.s)?;
    let query = ConcavityQuery::minimal(args.s, s_prime)?;
    let alpha = 1.0 / args.kappa;
    let limit = 0.5 / args.kappa;
    let mut w = CsvWriter::new(out, "trap", args)?;
    let no_trap = |gamma: f64, log: &mut dyn Write| -> anyhow::Result<TrapOutcome> {
        writeln!(
            log,
            "no trap: gamma = {gamma:.6} <= 1/(2 kappa) = {limit:.6}"
        )?;
        Ok(TrapOutcome::NoTrap { gamma, limit })
    };
    if let Some(g) = closed_form(&op, query.rho())? {
        if g <= limit {
            w.comment("no trap")?;
            return no_trap(g, log);
        }
    }
    let trap = match build_trap(&op, query, alpha, 1.0) {
        Ok(t) => t,
        Err(Error::ConcavityTooSmall { found, .. }) => {
            w.comment("no trap")?;
            return no_trap(found, log);
        }
        Err(e) => return Err(e.into()),
    };
    let trace = iterate(
        &trap.objective,
        &op,
        &trap.x0,
        relconc::StepRule::Fixed,
        args.steps,
        None,
    )?;
    w.row(&["t", "f", "dist_to_x0"])?;
    let mut stagnant = 0;
    for (k, s) in trace.steps.iter().enumerate() {
        if s.x == trap.x0 {
            stagnant += 1;
        }
        w.row(&[(k + 1).to_string(), num(s.f), num((&s.x - &trap.x0).norm())])?;
    }
    let (f_x0, f_y) = (trap.f_x0()?, trap.f_y()?);
    writeln!(
        log,
        "trap found: ratio = {:.6} > 1/(2 kappa) = {limit:.6}; f(x0) = {f_x0:e}, f(y) = {f_y:e}; {stagnant}/{} iterations stayed at x0",
        trap.ratio, args.steps
    )?;
    Ok(TrapOutcome::Found {
        f_x0,
        f_y,
        ratio: trap.ratio,
        stagnant,
        steps: args.steps,
    })
}

#[derive(Debug, Clone, Args)]
pub struct ProxTrapArgs {
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Interior grid points in addition to the breakpoints.
    #[arg(long, default_value_t = 100)]
    pub interior: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Sweeps the l1 regularization path of the prox trap for a Gaussian `v`
/// and counts values of lambda where the solution is sparse yet no worse
/// than the 1-sparse comparator. Returns `(grid size, exceptions)`.
pub fn cmd_prox_trap(
    args: &ProxTrapArgs,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> anyhow::Result<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let v: Vector = gaussian_vector(args.d, &mut rng);
    let inst = build_prox_trap(v)?;
    let grid = prox_lambda_grid(&inst, args.interior);
    let records = sweep_prox_path(&inst, &grid)?;
    let mut w = CsvWriter::new(out, "prox-trap", args)?;
    w.row(&["lambda", "nnz", "dense", "f", "f_y", "satisfied"])?;
    for r in &records {
        w.row(&[
            num(r.lambda),
            r.nnz.to_string(),
            r.dense.to_string(),
            num(r.f),
            num(r.f_y),
            r.satisfied.to_string(),
        ])?;
    }
    let exceptions = records.iter().filter(|r| !r.satisfied).count();
    writeln!(
        log,
        "prox trap d = {}, c = {:.6}: {} lambdas, {exceptions} exceptions",
        args.d,
        inst.c,
        records.len()
    )?;
    Ok((records.len(), exceptions))
}

#[derive(Debug, Clone, Args)]
pub struct RegressArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub d: usize,
    #[arg(long, default_value_t = 5)]
    pub s0: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = DesignArg::Iid)]
    pub design: DesignArg,
    /// Condition number used for the design and for `s = ceil(c kappa s0)`.
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Block size of the adversarial design.
    #[arg(long, default_value_t = 10)]
    pub block: usize,
    #[arg(long, default_value_t = 3.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Comma-separated operator list.
    #[arg(long = "operator", value_delimiter = ',', default_value = "rt")]
    pub operators: Vec<OperatorSpec>,
    #[arg(long, value_enum, default_value_t = StepKind::Adaptive)]
    pub step: StepKind,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Add Lasso rows with lambda = 2 sigma sqrt(log d / n).
    #[arg(long)]
    pub lasso: bool,
    /// Write 0 in the wall-time column so reruns are byte-identical.
    #[arg(long)]
    pub omit_timing: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressRow {
    pub seed: u64,
    pub operator: String,
    pub prediction_error: f64,
    pub bound_rhs: f64,
    pub nnz: usize,
    pub iterations: usize,
    pub wall_time: f64,
}

impl RegressArgs {
    fn design(&self) -> DesignSpec {
        match self.design {
            DesignArg::Iid => DesignSpec::iid(self.n, self.d),
            DesignArg::Correlated => DesignSpec::correlated(self.n, self.d, self.kappa),
            DesignArg::Block => {
                DesignSpec::adversarial_block(self.n, self.d, self.kappa, self.block)
            }
        }
    }
}

/// Fits every operator (and optionally the Lasso) on `reps` instances and
/// reports prediction errors against the bound. Rows are sorted by
/// `(seed, operator)`.
pub fn cmd_regress(
    args: &RegressArgs,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> anyhow::Result<Vec<RegressRow>> {
    let bound = BoundParams::new(args.kappa, args.c, args.delta)?;
    let s = bound.sparsity(args.s0).min(args.d);
    let ops = args
        .operators
        .iter()
        .map(|o| Ok((o.to_string(), o.build(s)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let spec = args.design();
    let per_rep = (0..args.reps as u64)
        .into_par_iter()
        .map(|r| -> anyhow::Result<Vec<RegressRow>> {
            let seed = replicate_seed(args.seed, 0, r);
            let inst = generate_instance(spec, args.s0, args.sigma, seed)?;
            let mut rows = Vec::new();
            for (label, op) in &ops {
                let start = Instant::now();
                let fit = fit_iterative(&inst, op, s, args.step.rule(), args.steps, &bound)?;
                rows.push(row(seed, label, &fit.report, start, args.omit_timing));
            }
            if args.lasso {
                let start = Instant::now();
                let lambda = default_lasso_lambda(args.sigma, args.d, args.n);
                let fit = fit_lasso_baseline(&inst, lambda, args.steps, &bound)?;
                rows.push(row(seed, "lasso", &fit.report, start, args.omit_timing));
            }
            Ok(rows)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut rows: Vec<RegressRow> = per_rep.into_iter().flatten().collect();
    rows.sort_by(|a, b| (a.seed, &a.operator).cmp(&(b.seed, &b.operator)));

    let mut w = CsvWriter::new(out, "regress", args)?;
    w.row(&[
        "seed",
        "operator",
        "prediction_error",
        "bound_rhs",
        "violated",
        "nnz",
        "iterations",
        "wall_time_s",
    ])?;
    for r in &rows {
        w.row(&[
            r.seed.to_string(),
            r.operator.clone(),
            num(r.prediction_error),
            num(r.bound_rhs),
            (r.prediction_error > r.bound_rhs).to_string(),
            r.nnz.to_string(),
            r.iterations.to_string(),
            num(r.wall_time),
        ])?;
    }
    let threshold = args.delta + binomial_slack(args.delta, args.reps.max(1));
    let mut labels: Vec<&str> = ops.iter().map(|(l, _)| l.as_str()).collect();
    if args.lasso {
        labels.push("lasso");
    }
    for label in labels {
        let mine: Vec<&RegressRow> = rows.iter().filter(|r| r.operator == label).collect();
        let violations = mine
            .iter()
            .filter(|r| r.prediction_error > r.bound_rhs)
            .count();
        let mean = mine.iter().map(|r| r.prediction_error).sum::<f64>() / mine.len().max(1) as f64;
        let rate = violations as f64 / mine.len().max(1) as f64;
        writeln!(
            log,
            "{label}: s = {s}, mean error {mean:.6e}, violations {violations}/{} (rate {rate:.4}, allowed {threshold:.4})",
            mine.len()
        )?;
    }
    Ok(rows)
}

fn row(
    seed: u64,
    label: &str,
    report: &relconc::regression::ErrorReport<f64>,
    start: Instant,
    omit: bool,
) -> RegressRow {
    RegressRow {
        seed,
        operator: label.to_string(),
        prediction_error: report.prediction_error,
        bound_rhs: report.bound_rhs,
        nnz: report.nnz,
        iterations: report.iterations,
        wall_time: if omit {
            0.0
        } else {
            start.elapsed().as_secs_f64()
        },
    }
}

#[derive(Debug, Clone, Args)]
pub struct LowrankArgs {
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long, default_value_t = 6)]
    pub m: usize,
    #[arg(long, default_value_t = 2)]
    pub s: usize,
    #[arg(long = "s-prime", default_value_t = 1)]
    pub s_prime: usize,
    #[arg(long = "operator", value_delimiter = ',', default_value = "hard,rt")]
    pub operators: Vec<OperatorSpec>,
    #[arg(long, default_value_t = 200)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowrankRow {
    pub operator: String,
    pub closed_form: Option<f64>,
    pub empirical_matrix: f64,
    pub lower_bound_ratio: f64,
    /// Frobenius error of rank-`s` thresholding on a noisy rank-`s'` target.
    pub recovery_error: f64,
}

/// Matrix relative concavity of lifted operators next to the vector closed
/// forms, and a small low-rank denoising run.
pub fn cmd_lowrank_demo(
    args: &LowrankArgs,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> anyhow::Result<Vec<LowrankRow>> {
    let query = MatrixConcavityQuery::new(args.n, args.m, args.s, args.s_prime)?;
    let budget = SearchBudget::with_restarts(args.restarts);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let a: DMatrix<f64> = unvectorize(
        &gaussian_vector(args.n * args.s_prime, &mut rng),
        args.n,
        args.s_prime,
    );
    let b: DMatrix<f64> = unvectorize(
        &gaussian_vector(args.m * args.s_prime, &mut rng),
        args.m,
        args.s_prime,
    );
    let target = &a * b.transpose();
    let noise = unvectorize(&gaussian_vector(args.n * args.m, &mut rng), args.n, args.m) * 0.01;
    let obj = matrix_distance_objective(&(&target + noise), &DMatrix::zeros(args.n, args.m))?;

    let mut rows = Vec::new();
    for spec in &args.operators {
        let lifted = LiftedOperator::new(spec.build(args.s)?, args.n, args.m)?;
        let rep = empirical_matrix_concavity(&lifted, query, budget, args.seed)?;
        let (_, _, lb) = lowrank_lower_bound_witness(&lifted, query)?;
        let trace = iterate_threshold_matrix(
            &obj,
            &lifted,
            &DMatrix::zeros(args.n, args.m),
            relconc::StepRule::Fixed,
            50,
        )?;
        let est = unvectorize(&trace.best_x, args.n, args.m);
        rows.push(LowrankRow {
            operator: spec.to_string(),
            closed_form: rep.closed_form,
            empirical_matrix: rep.empirical_max,
            lower_bound_ratio: lb,
            recovery_error: (est - &target).norm(),
        });
    }
    let mut w = CsvWriter::new(out, "lowrank-demo", args)?;
    w.row(&[
        "operator",
        "rho",
        "closed_form",
        "empirical_matrix",
        "lower_bound_ratio",
        "recovery_error",
    ])?;
    let rho = query.rho::<f64>();
    for r in &rows {
        w.row(&[
            r.operator.clone(),
            num(rho),
            r.closed_form.map_or_else(|| "NA".into(), num),
            num(r.empirical_matrix),
            num(r.lower_bound_ratio),
            num(r.recovery_error),
        ])?;
        writeln!(
            log,
            "{}: vector closed form {}, matrix empirical {:.6}, universal witness {:.6}, recovery error {:.3e}",
            r.operator,
            r.closed_form.map_or_else(|| "n/a".into(), |v| format!("{v:.6}")),
            r.empirical_matrix,
            r.lower_bound_ratio,
            r.recovery_error
        )?;
    }
    Ok(rows)
}

/// Opens `path` for writing, or stdout when absent.
pub fn output(path: Option<&std::path::Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}
