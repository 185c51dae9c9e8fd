use std::path::PathBuf;
use std::process::Command;

use relconc_cli::commands::{
    cmd_concavity_curve, cmd_converge, cmd_prox_trap, cmd_regress, cmd_trap, ConvergeArgs,
    CurveArgs, ProxTrapArgs, RegressArgs, TrapArgs, TrapOutcome,
};
use relconc_cli::parse::{DesignArg, Grid, OperatorSpec, StepKind};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relconc"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("relconc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn curve_row_at_a_quarter() {
    let rows = cmd_concavity_curve(
        &CurveArgs {
            rho_grid: Grid(vec![0.25]),
        },
        &mut Vec::new(),
    )
    .unwrap();
    let r = &rows[0];
    assert!((r.gamma_hard - 0.25).abs() < 1e-15);
    assert!((r.gamma_rt_universal - (2f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
    assert!((r.gamma_optimal - 0.2).abs() < 1e-15);
    assert!((r.kappa_max_hard - 2.0).abs() < 1e-12);
}

fn converge_args(steps: usize) -> ConvergeArgs {
    ConvergeArgs {
        d: 12,
        kappa: 2.0,
        s: 6,
        s_prime: 1,
        operator: OperatorSpec::Reciprocal(0.0),
        step: StepKind::Fixed,
        steps,
        seed: 0,
    }
}

#[test]
fn zero_steps_give_a_header_only_table() {
    let mut out = Vec::new();
    let rows = cmd_converge(&converge_args(0), &mut out, &mut Vec::new()).unwrap();
    assert!(rows.is_empty());
    let text = String::from_utf8(out).unwrap();
    assert_eq!(
        data_lines(&text),
        vec!["t,eta,f,running_min_f,theorem1_rhs"]
    );
}

#[test]
fn converge_rows_respect_the_bound() {
    let rows = cmd_converge(&converge_args(100), &mut Vec::new(), &mut Vec::new()).unwrap();
    assert_eq!(rows.len(), 100);
    assert!(rows
        .iter()
        .all(|r| r.running_min_f <= r.bound.unwrap() + 1e-10));
}

#[test]
fn trap_examples() {
    let found = TrapArgs {
        operator: OperatorSpec::Hard,
        kappa: 1.5,
        rho: 1.0,
        s: 4,
        steps: 100,
    };
    match cmd_trap(&found, &mut Vec::new(), &mut Vec::new()).unwrap() {
        TrapOutcome::Found {
            f_x0,
            f_y,
            stagnant,
            ..
        } => {
            assert_eq!(stagnant, 100);
            assert!(f_y < f_x0);
        }
        other => panic!("expected a trap, got {other:?}"),
    }
    let refused = TrapArgs {
        operator: OperatorSpec::Reciprocal(0.25),
        kappa: 1.2,
        rho: 0.25,
        s: 4,
        steps: 100,
    };
    let mut log = Vec::new();
    match cmd_trap(&refused, &mut Vec::new(), &mut log).unwrap() {
        TrapOutcome::NoTrap { gamma, limit } => {
            assert!((gamma - 0.2).abs() < 1e-12);
            assert!((limit - 0.5 / 1.2).abs() < 1e-15);
        }
        other => panic!("expected no trap, got {other:?}"),
    }
    assert!(String::from_utf8(log)
        .unwrap()
        .starts_with("no trap: gamma = 0.200000"));
}

#[test]
fn prox_trap_has_no_exceptions() {
    let args = ProxTrapArgs {
        d: 2,
        interior: 100,
        seed: 0,
    };
    let (count, exceptions) = cmd_prox_trap(&args, &mut Vec::new(), &mut Vec::new()).unwrap();
    assert!(count > 100);
    assert_eq!(exceptions, 0);
}

fn regress_args() -> RegressArgs {
    RegressArgs {
        n: 100,
        d: 20,
        s0: 2,
        sigma: 0.0,
        design: DesignArg::Correlated,
        kappa: 1.0,
        block: 10,
        c: 3.0,
        delta: 0.05,
        operators: vec![OperatorSpec::Hard, OperatorSpec::Reciprocal(0.0)],
        step: StepKind::Fixed,
        steps: 50,
        reps: 3,
        lasso: true,
        omit_timing: true,
        seed: 1,
    }
}

#[test]
fn noiseless_orthogonal_design_is_recovered() {
    let rows = cmd_regress(&regress_args(), &mut Vec::new(), &mut Vec::new()).unwrap();
    assert_eq!(rows.len(), 9);
    for r in &rows {
        if r.operator == "lasso" {
            assert!(r.prediction_error > 0.0);
        } else {
            assert!(r.prediction_error < 1e-20, "{r:?}");
        }
        assert_eq!(r.wall_time, 0.0);
    }
    assert!(rows
        .windows(2)
        .all(|w| (w[0].seed, &w[0].operator) <= (w[1].seed, &w[1].operator)));
}

#[test]
fn binary_output_is_reproducible() {
    let run = |name: &str| {
        let path = scratch(name);
        let status = bin()
            .args([
                "regress",
                "--n",
                "60",
                "--d",
                "30",
                "--s0",
                "2",
                "--reps",
                "4",
                "--operator",
                "rt,lq:0.5,hard",
            ])
            .args(["--lasso", "--omit-timing", "--seed", "7", "--out"])
            .arg(&path)
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(data_lines(&text).len(), 1 + 4 * 4);
}

#[test]
fn config_file_values_yield_to_flags() {
    let cfg = scratch("trap.cfg");
    std::fs::write(&cfg, "operator = rt:0.25\nkappa = 1.2\nrho = 0.25\n").unwrap();
    let refused = bin().args(["trap", "--config"]).arg(&cfg).output().unwrap();
    assert!(refused.status.success());
    assert!(String::from_utf8_lossy(&refused.stderr).contains("no trap"));
    let found = bin()
        .args(["trap", "--config"])
        .arg(&cfg)
        .args(["--operator", "hard", "--rho", "1"])
        .output()
        .unwrap();
    assert!(found.status.success());
    assert!(String::from_utf8_lossy(&found.stderr).contains("trap found"));
}

#[test]
fn invalid_arguments_fail_with_one_line() {
    for args in [
        vec!["trap", "--operator", "bogus"],
        vec!["concavity-curve", "--rho-grid", "0.5:0.1:0.1"],
        vec!["converge", "--kappa", "0.5"],
        vec!["regress", "--c", "0.5"],
        vec!["no-such-command"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?} succeeded");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.starts_with("error: "), "{args:?}: {err}");
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
    }
}
