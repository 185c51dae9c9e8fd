//! Worst-case instances: stationary traps for thresholding operators whose
//! relative concavity exceeds `1 / (2 kappa)`, and the failure of l1
//! proximal gradient.

use nalgebra::{DMatrix, DVector};

use crate::concavity::{
    empirical_concavity, ratio_with_image, structured_witness, ConcavityQuery, SearchBudget,
};
use crate::error::{Error, Result};
use crate::objective::{QuadraticObjective, SmoothObjective};
use crate::operators::{prox_l1, ThresholdingOperator};
use crate::scalar::Scalar;

/// Margin by which the witness ratio must exceed `1 / (2 kappa)`.
pub const TRAP_MARGIN: f64 = 1e-6;

/// Quadratic `f(w) = -beta <z - x, w - x> + 1/2 (w - x)^T U D U^T (w - x)`
/// with `x = Psi(z)`, `D = diag(alpha, beta, ..., beta)` and `U` orthogonal
/// with first column along `y - x`. The point `x` is a fixed point of
/// iterative thresholding with step `1 / beta`, yet `f(y) < f(x) = 0`.
#[derive(Debug, Clone)]
pub struct TrapInstance<T: Scalar> {
    pub objective: QuadraticObjective<T>,
    pub x0: DVector<T>,
    pub y: DVector<T>,
    pub z: DVector<T>,
    pub u: DMatrix<T>,
    /// Concavity ratio of the witness `(y, z)`.
    pub ratio: T,
    pub alpha: T,
    pub beta: T,
}

impl<T: Scalar> TrapInstance<T> {
    pub fn kappa(&self) -> T {
        self.beta / self.alpha
    }

    pub fn f_x0(&self) -> Result<T> {
        self.objective.value(&self.x0)
    }

    pub fn f_y(&self) -> Result<T> {
        self.objective.value(&self.y)
    }

    /// `-beta ||y - x||^2 (ratio - 1 / (2 kappa))`, the exact value of `f(y)`.
    pub fn predicted_f_y(&self) -> T {
        let half = T::lit(0.5);
        -self.beta * (&self.y - &self.x0).norm_squared() * (self.ratio - half / self.kappa())
    }
}

/// Orthogonal matrix whose first column is `first / ||first||`, completed by
/// Gram-Schmidt against the standard basis.
pub fn orthogonal_completion<T: Scalar>(first: &DVector<T>) -> Result<DMatrix<T>> {
    let d = first.len();
    let norm = first.norm();
    if norm == T::zero() {
        return Err(Error::DegenerateWitness);
    }
    let mut cols: Vec<DVector<T>> = vec![first / norm];
    let threshold = T::lit(1e-6);
    for j in 0..d {
        if cols.len() == d {
            break;
        }
        let mut v = DVector::zeros(d);
        v[j] = T::one();
        for _ in 0..2 {
            for c in &cols {
                let p = c.dot(&v);
                v -= c * p;
            }
        }
        let n = v.norm();
        if n > threshold {
            cols.push(v / n);
        }
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Builds the trap from an explicit witness with `x = Psi(z)`.
pub fn trap_from_witness<T: Scalar>(
    y: DVector<T>,
    z: DVector<T>,
    x: DVector<T>,
    alpha: T,
    beta: T,
) -> Result<TrapInstance<T>> {
    if !(alpha > T::zero() && alpha <= beta) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha.as_f64(),
            reason: "need 0 < alpha <= beta",
        });
    }
    let ratio = ratio_with_image(&y, &z, &x)?;
    let needed = T::lit(0.5) * alpha / beta;
    if !(ratio > needed + T::lit(TRAP_MARGIN)) {
        return Err(Error::ConcavityTooSmall {
            found: ratio.as_f64(),
            needed: needed.as_f64(),
        });
    }
    let diff = &y - &x;
    let u = orthogonal_completion(&diff)?;
    let u1 = &diff / diff.norm();
    let d = x.len();
    // U diag(alpha, beta, ..., beta) U^T = beta I + (alpha - beta) u1 u1^T.
    let mut h = DMatrix::identity(d, d) * beta + (&u1 * u1.transpose()) * (alpha - beta);
    h = (&h + h.transpose()) * T::lit(0.5);
    let g = (&z - &x) * (-beta);
    let objective = QuadraticObjective::with_bounds(h, x.clone(), g, alpha, beta)?;
    Ok(TrapInstance {
        objective,
        x0: x,
        y,
        z,
        u,
        ratio,
        alpha,
        beta,
    })
}

/// Trap for `op` at sparsity pair `query` and curvature bounds
/// `[alpha, beta]`. Uses the all-ones witness when it suffices, otherwise
/// the empirical concavity search with the default budget.
pub fn build_trap<T: Scalar>(
    op: &ThresholdingOperator<T>,
    query: ConcavityQuery,
    alpha: T,
    beta: T,
) -> Result<TrapInstance<T>> {
    build_trap_with(op, query, alpha, beta, SearchBudget::default(), 0)
}

pub fn build_trap_with<T: Scalar>(
    op: &ThresholdingOperator<T>,
    query: ConcavityQuery,
    alpha: T,
    beta: T,
    budget: SearchBudget,
    seed: u64,
) -> Result<TrapInstance<T>> {
    let needed = T::lit(0.5) * alpha / beta + T::lit(TRAP_MARGIN);
    let w = structured_witness(op, query)?;
    let (y, z) = if w.ratio > needed {
        (w.y, w.z)
    } else {
        let rep = empirical_concavity(op, query, budget, seed)?;
        if !(rep.ratio_at_witness > needed) {
            return Err(Error::ConcavityTooSmall {
                found: rep.ratio_at_witness.max(w.ratio).as_f64(),
                needed: (T::lit(0.5) * alpha / beta).as_f64(),
            });
        }
        (rep.witness_y, rep.witness_z)
    };
    let x = op.apply(&z)?;
    trap_from_witness(y, z, x, alpha, beta)
}

/// Quadratic `f(z) = 1/2 ||z - (v + c w)||^2` with `w` a dense subgradient
/// of the (weighted) l1 norm at `v`, and `c` large enough that the sparse
/// point `y = c w_i e_i` beats every non-dense minimizer of `f + lambda R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxTrapInstance<T: Scalar> {
    pub v: DVector<T>,
    pub w: DVector<T>,
    /// Per-coordinate penalty weights (all ones for plain l1).
    pub weights: DVector<T>,
    pub c: T,
    pub y: DVector<T>,
    /// Index of the largest `|w_i|`.
    pub index: usize,
    pub objective: QuadraticObjective<T>,
}

impl<T: Scalar> ProxTrapInstance<T> {
    /// `v + c w`, the unconstrained minimizer of `f`.
    pub fn target(&self) -> DVector<T> {
        &self.v + &self.w * self.c
    }

    /// Minimizer of `f + lambda sum_i weights_i |z_i|`.
    pub fn prox_solution(&self, lambda: T) -> DVector<T> {
        let t = self.target();
        DVector::from_fn(t.len(), |i, _| {
            let shrunk = (t[i].abs() - lambda * self.weights[i]).max(T::zero());
            if t[i] < T::zero() {
                -shrunk
            } else {
                shrunk
            }
        })
    }

    /// Values of `lambda` at which a coordinate of the solution path
    /// reaches zero.
    pub fn breakpoints(&self) -> Vec<T> {
        let t = self.target();
        let mut b: Vec<T> = (0..t.len()).map(|i| t[i].abs() / self.weights[i]).collect();
        b.sort_by(|a, c| a.partial_cmp(c).unwrap_or(std::cmp::Ordering::Equal));
        b
    }

    /// `c^2 ||w||_inf^2 > 2 c ||w||_2 ||v||_2 + ||v||_2^2`.
    pub fn c_condition_holds(&self) -> bool {
        c_condition(self.c, &self.w, &self.v)
    }
}

fn c_condition<T: Scalar>(c: T, w: &DVector<T>, v: &DVector<T>) -> bool {
    let winf = w.amax();
    c * c * winf * winf > T::lit(2.0) * c * w.norm() * v.norm() + v.norm_squared()
}

/// Prox trap for the l1 norm: `w = sign(v)`.
pub fn build_prox_trap<T: Scalar>(v: DVector<T>) -> Result<ProxTrapInstance<T>> {
    let weights = DVector::from_element(v.len(), T::one());
    build_weighted_prox_trap(v, weights)
}

/// Prox trap for `sum_i weights_i |z_i|` with positive weights:
/// `w_i = weights_i sign(v_i)`.
pub fn build_weighted_prox_trap<T: Scalar>(
    v: DVector<T>,
    weights: DVector<T>,
) -> Result<ProxTrapInstance<T>> {
    let d = v.len();
    if d < 2 {
        return Err(Error::InvalidParameter {
            name: "d",
            value: d as f64,
            reason: "must be at least 2",
        });
    }
    if weights.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: weights.len(),
        });
    }
    if let Some(i) = (0..d).find(|&i| v[i] == T::zero()) {
        return Err(Error::NotDense { index: i });
    }
    if let Some(i) = (0..d).find(|&i| !(weights[i] > T::zero())) {
        return Err(Error::InvalidParameter {
            name: "weights",
            value: weights[i].as_f64(),
            reason: "must be positive",
        });
    }
    let w = DVector::from_fn(d, |i, _| {
        if v[i] < T::zero() {
            -weights[i]
        } else {
            weights[i]
        }
    });
    let (wn, vn, winf) = (w.norm(), v.norm(), w.amax());
    let two = T::lit(2.0);
    let mut c = two * (two * wn * vn + vn * vn).sqrt() / winf;
    if !c_condition(c, &w, &v) {
        // Larger root of c^2 W^2 - 2 c |w| |v| - |v|^2 = 0, with a margin.
        let root = (wn * vn + vn * (wn * wn + winf * winf).sqrt()) / (winf * winf);
        c = root * T::lit(1.05);
    }
    let mut index = 0;
    for i in 1..d {
        if w[i].abs() > w[index].abs() {
            index = i;
        }
    }
    let mut y = DVector::zeros(d);
    y[index] = c * w[index];
    let objective = QuadraticObjective::distance_to(&v + &w * c);
    Ok(ProxTrapInstance {
        v,
        w,
        weights,
        c,
        y,
        index,
        objective,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxSweepRecord<T> {
    pub lambda: T,
    pub nnz: usize,
    pub dense: bool,
    pub f: T,
    pub f_y: T,
    /// `dense || f > f_y`.
    pub satisfied: bool,
}

/// Solves `min f + lambda R` in closed form along `lambdas` and checks the
/// dichotomy "the solution is dense, or it is worse than `y`".
pub fn sweep_prox_path<T: Scalar>(
    instance: &ProxTrapInstance<T>,
    lambdas: &[T],
) -> Result<Vec<ProxSweepRecord<T>>> {
    let d = instance.v.len();
    let f_y = instance.objective.value(&instance.y)?;
    lambdas
        .iter()
        .map(|&lambda| {
            if !(lambda >= T::zero()) {
                return Err(Error::InvalidParameter {
                    name: "lambda",
                    value: lambda.as_f64(),
                    reason: "must be nonnegative",
                });
            }
            let x = instance.prox_solution(lambda);
            let nnz = x.iter().filter(|v| **v != T::zero()).count();
            let f = instance.objective.value(&x)?;
            let dense = nnz == d;
            Ok(ProxSweepRecord {
                lambda,
                nnz,
                dense,
                f,
                f_y,
                satisfied: dense || f > f_y,
            })
        })
        .collect()
}

/// Zero, every breakpoint, a point just past the largest breakpoint, and
/// `interior` evenly spaced points in `(0, 1.25 * largest breakpoint)`.
pub fn prox_lambda_grid<T: Scalar>(instance: &ProxTrapInstance<T>, interior: usize) -> Vec<T> {
    let bps = instance.breakpoints();
    let top = *bps.last().expect("d >= 2");
    let mut grid = vec![T::zero()];
    grid.extend(bps.iter().copied());
    grid.push(top * (T::one() + T::lit(1e-9)));
    let hi = top * T::lit(1.25);
    for k in 1..=interior {
        grid.push(hi * T::lit(k as f64) / T::lit(interior as f64 + 1.0));
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    grid
}

/// Same dichotomy via the l1 soft-threshold map directly (the objective has
/// unit curvature, so its minimizer is `prox_l1(v + c w, lambda)`).
pub fn prox_solution_l1<T: Scalar>(instance: &ProxTrapInstance<T>, lambda: T) -> DVector<T> {
    prox_l1(&instance.target(), lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{iterate_prox, iterate_threshold, StepRule};
    use nalgebra::dvector;

    #[test]
    fn hard_trap_is_stationary() {
        let op = ThresholdingOperator::<f64>::hard(2);
        let q = ConcavityQuery::minimal(2, 2).unwrap();
        let trap = build_trap(&op, q, 1.0 / 1.5, 1.0).unwrap();
        assert_eq!(trap.f_x0().unwrap(), 0.0);
        assert!(trap.f_y().unwrap() < -1e-10);
        let trace =
            iterate_threshold(&trap.objective, &op, &trap.x0, StepRule::Fixed, 100).unwrap();
        assert!(trace.steps.iter().all(|s| s.x == trap.x0));
        let u = &trap.u;
        assert!((u.transpose() * u - DMatrix::identity(4, 4)).amax() < 1e-10);
        assert!((trap.f_y().unwrap() - trap.predicted_f_y()).abs() < 1e-12);
    }

    #[test]
    fn optimal_reciprocal_has_no_trap_below_its_limit() {
        // rho = 1/4 with c = rho: gamma = 0.2, so kappa < 2.5 admits no trap.
        let op = ThresholdingOperator::<f64>::reciprocal(4, 0.25).unwrap();
        let q = ConcavityQuery::minimal(4, 1).unwrap();
        let err = build_trap_with(&op, q, 1.0 / 2.0, 1.0, SearchBudget::with_restarts(20), 0)
            .unwrap_err();
        assert!(matches!(err, Error::ConcavityTooSmall { .. }));
    }

    #[test]
    fn soft_trap_exists_at_unit_condition_number() {
        let op = ThresholdingOperator::<f64>::soft(3);
        let q = ConcavityQuery::minimal(3, 3).unwrap();
        let trap = build_trap(&op, q, 1.0, 1.0).unwrap();
        let trace = iterate_threshold(&trap.objective, &op, &trap.x0, StepRule::Fixed, 10).unwrap();
        assert!(trace.steps.iter().all(|s| s.x == trap.x0));
        assert!(trap.f_y().unwrap() < 0.0);
    }

    #[test]
    fn completion_is_orthogonal() {
        let u = orthogonal_completion(&dvector![1.0, 2.0, -0.5, 0.0]).unwrap();
        assert!((u.transpose() * &u - DMatrix::identity(4, 4)).amax() < 1e-12);
        assert!(orthogonal_completion(&DVector::<f64>::zeros(3)).is_err());
    }

    #[test]
    fn prox_trap_two_dimensional() {
        let inst = build_prox_trap(dvector![1.0, 1.0]).unwrap();
        assert!(inst.c > 2.0 + 6f64.sqrt());
        assert!(inst.c_condition_holds());
        assert_eq!(inst.index, 0);
        assert_eq!(inst.y, dvector![inst.c, 0.0]);
        let f_y = inst.objective.value(&inst.y).unwrap();
        let f_v = inst.objective.value(&inst.v).unwrap();
        assert!((f_v - 0.5 * inst.c * inst.c * 2.0).abs() < 1e-12);
        assert!((f_y - 0.5 * (1.0f64 + inst.c + 0.0).powi(2) - 0.5).abs() < 1e-12);
        assert!(f_y < f_v);

        let rec = sweep_prox_path(&inst, &[0.0]).unwrap();
        assert!(rec[0].dense && rec[0].satisfied);
        let top = *inst.breakpoints().last().unwrap();
        let rec = sweep_prox_path(&inst, &[top * 1.001]).unwrap();
        assert_eq!(rec[0].nnz, 0);
        assert!(rec[0].f > rec[0].f_y);
    }

    #[test]
    fn prox_trap_rejects_sparse_v() {
        assert_eq!(
            build_prox_trap(dvector![1.0, 0.0]).unwrap_err(),
            Error::NotDense { index: 1 }
        );
    }

    #[test]
    fn sweep_satisfies_dichotomy_and_matches_solver() {
        let inst = build_prox_trap(dvector![0.3, -1.2, 0.7, 2.0, -0.1]).unwrap();
        let grid = prox_lambda_grid(&inst, 100);
        let recs = sweep_prox_path(&inst, &grid).unwrap();
        assert!(recs.iter().all(|r| r.satisfied));
        let bps = inst.breakpoints();
        for &lambda in &[0.0, bps[0] * 0.5, bps[1], bps[3] * 1.01, bps[4] * 2.0] {
            let exact = inst.prox_solution(lambda);
            assert_eq!(exact, prox_solution_l1(&inst, lambda));
            let trace = iterate_prox(
                &inst.objective,
                lambda,
                &DVector::zeros(5),
                StepRule::Fixed,
                5,
            )
            .unwrap();
            assert!((trace.last_x() - &exact).amax() < 1e-10);
        }
    }

    #[test]
    fn weighted_trap_satisfies_dichotomy() {
        let inst =
            build_weighted_prox_trap(dvector![1.0, -0.5, 2.0], dvector![1.0, 3.0, 0.5]).unwrap();
        assert_eq!(inst.index, 1);
        assert!(inst.c_condition_holds());
        let grid = prox_lambda_grid(&inst, 50);
        assert!(sweep_prox_path(&inst, &grid)
            .unwrap()
            .iter()
            .all(|r| r.satisfied));
    }
}
