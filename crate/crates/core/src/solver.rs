//! Iterative thresholding and proximal gradient with fixed or backtracking
//! step sizes.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::objective::{QuadraticObjective, SmoothObjective};
use crate::operators::{prox_l1, ThresholdingOperator};
use crate::scalar::Scalar;

/// The map applied after each gradient step. `eta` is the step size used,
/// which only proximal maps depend on.
pub trait Thresholder<T: Scalar>: Sync {
    fn project(&self, z: &DVector<T>, eta: T) -> Result<DVector<T>>;
}

impl<T: Scalar> Thresholder<T> for ThresholdingOperator<T> {
    fn project(&self, z: &DVector<T>, _eta: T) -> Result<DVector<T>> {
        self.apply(z)
    }
}

/// Proximal map of `lambda * ||.||_1`; a step of size `eta` shrinks by
/// `lambda * eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Prox<T> {
    pub lambda: T,
}

impl<T: Scalar> Thresholder<T> for L1Prox<T> {
    fn project(&self, z: &DVector<T>, eta: T) -> Result<DVector<T>> {
        Ok(prox_l1(z, self.lambda * eta))
    }
}

/// Step-size rule. The adaptive rule starts at `init_scale / beta` and
/// multiplies by `shrink` until the curvature condition
/// `f(x') <= f(x) + <grad f(x), x' - x> + ||x' - x||^2 / (2 eta)` holds,
/// never going below `1 / beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule<T> {
    Fixed,
    Adaptive { init_scale: T, shrink: T },
}

impl<T: Scalar> StepRule<T> {
    /// Backtracking from `16 / beta` by halving.
    pub fn adaptive() -> Self {
        Self::Adaptive {
            init_scale: T::lit(16.0),
            shrink: T::lit(0.5),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Self::Adaptive { init_scale, shrink } = *self {
            if !(shrink > T::zero() && shrink < T::one()) {
                return Err(Error::InvalidParameter {
                    name: "shrink",
                    value: shrink.as_f64(),
                    reason: "must lie in (0, 1)",
                });
            }
            if !(init_scale >= T::one()) {
                return Err(Error::InvalidParameter {
                    name: "init_scale",
                    value: init_scale.as_f64(),
                    reason: "must be >= 1",
                });
            }
        }
        Ok(())
    }
}

/// Whether `x_next` satisfies the curvature condition at step `eta`.
pub fn curvature_condition_holds<T: Scalar>(
    f_next: T,
    f_prev: T,
    grad_prev: &DVector<T>,
    x_prev: &DVector<T>,
    x_next: &DVector<T>,
    eta: T,
) -> bool {
    let diff = x_next - x_prev;
    f_next <= f_prev + grad_prev.dot(&diff) + diff.norm_squared() / (T::lit(2.0) * eta)
}

/// One step `x' = P(x - eta grad f(x))`; returns `(x', eta, f(x'))`.
pub fn line_search_step<T, O, P>(
    obj: &O,
    x_prev: &DVector<T>,
    op: &P,
    rule: StepRule<T>,
) -> Result<(DVector<T>, T, T)>
where
    T: Scalar,
    O: SmoothObjective<T> + ?Sized,
    P: Thresholder<T> + ?Sized,
{
    let g = obj.grad(x_prev)?;
    let floor = T::one() / obj.beta();
    match rule {
        StepRule::Fixed => {
            let x = op.project(&(x_prev - &g * floor), floor)?;
            let f = obj.value(&x)?;
            Ok((x, floor, f))
        }
        StepRule::Adaptive { init_scale, shrink } => {
            let f_prev = obj.value(x_prev)?;
            let mut eta = init_scale * floor;
            while eta > floor {
                let x = op.project(&(x_prev - &g * eta), eta)?;
                let f = obj.value(&x)?;
                if curvature_condition_holds(f, f_prev, &g, x_prev, &x, eta) {
                    return Ok((x, eta, f));
                }
                eta *= shrink;
            }
            let x = op.project(&(x_prev - &g * floor), floor)?;
            let f = obj.value(&x)?;
            Ok((x, floor, f))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep<T: Scalar> {
    pub x: DVector<T>,
    pub eta: T,
    pub f: T,
    /// `min_{1 <= u <= t} f(x_u)`.
    pub best_f: T,
}

/// Record of a solver run. Step `t` (1-based) is `steps[t - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateTrace<T: Scalar> {
    pub x0: DVector<T>,
    pub f0: T,
    pub steps: Vec<TraceStep<T>>,
    /// Iterate attaining the running minimum (`x0` if no steps were taken).
    pub best_x: DVector<T>,
}

impl<T: Scalar> IterateTrace<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_x(&self) -> &DVector<T> {
        self.steps.last().map_or(&self.x0, |s| &s.x)
    }

    pub fn best_f(&self) -> T {
        self.steps.last().map_or(self.f0, |s| s.best_f)
    }

    /// First step `t` with `||x_t - x_{t-1}|| <= tol`.
    pub fn fixed_point(&self, tol: T) -> Option<usize> {
        let mut prev = &self.x0;
        for (k, s) in self.steps.iter().enumerate() {
            if (&s.x - prev).norm() <= tol {
                return Some(k + 1);
            }
            prev = &s.x;
        }
        None
    }
}

/// Runs up to `max_steps` steps of `x_t = P(x_{t-1} - eta_t grad f(x_{t-1}))`,
/// stopping early once `||x_t - x_{t-1}|| <= tol` when `tol` is given.
pub fn iterate<T, O, P>(
    obj: &O,
    op: &P,
    x0: &DVector<T>,
    rule: StepRule<T>,
    max_steps: usize,
    tol: Option<T>,
) -> Result<IterateTrace<T>>
where
    T: Scalar,
    O: SmoothObjective<T> + ?Sized,
    P: Thresholder<T> + ?Sized,
{
    rule.validate()?;
    let f0 = obj.value(x0)?;
    let mut steps: Vec<TraceStep<T>> = Vec::with_capacity(max_steps);
    let mut best_x = x0.clone();
    let mut best_f = T::infinity();
    let mut x = x0.clone();
    for _ in 0..max_steps {
        let (x_next, eta, f) = line_search_step(obj, &x, op, rule)?;
        if f < best_f {
            best_f = f;
            best_x.clone_from(&x_next);
        }
        let done = tol.is_some_and(|tol| (&x_next - &x).norm() <= tol);
        x.clone_from(&x_next);
        steps.push(TraceStep {
            x: x_next,
            eta,
            f,
            best_f,
        });
        if done {
            break;
        }
    }
    Ok(IterateTrace {
        x0: x0.clone(),
        f0,
        steps,
        best_x,
    })
}

/// `T` steps of iterative thresholding with operator `op`.
pub fn iterate_threshold<T, O, P>(
    obj: &O,
    op: &P,
    x0: &DVector<T>,
    rule: StepRule<T>,
    steps: usize,
) -> Result<IterateTrace<T>>
where
    T: Scalar,
    O: SmoothObjective<T> + ?Sized,
    P: Thresholder<T> + ?Sized,
{
    iterate(obj, op, x0, rule, steps, None)
}

/// `T` steps of proximal gradient on `f + lambda ||.||_1`.
pub fn iterate_prox<T, O>(
    obj: &O,
    lambda: T,
    x0: &DVector<T>,
    rule: StepRule<T>,
    steps: usize,
) -> Result<IterateTrace<T>>
where
    T: Scalar,
    O: SmoothObjective<T> + ?Sized,
{
    if !(lambda >= T::zero()) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda.as_f64(),
            reason: "must be nonnegative",
        });
    }
    iterate(obj, &L1Prox { lambda }, x0, rule, steps, None)
}

/// Per-step contraction factor `(1 - 1/kappa) / (1 - 2 gamma)`.
pub fn contraction_factor<T: Scalar>(gamma: T, kappa: T) -> T {
    (T::one() - T::one() / kappa) / (T::one() - T::lit(2.0) * gamma)
}

/// `f(y) + factor^t (beta / 2) ||x0 - y||^2`, evaluated without checking
/// that the factor is below one.
pub fn theorem1_rhs<T: Scalar>(f_y: T, gamma: T, kappa: T, beta: T, dist2: T, t: usize) -> T {
    let factor = contraction_factor(gamma, kappa);
    f_y + factor.powi(t as i32) * beta * dist2 / T::lit(2.0)
}

/// For each recorded step `t`, whether
/// `min_{u <= t} f(x_u) <= f(y) + factor^t (beta / 2) ||x0 - y||^2`.
/// Comparisons allow a relative slack of `1e-10` for rounding.
pub fn check_theorem1_bound<T: Scalar>(
    trace: &IterateTrace<T>,
    y: &DVector<T>,
    f_y: T,
    gamma: T,
    kappa: T,
    beta: T,
) -> Result<Vec<bool>> {
    let limit = T::one() / (T::lit(2.0) * kappa);
    if !(gamma < limit) {
        return Err(Error::ContractViolation {
            gamma: gamma.as_f64(),
            limit: limit.as_f64(),
        });
    }
    Ok(compare_convergence_bound(trace, y, f_y, gamma, kappa, beta))
}

/// The per-step comparison of [`check_theorem1_bound`] without requiring
/// `gamma < 1/(2 kappa)`; with a factor above one the right side grows.
pub fn compare_convergence_bound<T: Scalar>(
    trace: &IterateTrace<T>,
    y: &DVector<T>,
    f_y: T,
    gamma: T,
    kappa: T,
    beta: T,
) -> Vec<bool> {
    let dist2 = (&trace.x0 - y).norm_squared();
    let scale = T::one().max(f_y.abs()).max(beta * dist2);
    let slack = T::lit(1e-10) * scale;
    trace
        .steps
        .iter()
        .enumerate()
        .map(|(k, s)| s.best_f <= theorem1_rhs(f_y, gamma, kappa, beta, dist2, k + 1) + slack)
        .collect()
}

pub const MAX_SPARSE_SUPPORTS: u128 = 20_000;

/// Best value of `f` over `s'`-sparse vectors by enumerating supports of
/// size `s'` (at most `MAX_SPARSE_SUPPORTS` of them).
pub fn best_sparse_value<T: Scalar>(
    obj: &QuadraticObjective<T>,
    s_prime: usize,
) -> Result<(DVector<T>, T)> {
    let d = obj.dim();
    if s_prime == 0 || s_prime > d {
        return Err(Error::InvalidSparsity { s: s_prime, dim: d });
    }
    let count = (0..s_prime).fold(1u128, |acc, i| acc * (d - i) as u128 / (i + 1) as u128);
    if count > MAX_SPARSE_SUPPORTS {
        return Err(Error::EnumerationTooLarge(format!(
            "C({d}, {s_prime}) = {count} supports exceeds {MAX_SPARSE_SUPPORTS}"
        )));
    }
    let mut best: Option<(DVector<T>, T)> = None;
    for subset in combinations(d, s_prime) {
        let x = obj.restricted_minimizer(&subset)?;
        let f = obj.value(&x)?;
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((x, f));
        }
    }
    Ok(best.expect("at least one subset"))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - k + i {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
