//! Relative concavity of thresholding operators.
//!
//! For an `s`-sparse operator `Psi` and `s' <= s`, the relative concavity is
//! the supremum of `<y - x, z - x> / ||y - x||^2` with `x = Psi(z)`, over all
//! `z` and all `s'`-sparse `y`. This module provides the closed forms for the
//! built-in operator families, an empirical maximizer, and explicit
//! witnesses.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::{ShrinkageFunction, ThresholdingOperator};
use crate::scalar::Scalar;

/// Sparsity pair `(s, s')` in dimension `d`, with `1 <= s' <= s` and
/// `s + s' <= d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConcavityQuery {
    pub s: usize,
    pub s_prime: usize,
    pub d: usize,
}

impl ConcavityQuery {
    pub fn new(s: usize, s_prime: usize, d: usize) -> Result<Self> {
        if s_prime < 1 || s_prime > s || s + s_prime > d {
            return Err(Error::InvalidQuery(format!(
                "need 1 <= s' <= s and s + s' <= d, got s = {s}, s' = {s_prime}, d = {d}"
            )));
        }
        Ok(Self { s, s_prime, d })
    }

    /// Smallest admissible dimension, `d = s + s'`.
    pub fn minimal(s: usize, s_prime: usize) -> Result<Self> {
        Self::new(s, s_prime, s + s_prime)
    }

    pub fn rho<T: Scalar>(&self) -> T {
        T::lit(self.s_prime as f64) / T::lit(self.s as f64)
    }
}

/// Effort spent by [`empirical_concavity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBudget {
    /// Independent random starting points for the local search over `z`.
    pub restarts: usize,
    /// Coordinate-ascent proposals per restart.
    pub ascent_steps: usize,
    /// Multiplier applied to a coordinate's step after a failed proposal.
    pub step_decay: f64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            restarts: 1000,
            ascent_steps: 500,
            step_decay: 0.9,
        }
    }
}

impl SearchBudget {
    pub fn with_restarts(restarts: usize) -> Self {
        Self {
            restarts,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcavityReport<T: Scalar> {
    /// Exact value when the operator family has one (possibly infinite).
    pub closed_form: Option<T>,
    /// Best ratio found; infinite when `unbounded` is set.
    pub empirical_max: T,
    /// The search found a family along which the ratio diverges; the stored
    /// witness is one finite member of that family.
    pub unbounded: bool,
    pub witness_y: DVector<T>,
    pub witness_z: DVector<T>,
    /// Ratio recomputed from the stored witnesses.
    pub ratio_at_witness: T,
}

/// `<y - x, z - x> / ||y - x||^2` with `x = op(z)`.
pub fn concavity_ratio<T: Scalar>(
    y: &DVector<T>,
    z: &DVector<T>,
    op: &ThresholdingOperator<T>,
) -> Result<T> {
    let x = op.apply(z)?;
    ratio_with_image(y, z, &x)
}

pub(crate) fn ratio_with_image<T: Scalar>(
    y: &DVector<T>,
    z: &DVector<T>,
    x: &DVector<T>,
) -> Result<T> {
    if y.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            got: y.len(),
        });
    }
    let u = y - x;
    let den = u.norm_squared();
    if den == T::zero() {
        return Err(Error::DegenerateWitness);
    }
    Ok(u.dot(&(z - x)) / den)
}

fn check_rho<T: Scalar>(rho: T, allow_one: bool) -> Result<()> {
    let ok = rho > T::zero() && (rho < T::one() || (allow_one && rho == T::one()));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "rho",
            value: rho.as_f64(),
            reason: if allow_one {
                "must lie in (0, 1]"
            } else {
                "must lie in (0, 1)"
            },
        })
    }
}

/// Hard thresholding: `sqrt(rho) / 2`.
pub fn gamma_hard<T: Scalar>(rho: T) -> Result<T> {
    check_rho(rho, true)?;
    Ok(rho.sqrt() / T::lit(2.0))
}

/// Smallest value attainable by any operator: `rho / (1 + rho)`.
pub fn gamma_optimal<T: Scalar>(rho: T) -> Result<T> {
    check_rho(rho, true)?;
    Ok(rho / (T::one() + rho))
}

/// Exact value for a shrinkage operator with boundary shrinkage
/// `sigma1 = sigma(1)` in `(0, 1)`.
pub fn gamma_shrink_class<T: Scalar>(rho: T, sigma1: T) -> Result<T> {
    check_rho(rho, false)?;
    if !(sigma1 > T::zero() && sigma1 < T::one()) {
        return Err(Error::InvalidParameter {
            name: "sigma1",
            value: sigma1.as_f64(),
            reason: "must lie in (0, 1)",
        });
    }
    let one = T::one();
    let s2 = sigma1 * sigma1;
    let m = one.min((one - rho) / s2);
    let k = rho / m;
    Ok(k / (T::lit(2.0) * sigma1 * (one - sigma1) * (one + (one + k / s2).sqrt())))
}

/// Reciprocal thresholding with parameter `c` in `[0, 1)`.
pub fn gamma_reciprocal<T: Scalar>(rho: T, c: T) -> Result<T> {
    if !(c >= T::zero() && c < T::one()) {
        return Err(Error::InvalidParameter {
            name: "c",
            value: c.as_f64(),
            reason: "must lie in [0, 1)",
        });
    }
    gamma_shrink_class(rho, (T::one() - c) / T::lit(2.0))
}

/// l_q thresholding with `q` in `(0, 1)`.
pub fn gamma_lq<T: Scalar>(rho: T, q: T) -> Result<T> {
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::InvalidParameter {
            name: "q",
            value: q.as_f64(),
            reason: "must lie in (0, 1)",
        });
    }
    gamma_shrink_class(rho, q / (T::lit(2.0) - q))
}

/// Exact relative concavity for the built-in families, `None` otherwise.
///
/// At `rho = 1` any operator that shrinks its kept entries has unbounded
/// concavity (move `y` from `x` towards `z` inside the support), reported
/// as infinity.
pub fn closed_form<T: Scalar>(op: &ThresholdingOperator<T>, rho: T) -> Result<Option<T>> {
    check_rho(rho, true)?;
    let sigma1 = match &op.shrink {
        ShrinkageFunction::Hard => return gamma_hard(rho).map(Some),
        ShrinkageFunction::Reciprocal { c } if *c == T::one() => return gamma_hard(rho).map(Some),
        ShrinkageFunction::Reciprocal { .. } | ShrinkageFunction::Lq { .. } => {
            op.shrink.sigma_one()?
        }
        _ => return Ok(None),
    };
    if rho == T::one() {
        return Ok(Some(T::infinity()));
    }
    gamma_shrink_class(rho, sigma1).map(Some)
}

/// Largest condition number the operator tolerates: `1 / (2 gamma)`.
pub fn kappa_max<T: Scalar>(gamma: T) -> Result<T> {
    if !(gamma > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            value: gamma.as_f64(),
            reason: "must be positive",
        });
    }
    Ok(T::one() / (T::lit(2.0) * gamma))
}

/// The universal witness `z = 1_d`, `y = t 1_{S'}` with `S'` disjoint from
/// the support of `x = op(z)`; its ratio is at least `rho / (1 + rho)` for
/// every operator.
pub fn lower_bound_witness<T: Scalar>(
    op: &ThresholdingOperator<T>,
    query: ConcavityQuery,
) -> Result<(DVector<T>, DVector<T>, T)> {
    check_operator(op, query)?;
    let one = T::one();
    let z = DVector::from_element(query.d, one);
    let x = op.apply(&z)?;
    let rho: T = query.rho();
    let r = x.norm() / T::lit(query.s as f64).sqrt();
    let mut t = r / rho * (one - r + (r * r - T::lit(2.0) * r + one + rho).sqrt());
    if !(t > T::zero()) {
        t = one;
    }
    let mut y = DVector::zeros(query.d);
    let mut placed = 0;
    for i in 0..query.d {
        if placed == query.s_prime {
            break;
        }
        if x[i] == T::zero() {
            y[i] = t;
            placed += 1;
        }
    }
    let ratio = ratio_with_image(&y, &z, &x)?;
    Ok((y, z, ratio))
}

fn check_operator<T: Scalar>(op: &ThresholdingOperator<T>, query: ConcavityQuery) -> Result<()> {
    if op.s != query.s {
        return Err(Error::InvalidQuery(format!(
            "operator sparsity {} differs from query sparsity {}",
            op.s, query.s
        )));
    }
    Ok(())
}

/// Best `y` for a fixed `(z, x)`: which coordinates `y` uses and the
/// resulting ratio.
#[derive(Debug, Clone)]
struct InnerBest<T> {
    value: T,
    unbounded: bool,
    /// Coordinates of `y`.
    support: Vec<usize>,
}

/// Ratio reported for a finite member of a diverging witness family.
const UNBOUNDED_WITNESS_RATIO: f64 = 1e3;

/// Subset count above which the exact enumeration of supports is replaced
/// by a greedy choice.
const MAX_ENUMERATED: u64 = 1 << 16;

/// Exact maximum of the ratio over `s'`-sparse `y` for fixed `z` and
/// `x = op(z)`.
///
/// For a support `A` of `y` write `w = z - x`, `a = ||w_A||`,
/// `b = ||x_{A^c}||^2`, `c = <x_{A^c}, w_{A^c}>`. The best `y` on `A` is
/// `x_A + t w_A / a`, giving `(t a - c) / (t^2 + b)`, maximized at
/// `t = (c + sqrt(c^2 + a^2 b)) / a` with value `a / (2 t)`. When `b = 0`
/// and `a > 0` the ratio is unbounded as `t -> 0`. Coordinates where `x`
/// vanishes only add to `a`, so the largest `|z_i|` among them are used.
fn inner_max<T: Scalar>(z: &DVector<T>, x: &DVector<T>, s_prime: usize) -> Option<InnerBest<T>> {
    let d = z.len();
    let on: Vec<usize> = (0..d).filter(|&i| x[i] != T::zero()).collect();
    let mut off: Vec<usize> = (0..d).filter(|&i| x[i] == T::zero()).collect();
    off.sort_by(|&i, &j| {
        z[j].abs()
            .partial_cmp(&z[i].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut off_prefix = Vec::with_capacity(off.len() + 1);
    off_prefix.push(T::zero());
    for &i in &off {
        let last = *off_prefix.last().unwrap();
        off_prefix.push(last + z[i] * z[i]);
    }

    let m = on.len();
    let mut best: Option<(T, bool, Vec<usize>, usize)> = None;
    let mut consider = |in_a: &[bool]| {
        let k = in_a.iter().filter(|b| **b).count();
        if k > s_prime {
            return;
        }
        let n_off = (s_prime - k).min(off.len());
        let (mut a2, mut b, mut c) = (off_prefix[n_off], T::zero(), T::zero());
        for (j, &i) in on.iter().enumerate() {
            let w = z[i] - x[i];
            if in_a[j] {
                a2 += w * w;
            } else {
                b += x[i] * x[i];
                c += x[i] * w;
            }
        }
        let (value, unbounded) = if b == T::zero() {
            if a2 > T::zero() {
                (T::infinity(), true)
            } else {
                return;
            }
        } else if a2 == T::zero() {
            (-c / b, false)
        } else {
            let r = (c * c + a2 * b).sqrt();
            let v = if c >= T::zero() {
                a2 / (T::lit(2.0) * (c + r))
            } else {
                (r - c) / (T::lit(2.0) * b)
            };
            (v, false)
        };
        if best.as_ref().is_none_or(|(bv, _, _, _)| value > *bv) {
            let chosen: Vec<usize> = on
                .iter()
                .zip(in_a)
                .filter(|(_, b)| **b)
                .map(|(i, _)| *i)
                .collect();
            best = Some((value, unbounded, chosen, n_off));
        }
    };

    let subsets: u64 = (0..=s_prime.min(m)).map(|k| binomial(m, k)).sum();
    let mut in_a = vec![false; m];
    if m < 63 && subsets <= MAX_ENUMERATED {
        for mask in 0u64..(1u64 << m) {
            if (mask.count_ones() as usize) > s_prime {
                continue;
            }
            for (j, flag) in in_a.iter_mut().enumerate() {
                *flag = mask >> j & 1 == 1;
            }
            consider(&in_a);
        }
    } else {
        // Greedy: put into A the kept coordinates whose removal from the
        // penalty terms helps most.
        let mut order: Vec<usize> = (0..m).collect();
        let score = |j: usize| {
            let i = on[j];
            let w = z[i] - x[i];
            w * w + x[i] * w
        };
        order.sort_by(|&p, &q| {
            score(q)
                .partial_cmp(&score(p))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        consider(&in_a);
        for &j in order.iter().take(s_prime) {
            in_a[j] = true;
            consider(&in_a);
        }
    }

    best.map(|(value, unbounded, mut support, n_off)| {
        support.extend_from_slice(&off[..n_off]);
        support.sort_unstable();
        InnerBest {
            value,
            unbounded,
            support,
        }
    })
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    acc
}

/// Materializes the maximizing `y` described by `best`.
fn build_witness<T: Scalar>(z: &DVector<T>, x: &DVector<T>, best: &InnerBest<T>) -> DVector<T> {
    let w = z - x;
    let a = best
        .support
        .iter()
        .map(|&i| w[i] * w[i])
        .fold(T::zero(), |s, v| s + v)
        .sqrt();
    let mut b = T::zero();
    let mut c = T::zero();
    for i in 0..z.len() {
        if best.support.binary_search(&i).is_err() {
            b += x[i] * x[i];
            c += x[i] * w[i];
        }
    }
    let t = if a == T::zero() {
        T::zero()
    } else if best.unbounded {
        a / T::lit(UNBOUNDED_WITNESS_RATIO)
    } else {
        let r = (c * c + a * a * b).sqrt();
        let denom = if c >= T::zero() {
            c + r
        } else {
            a * a * b / (r - c)
        };
        denom / a
    };
    let mut y = DVector::zeros(z.len());
    for &i in &best.support {
        y[i] = x[i];
        if a > T::zero() {
            y[i] += t * w[i] / a;
        }
    }
    y
}

/// Best `y` for a fixed `(z, x)` and whether it belongs to a diverging
/// family.
pub(crate) fn inner_best_y<T: Scalar>(
    z: &DVector<T>,
    x: &DVector<T>,
    s_prime: usize,
) -> Option<(DVector<T>, bool)> {
    let best = inner_max(z, x, s_prime)?;
    Some((build_witness(z, x, &best), best.unbounded))
}

#[derive(Debug, Clone)]
struct Candidate<T: Scalar> {
    value: T,
    z: DVector<T>,
}

fn evaluate<T: Scalar>(
    op: &ThresholdingOperator<T>,
    z: &DVector<T>,
    s_prime: usize,
) -> Result<Option<(T, DVector<T>, InnerBest<T>)>> {
    let x = op.apply(z)?;
    Ok(inner_max(z, &x, s_prime).map(|b| (b.value, x, b)))
}

fn value_of<T: Scalar>(op: &ThresholdingOperator<T>, z: &DVector<T>, s_prime: usize) -> Result<T> {
    Ok(evaluate(op, z, s_prime)?.map_or(-T::infinity(), |(v, _, _)| v))
}

/// Random Gaussian start followed by coordinate ascent on `z`.
fn local_search<T: Scalar>(
    op: &ThresholdingOperator<T>,
    query: ConcavityQuery,
    budget: &SearchBudget,
    seed: u64,
    restart: u64,
) -> Result<Candidate<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart);
    let d = query.d;
    let mut z = DVector::from_fn(d, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
    let mut value = value_of(op, &z, query.s_prime)?;
    let decay = T::lit(budget.step_decay);
    let mut steps = vec![T::lit(0.5); d];
    for k in 0..budget.ascent_steps {
        if value == T::infinity() {
            break;
        }
        let i = if rng.random::<f64>() < 0.5 {
            k % d
        } else {
            rng.random_range(0..d)
        };
        let orig = z[i];
        let mut improved = false;
        for dir in [T::one(), -T::one()] {
            z[i] = orig + dir * steps[i];
            let v = value_of(op, &z, query.s_prime)?;
            if v > value {
                value = v;
                improved = true;
                break;
            }
        }
        if !improved {
            z[i] = orig;
            steps[i] *= decay;
        }
    }
    Ok(Candidate { value, z })
}

/// A pair `(y, z)` with its ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness<T: Scalar> {
    pub y: DVector<T>,
    pub z: DVector<T>,
    pub ratio: T,
    /// `y` belongs to a family along which the ratio diverges.
    pub unbounded: bool,
}

/// Best `y` for the all-ones input `z = 1_d`. For hard, reciprocal and l_q
/// thresholding this attains the exact relative concavity (or a member of a
/// diverging family when it is infinite).
pub fn structured_witness<T: Scalar>(
    op: &ThresholdingOperator<T>,
    query: ConcavityQuery,
) -> Result<Witness<T>> {
    check_operator(op, query)?;
    let z = DVector::from_element(query.d, T::one());
    best_witness_for(op, z, query.s_prime)
}

fn best_witness_for<T: Scalar>(
    op: &ThresholdingOperator<T>,
    z: DVector<T>,
    s_prime: usize,
) -> Result<Witness<T>> {
    let (_, x, inner) = evaluate(op, &z, s_prime)?.ok_or(Error::DegenerateWitness)?;
    let y = build_witness(&z, &x, &inner);
    let ratio = ratio_with_image(&y, &z, &x)?;
    Ok(Witness {
        y,
        z,
        ratio,
        unbounded: inner.unbounded,
    })
}

/// Numerically maximizes the concavity ratio.
///
/// The candidates are the all-ones input (on which the exact witnesses of
/// the closed forms live), its negation, and `budget.restarts` independent
/// local searches. For every candidate `z` the best `y` is computed exactly.
/// Restarts run in parallel; the best candidate is chosen with ties going
/// to the earliest, so the result depends only on `seed`.
pub fn empirical_concavity<T: Scalar>(
    op: &ThresholdingOperator<T>,
    query: ConcavityQuery,
    budget: SearchBudget,
    seed: u64,
) -> Result<ConcavityReport<T>> {
    check_operator(op, query)?;
    let ones = DVector::from_element(query.d, T::one());
    let structured = [ones.clone(), -ones];
    let mut candidates: Vec<Candidate<T>> = Vec::with_capacity(budget.restarts + 2);
    for z in structured {
        let value = value_of(op, &z, query.s_prime)?;
        candidates.push(Candidate { value, z });
    }
    let searched: Vec<Result<Candidate<T>>> = (0..budget.restarts as u64)
        .into_par_iter()
        .map(|r| local_search(op, query, &budget, seed, r))
        .collect();
    for c in searched {
        candidates.push(c?);
    }

    let mut best_idx = 0;
    for (k, c) in candidates.iter().enumerate() {
        if c.value > candidates[best_idx].value {
            best_idx = k;
        }
    }
    let z = candidates.swap_remove(best_idx).z;
    let w = best_witness_for(op, z, query.s_prime)?;
    Ok(ConcavityReport {
        closed_form: closed_form(op, query.rho())?,
        empirical_max: if w.unbounded { T::infinity() } else { w.ratio },
        unbounded: w.unbounded,
        witness_y: w.y,
        witness_z: w.z,
        ratio_at_witness: w.ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn ratio_examples() {
        let hard = ThresholdingOperator::<f64>::hard(2);
        let z = dvector![1.0, 1.0, 1.0, 1.0];
        let y = dvector![0.0, 0.0, 1.0, 1.0];
        assert!((concavity_ratio(&y, &z, &hard).unwrap() - 0.5).abs() < 1e-15);

        let z = dvector![1.0, 1.0, 1.0];
        let y = dvector![0.0, 0.0, 2f64.sqrt()];
        let r = concavity_ratio(&y, &z, &hard).unwrap();
        assert!((r - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert!((r - gamma_hard(0.5).unwrap()).abs() < 1e-15);

        let y = dvector![1.0, 1.0, 0.0];
        assert_eq!(
            concavity_ratio(&y, &z, &hard),
            Err(Error::DegenerateWitness)
        );
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(gamma_hard(0.25).unwrap(), 0.25);
        assert_eq!(gamma_hard(1.0).unwrap(), 0.5);
        assert!((gamma_hard(0.04f64).unwrap() - 0.1).abs() < 1e-16);
        assert_eq!(gamma_optimal(1.0).unwrap(), 0.5);
        assert!((gamma_optimal(0.5f64).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        assert!(gamma_hard(0.0).is_err());
        assert!(gamma_hard(1.5).is_err());

        let v = gamma_shrink_class(0.25, 0.5).unwrap();
        assert!((v - 0.25 / (0.5 + 0.5 * 2f64.sqrt())).abs() < 1e-15);
        assert!((v - 0.2071068).abs() < 1e-7);
        assert!(gamma_shrink_class(1.0, 0.5).is_err());
        assert!(gamma_shrink_class(0.5, 1.0).is_err());

        for rho in [0.1f64, 0.5, 0.9] {
            let v = gamma_shrink_class(rho, (1.0 - rho) / 2.0).unwrap();
            assert!((v - rho / (1.0 + rho)).abs() < 1e-12);
        }
        for rho in [0.1f64, 0.3, 0.7] {
            assert!((gamma_reciprocal(rho, rho).unwrap() - rho / (1.0 + rho)).abs() < 1e-12);
            let q = 2.0 * (1.0 - rho) / (3.0 - rho);
            assert!((gamma_lq(rho, q).unwrap() - rho / (1.0 + rho)).abs() < 1e-12);
        }
    }

    #[test]
    fn small_shrinkage_approaches_hard() {
        for rho in [0.1f64, 0.5, 0.9] {
            for s1 in [1e-3, 1e-4] {
                let v = gamma_shrink_class(rho, s1).unwrap();
                let h = gamma_hard(rho).unwrap();
                assert!((v - h).abs() / h < 0.01, "rho={rho} s1={s1}: {v} vs {h}");
            }
        }
    }

    #[test]
    fn kappa_max_examples() {
        assert_eq!(kappa_max(0.25).unwrap(), 2.0);
        assert!((kappa_max(gamma_optimal(1.0f64 / 3.0).unwrap()).unwrap() - 2.0).abs() < 1e-12);
        assert!((kappa_max(gamma_hard(0.25f64).unwrap()).unwrap() - 2.0).abs() < 1e-12);
        assert!(kappa_max(0.0).is_err());
    }

    #[test]
    fn closed_form_dispatch() {
        let rt = ThresholdingOperator::reciprocal(4, 0.0).unwrap();
        assert_eq!(closed_form(&rt, 1.0).unwrap(), Some(f64::INFINITY));
        let rt1 = ThresholdingOperator::reciprocal(4, 1.0).unwrap();
        assert_eq!(closed_form(&rt1, 0.25).unwrap(), Some(0.25));
        let soft = ThresholdingOperator::<f64>::soft(4);
        assert_eq!(closed_form(&soft, 0.25).unwrap(), None);
    }

    #[test]
    fn query_validation() {
        assert!(ConcavityQuery::new(4, 1, 5).is_ok());
        assert!(ConcavityQuery::new(4, 2, 5).is_err());
        assert!(ConcavityQuery::new(2, 3, 10).is_err());
        assert!(ConcavityQuery::new(2, 0, 10).is_err());
    }

    #[test]
    fn lower_bound_witness_examples() {
        let q = ConcavityQuery::minimal(2, 2).unwrap();
        let (_, _, r) = lower_bound_witness(&ThresholdingOperator::<f64>::hard(2), q).unwrap();
        assert!(r >= 0.5 - 1e-12);

        for (s, sp) in [(4, 1), (4, 2), (6, 3), (5, 5)] {
            let q = ConcavityQuery::minimal(s, sp).unwrap();
            let rho: f64 = q.rho();
            let rt = ThresholdingOperator::reciprocal(s, rho).unwrap();
            let (_, _, r) = lower_bound_witness(&rt, q).unwrap();
            assert!((r - rho / (1.0 + rho)).abs() < 1e-9, "s={s} s'={sp}: {r}");
        }

        let soft = ThresholdingOperator::<f64>::soft(2);
        let (y, z, r) = lower_bound_witness(&soft, ConcavityQuery::minimal(2, 1).unwrap()).unwrap();
        assert_eq!(r, 1.0);
        assert!((concavity_ratio(&y, &z, &soft).unwrap() - r).abs() < 1e-15);
    }

    #[test]
    fn inner_max_is_exact_for_structured_input() {
        let hard = ThresholdingOperator::<f64>::hard(4);
        let q = ConcavityQuery::minimal(4, 1).unwrap();
        let z = DVector::from_element(q.d, 1.0);
        let (v, x, best) = evaluate(&hard, &z, 1).unwrap().unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        let y = build_witness(&z, &x, &best);
        assert!((ratio_with_image(&y, &z, &x).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn inner_max_dominates_random_witnesses() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let op = ThresholdingOperator::<f64>::reciprocal(3, 0.2).unwrap();
        for _ in 0..200 {
            let z = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
            let (v, x, _) = evaluate(&op, &z, 2).unwrap().unwrap();
            for _ in 0..20 {
                let mut y = DVector::zeros(6);
                let i = rng.random_range(0..6);
                let j = rng.random_range(0..6);
                y[i] = rng.sample::<f64, _>(StandardNormal);
                y[j] = rng.sample::<f64, _>(StandardNormal);
                if let Ok(r) = ratio_with_image(&y, &z, &x) {
                    assert!(r <= v + 1e-12, "{r} > {v}");
                }
            }
        }
    }

    #[test]
    fn empirical_examples() {
        let budget = SearchBudget::with_restarts(50);
        let hard = ThresholdingOperator::<f64>::hard(4);
        let q = ConcavityQuery::new(4, 1, 8).unwrap();
        let rep = empirical_concavity(&hard, q, budget, 1).unwrap();
        assert!(rep.empirical_max >= 0.25 - 1e-6 && rep.empirical_max <= 0.25 + 1e-9);

        let rt = ThresholdingOperator::reciprocal(4, 0.0).unwrap();
        let q = ConcavityQuery::new(4, 2, 8).unwrap();
        let rep = empirical_concavity(&rt, q, budget, 1).unwrap();
        let exact = gamma_reciprocal(0.5f64, 0.0).unwrap();
        assert!((rep.empirical_max - exact).abs() < 1e-6);
        let recomputed = concavity_ratio(&rep.witness_y, &rep.witness_z, &rt).unwrap();
        assert!((recomputed - rep.ratio_at_witness).abs() < 1e-12);

        let soft = ThresholdingOperator::<f64>::soft(2);
        let q = ConcavityQuery::new(2, 1, 4).unwrap();
        let rep = empirical_concavity(&soft, q, budget, 1).unwrap();
        assert!(rep.empirical_max >= 1.0 - 1e-6);
    }

    #[test]
    fn empirical_is_deterministic() {
        let op = ThresholdingOperator::<f64>::lq(3, 0.4).unwrap();
        let q = ConcavityQuery::minimal(3, 2).unwrap();
        let a = empirical_concavity(&op, q, SearchBudget::with_restarts(20), 5).unwrap();
        let b = empirical_concavity(&op, q, SearchBudget::with_restarts(20), 5).unwrap();
        assert_eq!(a, b);
    }
}
