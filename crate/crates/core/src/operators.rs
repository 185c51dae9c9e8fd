//! Sparse thresholding operators.
//!
//! Every operator keeps the `s` largest-magnitude coordinates (ties go to the
//! lowest index) and shrinks each kept entry according to a shrinkage
//! function `sigma` evaluated at the entry's magnitude relative to the
//! threshold level `tau`, the largest magnitude left out.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Indices kept by a thresholding operator, in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    indices: Vec<usize>,
}

impl Support {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Boolean membership mask of length `dim`.
    pub fn mask(&self, dim: usize) -> Vec<bool> {
        let mut mask = vec![false; dim];
        for &i in &self.indices {
            mask[i] = true;
        }
        mask
    }
}

/// Largest magnitude outside the support; zero iff the input is already
/// `s`-sparse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdLevel<T>(pub T);

impl<T: Scalar> ThresholdLevel<T> {
    pub fn tau(self) -> T {
        self.0
    }
}

/// Rule for choosing between equal magnitudes at the support boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

/// Nonincreasing piecewise-linear shrinkage table on `[1, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkTable<T> {
    knots: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> ShrinkTable<T> {
    /// `knots` must be strictly increasing and start at or above 1; `values`
    /// must lie in `[0, 1]` and be nonincreasing.
    pub fn new(knots: Vec<T>, values: Vec<T>) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(Error::InvalidParameter {
                name: "table",
                value: knots.len() as f64,
                reason: "knots and values must be nonempty and of equal length",
            });
        }
        if knots[0] < T::one() {
            return Err(Error::InvalidParameter {
                name: "table.knot",
                value: knots[0].as_f64(),
                reason: "first knot must be >= 1",
            });
        }
        for w in knots.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter {
                    name: "table.knot",
                    value: w[1].as_f64(),
                    reason: "knots must be strictly increasing",
                });
            }
        }
        for (k, &v) in values.iter().enumerate() {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::InvalidParameter {
                    name: "table.value",
                    value: v.as_f64(),
                    reason: "values must lie in [0, 1]",
                });
            }
            if k > 0 && v > values[k - 1] {
                return Err(Error::InvalidParameter {
                    name: "table.value",
                    value: v.as_f64(),
                    reason: "values must be nonincreasing",
                });
            }
        }
        Ok(Self { knots, values })
    }

    /// Linear interpolation, clamped to the end values outside the knots.
    pub fn eval(&self, t: T) -> T {
        let n = self.knots.len();
        if t <= self.knots[0] {
            return self.values[0];
        }
        if t >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let k = self.knots.partition_point(|&x| x <= t);
        let (t0, t1) = (self.knots[k - 1], self.knots[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

/// Relative shrinkage `sigma: [1, inf) -> [0, 1]` applied to kept entries.
#[derive(Clone)]
pub enum ShrinkageFunction<T: Scalar> {
    /// `sigma = 0`.
    Hard,
    /// `sigma = 1`: every kept entry shrinks by exactly `tau`.
    SoftFixedS,
    /// `sigma(t) = (t - sqrt(t^2 - (1 - c^2))) / 2`, `c` in `[0, 1]`.
    Reciprocal {
        c: T,
    },
    /// l_q thresholding, `q` in `(0, 1)`, through the root characterization.
    Lq {
        q: T,
    },
    Table(ShrinkTable<T>),
    Custom(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T: Scalar> fmt::Debug for ShrinkageFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Hard => write!(f, "Hard"),
            Self::SoftFixedS => write!(f, "SoftFixedS"),
            Self::Reciprocal { c } => write!(f, "Reciprocal {{ c: {c} }}"),
            Self::Lq { q } => write!(f, "Lq {{ q: {q} }}"),
            Self::Table(t) => write!(f, "Table({} knots)", t.knots.len()),
            Self::Custom(_) => write!(f, "Custom(<fn>)"),
        }
    }
}

impl<T: Scalar> ShrinkageFunction<T> {
    pub fn reciprocal(c: T) -> Result<Self> {
        check_unit_closed("c", c)?;
        Ok(Self::Reciprocal { c })
    }

    pub fn lq(q: T) -> Result<Self> {
        if !(q > T::zero() && q < T::one()) {
            return Err(Error::InvalidParameter {
                name: "q",
                value: q.as_f64(),
                reason: "must lie in (0, 1)",
            });
        }
        Ok(Self::Lq { q })
    }

    pub fn custom(f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self::Custom(Arc::new(f))
    }

    /// Short name: `hard`, `soft`, `rt:<c>`, `lq:<q>`, `table` or `custom`.
    pub fn label(&self) -> String {
        match self {
            Self::Hard => "hard".into(),
            Self::SoftFixedS => "soft".into(),
            Self::Reciprocal { c } => format!("rt:{c}"),
            Self::Lq { q } => format!("lq:{q}"),
            Self::Table(_) => "table".into(),
            Self::Custom(_) => "custom".into(),
        }
    }

    /// Evaluates `sigma(t)` for `t >= 1`.
    pub fn eval(&self, t: T) -> Result<T> {
        match self {
            Self::Hard => Ok(T::zero()),
            Self::SoftFixedS => Ok(T::one()),
            Self::Reciprocal { c } => {
                let k = T::one() - *c * *c;
                let disc = (t * t - k).max(T::zero());
                Ok(k / (T::lit(2.0) * (t + disc.sqrt())))
            }
            Self::Lq { q } => Ok(t - lq_root(t, *q)?),
            Self::Table(table) => Ok(table.eval(t)),
            Self::Custom(f) => Ok(f(t)),
        }
    }

    /// `sigma(1)`, the largest relative shrinkage (applied at the boundary).
    pub fn sigma_one(&self) -> Result<T> {
        match self {
            Self::Hard => Ok(T::zero()),
            Self::SoftFixedS => Ok(T::one()),
            Self::Reciprocal { c } => Ok((T::one() - *c) / T::lit(2.0)),
            Self::Lq { q } => Ok(*q / (T::lit(2.0) - *q)),
            _ => self.eval(T::one()),
        }
    }

    /// Checks on `grid` that `sigma` stays in `[0, 1]`, is nonincreasing, and
    /// that `t -> sigma(t) (t - sigma(t))` is nondecreasing. `slack` absorbs
    /// rounding in the comparisons.
    pub fn satisfies_shrink_class(&self, grid: &[T], slack: T) -> Result<bool> {
        let mut prev: Option<(T, T)> = None;
        for &t in grid {
            let s = self.eval(t)?;
            if s < T::zero() || s > T::one() {
                return Ok(false);
            }
            let g = s * (t - s);
            if let Some((ps, pg)) = prev {
                if s > ps + slack || g < pg - slack {
                    return Ok(false);
                }
            }
            prev = Some((s, g));
        }
        Ok(true)
    }
}

fn check_unit_closed<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if v >= T::zero() && v <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value: v.as_f64(),
            reason: "must lie in [0, 1]",
        })
    }
}

/// A sparsity level, a shrinkage rule, and a tie-break rule.
#[derive(Debug, Clone)]
pub struct ThresholdingOperator<T: Scalar> {
    pub s: usize,
    pub shrink: ShrinkageFunction<T>,
    pub tie_break: TieBreak,
}

impl<T: Scalar> ThresholdingOperator<T> {
    pub fn new(s: usize, shrink: ShrinkageFunction<T>) -> Self {
        Self {
            s,
            shrink,
            tie_break: TieBreak::LowestIndex,
        }
    }

    pub fn hard(s: usize) -> Self {
        Self::new(s, ShrinkageFunction::Hard)
    }

    pub fn soft(s: usize) -> Self {
        Self::new(s, ShrinkageFunction::SoftFixedS)
    }

    pub fn reciprocal(s: usize, c: T) -> Result<Self> {
        Ok(Self::new(s, ShrinkageFunction::reciprocal(c)?))
    }

    pub fn lq(s: usize, q: T) -> Result<Self> {
        Ok(Self::new(s, ShrinkageFunction::lq(q)?))
    }

    /// Same shrinkage rule at a different sparsity level.
    pub fn with_sparsity(&self, s: usize) -> Self {
        Self {
            s,
            shrink: self.shrink.clone(),
            tie_break: self.tie_break,
        }
    }

    pub fn apply(&self, z: &DVector<T>) -> Result<DVector<T>> {
        match &self.shrink {
            ShrinkageFunction::Hard => hard_threshold(z, self.s),
            ShrinkageFunction::SoftFixedS => soft_threshold_fixed_s(z, self.s),
            ShrinkageFunction::Reciprocal { c } => reciprocal_threshold(z, self.s, *c),
            ShrinkageFunction::Lq { q } => lq_threshold(z, self.s, *q),
            _ => custom_shrink_threshold(z, self),
        }
    }

    /// Whether the operator is continuous in `z` (only soft thresholding at a
    /// fixed sparsity among the built-in kinds).
    pub fn is_continuous(&self) -> bool {
        matches!(self.shrink, ShrinkageFunction::SoftFixedS)
    }
}

/// The `s` largest-magnitude indices (lowest index wins ties) and the largest
/// magnitude left out.
pub fn select_support<T: Scalar>(z: &DVector<T>, s: usize) -> Result<(Support, ThresholdLevel<T>)> {
    let d = z.len();
    if d == 0 || s < 1 || s > d {
        return Err(Error::InvalidSparsity { s, dim: d });
    }
    let mags: Vec<T> = z.iter().map(|v| v.abs()).collect();
    let mut order: Vec<usize> = (0..d).collect();
    let cmp = |&a: &usize, &b: &usize| {
        mags[b]
            .partial_cmp(&mags[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    };
    let tau = if s < d {
        order.select_nth_unstable_by(s, cmp);
        mags[order[s]]
    } else {
        T::zero()
    };
    let mut indices = order[..s].to_vec();
    indices.sort_unstable();
    Ok((Support { indices }, ThresholdLevel(tau)))
}

#[inline]
fn signed<T: Scalar>(magnitude: T, like: T) -> T {
    if like < T::zero() {
        -magnitude
    } else {
        magnitude
    }
}

/// Applies `shrink(|z_i|, tau)` on the support; returns `z` unchanged when
/// `tau = 0`.
fn threshold_with<T: Scalar>(
    z: &DVector<T>,
    s: usize,
    mut shrink: impl FnMut(T, T) -> Result<T>,
) -> Result<DVector<T>> {
    let (support, level) = select_support(z, s)?;
    let tau = level.tau();
    if tau == T::zero() {
        return Ok(z.clone());
    }
    let mut out = DVector::zeros(z.len());
    for &i in support.indices() {
        let mag = shrink(z[i].abs(), tau)?;
        out[i] = signed(mag, z[i]);
    }
    Ok(out)
}

pub fn hard_threshold<T: Scalar>(z: &DVector<T>, s: usize) -> Result<DVector<T>> {
    let (support, _) = select_support(z, s)?;
    let mut out = DVector::zeros(z.len());
    for &i in support.indices() {
        out[i] = z[i];
    }
    Ok(out)
}

/// Soft shrinkage by the smallest level leaving at most `s` nonzeros, which
/// is the threshold level `tau`.
pub fn soft_threshold_fixed_s<T: Scalar>(z: &DVector<T>, s: usize) -> Result<DVector<T>> {
    threshold_with(z, s, |mag, tau| Ok((mag - tau).max(T::zero())))
}

pub fn reciprocal_threshold<T: Scalar>(z: &DVector<T>, s: usize, c: T) -> Result<DVector<T>> {
    check_unit_closed("c", c)?;
    let half = T::lit(0.5);
    let k = T::one() - c * c;
    threshold_with(z, s, |mag, tau| {
        let disc = (mag * mag - tau * tau * k).max(T::zero());
        Ok(half * mag + half * disc.sqrt())
    })
}

pub fn lq_threshold<T: Scalar>(z: &DVector<T>, s: usize, q: T) -> Result<DVector<T>> {
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::InvalidParameter {
            name: "q",
            value: q.as_f64(),
            reason: "must lie in (0, 1)",
        });
    }
    threshold_with(z, s, |mag, tau| Ok(tau * lq_root(mag / tau, q)?))
}

/// Generic driver: `sign(z_i) (|z_i| - tau sigma(|z_i| / tau))` on the support.
pub fn custom_shrink_threshold<T: Scalar>(
    z: &DVector<T>,
    op: &ThresholdingOperator<T>,
) -> Result<DVector<T>> {
    threshold_with(z, op.s, |mag, tau| {
        let t = mag / tau;
        let sigma = op.shrink.eval(t)?;
        if !(sigma >= T::zero() && sigma <= T::one()) {
            return Err(Error::ShrinkOutOfRange {
                t: t.as_f64(),
                value: sigma.as_f64(),
            });
        }
        Ok((mag - tau * sigma).max(T::zero()))
    })
}

/// Coordinatewise soft shrinkage at a fixed level `t >= 0` (the proximal map
/// of `t * ||.||_1`).
pub fn prox_l1<T: Scalar>(z: &DVector<T>, t: T) -> DVector<T> {
    assert!(t >= T::zero(), "prox_l1 level must be nonnegative");
    z.map(|v| signed((v.abs() - t).max(T::zero()), v))
}

/// Constant of the l_q root equation, `q (2-2q)^(1-q) / (2-q)^(2-q)`.
fn lq_constant<T: Scalar>(q: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    q * (two - two * q).powf(one - q) / (two - q).powf(two - q)
}

/// Larger root `x` of `t = x + K x^(q-1)` for `t >= 1`, by bisection on
/// `[t (1 - sigma_max), t]`, `sigma_max = q / (2 - q)`, to absolute
/// tolerance 1e-12.
pub fn lq_root<T: Scalar>(t: T, q: T) -> Result<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let k = lq_constant(q);
    let g = |x: T| x + k * x.powf(q - one);
    let sigma_max = q / (two - q);
    let mut lo = t * (one - sigma_max);
    let mut hi = t;
    let slack = T::lit(64.0) * T::machine_eps() * t;
    let g_lo = g(lo);
    if !(t >= one) || g_lo > t + slack || g(hi) < t {
        return Err(Error::RootNotBracketed { t: t.as_f64() });
    }
    if g_lo >= t {
        return Ok(lo);
    }
    let tol = T::lit(1e-12).max(T::lit(4.0) * T::machine_eps() * t);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / two)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn support_examples() {
        let (s, tau) = select_support(&v(&[3.0, -1.0, 2.0, 0.5]), 2).unwrap();
        assert_eq!(s.indices(), &[0, 2]);
        assert_eq!(tau.tau(), 1.0);

        let (s, tau) = select_support(&v(&[1.0, 1.0, 1.0]), 2).unwrap();
        assert_eq!(s.indices(), &[0, 1]);
        assert_eq!(tau.tau(), 1.0);

        let (s, tau) = select_support(&v(&[5.0, 4.0]), 2).unwrap();
        assert_eq!(s.indices(), &[0, 1]);
        assert_eq!(tau.tau(), 0.0);
    }

    #[test]
    fn support_rejects_bad_sparsity() {
        let z = v(&[1.0, 2.0]);
        assert_eq!(
            select_support(&z, 0).unwrap_err(),
            Error::InvalidSparsity { s: 0, dim: 2 }
        );
        assert!(select_support(&z, 3).is_err());
        assert!(hard_threshold(&DVector::<f64>::zeros(0), 1).is_err());
    }

    #[test]
    fn hard_examples() {
        assert_eq!(
            hard_threshold(&v(&[3.0, -1.0, 2.0, 0.5]), 2).unwrap(),
            v(&[3.0, 0.0, 2.0, 0.0])
        );
        assert_eq!(
            hard_threshold(&v(&[0.0, 0.0, 7.0]), 1).unwrap(),
            v(&[0.0, 0.0, 7.0])
        );
        assert_eq!(hard_threshold(&v(&[2.0, 1.0]), 1).unwrap(), v(&[2.0, 0.0]));
    }

    #[test]
    fn soft_examples() {
        assert_eq!(
            soft_threshold_fixed_s(&v(&[3.0, -1.0, 2.0]), 1).unwrap(),
            v(&[1.0, 0.0, 0.0])
        );
        assert_eq!(soft_threshold_fixed_s(&v(&[5.0]), 1).unwrap(), v(&[5.0]));
        assert_eq!(
            soft_threshold_fixed_s(&v(&[2.0, -2.0, 1.0]), 2).unwrap(),
            v(&[1.0, -1.0, 0.0])
        );
    }

    /// Smallest lambda among the candidate levels {0} U {|z_i|} leaving at
    /// most `s` nonzeros after coordinatewise soft shrinkage.
    fn soft_oracle(z: &[f64], s: usize) -> Vec<f64> {
        let mut levels: Vec<f64> = z.iter().map(|x| x.abs()).collect();
        levels.push(0.0);
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for lam in levels {
            let out: Vec<f64> = z
                .iter()
                .map(|&x| {
                    if x.abs() <= lam {
                        0.0
                    } else {
                        x - lam * x.signum()
                    }
                })
                .collect();
            if out.iter().filter(|x| **x != 0.0).count() <= s {
                return out;
            }
        }
        unreachable!()
    }

    #[test]
    fn soft_matches_exhaustive_oracle_with_ties() {
        // [2, -2, 1] at s = 2: the smallest admissible level is 1, which
        // keeps both tied entries.
        assert_eq!(
            soft_threshold_fixed_s(&v(&[2.0, -2.0, 1.0]), 2).unwrap(),
            v(&[1.0, -1.0, 0.0])
        );

        let vals = [-2.0, -1.0, 0.0, 1.0, 2.0];
        for a in vals {
            for b in vals {
                for c in vals {
                    for s in 1..=3 {
                        let z = [a, b, c];
                        let got = soft_threshold_fixed_s(&v(&z), s).unwrap();
                        assert_eq!(
                            got.as_slice(),
                            soft_oracle(&z, s).as_slice(),
                            "z={z:?} s={s}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn reciprocal_examples() {
        let out = reciprocal_threshold(&v(&[2.0, 1.0]), 1, 0.0).unwrap();
        assert!((out[0] - (1.0 + 3f64.sqrt() / 2.0)).abs() < 1e-15);
        assert_eq!(out[1], 0.0);
        // larger root of t^2 - 2t + 0.25 = 0
        assert!((out[0] * out[0] - 2.0 * out[0] + 0.25).abs() < 1e-14);

        assert_eq!(
            reciprocal_threshold(&v(&[2.0, 1.0]), 1, 1.0).unwrap(),
            v(&[2.0, 0.0])
        );

        let neg = reciprocal_threshold(&v(&[-2.0, 1.0]), 1, 0.0).unwrap();
        assert_eq!(neg[0], -out[0]);
        assert!((neg[0] + 1.8660254).abs() < 1e-7);

        assert!(reciprocal_threshold(&v(&[2.0, 1.0]), 1, 1.5).is_err());
        assert!(reciprocal_threshold(&v(&[2.0, 1.0]), 1, -0.1).is_err());
    }

    #[test]
    fn lq_examples() {
        let out = lq_threshold(&v(&[1.0, 1.0]), 1, 2.0 / 3.0).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-12);
        assert_eq!(out[1], 0.0);

        let out = lq_threshold(&v(&[10.0, 1.0]), 1, 2.0 / 3.0).unwrap();
        assert!(out[0] > 10.0 - 0.5 && out[0] < 10.0, "{}", out[0]);

        assert!(lq_threshold(&v(&[1.0, 1.0]), 1, 1.0).is_err());
        assert!(lq_threshold(&v(&[1.0, 1.0]), 1, 0.0).is_err());
    }

    #[test]
    fn lq_near_one_approaches_soft_shrinkage() {
        // sigma(1) = q / (2 - q) -> 1, so the boundary shrinkage approaches tau.
        let z = v(&[2.0, 1.0]);
        let mut prev_shrink = 0.0;
        for q in [0.5, 0.9, 0.99] {
            let out = lq_threshold(&z, 1, q).unwrap();
            let shrink = 2.0 - out[0];
            assert!(shrink > prev_shrink, "q={q}: {shrink} <= {prev_shrink}");
            assert!(shrink <= 1.0);
            prev_shrink = shrink;
        }
        assert!(prev_shrink > 0.9);
    }

    #[test]
    fn lq_root_solves_equation() {
        for q in [0.2f64, 0.4, 2.0 / 3.0, 0.9] {
            let k = lq_constant(q);
            for t in [1.0, 1.001, 1.5, 3.0, 10.0, 1e4] {
                let x = lq_root(t, q).unwrap();
                assert!(
                    (x + k * x.powf(q - 1.0) - t).abs() < 1e-9 * t.max(1.0),
                    "q={q} t={t}"
                );
            }
            assert!((1.0 - lq_root(1.0, q).unwrap() - q / (2.0 - q)).abs() < 1e-12);
        }
        assert_eq!(
            lq_root(0.5, 0.5).unwrap_err(),
            Error::RootNotBracketed { t: 0.5 }
        );
    }

    #[test]
    fn custom_driver_reproduces_builtins() {
        let z = v(&[3.0, -1.0, 2.0, 0.5]);
        let zero = ThresholdingOperator::new(2, ShrinkageFunction::custom(|_| 0.0));
        assert_eq!(
            custom_shrink_threshold(&z, &zero).unwrap(),
            hard_threshold(&z, 2).unwrap()
        );

        let rt = ThresholdingOperator::new(
            1,
            ShrinkageFunction::custom(|t: f64| (t - (t * t - 1.0).sqrt()) / 2.0),
        );
        let a = custom_shrink_threshold(&v(&[2.0, 1.0]), &rt).unwrap();
        let b = reciprocal_threshold(&v(&[2.0, 1.0]), 1, 0.0).unwrap();
        assert!((a - b).amax() < 1e-15);

        let one = ThresholdingOperator::new(2, ShrinkageFunction::custom(|_| 1.0));
        assert_eq!(
            custom_shrink_threshold(&z, &one).unwrap(),
            v(&[2.0, 0.0, 1.0, 0.0])
        );
    }

    #[test]
    fn custom_out_of_range_is_rejected() {
        let bad = ThresholdingOperator::new(1, ShrinkageFunction::custom(|_| 1.5));
        assert!(matches!(
            custom_shrink_threshold(&v(&[2.0, 1.0]), &bad),
            Err(Error::ShrinkOutOfRange { .. })
        ));
    }

    #[test]
    fn prox_examples() {
        assert_eq!(prox_l1(&v(&[3.0, -1.0, 0.5]), 1.0), v(&[2.0, 0.0, 0.0]));
        let z = v(&[1.5, -2.0, 0.0]);
        assert_eq!(prox_l1(&z, 0.0), z);
        assert_eq!(prox_l1(&v(&[-3.0]), 5.0), v(&[0.0]));
    }

    #[test]
    fn table_interpolates_and_clamps() {
        let table = ShrinkTable::<f64>::new(vec![1.0, 2.0, 4.0], vec![0.5, 0.25, 0.1]).unwrap();
        assert_eq!(table.eval(1.0), 0.5);
        assert!((table.eval(1.5) - 0.375).abs() < 1e-15);
        assert!((table.eval(3.0) - 0.175).abs() < 1e-15);
        assert_eq!(table.eval(100.0), 0.1);
        assert!(ShrinkTable::new(vec![1.0, 2.0], vec![0.2, 0.3]).is_err());
        assert!(ShrinkTable::new(vec![0.5, 2.0], vec![0.2, 0.1]).is_err());
        assert!(ShrinkTable::new(vec![1.0, 1.0], vec![0.2, 0.1]).is_err());
    }

    #[test]
    fn sigma_one_matches_eval() {
        for shrink in [
            ShrinkageFunction::<f64>::Hard,
            ShrinkageFunction::SoftFixedS,
            ShrinkageFunction::reciprocal(0.3).unwrap(),
            ShrinkageFunction::lq(0.4).unwrap(),
        ] {
            let a = shrink.sigma_one().unwrap();
            let b = shrink.eval(1.0).unwrap();
            assert!((a - b).abs() < 1e-12, "{shrink:?}");
        }
    }

    #[test]
    fn works_in_single_precision() {
        let z: DVector<f32> = dvector![2.0, 1.0];
        let out = reciprocal_threshold(&z, 1, 0.0f32).unwrap();
        assert!((out[0] - 1.866_025_4).abs() < 1e-6);
        let lq = lq_threshold(&dvector![1.0f32, 1.0], 1, 2.0 / 3.0).unwrap();
        assert!((lq[0] - 0.5).abs() < 1e-6);
    }
}
