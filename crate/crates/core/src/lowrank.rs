//! Rank-constrained thresholding: a vector operator applied to singular
//! values.

use std::ops::AddAssign;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::adversarial::{trap_from_witness, TrapInstance};
use crate::concavity::{
    closed_form, empirical_concavity, inner_best_y, ConcavityQuery, SearchBudget,
};
use crate::error::{Error, Result};
use crate::objective::{QuadraticObjective, SmoothObjective};
use crate::operators::ThresholdingOperator;
use crate::scalar::Scalar;
use crate::solver::{iterate, IterateTrace, StepRule, Thresholder};

/// Relative threshold below which singular values count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Thin SVD with singular values in nonincreasing order.
#[derive(Debug, Clone)]
pub struct SortedSvd<T: Scalar> {
    pub u: DMatrix<T>,
    pub singular_values: DVector<T>,
    pub v_t: DMatrix<T>,
}

impl<T: Scalar> SortedSvd<T> {
    pub fn new(z: &DMatrix<T>) -> Result<Self> {
        let svd = z
            .clone()
            .try_svd(true, true, T::machine_eps(), 10_000)
            .ok_or(Error::SvdFailure)?;
        let u = svd.u.ok_or(Error::SvdFailure)?;
        let v_t = svd.v_t.ok_or(Error::SvdFailure)?;
        Ok(Self {
            u,
            singular_values: svd.singular_values,
            v_t,
        })
    }

    /// `U diag(d) V^T` for a vector `d` of the same length as the spectrum.
    pub fn compose(&self, d: &DVector<T>) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.u.nrows(), self.v_t.ncols());
        for k in 0..d.len() {
            if d[k] != T::zero() {
                out += self.u.column(k) * self.v_t.row(k) * d[k];
            }
        }
        out
    }
}

/// Numerical rank: singular values above `RANK_TOL` times the largest.
pub fn numerical_rank<T: Scalar>(z: &DMatrix<T>) -> Result<usize> {
    let svd = SortedSvd::new(z)?;
    let sv = &svd.singular_values;
    if sv.is_empty() || sv[0] == T::zero() {
        return Ok(0);
    }
    let cut = sv[0] * T::lit(RANK_TOL);
    Ok(sv.iter().filter(|v| **v > cut).count())
}

/// `X -> U diag(base(d)) V^T` where `X = U diag(d) V^T`, on `rows x cols`
/// matrices (vectorized column-major when used as a [`Thresholder`]).
#[derive(Debug, Clone)]
pub struct LiftedOperator<T: Scalar> {
    pub base: ThresholdingOperator<T>,
    pub rows: usize,
    pub cols: usize,
}

impl<T: Scalar> LiftedOperator<T> {
    pub fn new(base: ThresholdingOperator<T>, rows: usize, cols: usize) -> Result<Self> {
        if base.s < 1 || base.s > rows.min(cols) {
            return Err(Error::InvalidSparsity {
                s: base.s,
                dim: rows.min(cols),
            });
        }
        Ok(Self { base, rows, cols })
    }

    pub fn apply(&self, z: &DMatrix<T>) -> Result<DMatrix<T>> {
        if z.shape() != (self.rows, self.cols) {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: z.len(),
            });
        }
        lift_apply(&self.base, z)
    }
}

impl<T: Scalar> Thresholder<T> for LiftedOperator<T> {
    fn project(&self, z: &DVector<T>, _eta: T) -> Result<DVector<T>> {
        if z.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: z.len(),
            });
        }
        let m = DMatrix::from_column_slice(self.rows, self.cols, z.as_slice());
        let x = lift_apply(&self.base, &m)?;
        Ok(DVector::from_column_slice(x.as_slice()))
    }
}

/// Applies `base` to the singular values of `z`.
pub fn lift_apply<T: Scalar>(base: &ThresholdingOperator<T>, z: &DMatrix<T>) -> Result<DMatrix<T>> {
    let svd = SortedSvd::new(z)?;
    let d = base.apply(&svd.singular_values)?;
    Ok(svd.compose(&d))
}

fn frob_ratio<T: Scalar>(y: &DMatrix<T>, z: &DMatrix<T>, x: &DMatrix<T>) -> Result<T> {
    let u = y - x;
    let den = u.norm_squared();
    if den == T::zero() {
        return Err(Error::DegenerateWitness);
    }
    Ok(u.dot(&(z - x)) / den)
}

/// `<Y - X, Z - X>_F / ||Y - X||_F^2` with `X = lifted(Z)`.
pub fn matrix_concavity_ratio<T: Scalar>(
    y: &DMatrix<T>,
    z: &DMatrix<T>,
    lifted: &LiftedOperator<T>,
) -> Result<T> {
    let x = lifted.apply(z)?;
    if y.shape() != z.shape() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            got: y.len(),
        });
    }
    frob_ratio(y, z, &x)
}

/// Matrix shape `n x m` and ranks `s' <= s` with `s + s' <= min(n, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixConcavityQuery {
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub s_prime: usize,
}

impl MatrixConcavityQuery {
    pub fn new(n: usize, m: usize, s: usize, s_prime: usize) -> Result<Self> {
        ConcavityQuery::new(s, s_prime, n.min(m))?;
        Ok(Self { n, m, s, s_prime })
    }

    /// The vector query on the spectrum, `d = min(n, m)`.
    pub fn spectral(&self) -> ConcavityQuery {
        ConcavityQuery {
            s: self.s,
            s_prime: self.s_prime,
            d: self.n.min(self.m),
        }
    }

    pub fn rho<T: Scalar>(&self) -> T {
        self.spectral().rho()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixConcavityReport<T: Scalar> {
    /// Exact value of the base operator's vector concavity, when known.
    pub closed_form: Option<T>,
    pub empirical_max: T,
    pub unbounded: bool,
    pub witness_y: DMatrix<T>,
    pub witness_z: DMatrix<T>,
    pub ratio_at_witness: T,
}

/// `n x m` matrix with `v` on the main diagonal.
pub fn diag_embed<T: Scalar>(v: &DVector<T>, n: usize, m: usize) -> DMatrix<T> {
    let mut out = DMatrix::zeros(n, m);
    for i in 0..v.len().min(n).min(m) {
        out[(i, i)] = v[i];
    }
    out
}

#[derive(Debug, Clone)]
struct MatrixCandidate<T: Scalar> {
    value: T,
    unbounded: bool,
    y: DMatrix<T>,
    z: DMatrix<T>,
}

/// Best `Y` of the form `U diag(y) V^T` in the singular basis of `z`, which
/// reduces to the exact vector problem on the spectrum.
fn spectral_candidate<T: Scalar>(
    lifted: &LiftedOperator<T>,
    z: DMatrix<T>,
    s_prime: usize,
) -> Result<Option<MatrixCandidate<T>>> {
    let svd = SortedSvd::new(&z)?;
    let d = &svd.singular_values;
    let psi = lifted.base.apply(d)?;
    let Some((y, unbounded)) = inner_best_y(d, &psi, s_prime) else {
        return Ok(None);
    };
    let x = svd.compose(&psi);
    let y = svd.compose(&y);
    let value = frob_ratio(&y, &z, &x)?;
    Ok(Some(MatrixCandidate {
        value,
        unbounded,
        y,
        z,
    }))
}

/// The universal lower-bound witness: `Z` the stacked identity and
/// `Y = t V_perp V_perp^T` (padded), with `V_perp` orthogonal to the row
/// space of `lifted(Z)`. Returns `(Y, Z, ratio)`.
pub fn lowrank_lower_bound_witness<T: Scalar>(
    lifted: &LiftedOperator<T>,
    query: MatrixConcavityQuery,
) -> Result<(DMatrix<T>, DMatrix<T>, T)> {
    let (n, m) = (query.n, query.m);
    let k = n.min(m);
    let z = diag_embed(&DVector::from_element(k, T::one()), n, m);
    let svd = SortedSvd::new(&z)?;
    let psi = lifted.base.apply(&svd.singular_values)?;
    let x = svd.compose(&psi);
    let one = T::one();
    let rho: T = query.rho();
    let r = x.norm() / T::lit(query.s as f64).sqrt();
    let mut t = r / rho * (one - r + (r * r - T::lit(2.0) * r + one + rho).sqrt());
    if !(t > T::zero()) {
        t = one;
    }
    // Right singular directions unused by X, taken from the zero entries of
    // the thresholded spectrum.
    let free: Vec<usize> = (0..k)
        .filter(|&j| psi[j] == T::zero())
        .take(query.s_prime)
        .collect();
    if free.len() < query.s_prime {
        return Err(Error::DegenerateWitness);
    }
    let mut y = DMatrix::zeros(n, m);
    for &j in &free {
        if n >= m {
            let v = svd.v_t.row(j).transpose();
            let block = &v * v.transpose() * t;
            y.view_mut((0, 0), (m, m)).add_assign(&block);
        } else {
            let u = svd.u.column(j).into_owned();
            let block = &u * u.transpose() * t;
            y.view_mut((0, 0), (n, n)).add_assign(&block);
        }
    }
    let ratio = frob_ratio(&y, &z, &x)?;
    Ok((y, z, ratio))
}

/// Gradient ascent on `Y = A B^T` (rank `s'`) for fixed `Z`, started from
/// `y0` plus a random perturbation.
fn factor_ascent<T: Scalar>(
    x: &DMatrix<T>,
    z: &DMatrix<T>,
    y0: &DMatrix<T>,
    s_prime: usize,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> Option<(T, DMatrix<T>)> {
    let svd = SortedSvd::new(y0).ok()?;
    let (n, m) = z.shape();
    let noise = |rng: &mut ChaCha8Rng| T::lit(0.05 * rng.sample::<f64, _>(StandardNormal));
    let mut a = DMatrix::from_fn(n, s_prime, |i, j| {
        svd.u[(i, j)] * svd.singular_values[j].sqrt() + noise(rng)
    });
    let mut b = DMatrix::from_fn(m, s_prime, |i, j| {
        svd.v_t[(j, i)] * svd.singular_values[j].sqrt() + noise(rng)
    });
    let w = z - x;
    let ratio = |a: &DMatrix<T>, b: &DMatrix<T>| frob_ratio(&(a * b.transpose()), z, x).ok();
    let mut val = ratio(&a, &b)?;
    let mut lr = T::lit(0.1);
    for _ in 0..steps {
        let y = &a * b.transpose();
        let u = &y - x;
        let den = u.norm_squared();
        let num = u.dot(&w);
        let gy = (&w * den - &u * (T::lit(2.0) * num)) / (den * den);
        let ga = &gy * &b;
        let gb = gy.transpose() * &a;
        let mut accepted = false;
        for _ in 0..30 {
            let na = &a + &ga * lr;
            let nb = &b + &gb * lr;
            if let Some(v) = ratio(&na, &nb) {
                if v > val {
                    a = na;
                    b = nb;
                    val = v;
                    lr *= T::lit(1.5);
                    accepted = true;
                    break;
                }
            }
            lr *= T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    Some((val, &a * b.transpose()))
}

/// Numerically maximizes the matrix concavity ratio.
///
/// Candidates: diagonal embeddings of the vector search on the spectrum,
/// the universal lower-bound witness, and random Gaussian `Z` with the best
/// `Y` in the singular basis of `Z`, refined by gradient ascent over rank-`s'`
/// factorizations `Y = A B^T`.
pub fn empirical_matrix_concavity<T: Scalar>(
    lifted: &LiftedOperator<T>,
    query: MatrixConcavityQuery,
    budget: SearchBudget,
    seed: u64,
) -> Result<MatrixConcavityReport<T>> {
    if lifted.base.s != query.s || lifted.rows != query.n || lifted.cols != query.m {
        return Err(Error::InvalidQuery(
            "lifted operator shape or rank differs from the query".into(),
        ));
    }
    let (n, m) = (query.n, query.m);
    let mut cands: Vec<MatrixCandidate<T>> = Vec::new();

    let vec_rep = empirical_concavity(&lifted.base, query.spectral(), budget, seed)?;
    let zd = diag_embed(&vec_rep.witness_z, n, m);
    if let Some(c) = spectral_candidate(lifted, zd, query.s_prime)? {
        cands.push(c);
    }
    let (y, z, value) = lowrank_lower_bound_witness(lifted, query)?;
    cands.push(MatrixCandidate {
        value,
        unbounded: false,
        y,
        z,
    });

    let restarts = budget.restarts as u64;
    let random: Vec<Result<Option<MatrixCandidate<T>>>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a7e);
            rng.set_stream(r);
            let z = DMatrix::from_fn(n, m, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
            let Some(mut cand) = spectral_candidate(lifted, z, query.s_prime)? else {
                return Ok(None);
            };
            if !cand.unbounded && r < (restarts / 10).max(1) {
                let x = lifted.apply(&cand.z)?;
                if let Some((v, y)) = factor_ascent(
                    &x,
                    &cand.z,
                    &cand.y,
                    query.s_prime,
                    budget.ascent_steps / 5,
                    &mut rng,
                ) {
                    if v > cand.value {
                        cand.value = v;
                        cand.y = y;
                    }
                }
            }
            Ok(Some(cand))
        })
        .collect();
    for c in random {
        if let Some(c) = c? {
            cands.push(c);
        }
    }

    let mut best = 0;
    for (k, c) in cands.iter().enumerate() {
        let better = (c.unbounded && !cands[best].unbounded)
            || (c.unbounded == cands[best].unbounded && c.value > cands[best].value);
        if better {
            best = k;
        }
    }
    let c = cands.swap_remove(best);
    let ratio = matrix_concavity_ratio(&c.y, &c.z, lifted)?;
    Ok(MatrixConcavityReport {
        closed_form: closed_form(&lifted.base, query.rho())?,
        empirical_max: if c.unbounded { T::infinity() } else { ratio },
        unbounded: c.unbounded,
        witness_y: c.y,
        witness_z: c.z,
        ratio_at_witness: ratio,
    })
}

/// `f(X) = 1/2 ||X - A||_F^2 + <G, X - A>` over column-major `vec(X)`.
pub fn matrix_distance_objective<T: Scalar>(
    a: &DMatrix<T>,
    g: &DMatrix<T>,
) -> Result<QuadraticObjective<T>> {
    if a.shape() != g.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: g.len(),
        });
    }
    let k = a.len();
    QuadraticObjective::new(
        DMatrix::identity(k, k),
        DVector::from_column_slice(a.as_slice()),
        DVector::from_column_slice(g.as_slice()),
    )
}

pub fn vectorize<T: Scalar>(x: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(x.as_slice())
}

pub fn unvectorize<T: Scalar>(x: &DVector<T>, rows: usize, cols: usize) -> DMatrix<T> {
    DMatrix::from_column_slice(rows, cols, x.as_slice())
}

/// Iterative thresholding over matrices, with the objective defined on
/// column-major `vec(X)`.
pub fn iterate_threshold_matrix<T, O>(
    obj: &O,
    lifted: &LiftedOperator<T>,
    x0: &DMatrix<T>,
    rule: StepRule<T>,
    steps: usize,
) -> Result<IterateTrace<T>>
where
    T: Scalar,
    O: SmoothObjective<T> + ?Sized,
{
    if obj.dim() != lifted.rows * lifted.cols {
        return Err(Error::DimensionMismatch {
            expected: lifted.rows * lifted.cols,
            got: obj.dim(),
        });
    }
    iterate(obj, lifted, &vectorize(x0), rule, steps, None)
}

/// Matrix analogue of the stationary trap, built from the diagonal
/// embedding of the all-ones spectral witness.
pub fn build_matrix_trap<T: Scalar>(
    lifted: &LiftedOperator<T>,
    query: MatrixConcavityQuery,
    alpha: T,
    beta: T,
) -> Result<TrapInstance<T>> {
    let (n, m) = (query.n, query.m);
    let k = n.min(m);
    let z = diag_embed(&DVector::from_element(k, T::one()), n, m);
    let cand = spectral_candidate(lifted, z, query.s_prime)?.ok_or(Error::DegenerateWitness)?;
    let x = lifted.apply(&cand.z)?;
    trap_from_witness(
        vectorize(&cand.y),
        vectorize(&cand.z),
        vectorize(&x),
        alpha,
        beta,
    )
}
