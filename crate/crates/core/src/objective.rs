//! Smooth objectives with certified curvature bounds.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A differentiable objective whose curvature between any two points lies in
/// `[alpha, beta]`.
pub trait SmoothObjective<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<T>) -> Result<T>;
    fn grad(&self, x: &DVector<T>) -> Result<DVector<T>>;
    fn alpha(&self) -> T;
    fn beta(&self) -> T;

    fn kappa(&self) -> T {
        self.beta() / self.alpha()
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `f(x) = 1/2 (x-m)^T H (x-m) + g^T (x-m)` with `alpha <= eig(H) <= beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective<T: Scalar> {
    h: DMatrix<T>,
    m: DVector<T>,
    g: DVector<T>,
    alpha: T,
    beta: T,
}

fn spectrum<T: Scalar>(h: &DMatrix<T>) -> (T, T) {
    let eig = SymmetricEigen::new(h.clone());
    (eig.eigenvalues.min(), eig.eigenvalues.max())
}

impl<T: Scalar> QuadraticObjective<T> {
    /// Builds the objective with `alpha`, `beta` set to the extreme
    /// eigenvalues of `h`.
    pub fn new(h: DMatrix<T>, m: DVector<T>, g: DVector<T>) -> Result<Self> {
        Self::validate(&h, &m, &g)?;
        let (alpha, beta) = spectrum(&h);
        Ok(Self {
            h,
            m,
            g,
            alpha,
            beta,
        })
    }

    /// Builds the objective with caller-supplied bounds, verified against the
    /// eigenvalues of `h` up to `1e-9` relative tolerance.
    pub fn with_bounds(
        h: DMatrix<T>,
        m: DVector<T>,
        g: DVector<T>,
        alpha: T,
        beta: T,
    ) -> Result<Self> {
        Self::validate(&h, &m, &g)?;
        let (min_eig, max_eig) = spectrum(&h);
        let tol = T::lit(1e-9) * T::one().max(beta.abs());
        if min_eig < alpha - tol || max_eig > beta + tol || alpha > beta {
            return Err(Error::SpectrumViolation {
                min_eig: min_eig.as_f64(),
                max_eig: max_eig.as_f64(),
                alpha: alpha.as_f64(),
                beta: beta.as_f64(),
            });
        }
        Ok(Self {
            h,
            m,
            g,
            alpha,
            beta,
        })
    }

    /// `f(x) = 1/2 ||x - u||^2`.
    pub fn distance_to(u: DVector<T>) -> Self {
        let d = u.len();
        Self {
            h: DMatrix::identity(d, d),
            m: u,
            g: DVector::zeros(d),
            alpha: T::one(),
            beta: T::one(),
        }
    }

    fn validate(h: &DMatrix<T>, m: &DVector<T>, g: &DVector<T>) -> Result<()> {
        if !h.is_square() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                got: h.ncols(),
            });
        }
        check_dim(h.nrows(), m.len())?;
        check_dim(h.nrows(), g.len())?;
        let asym = (h - h.transpose()).amax();
        let scale = T::one().max(h.amax());
        if asym > T::lit(1e-12) * scale {
            return Err(Error::NotSymmetric {
                asymmetry: asym.as_f64(),
            });
        }
        Ok(())
    }

    /// Random instance with eigenvalues spread over `[alpha, beta]` (both
    /// endpoints attained), Haar-like eigenvectors, and Gaussian `m`, `g`.
    pub fn random<R: Rng + ?Sized>(d: usize, alpha: T, beta: T, rng: &mut R) -> Result<Self> {
        if d == 0 || !(alpha > T::zero()) || alpha > beta {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha.as_f64(),
                reason: "need d >= 1 and 0 < alpha <= beta",
            });
        }
        let q: DMatrix<T> = random_orthogonal(d, rng);
        let eigs = DVector::from_fn(d, |i, _| match i {
            0 => alpha,
            1 => beta,
            _ => alpha + (beta - alpha) * T::lit(rng.random::<f64>()),
        });
        let mut h: DMatrix<T> = &q * DMatrix::from_diagonal(&eigs) * q.transpose();
        h = (&h + h.transpose()) * T::lit(0.5);
        let m = gaussian_vector(d, rng);
        let g = gaussian_vector(d, rng) * T::lit(0.1);
        Self::with_bounds(h, m, g, alpha, beta)
    }

    pub fn hessian(&self) -> &DMatrix<T> {
        &self.h
    }

    pub fn center(&self) -> &DVector<T> {
        &self.m
    }

    pub fn linear(&self) -> &DVector<T> {
        &self.g
    }

    /// Minimizer of `f` over vectors supported on `support`
    /// (`H_SS x_S = (H m - g)_S`). Requires `alpha > 0`.
    pub fn restricted_minimizer(&self, support: &[usize]) -> Result<DVector<T>> {
        let d = self.m.len();
        let rhs_full = &self.h * &self.m - &self.g;
        let k = support.len();
        let mut x = DVector::zeros(d);
        if k == 0 {
            return Ok(x);
        }
        let hss = DMatrix::from_fn(k, k, |a, b| self.h[(support[a], support[b])]);
        let rhs = DVector::from_fn(k, |a, _| rhs_full[support[a]]);
        let sol = hss
            .cholesky()
            .ok_or(Error::InvalidParameter {
                name: "alpha",
                value: self.alpha.as_f64(),
                reason: "restricted Hessian is not positive definite",
            })?
            .solve(&rhs);
        for (a, &i) in support.iter().enumerate() {
            x[i] = sol[a];
        }
        Ok(x)
    }

    /// Unconstrained minimizer `m - H^{-1} g`.
    pub fn minimizer(&self) -> Result<DVector<T>> {
        let all: Vec<usize> = (0..self.m.len()).collect();
        self.restricted_minimizer(&all)
    }
}

impl<T: Scalar> SmoothObjective<T> for QuadraticObjective<T> {
    fn dim(&self) -> usize {
        self.m.len()
    }

    fn value(&self, x: &DVector<T>) -> Result<T> {
        check_dim(self.m.len(), x.len())?;
        let r = x - &self.m;
        Ok(T::lit(0.5) * r.dot(&(&self.h * &r)) + self.g.dot(&r))
    }

    fn grad(&self, x: &DVector<T>) -> Result<DVector<T>> {
        check_dim(self.m.len(), x.len())?;
        Ok(&self.h * (x - &self.m) + &self.g)
    }

    fn alpha(&self) -> T {
        self.alpha
    }

    fn beta(&self) -> T {
        self.beta
    }
}

/// Vector of independent standard normal entries.
pub fn gaussian_vector<T: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<T> {
    DVector::from_fn(d, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)))
}

/// Orthogonal factor of the QR decomposition of a Gaussian matrix, with the
/// sign convention that makes the distribution Haar.
pub fn random_orthogonal<T: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<T> {
    let a = DMatrix::from_fn(d, d, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < T::zero() {
            q.column_mut(j).neg_mut();
        }
    }
    q
}
