//! Sparse linear regression: synthetic designs with controlled conditioning,
//! iterative thresholding and Lasso estimators, and prediction-error checks
//! against the high-probability bound for shrinking thresholding operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objective::{check_dim, random_orthogonal, SmoothObjective};
use crate::operators::ThresholdingOperator;
use crate::scalar::Scalar;
use crate::solver::{combinations, iterate, IterateTrace, L1Prox, StepRule};

/// How the design matrix is drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesignKind {
    /// Independent standard normal entries.
    IidGaussian,
    /// Gram spectrum log-spaced over `[1/kappa, 1]` with Haar eigenvectors.
    /// When `d <= n` the realized `X^T X / n` has exactly this spectrum;
    /// otherwise it is the population covariance.
    CorrelatedGaussian { kappa: f64 },
    /// Identity covariance except on the first `block` coordinates, where it
    /// is `I - (1 - 1/kappa) u u^T` with `u` the normalized all-ones vector:
    /// one ill-conditioned direction spread evenly over the block.
    AdversarialBlock { kappa: f64, block: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub n: usize,
    pub d: usize,
    /// Rescale every column with `||X_j|| > sqrt(n)` down to `sqrt(n)`.
    pub normalize: bool,
}

impl DesignSpec {
    pub fn iid(n: usize, d: usize) -> Self {
        Self {
            kind: DesignKind::IidGaussian,
            n,
            d,
            normalize: false,
        }
    }

    pub fn correlated(n: usize, d: usize, kappa: f64) -> Self {
        Self {
            kind: DesignKind::CorrelatedGaussian { kappa },
            n,
            d,
            normalize: false,
        }
    }

    pub fn adversarial_block(n: usize, d: usize, kappa: f64, block: usize) -> Self {
        Self {
            kind: DesignKind::AdversarialBlock { kappa, block },
            n,
            d,
            normalize: false,
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InfeasibleSpec("n and d must be positive".into()));
        }
        match self.kind {
            DesignKind::IidGaussian => Ok(()),
            DesignKind::CorrelatedGaussian { kappa } => check_kappa(kappa),
            DesignKind::AdversarialBlock { kappa, block } => {
                check_kappa(kappa)?;
                if block == 0 || block > self.d {
                    return Err(Error::InfeasibleSpec(format!(
                        "block size {block} must lie in [1, d = {}]",
                        self.d
                    )));
                }
                Ok(())
            }
        }
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa.is_finite() && kappa >= 1.0 {
        Ok(())
    } else {
        Err(Error::InfeasibleSpec(format!(
            "condition number {kappa} must be >= 1"
        )))
    }
}

/// Where the curvature bounds `(alpha, beta)` were verified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertScope {
    /// Full Gram spectrum (`d <= n`).
    Full,
    /// Gram spectrum of the adversarial block only.
    Block,
    /// Not certified; `alpha = 0` and `beta` is the global Lipschitz constant.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditioning<T> {
    pub alpha: T,
    pub beta: T,
    /// Largest eigenvalue of `X^T X / n`; a safe inverse step size.
    pub lipschitz: T,
    pub scope: CertScope,
}

impl<T: Scalar> Conditioning<T> {
    pub fn kappa(&self) -> Option<T> {
        (self.scope != CertScope::None && self.alpha > T::zero()).then(|| self.beta / self.alpha)
    }
}

/// `y = X theta0 + sigma z` with everything needed to regenerate it.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionInstance<T: Scalar> {
    pub spec: DesignSpec,
    pub x: DMatrix<T>,
    pub theta0: DVector<T>,
    pub s0: usize,
    pub sigma: T,
    pub amplitude: T,
    pub y: DVector<T>,
    pub seed: u64,
    pub conditioning: Conditioning<T>,
}

impl<T: Scalar> RegressionInstance<T> {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    /// Indices of the nonzero true coefficients.
    pub fn true_support(&self) -> Vec<usize> {
        support_of(&self.theta0)
    }

    /// Rebuilds the instance from its stored parameters.
    pub fn regenerate(&self) -> Result<Self> {
        generate_instance_with(self.spec, self.s0, self.sigma, self.amplitude, self.seed)
    }

    /// `||X (theta - theta0)||^2 / n`.
    pub fn prediction_error(&self, theta: &DVector<T>) -> Result<T> {
        check_dim(self.d(), theta.len())?;
        let r = &self.x * (theta - &self.theta0);
        Ok(r.norm_squared() / T::lit(self.n() as f64))
    }

    pub fn objective(&self) -> LeastSquares<'_, T> {
        LeastSquares { inst: self }
    }
}

fn support_of<T: Scalar>(v: &DVector<T>) -> Vec<usize> {
    (0..v.len()).filter(|&i| v[i] != T::zero()).collect()
}

/// Amplitude-1 instance; see [`generate_instance_with`].
pub fn generate_instance<T: Scalar>(
    spec: DesignSpec,
    s0: usize,
    sigma: T,
    seed: u64,
) -> Result<RegressionInstance<T>> {
    generate_instance_with(spec, s0, sigma, T::one(), seed)
}

/// Draws the design, then `s0` support positions uniformly at random (inside
/// the block for adversarial designs when it is large enough) with values
/// `+-amplitude`, then the noise. Deterministic in `seed`.
pub fn generate_instance_with<T: Scalar>(
    spec: DesignSpec,
    s0: usize,
    sigma: T,
    amplitude: T,
    seed: u64,
) -> Result<RegressionInstance<T>> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    if s0 > d {
        return Err(Error::InfeasibleSpec(format!("s0 = {s0} exceeds d = {d}")));
    }
    if !(sigma >= T::zero()) || !amplitude.is_finite() {
        return Err(Error::InfeasibleSpec(
            "sigma must be >= 0 and amplitude finite".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = draw_design::<T>(&spec, &mut rng);
    if spec.normalize {
        let sqrt_n = T::lit(n as f64).sqrt();
        for mut col in x.column_iter_mut() {
            let scale = col.norm() / sqrt_n;
            if scale > T::one() {
                col /= scale;
            }
        }
    }

    let pool = match spec.kind {
        DesignKind::AdversarialBlock { block, .. } if block >= s0 => block,
        _ => d,
    };
    let mut positions = sample(&mut rng, pool, s0).into_vec();
    positions.sort_unstable();
    let mut theta0 = DVector::zeros(d);
    for &i in &positions {
        theta0[i] = if rng.random::<bool>() {
            amplitude
        } else {
            -amplitude
        };
    }
    let noise = DVector::from_fn(n, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
    let y = &x * &theta0 + noise * sigma;
    let conditioning = certify(&x, &spec);
    Ok(RegressionInstance {
        spec,
        x,
        theta0,
        s0,
        sigma,
        amplitude,
        y,
        seed,
        conditioning,
    })
}

fn gaussian_matrix<T: Scalar>(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<T> {
    DMatrix::from_fn(n, d, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)))
}

fn log_spaced<T: Scalar>(d: usize, kappa: f64) -> DVector<T> {
    DVector::from_fn(d, |i, _| {
        let frac = if d > 1 {
            i as f64 / (d - 1) as f64
        } else {
            0.0
        };
        T::lit(kappa.powf(-frac))
    })
}

/// `X = sqrt(n) Q S` with `Q` an orthonormal `n x d` frame, so that
/// `X^T X / n = S^T S` exactly.
fn exact_design<T: Scalar>(n: usize, s: &DMatrix<T>, rng: &mut ChaCha8Rng) -> DMatrix<T> {
    let d = s.nrows();
    let q = gaussian_matrix::<T>(n, d, rng).qr().q();
    q * s * T::lit(n as f64).sqrt()
}

/// Symmetric square root of `I - (1 - 1/kappa) u u^T` on the block.
fn block_root<T: Scalar>(d: usize, kappa: f64, block: usize) -> DMatrix<T> {
    let mut s = DMatrix::identity(d, d);
    let shrink = T::lit(1.0 - kappa.powf(-0.5)) / T::lit(block as f64);
    for i in 0..block {
        for j in 0..block {
            s[(i, j)] -= shrink;
        }
    }
    s
}

fn draw_design<T: Scalar>(spec: &DesignSpec, rng: &mut ChaCha8Rng) -> DMatrix<T> {
    let (n, d) = (spec.n, spec.d);
    match spec.kind {
        DesignKind::IidGaussian => gaussian_matrix(n, d, rng),
        DesignKind::CorrelatedGaussian { kappa } => {
            let v: DMatrix<T> = random_orthogonal(d, rng);
            let roots = log_spaced::<T>(d, kappa).map(|l| l.sqrt());
            if d <= n {
                exact_design(n, &(DMatrix::from_diagonal(&roots) * v.transpose()), rng)
            } else {
                let root = &v * DMatrix::from_diagonal(&roots) * v.transpose();
                gaussian_matrix::<T>(n, d, rng) * root
            }
        }
        DesignKind::AdversarialBlock { kappa, block } => {
            let root = block_root::<T>(d, kappa, block);
            if d <= n {
                exact_design(n, &root, rng)
            } else {
                gaussian_matrix::<T>(n, d, rng) * root
            }
        }
    }
}

fn extreme_eigs<T: Scalar>(m: DMatrix<T>) -> (T, T) {
    let e = SymmetricEigen::new(m).eigenvalues;
    (e.min(), e.max())
}

fn certify<T: Scalar>(x: &DMatrix<T>, spec: &DesignSpec) -> Conditioning<T> {
    let (n, d) = (spec.n, spec.d);
    let nf = T::lit(n as f64);
    if d <= n {
        let (alpha, beta) = extreme_eigs(x.tr_mul(x) / nf);
        return Conditioning {
            alpha,
            beta,
            lipschitz: beta,
            scope: CertScope::Full,
        };
    }
    let (_, lipschitz) = extreme_eigs(x * x.transpose() / nf);
    match spec.kind {
        DesignKind::AdversarialBlock { block, .. } if block <= n => {
            let xb = x.columns(0, block);
            let (alpha, beta) = extreme_eigs(xb.tr_mul(&xb) / nf);
            Conditioning {
                alpha,
                beta,
                lipschitz,
                scope: CertScope::Block,
            }
        }
        _ => Conditioning {
            alpha: T::zero(),
            beta: lipschitz,
            lipschitz,
            scope: CertScope::None,
        },
    }
}

/// `f(theta) = ||y - X theta||^2 / (2n)`.
///
/// `alpha()` is the certified lower curvature on the full space (0 unless
/// `d <= n`), `beta()` the largest eigenvalue of `X^T X / n`.
#[derive(Debug, Clone, Copy)]
pub struct LeastSquares<'a, T: Scalar> {
    inst: &'a RegressionInstance<T>,
}

impl<T: Scalar> LeastSquares<'_, T> {
    fn residual(&self, theta: &DVector<T>) -> Result<DVector<T>> {
        check_dim(self.inst.d(), theta.len())?;
        Ok(&self.inst.y - &self.inst.x * theta)
    }
}

impl<T: Scalar> SmoothObjective<T> for LeastSquares<'_, T> {
    fn dim(&self) -> usize {
        self.inst.d()
    }

    fn value(&self, theta: &DVector<T>) -> Result<T> {
        let r = self.residual(theta)?;
        Ok(r.norm_squared() / T::lit(2.0 * self.inst.n() as f64))
    }

    fn grad(&self, theta: &DVector<T>) -> Result<DVector<T>> {
        let r = self.residual(theta)?;
        Ok(self.inst.x.tr_mul(&r) / T::lit(-(self.inst.n() as f64)))
    }

    fn alpha(&self) -> T {
        let c = &self.inst.conditioning;
        if c.scope == CertScope::Full {
            c.alpha
        } else {
            T::zero()
        }
    }

    fn beta(&self) -> T {
        self.inst.conditioning.lipschitz
    }
}

/// Constants of the prediction-error bound: condition number `kappa`,
/// sparsity inflation `c` (with `s = c kappa s0`), and failure probability
/// `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams<T> {
    pub kappa: T,
    pub c: T,
    pub delta: T,
}

impl<T: Scalar> BoundParams<T> {
    pub fn new(kappa: T, c: T, delta: T) -> Result<Self> {
        if !(kappa >= T::one()) {
            return Err(Error::InvalidParameter {
                name: "kappa",
                value: kappa.as_f64(),
                reason: "must be >= 1",
            });
        }
        if !(c * kappa > T::lit(2.0)) {
            return Err(Error::InvalidParameter {
                name: "c",
                value: c.as_f64(),
                reason: "need c * kappa > 2",
            });
        }
        if !(delta > T::zero() && delta <= T::one()) {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: delta.as_f64(),
                reason: "must lie in (0, 1]",
            });
        }
        Ok(Self { kappa, c, delta })
    }

    /// `kappa`, `c = 3`, `delta = 0.05`.
    pub fn standard(kappa: T) -> Result<Self> {
        Self::new(kappa, T::lit(3.0), T::lit(0.05))
    }

    /// `ceil(c kappa s0)`.
    pub fn sparsity(&self, s0: usize) -> usize {
        (self.c * self.kappa * T::lit(s0 as f64)).ceil().as_f64() as usize
    }
}

/// Right side of the prediction-error bound after `t` steps:
/// `kappa 28 c sigma^2 s0 log d / n + 12 sigma^2 log(1/delta) / n
///  + ((1 - 1/kappa) / (1 - 2/(c kappa)))^t 2 beta ||theta_hat0 - theta0||^2`.
#[allow(clippy::too_many_arguments)]
pub fn prediction_bound<T: Scalar>(
    params: &BoundParams<T>,
    sigma: T,
    s0: usize,
    d: usize,
    n: usize,
    t: usize,
    beta: T,
    init_dist2: T,
) -> T {
    let BoundParams { kappa, c, delta } = *params;
    let s2 = sigma * sigma;
    let nf = T::lit(n as f64);
    let stat = kappa * T::lit(28.0) * c * s2 * T::lit(s0 as f64) * T::lit(d as f64).ln() / nf;
    let tail = T::lit(12.0) * s2 * (T::one() / delta).ln() / nf;
    let factor = (T::one() - T::one() / kappa) / (T::one() - T::lit(2.0) / (c * kappa));
    let geo = if factor == T::zero() {
        T::zero()
    } else {
        factor.powi(t as i32) * T::lit(2.0) * beta * init_dist2
    };
    stat + tail + geo
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport<T> {
    /// `||X (theta_hat - theta0)||^2 / n`.
    pub prediction_error: T,
    pub nnz: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Running-minimum objective after each step.
    pub f_trajectory: Vec<T>,
    pub iterations: usize,
    pub bound_rhs: T,
}

impl<T: Scalar> ErrorReport<T> {
    pub fn violates_bound(&self) -> bool {
        self.prediction_error > self.bound_rhs
    }

    fn build(
        inst: &RegressionInstance<T>,
        theta: &DVector<T>,
        trace: &IterateTrace<T>,
        bound: &BoundParams<T>,
    ) -> Result<Self> {
        let truth = inst.true_support();
        let est = support_of(theta);
        let tp = est
            .iter()
            .filter(|i| truth.binary_search(i).is_ok())
            .count();
        let c = &inst.conditioning;
        let beta = if c.scope == CertScope::None {
            c.lipschitz
        } else {
            c.beta
        };
        let init_dist2 = (&trace.x0 - &inst.theta0).norm_squared();
        Ok(Self {
            prediction_error: inst.prediction_error(theta)?,
            nnz: est.len(),
            true_positives: tp,
            false_positives: est.len() - tp,
            false_negatives: truth.len() - tp,
            f_trajectory: trace.steps.iter().map(|s| s.best_f).collect(),
            iterations: trace.len(),
            bound_rhs: prediction_bound(
                bound,
                inst.sigma,
                inst.s0,
                inst.d(),
                inst.n(),
                trace.len(),
                beta,
                init_dist2,
            ),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit<T: Scalar> {
    pub theta: DVector<T>,
    pub report: ErrorReport<T>,
    /// Proximal-gradient optimality residual (Lasso fits only).
    pub kkt_residual: Option<T>,
}

/// Iterative thresholding from `theta = 0` at sparsity `min(s, d)`; returns
/// the iterate with the smallest objective among steps `1..=steps`.
pub fn fit_iterative<T: Scalar>(
    inst: &RegressionInstance<T>,
    op: &ThresholdingOperator<T>,
    s: usize,
    rule: StepRule<T>,
    steps: usize,
    bound: &BoundParams<T>,
) -> Result<Fit<T>> {
    let op = op.with_sparsity(s.clamp(1, inst.d()));
    let trace = iterate(
        &inst.objective(),
        &op,
        &DVector::zeros(inst.d()),
        rule,
        steps,
        None,
    )?;
    let theta = trace.best_x.clone();
    let report = ErrorReport::build(inst, &theta, &trace, bound)?;
    Ok(Fit {
        theta,
        report,
        kkt_residual: None,
    })
}

/// `2 sigma sqrt(log d / n)`.
pub fn default_lasso_lambda<T: Scalar>(sigma: T, d: usize, n: usize) -> T {
    T::lit(2.0) * sigma * (T::lit(d as f64).ln() / T::lit(n as f64)).sqrt()
}

/// `beta ||theta - prox_{lambda/beta}(theta - grad f(theta) / beta)||`, zero
/// exactly at Lasso solutions.
pub fn lasso_kkt_residual<T: Scalar>(
    inst: &RegressionInstance<T>,
    lambda: T,
    theta: &DVector<T>,
) -> Result<T> {
    let obj = inst.objective();
    let beta = obj.beta();
    let g = obj.grad(theta)?;
    let next = crate::operators::prox_l1(&(theta - g / beta), lambda / beta);
    Ok((theta - next).norm() * beta)
}

/// Proximal gradient with step `1/beta` on
/// `||y - X theta||^2 / (2n) + lambda ||theta||_1` from zero, stopping once
/// the optimality residual is below `1e-8` or after `steps` steps.
pub fn fit_lasso_baseline<T: Scalar>(
    inst: &RegressionInstance<T>,
    lambda: T,
    steps: usize,
    bound: &BoundParams<T>,
) -> Result<Fit<T>> {
    if !(lambda >= T::zero()) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda.as_f64(),
            reason: "must be nonnegative",
        });
    }
    let obj = inst.objective();
    let tol = T::lit(1e-8) / obj.beta();
    let trace = iterate(
        &obj,
        &L1Prox { lambda },
        &DVector::zeros(inst.d()),
        StepRule::Fixed,
        steps,
        Some(tol),
    )?;
    let theta = trace.last_x().clone();
    let report = ErrorReport::build(inst, &theta, &trace, bound)?;
    let kkt = lasso_kkt_residual(inst, lambda, &theta)?;
    Ok(Fit {
        theta,
        report,
        kkt_residual: Some(kkt),
    })
}

/// `2 sqrt(delta (1 - delta) / reps)`: two binomial standard deviations.
pub fn binomial_slack(delta: f64, reps: usize) -> f64 {
    2.0 * (delta * (1.0 - delta) / reps as f64).sqrt()
}

/// Seed for replicate `rep` of configuration `config` under a base seed.
pub fn replicate_seed(seed: u64, config: u64, rep: u64) -> u64 {
    let mut z = seed
        .wrapping_add(config.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(rep.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSummary {
    pub reps: usize,
    pub violations: usize,
    pub delta: f64,
    /// Per-replicate `(seed, prediction_error, bound_rhs)` in replicate order.
    pub records: Vec<(u64, f64, f64)>,
}

impl CoverageSummary {
    pub fn rate(&self) -> f64 {
        self.violations as f64 / self.reps as f64
    }

    /// Violation rate within `delta` plus the binomial slack.
    pub fn passes(&self) -> bool {
        self.rate() <= self.delta + binomial_slack(self.delta, self.reps)
    }
}

/// Monte Carlo coverage of the prediction-error bound over `reps` instances
/// with seeds `replicate_seed(seed, 0, r)`. `s = bound.sparsity(s0)`.
#[allow(clippy::too_many_arguments)]
pub fn coverage_experiment<T: Scalar>(
    spec: DesignSpec,
    s0: usize,
    sigma: T,
    op: &ThresholdingOperator<T>,
    rule: StepRule<T>,
    steps: usize,
    bound: &BoundParams<T>,
    reps: usize,
    seed: u64,
) -> Result<CoverageSummary> {
    let s = bound.sparsity(s0);
    let records = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let rs = replicate_seed(seed, 0, r);
            let inst = generate_instance(spec, s0, sigma, rs)?;
            let fit = fit_iterative(&inst, op, s, rule, steps, bound)?;
            Ok((
                rs,
                fit.report.prediction_error.as_f64(),
                fit.report.bound_rhs.as_f64(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = records.iter().filter(|(_, e, b)| e > b).count();
    Ok(CoverageSummary {
        reps,
        violations,
        delta: bound.delta.as_f64(),
        records,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingConfig {
    pub kappas: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub s0: usize,
    pub sigma: f64,
    pub c: f64,
    pub steps: usize,
    pub reps: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            kappas: vec![1.0, 2.0, 4.0, 8.0],
            n: 400,
            d: 80,
            s0: 4,
            sigma: 1.0,
            c: 3.0,
            steps: 500,
            reps: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub kappa: f64,
    pub operator: String,
    pub sparsity: usize,
    pub mean_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `log(mean_error)` against `log(kappa)`, per
    /// operator in input order.
    pub slopes: Vec<(String, f64)>,
}

/// Least-squares slope of `log y` on `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Mean prediction error against condition number on correlated designs
/// whose Gram spectrum spans `[1/kappa, 1]`, each operator run at
/// `s = min(ceil(c kappa s0), d)` with fixed step `1/beta`. Every operator
/// sees the same instances.
pub fn condition_scaling_experiment(
    config: &ScalingConfig,
    ops: &[ThresholdingOperator<f64>],
    seed: u64,
) -> Result<ScalingTable> {
    condition_scaling_with(config, ops, seed, |kappa| {
        DesignSpec::correlated(config.n, config.d, kappa)
    })
}

/// [`condition_scaling_experiment`] with a caller-chosen design per `kappa`.
pub fn condition_scaling_with(
    config: &ScalingConfig,
    ops: &[ThresholdingOperator<f64>],
    seed: u64,
    design: impl Fn(f64) -> DesignSpec + Sync,
) -> Result<ScalingTable> {
    let jobs: Vec<(usize, u64)> = (0..config.kappas.len())
        .flat_map(|k| (0..config.reps as u64).map(move |r| (k, r)))
        .collect();
    let errors = jobs
        .par_iter()
        .map(|&(k, r)| {
            let kappa = config.kappas[k];
            let inst = generate_instance(
                design(kappa),
                config.s0,
                config.sigma,
                replicate_seed(seed, k as u64, r),
            )?;
            let bound = BoundParams::new(kappa, config.c, 0.05)?;
            let s = bound.sparsity(config.s0).min(config.d);
            ops.iter()
                .map(|op| {
                    Ok(
                        fit_iterative(&inst, op, s, StepRule::Fixed, config.steps, &bound)?
                            .report
                            .prediction_error,
                    )
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (k, &kappa) in config.kappas.iter().enumerate() {
        let s = ((config.c * kappa * config.s0 as f64).ceil() as usize).min(config.d);
        for (o, op) in ops.iter().enumerate() {
            let total: f64 = errors[k * config.reps..(k + 1) * config.reps]
                .iter()
                .map(|e| e[o])
                .sum();
            rows.push(ScalingRow {
                kappa,
                operator: op.shrink.label(),
                sparsity: s,
                mean_error: total / config.reps as f64,
            });
        }
    }
    let slopes = ops
        .iter()
        .enumerate()
        .map(|(o, op)| {
            let ys: Vec<f64> = (0..config.kappas.len())
                .map(|k| rows[k * ops.len() + o].mean_error)
                .collect();
            (op.shrink.label(), log_log_slope(&config.kappas, &ys))
        })
        .collect();
    Ok(ScalingTable { rows, slopes })
}

/// Largest support count for which the union-bound check is enumerated.
pub const MAX_UNION_BOUND_DIM: usize = 12;

/// Noise-projection threshold `7 s log d + 3 log(1/delta)`.
pub fn union_bound_threshold(d: usize, s: usize, delta: f64) -> f64 {
    7.0 * s as f64 * (d as f64).ln() + 3.0 * (1.0 / delta).ln()
}

/// For a Gaussian `n x d` design and random `s`-sparse true support `A0`,
/// draws `reps` noise vectors `z` and returns `max_{|A| = s} ||U_A^T z||^2`
/// for each, with `U_A` an orthonormal basis of the columns `A u A0`.
pub fn projected_noise_statistics(
    d: usize,
    s: usize,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if d > MAX_UNION_BOUND_DIM {
        return Err(Error::EnumerationTooLarge(format!(
            "d = {d} exceeds {MAX_UNION_BOUND_DIM}"
        )));
    }
    if s == 0 || s > d || n < 2 * s.min(d) {
        return Err(Error::InfeasibleSpec(format!(
            "need 1 <= s <= d and n >= 2s (s = {s}, d = {d}, n = {n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian_matrix::<f64>(n, d, &mut rng);
    let mut a0 = sample(&mut rng, d, s).into_vec();
    a0.sort_unstable();
    let bases: Vec<DMatrix<f64>> = combinations(d, s)
        .into_iter()
        .map(|a| {
            let mut cols = a;
            cols.extend_from_slice(&a0);
            cols.sort_unstable();
            cols.dedup();
            x.select_columns(&cols).qr().q().transpose()
        })
        .collect();
    Ok((0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r + 1);
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            bases
                .iter()
                .map(|q| (q * &z).norm_squared())
                .fold(0.0, f64::max)
        })
        .collect())
}

/// Fraction of replicates whose noise projection exceeds
/// `7 s log d + 3 log(1/delta)`.
pub fn validate_lemma10(
    d: usize,
    s: usize,
    n: usize,
    delta: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) || reps == 0 {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "need delta in (0, 1] and reps >= 1",
        });
    }
    let stats = projected_noise_statistics(d, s, n, reps, seed)?;
    let thr = union_bound_threshold(d, s, delta);
    Ok(stats.iter().filter(|&&v| v > thr).count() as f64 / reps as f64)
}
