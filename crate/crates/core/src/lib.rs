//! Thresholding operators for sparse and low-rank optimization, their
//! relative concavity, and the iterative thresholding solvers built on them.
//!
//! Everything numeric is generic over [`Scalar`] (implemented for `f32` and
//! `f64`). The `f64` aliases at the crate root are what the CLI and the
//! experiment harnesses use.

pub mod adversarial;
pub mod concavity;
pub mod error;
pub mod lowrank;
pub mod objective;
pub mod operators;
pub mod regression;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use concavity::{ConcavityQuery, ConcavityReport, SearchBudget};
pub use objective::{QuadraticObjective, SmoothObjective};
pub use operators::{ShrinkageFunction, Support, ThresholdLevel, ThresholdingOperator};
pub use solver::{IterateTrace, StepRule, Thresholder};

/// Dense column vector in double precision.
pub type Vector = nalgebra::DVector<f64>;
/// Dense column-major matrix in double precision.
pub type Matrix = nalgebra::DMatrix<f64>;
pub type Operator = operators::ThresholdingOperator<f64>;
pub type Shrinkage = operators::ShrinkageFunction<f64>;
pub type Quadratic = objective::QuadraticObjective<f64>;
pub type Trace = solver::IterateTrace<f64>;
pub type Report = concavity::ConcavityReport<f64>;

pub type Lifted = lowrank::LiftedOperator<f64>;
pub type Instance = regression::RegressionInstance<f64>;
