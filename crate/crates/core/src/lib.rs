//! Imputation-regularized optimization (IRO) for high-dimensional generalized
//! linear models whose covariates are only seen through noisy replicates.
//!
//! The crate is organized bottom-up:
//!
//! - [`rng`]: seedable, stream-addressable random number generation.
//! - [`linalg`]: the diagonal-plus-rank-1 precision structure used by every
//!   imputation step.
//! - [`polya_gamma`]: exact and series samplers for Pólya-Gamma variables.
//! - [`solvers`]: penalized coordinate-descent fits (lasso, MCP, scaled lasso),
//!   lambda grids and k-fold cross-validation.
//! - [`eiv`]: replicate datasets, noise-precision estimation and the
//!   imputation full conditionals for each response family.
//! - [`iro`]: the imputation / regularized-optimization loop, coefficient
//!   traces, aggregation, convergence diagnostics and checkpoints.
//! - [`sim`]: simulation designs, metrics and experiment tables.
//!
//! Numerical code is generic over [`Scalar`] (implemented for `f32` and
//! `f64`); the `*64` aliases at the crate root fix the scalar to `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub mod eiv;
pub mod error;
pub mod iro;
pub mod linalg;
pub mod polya_gamma;
pub mod rng;
pub mod sim;
pub mod solvers;

pub use error::{Error, Result};
pub use rng::RngStream;

/// Floating point scalar the numerical core is written against.
pub trait Scalar:
    num_traits::Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + ScalarOperand
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type DiagRank1Precision64 = linalg::DiagRank1Precision<f64>;
pub type ReplicateDataset64 = eiv::ReplicateDataset<f64>;
pub type PrecisionPair64 = eiv::PrecisionPair<f64>;
pub type FamilySpec64 = solvers::FamilySpec<f64>;
pub type PenaltySpec64 = solvers::PenaltySpec<f64>;
pub type FitResult64 = solvers::FitResult<f64>;
pub type IroConfig64 = iro::IroConfig<f64>;
pub type IroResult64 = iro::IroResult<f64>;
pub type CoefficientTrace64 = iro::CoefficientTrace<f64>;
