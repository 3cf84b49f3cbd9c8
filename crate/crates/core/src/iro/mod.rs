//! The imputation / regularized-optimization loop.
//!
//! Each iteration draws the latent covariates (and Pólya-Gamma latents for
//! binary and count responses) from their full conditionals given the previous
//! iteration's parameters, re-estimates diag Ω_x on the imputed design, and
//! refits the penalized model. Post burn-in coefficient vectors are kept and
//! aggregated coordinatewise.

mod aggregate;
mod engine;

use serde::{Deserialize, Serialize};

use crate::eiv::KappaConvention;
use crate::solvers::{FamilySpec, PenaltyKind, DEFAULT_MCP_GAMMA};
use crate::{Error, Result, Scalar};

pub use aggregate::{aggregate_coefficients, aggregate_values, split_chain_diagnostic, SplitChainDiagnostic};
pub use engine::{
    initialize, run_iro, Checkpoint, CoefficientTrace, Initialization, IroError, IroResult, IroRun, NoiseSpec,
    TraceEntry, CHECKPOINT_SCHEMA_VERSION,
};

/// Coordinatewise summary of the retained coefficient trace.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Aggregation {
    #[default]
    Median,
    Mean,
    /// Drops `⌊α·k⌋` values from each tail of `k` before averaging.
    Trimmed { alpha: f64 },
}

impl Aggregation {
    pub fn validate(&self) -> Result<()> {
        if let Aggregation::Trimmed { alpha } = *self {
            if !(0.0..0.5).contains(&alpha) {
                return Err(Error::domain(format!("trim fraction {alpha} must lie in [0, 0.5)")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Aggregation::Median => "median",
            Aggregation::Mean => "mean",
            Aggregation::Trimmed { .. } => "trimmed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IroConfig<T> {
    pub iterations: usize,
    pub burn_in: usize,
    pub family: FamilySpec<T>,
    pub penalty_kind: PenaltyKind,
    pub mcp_gamma: T,
    /// Cross-validate every this many iterations; in between, refit at the
    /// last selected λ from a warm start.
    pub tune_every: usize,
    pub folds: usize,
    pub grid_length: usize,
    /// Smallest grid λ as a fraction of λ_max; `None` picks 0.001 when
    /// `n > p` and 0.05 otherwise.
    pub grid_ratio: Option<T>,
    pub aggregation: Aggregation,
    pub kappa: KappaConvention,
    /// Keep burn-in iterations in the trace for diagnostics.
    pub retain_burn_in: bool,
    pub seed: u64,
}

impl<T: Scalar> Default for IroConfig<T> {
    fn default() -> Self {
        Self {
            iterations: 100,
            burn_in: 20,
            family: FamilySpec::gaussian(),
            penalty_kind: PenaltyKind::Mcp,
            mcp_gamma: T::of(DEFAULT_MCP_GAMMA),
            tune_every: 1,
            folds: 10,
            grid_length: 50,
            grid_ratio: None,
            aggregation: Aggregation::Median,
            kappa: KappaConvention::default(),
            retain_burn_in: false,
            seed: 0,
        }
    }
}

impl<T: Scalar> IroConfig<T> {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::domain("iterations must be >= 1"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::domain(format!(
                "burn-in {} must be smaller than iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.tune_every == 0 {
            return Err(Error::domain("tune_every must be >= 1"));
        }
        if self.penalty_kind != PenaltyKind::ScaledLasso {
            if self.folds < 2 || self.folds > n {
                return Err(Error::domain(format!(
                    "folds = {} must lie in 2..={n}",
                    self.folds
                )));
            }
            if self.grid_length < 2 {
                return Err(Error::domain("grid length must be >= 2"));
            }
        }
        if self.penalty_kind == PenaltyKind::ScaledLasso && !matches!(self.family, FamilySpec::Gaussian { .. }) {
            return Err(Error::domain("the scaled lasso requires a Gaussian family"));
        }
        if self.penalty_kind == PenaltyKind::Mcp && !(self.mcp_gamma > T::one()) {
            return Err(Error::domain(format!("MCP γ = {} must exceed 1", self.mcp_gamma)));
        }
        if let Some(r) = self.grid_ratio {
            if !(r > T::zero() && r < T::one()) {
                return Err(Error::domain(format!("grid ratio {r} must lie in (0, 1)")));
            }
        }
        self.aggregation.validate()?;
        self.family.validate(n)
    }

    pub(crate) fn grid_ratio_for(&self, n: usize, p: usize) -> T {
        self.grid_ratio
            .unwrap_or_else(|| if n > p { T::of(0.001) } else { T::of(0.05) })
    }
}
