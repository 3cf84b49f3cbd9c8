//! Penalized maximum-likelihood solvers.
//!
//! Gaussian fits minimize `(1/2n)‖y - Xβ‖² + Σ_j P(β_j; λ)` by cyclic
//! coordinate descent on a centered, unit-variance copy of the design.
//! Binomial-type fits (binomial, and the trial-count family used for count
//! responses) minimize the per-observation negative log-likelihood
//! `-(1/n) Σ [y_i ψ_i - m_i log(1 + e^{ψ_i})] + Σ_j P(β_j; λ)` with an
//! unpenalized intercept, using iteratively reweighted least squares whose
//! working weights are Pólya-Gamma means (a majorize-minimize scheme, so the
//! objective never increases between outer steps).

mod cv;
mod fit;
mod grid;
mod scaled;
mod standardize;
mod threshold;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

pub use cv::{cross_validate, CvResult};
pub use fit::{fit_path, fit_penalized, fit_penalized_warm, FitOptions, WarmStart};
pub use grid::{lambda_grid, lambda_max};
pub use scaled::{scaled_lasso, universal_lambda0};
pub use standardize::Standardized;
pub use threshold::{firm_threshold, mcp_penalty, penalty_value, soft_threshold, univariate_penalized};

/// Default MCP concavity.
pub const DEFAULT_MCP_GAMMA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyKind {
    Lasso,
    Mcp,
    ScaledLasso,
}

impl PenaltyKind {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::Lasso => "lasso",
            PenaltyKind::Mcp => "mcp",
            PenaltyKind::ScaledLasso => "scaled-lasso",
        }
    }
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(PenaltyKind::Lasso),
            "mcp" => Ok(PenaltyKind::Mcp),
            "scaled-lasso" => Ok(PenaltyKind::ScaledLasso),
            other => Err(Error::domain(format!(
                "unknown penalty `{other}` (expected lasso, mcp or scaled-lasso)"
            ))),
        }
    }
}

/// Penalty and its sparsity level. For `ScaledLasso`, `lambda` is the
/// scale-free level `λ0` and the effective lasso level is `λ0·σ̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec<T> {
    pub kind: PenaltyKind,
    pub lambda: T,
    pub mcp_gamma: T,
}

impl<T: Scalar> PenaltySpec<T> {
    pub fn lasso(lambda: T) -> Self {
        Self {
            kind: PenaltyKind::Lasso,
            lambda,
            mcp_gamma: T::of(DEFAULT_MCP_GAMMA),
        }
    }

    pub fn mcp(lambda: T, mcp_gamma: T) -> Self {
        Self {
            kind: PenaltyKind::Mcp,
            lambda,
            mcp_gamma,
        }
    }

    pub fn scaled_lasso(lambda0: T) -> Self {
        Self {
            kind: PenaltyKind::ScaledLasso,
            lambda: lambda0,
            mcp_gamma: T::of(DEFAULT_MCP_GAMMA),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= T::zero()) {
            return Err(Error::domain(format!("lambda = {} must be >= 0", self.lambda)));
        }
        if self.kind == PenaltyKind::Mcp && !(self.mcp_gamma > T::one()) {
            return Err(Error::domain(format!("MCP gamma = {} must exceed 1", self.mcp_gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Gaussian,
    Binomial,
    NegativeBinomial,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
            Family::NegativeBinomial => "negbin",
        }
    }
}

/// Response family together with its nuisance parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilySpec<T> {
    /// `y ~ N(xᵀβ, σ²)`; identity link.
    Gaussian { sigma2: T },
    /// `y ∈ {0, 1}`; logit link.
    Binomial,
    /// Counts `y_i` against fixed trial counts `m_i ≥ 1`, logit link. The
    /// trial counts are the Pólya-Gamma shapes of the augmentation.
    NegativeBinomial { trials: Vec<u32> },
}

impl<T: Scalar> FamilySpec<T> {
    pub fn gaussian() -> Self {
        FamilySpec::Gaussian { sigma2: T::one() }
    }

    pub fn family(&self) -> Family {
        match self {
            FamilySpec::Gaussian { .. } => Family::Gaussian,
            FamilySpec::Binomial => Family::Binomial,
            FamilySpec::NegativeBinomial { .. } => Family::NegativeBinomial,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            FamilySpec::Gaussian { sigma2 } => {
                if !(sigma2.is_finite() && *sigma2 > T::zero()) {
                    return Err(Error::domain(format!("sigma2 = {sigma2} must be > 0")));
                }
            }
            FamilySpec::Binomial => {}
            FamilySpec::NegativeBinomial { trials } => {
                Error::check_len("trial counts", n, trials.len())?;
                if let Some(i) = trials.iter().position(|&m| m == 0) {
                    return Err(Error::domain(format!("trial count m[{i}] must be >= 1")));
                }
            }
        }
        Ok(())
    }

    /// Inverse link `f(η)`, i.e. the mean per trial.
    pub fn inverse_link(&self, eta: T) -> T {
        match self {
            FamilySpec::Gaussian { .. } => eta,
            _ => logistic(eta),
        }
    }

    /// Trial count of observation `i` (1 for Bernoulli responses).
    pub(crate) fn trials_at(&self, i: usize) -> T {
        match self {
            FamilySpec::NegativeBinomial { trials } => T::of(trials[i] as f64),
            _ => T::one(),
        }
    }

    /// Validates a response vector against the family's support.
    pub fn check_response(&self, y: &Array1<T>) -> Result<()> {
        self.validate(y.len())?;
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("response y[{i}] is not finite")));
        }
        match self {
            FamilySpec::Gaussian { .. } => {}
            FamilySpec::Binomial => {
                if let Some(i) = y.iter().position(|&v| v != T::zero() && v != T::one()) {
                    return Err(Error::domain(format!("binomial response y[{i}] = {} not in {{0,1}}", y[i])));
                }
            }
            FamilySpec::NegativeBinomial { trials } => {
                for (i, (&v, &m)) in y.iter().zip(trials.iter()).enumerate() {
                    if v < T::zero() || v.fract() != T::zero() || v > T::of(m as f64) {
                        return Err(Error::domain(format!(
                            "count response y[{i}] = {v} must be an integer in [0, m[{i}] = {m}]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Negative log-likelihood contribution of one observation, dropping
    /// terms that do not depend on the linear predictor.
    pub fn unit_loss(&self, i: usize, y: T, eta: T) -> T {
        match self {
            FamilySpec::Gaussian { .. } => {
                let r = y - eta;
                T::of(0.5) * r * r
            }
            _ => self.trials_at(i) * log1p_exp(eta) - y * eta,
        }
    }

    /// Nuisance values echoed into results: σ² for Gaussian fits.
    pub fn sigma2(&self) -> Option<T> {
        match self {
            FamilySpec::Gaussian { sigma2 } => Some(*sigma2),
            _ => None,
        }
    }
}

/// Output of a single penalized fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    /// Coefficients on the original covariate scale.
    pub beta: Array1<T>,
    pub intercept: T,
    /// `‖β‖₀`.
    pub nonzero_count: usize,
    /// σ² for Gaussian fits: `σ̂²` for the scaled lasso, otherwise the
    /// residual-variance estimate when `‖β‖₀ < n`.
    pub nuisance_estimate: Option<T>,
    /// Final penalized objective on the standardized problem.
    pub objective: T,
    /// Effective penalty level used on the standardized design.
    pub lambda: T,
    pub sweeps: usize,
    /// Objective after every full sweep (Gaussian) or outer step
    /// (binomial-type), filled only when requested.
    #[serde(default = "Vec::new", skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<T>,
}

impl<T: Scalar> FitResult<T> {
    pub fn support(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != T::zero())
            .map(|(j, _)| j)
            .collect()
    }

    /// Linear predictor `intercept + xᵀβ` for each row of `x`.
    pub fn predict_eta(&self, x: &ndarray::Array2<T>) -> Array1<T> {
        x.dot(&self.beta).mapv(|e| e + self.intercept)
    }
}

/// `‖y − Xβ‖² / (n − q̂)` with `q̂ = ‖β‖₀`.
pub fn estimate_residual_variance<T: Scalar>(
    y: &Array1<T>,
    x: &ndarray::Array2<T>,
    beta: &Array1<T>,
) -> Result<T> {
    Error::check_len("response", x.nrows(), y.len())?;
    Error::check_len("coefficients", x.ncols(), beta.len())?;
    let resid = y - &x.dot(beta);
    residual_variance(&resid, beta)
}

/// Residual-variance quotient from precomputed residuals.
pub fn residual_variance<T: Scalar>(resid: &Array1<T>, beta: &Array1<T>) -> Result<T> {
    let n = resid.len();
    let q = beta.iter().filter(|b| **b != T::zero()).count();
    if q >= n {
        return Err(Error::domain(format!(
            "residual variance needs ‖β‖₀ < n (‖β‖₀ = {q}, n = {n})"
        )));
    }
    Ok(resid.dot(resid) / T::of_usize(n - q))
}

#[inline]
pub(crate) fn logistic<T: Scalar>(eta: T) -> T {
    if eta >= T::zero() {
        T::one() / (T::one() + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub(crate) fn log1p_exp<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn residual_variance_arithmetic() {
        // residuals (1,1,1,1), two nonzero coefficients → 4 / 2
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.0, 0.0]];
        let beta = array![1.0, 2.0];
        let y = &x.dot(&beta) + 1.0;
        assert_eq!(estimate_residual_variance(&y, &x, &beta).unwrap(), 2.0);
    }

    #[test]
    fn residual_variance_exact_fit_is_zero() {
        let x = array![[1.0], [2.0], [3.0]];
        let beta = array![0.5];
        let y = x.dot(&beta);
        assert_eq!(estimate_residual_variance(&y, &x, &beta).unwrap(), 0.0);
    }

    #[test]
    fn residual_variance_rejects_saturated_support() {
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let beta = array![1.0, 1.0];
        let y = array![1.0, 1.0];
        assert!(matches!(
            estimate_residual_variance(&y, &x, &beta),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn penalty_spec_validation() {
        assert!(PenaltySpec::lasso(-1.0).validate().is_err());
        assert!(PenaltySpec::mcp(0.1, 1.0).validate().is_err());
        assert!(PenaltySpec::mcp(0.1, 3.0).validate().is_ok());
    }

    #[test]
    fn response_support_checks() {
        let fam = FamilySpec::<f64>::Binomial;
        assert!(fam.check_response(&array![0.0, 1.0, 1.0]).is_ok());
        assert!(fam.check_response(&array![0.0, 2.0]).is_err());
        let nb = FamilySpec::<f64>::NegativeBinomial { trials: vec![3, 3] };
        assert!(nb.check_response(&array![0.0, 3.0]).is_ok());
        assert!(nb.check_response(&array![0.0, 4.0]).is_err());
        assert!(nb.check_response(&array![0.5, 1.0]).is_err());
        let bad = FamilySpec::<f64>::NegativeBinomial { trials: vec![0, 3] };
        assert!(bad.check_response(&array![0.0, 1.0]).is_err());
    }

    #[test]
    fn stable_link_helpers() {
        assert!((log1p_exp(800.0f64) - 800.0).abs() < 1e-12);
        assert!(log1p_exp(-800.0f64) >= 0.0);
        assert_eq!(logistic(0.0f64), 0.5);
        assert!(logistic(-1000.0f64) >= 0.0);
    }

    #[test]
    fn penalty_kind_parse() {
        assert_eq!("mcp".parse::<PenaltyKind>().unwrap(), PenaltyKind::Mcp);
        assert!("ridge".parse::<PenaltyKind>().is_err());
    }
}
