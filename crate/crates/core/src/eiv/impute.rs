use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::linalg::DiagRank1Precision;
use crate::polya_gamma::{sample_pg, PgParams};
use crate::rng::RngStream;
use crate::{Error, Result, Scalar};

use super::PrecisionPair;

/// Lower bound applied to per-coordinate variances before inverting.
pub const OMEGA_X_VARIANCE_FLOOR: f64 = 1e-8;

/// How the Pólya-Gamma shift `κ` is formed for count responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaConvention {
    /// `κ = y − m/2`, matching a likelihood `(e^ψ)^y / (1 + e^ψ)^m`.
    #[default]
    TrialsHalf,
    /// `κ = y − 1/2` regardless of `m`.
    UnitHalf,
}

impl KappaConvention {
    pub fn kappa<T: Scalar>(self, y: T, trials: T) -> T {
        match self {
            KappaConvention::TrialsHalf => y - trials * T::of(0.5),
            KappaConvention::UnitHalf => y - T::of(0.5),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KappaConvention::TrialsHalf => "trials-half",
            KappaConvention::UnitHalf => "unit-half",
        }
    }
}

impl FromStr for KappaConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trials-half" => Ok(KappaConvention::TrialsHalf),
            "unit-half" => Ok(KappaConvention::UnitHalf),
            other => Err(Error::domain(format!("unknown kappa convention '{other}'"))),
        }
    }
}

/// Per-observation prior precisions `Ω_x + r_i·Ω_u`. Observations that share
/// a replicate count (and have no noise override) share one allocation.
#[derive(Debug, Clone)]
pub struct ImputationPlan<T> {
    combined: Vec<Arc<Array1<T>>>,
    groups: usize,
}

impl<T: Scalar> ImputationPlan<T> {
    pub fn new(prec: &PrecisionPair<T>, replicate_counts: &[usize]) -> Result<Self> {
        if let Some(o) = &prec.omega_u_overrides {
            Error::check_len("noise overrides", replicate_counts.len(), o.len())?;
            let combined: Vec<_> = replicate_counts
                .iter()
                .enumerate()
                .map(|(i, &r)| Arc::new(&prec.omega_x_diag + &(prec.omega_u_for(i) * T::of_usize(r))))
                .collect();
            let groups = combined.len();
            return Ok(Self { combined, groups });
        }
        let mut cache: BTreeMap<usize, Arc<Array1<T>>> = BTreeMap::new();
        let combined = replicate_counts
            .iter()
            .map(|&r| cache.entry(r).or_insert_with(|| Arc::new(prec.combined_diag(r))).clone())
            .collect();
        Ok(Self {
            combined,
            groups: cache.len(),
        })
    }

    pub fn combined(&self, i: usize) -> &Arc<Array1<T>> {
        &self.combined[i]
    }

    /// Number of distinct precision vectors held.
    pub fn groups(&self) -> usize {
        self.groups
    }
}

/// One draw of `x` from `N(M⁻¹h, M⁻¹)` where
/// `M = Diag(combined) + scale·ββᵀ` and `h = r·Ω_u·w̄ + shift·β`.
///
/// Every family's imputation is of this form: covariate-only has
/// `scale = 0`; Gaussian has `scale = 1/σ²`, `shift = (y − b0)/σ²`; the
/// Pólya-Gamma families have `scale = z`, `shift = κ − z·b0`.
#[allow(clippy::too_many_arguments)]
pub fn impute_x_augmented<T: Scalar>(
    combined: &Array1<T>,
    omega_u: &Array1<T>,
    r: usize,
    wbar: ArrayView1<'_, T>,
    scale: T,
    beta: ArrayView1<'_, T>,
    shift: T,
    rng: &mut RngStream,
) -> Result<Array1<T>> {
    Error::check_len("replicate mean", combined.len(), wbar.len())?;
    Error::check_len("coefficients", combined.len(), beta.len())?;
    let rf = T::of_usize(r);
    let mut h = Array1::from_shape_fn(wbar.len(), |j| rf * omega_u[j] * wbar[j]);
    if shift != T::zero() {
        h.scaled_add(shift, &beta);
    }
    let m = DiagRank1Precision::new(combined.clone(), scale, beta.to_owned())?;
    m.sample(h.view(), rng)
}

fn check_r(r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::domain("replicate count must be >= 1"));
    }
    Ok(())
}

/// Draw from the replicate-only conditional `N(r·Λ·Ω_u·w̄, Λ)`,
/// `Λ = (Ω_x + r·Ω_u)⁻¹`.
pub fn impute_x_covariate_only<T: Scalar>(
    wbar_i: ArrayView1<'_, T>,
    r_i: usize,
    prec: &PrecisionPair<T>,
    rng: &mut RngStream,
) -> Result<Array1<T>> {
    check_r(r_i)?;
    let p = prec.p();
    let zero = Array1::zeros(p);
    impute_x_augmented(
        &prec.combined_diag(r_i),
        &prec.omega_u_diag,
        r_i,
        wbar_i,
        T::zero(),
        zero.view(),
        T::zero(),
        rng,
    )
}

/// Draw from `N(Λ_G(r·Ω_u·w̄ + y·β/σ²), Λ_G)`, `Λ_G = (Λ⁻¹ + ββᵀ/σ²)⁻¹`.
#[allow(clippy::too_many_arguments)]
pub fn impute_x_gaussian<T: Scalar>(
    y_i: T,
    wbar_i: ArrayView1<'_, T>,
    r_i: usize,
    prec: &PrecisionPair<T>,
    beta: ArrayView1<'_, T>,
    sigma2: T,
    rng: &mut RngStream,
) -> Result<Array1<T>> {
    check_r(r_i)?;
    if !(sigma2.is_finite() && sigma2 > T::zero()) {
        return Err(Error::domain(format!("σ² = {sigma2} must be > 0")));
    }
    let inv = T::one() / sigma2;
    impute_x_augmented(
        &prec.combined_diag(r_i),
        &prec.omega_u_diag,
        r_i,
        wbar_i,
        inv,
        beta,
        y_i * inv,
        rng,
    )
}

/// Draws the Pólya-Gamma latent `z ~ PG(b, xᵀβ)`.
pub fn sample_pg_latent<T: Scalar>(
    x_i: ArrayView1<'_, T>,
    beta: ArrayView1<'_, T>,
    shape_b: u32,
    rng: &mut RngStream,
) -> Result<T> {
    Error::check_len("coefficients", x_i.len(), beta.len())?;
    if shape_b == 0 {
        return Err(Error::domain("Pólya-Gamma shape must be >= 1"));
    }
    sample_pg(PgParams::new(T::of(f64::from(shape_b)), x_i.dot(&beta))?, rng)
}

fn check_z<T: Scalar>(z: T) -> Result<()> {
    if !(z.is_finite() && z > T::zero()) {
        return Err(Error::domain(format!("Pólya-Gamma latent z = {z} must be > 0")));
    }
    Ok(())
}

/// Draw from `N(Λ_B(κ·β + r·Ω_u·w̄), Λ_B)`, `Λ_B = (Λ⁻¹ + z·ββᵀ)⁻¹`,
/// `κ = y − 1/2`.
#[allow(clippy::too_many_arguments)]
pub fn impute_x_binomial<T: Scalar>(
    y_i: T,
    z_i: T,
    wbar_i: ArrayView1<'_, T>,
    r_i: usize,
    prec: &PrecisionPair<T>,
    beta: ArrayView1<'_, T>,
    rng: &mut RngStream,
) -> Result<Array1<T>> {
    check_r(r_i)?;
    check_z(z_i)?;
    if y_i != T::zero() && y_i != T::one() {
        return Err(Error::domain(format!("binary response {y_i} is not 0 or 1")));
    }
    impute_x_augmented(
        &prec.combined_diag(r_i),
        &prec.omega_u_diag,
        r_i,
        wbar_i,
        z_i,
        beta,
        y_i - T::of(0.5),
        rng,
    )
}

/// Count-response analogue of [`impute_x_binomial`] with `z ~ PG(m, ·)` and
/// `κ` chosen by `convention`.
#[allow(clippy::too_many_arguments)]
pub fn impute_x_negbin<T: Scalar>(
    y_i: T,
    m_i: u32,
    z_i: T,
    wbar_i: ArrayView1<'_, T>,
    r_i: usize,
    prec: &PrecisionPair<T>,
    beta: ArrayView1<'_, T>,
    convention: KappaConvention,
    rng: &mut RngStream,
) -> Result<Array1<T>> {
    check_r(r_i)?;
    check_z(z_i)?;
    let m = T::of(f64::from(m_i));
    if !(y_i >= T::zero() && y_i <= m && y_i.fract() == T::zero()) {
        return Err(Error::domain(format!("count {y_i} outside 0..={m_i}")));
    }
    impute_x_augmented(
        &prec.combined_diag(r_i),
        &prec.omega_u_diag,
        r_i,
        wbar_i,
        z_i,
        beta,
        convention.kappa(y_i, m),
        rng,
    )
}

/// Diagonal precision estimate from an imputed design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaXEstimate<T> {
    pub omega_x_diag: Array1<T>,
    /// Columns whose variance hit the floor.
    pub floored: Vec<usize>,
}

/// Reciprocal of each column's sample variance (denominator `n − 1`), with the
/// variance floored at 1e-8.
pub fn estimate_omega_x_diag<T: Scalar>(x: &Array2<T>) -> Result<OmegaXEstimate<T>> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::domain("estimating Ω_x needs at least 2 rows"));
    }
    let var = x.var_axis(Axis(0), T::one());
    let floor = T::of(OMEGA_X_VARIANCE_FLOOR);
    let mut floored = Vec::new();
    let omega = Array1::from_shape_fn(var.len(), |j| {
        let v = var[j];
        if !(v >= floor) {
            floored.push(j);
            T::one() / floor
        } else {
            T::one() / v
        }
    });
    Ok(OmegaXEstimate {
        omega_x_diag: omega,
        floored,
    })
}
