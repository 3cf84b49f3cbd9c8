//! Simulation designs G1–G3 (Gaussian) and B1–B2 (logistic) with
//! Ideal / Naive / IRO comparison arms.

mod experiment;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::eiv::ReplicateDataset;
use crate::rng::RngStream;
use crate::solvers::{FamilySpec, PenaltyKind};
use crate::{Error, Result, Scalar};

pub use experiment::{
    compute_metrics, run_experiment, to_csv, ArmOutcome, ExperimentTable, InstanceOutcome, MetricRow, Metrics,
    CSV_HEADER,
};

pub const DEFAULT_BAND_MAGNITUDE: f64 = 0.45;
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;
/// Noise variances are floored here when turned into a known Ω_u, so that a
/// noise ratio of zero maps to a very large but finite precision.
pub const NOISE_VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    G1,
    G2,
    G3,
    B1,
    B2,
}

impl Setting {
    pub const ALL: [Setting; 5] = [Setting::G1, Setting::G2, Setting::G3, Setting::B1, Setting::B2];

    pub fn is_binomial(self) -> bool {
        matches!(self, Setting::B1 | Setting::B2)
    }

    pub fn is_banded(self) -> bool {
        matches!(self, Setting::G3 | Setting::B2)
    }

    /// Which coefficient pattern the setting uses (see [`gen_beta_star`]).
    pub fn beta_kind(self) -> u8 {
        match self {
            Setting::G1 | Setting::B1 => 2,
            Setting::G2 | Setting::G3 | Setting::B2 => 1,
        }
    }

    /// Response noise variance for the Gaussian settings.
    pub fn sigma2(self) -> Option<f64> {
        match self {
            Setting::G1 | Setting::G3 => Some(1.0),
            Setting::G2 => Some(3.0),
            Setting::B1 | Setting::B2 => None,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::domain(format!("unknown setting '{s}'; valid settings are G1, G2, G3, B1, B2")))
    }
}

/// How the IRO arm obtains Ω_u.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// `Ω_u = 1 / (γ·diag Σ_x)`, the generator's own value.
    #[default]
    Known,
    /// Estimated from the replicates.
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub setting: Setting,
    pub n: usize,
    pub p: usize,
    /// Noise-to-signal ratio: `diag Σ_u = γ·diag Σ_x`.
    pub gamma: f64,
    pub replicates: usize,
    pub penalty_kind: PenaltyKind,
    pub n_monte_carlo: usize,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub folds: usize,
    pub band_magnitude: f64,
    pub noise: NoiseMode,
    pub zero_tol: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            setting: Setting::G1,
            n: 400,
            p: 100,
            gamma: 0.5,
            replicates: 3,
            penalty_kind: PenaltyKind::Mcp,
            n_monte_carlo: 100,
            seed: 0,
            iterations: 100,
            burn_in: 20,
            folds: 10,
            band_magnitude: DEFAULT_BAND_MAGNITUDE,
            noise: NoiseMode::Known,
            zero_tol: DEFAULT_ZERO_TOL,
        }
    }
}

impl SimulationSpec {
    /// `γ = 0` is accepted (no contamination).
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p < 10 || self.replicates == 0 || self.n_monte_carlo == 0 {
            return Err(Error::domain("simulation needs n >= 2, p >= 10, replicates >= 1, instances >= 1"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::domain(format!("noise ratio γ = {} must be >= 0", self.gamma)));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::domain("burn-in must be smaller than iterations"));
        }
        if self.penalty_kind == PenaltyKind::ScaledLasso && self.setting.is_binomial() {
            return Err(Error::domain("the scaled lasso applies to Gaussian settings only"));
        }
        if self.penalty_kind != PenaltyKind::ScaledLasso && (self.folds < 2 || self.folds > self.n) {
            return Err(Error::domain(format!("folds = {} must lie in 2..={}", self.folds, self.n)));
        }
        if !(self.zero_tol >= 0.0) {
            return Err(Error::domain("zero tolerance must be >= 0"));
        }
        if self.setting.is_banded() {
            BandPrecision::<f64>::new(self.p, self.band_magnitude)?;
        }
        Ok(())
    }

    pub fn family<T: Scalar>(&self) -> FamilySpec<T> {
        match self.setting.sigma2() {
            Some(s) => FamilySpec::Gaussian { sigma2: T::of(s) },
            None => FamilySpec::Binomial,
        }
    }
}

/// Coefficient patterns: kind 1 is five 1s then five −1s; kind 2 is
/// `1, 1/2, …, 1/10`. Both are padded with zeros to length `p`.
pub fn gen_beta_star<T: Scalar>(kind: u8, p: usize) -> Result<Array1<T>> {
    if p < 10 {
        return Err(Error::domain(format!("coefficient patterns need p >= 10, got {p}")));
    }
    let head: Vec<f64> = match kind {
        1 => (0..10).map(|j| if j < 5 { 1.0 } else { -1.0 }).collect(),
        2 => (1..=10).map(|j| 1.0 / j as f64).collect(),
        other => return Err(Error::domain(format!("unknown coefficient pattern {other}"))),
    };
    Ok(Array1::from_shape_fn(p, |j| if j < 10 { T::of(head[j]) } else { T::zero() }))
}

/// Tridiagonal precision whose covariance has unit diagonal, with its
/// lower-bidiagonal Cholesky factor `Ω = L·Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPrecision<T> {
    pub diag: Array1<T>,
    /// Sub- and super-diagonal, length `p − 1`.
    pub off: Array1<T>,
    chol_diag: Array1<T>,
    chol_sub: Array1<T>,
}

/// Pivots of the tridiagonal LDLᵀ factorization, or `None` if one is not
/// positive.
fn tridiagonal_pivots(diag: &[f64], off: &[f64]) -> Option<Vec<f64>> {
    let mut d = Vec::with_capacity(diag.len());
    for i in 0..diag.len() {
        let v = if i == 0 { diag[0] } else { diag[i] - off[i - 1] * off[i - 1] / d[i - 1] };
        if !(v > 0.0) {
            return None;
        }
        d.push(v);
    }
    Some(d)
}

impl<T: Scalar> BandPrecision<T> {
    /// Starts from unit diagonal and off-diagonal `−magnitude`, then rescales
    /// so that the implied covariance has unit diagonal.
    pub fn new(p: usize, magnitude: f64) -> Result<Self> {
        if p < 2 {
            return Err(Error::domain("band precision needs p >= 2"));
        }
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(Error::domain(format!("band magnitude {magnitude} must be >= 0")));
        }
        let a = vec![1.0; p];
        let b = vec![-magnitude; p - 1];
        let not_pd = || {
            Error::domain(format!(
                "band precision with magnitude {magnitude} is not positive definite at p = {p}; use a smaller magnitude (below 0.5)"
            ))
        };
        let fwd = tridiagonal_pivots(&a, &b).ok_or_else(not_pd)?;
        // Backward pivots of the reversed matrix give diag(Ω⁻¹) in O(p):
        // (Ω⁻¹)_ii = 1 / (fwd_i + bwd_i − a_i).
        let rev_b: Vec<f64> = b.iter().rev().copied().collect();
        let mut bwd = tridiagonal_pivots(&a, &rev_b).ok_or_else(not_pd)?;
        bwd.reverse();
        let s: Vec<f64> = (0..p).map(|i| 1.0 / (fwd[i] + bwd[i] - a[i])).collect();
        // Ω' = S^{1/2} Ω S^{1/2} has inverse S^{-1/2} Σ S^{-1/2}, unit diagonal.
        let diag: Vec<f64> = (0..p).map(|i| a[i] * s[i]).collect();
        let off: Vec<f64> = (0..p - 1).map(|i| b[i] * (s[i] * s[i + 1]).sqrt()).collect();
        let piv = tridiagonal_pivots(&diag, &off).ok_or_else(not_pd)?;
        let chol_diag: Vec<f64> = piv.iter().map(|v| v.sqrt()).collect();
        let chol_sub: Vec<f64> = (0..p - 1).map(|i| off[i] / chol_diag[i]).collect();
        let conv = |v: Vec<f64>| v.into_iter().map(T::of).collect::<Array1<T>>();
        Ok(Self {
            diag: conv(diag),
            off: conv(off),
            chol_diag: conv(chol_diag),
            chol_sub: conv(chol_sub),
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn omega_dense(&self) -> Array2<T> {
        let p = self.dim();
        let mut m = Array2::zeros((p, p));
        for i in 0..p {
            m[[i, i]] = self.diag[i];
            if i + 1 < p {
                m[[i, i + 1]] = self.off[i];
                m[[i + 1, i]] = self.off[i];
            }
        }
        m
    }

    /// Solves `Lᵀ x = e` (upper bidiagonal back substitution).
    fn solve_lt(&self, e: &Array1<T>) -> Array1<T> {
        let p = self.dim();
        let mut x = Array1::zeros(p);
        for i in (0..p).rev() {
            let mut v = e[i];
            if i + 1 < p {
                v -= self.chol_sub[i] * x[i + 1];
            }
            x[i] = v / self.chol_diag[i];
        }
        x
    }

    /// Solves `L x = e` (lower bidiagonal forward substitution).
    fn solve_l(&self, e: &Array1<T>) -> Array1<T> {
        let p = self.dim();
        let mut x = Array1::zeros(p);
        for i in 0..p {
            let mut v = e[i];
            if i > 0 {
                v -= self.chol_sub[i - 1] * x[i - 1];
            }
            x[i] = v / self.chol_diag[i];
        }
        x
    }

    /// `Σ = Ω⁻¹`, built column by column in O(p²).
    pub fn covariance_dense(&self) -> Array2<T> {
        let p = self.dim();
        let mut out = Array2::zeros((p, p));
        for j in 0..p {
            let mut e = Array1::zeros(p);
            e[j] = T::one();
            let col = self.solve_lt(&self.solve_l(&e));
            out.column_mut(j).assign(&col);
        }
        out
    }

    /// One draw from `N(0, Ω⁻¹)` as `L⁻ᵀ ε`.
    pub fn sample(&self, rng: &mut RngStream) -> Array1<T> {
        let e = Array1::from_shape_fn(self.dim(), |_| T::of(rng.std_normal()));
        self.solve_lt(&e)
    }
}

/// Band precision for a `p`-dimensional design (see [`BandPrecision::new`]).
pub fn gen_band_precision<T: Scalar>(p: usize, magnitude: f64) -> Result<BandPrecision<T>> {
    BandPrecision::new(p, magnitude)
}

/// One simulated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset<T> {
    pub x_true: Array2<T>,
    pub data: ReplicateDataset<T>,
    pub beta_star: Array1<T>,
    pub sigma_x_diag: Array1<T>,
    /// `γ·diag Σ_x`.
    pub noise_var_diag: Array1<T>,
}

impl<T: Scalar> SimDataset<T> {
    /// `1 / max(γ·diag Σ_x, 1e-8)`.
    pub fn known_omega_u(&self) -> Array1<T> {
        self.noise_var_diag
            .mapv(|v| T::one() / v.max(T::of(NOISE_VARIANCE_FLOOR)))
    }
}

/// Draws `X ~ N(0, Σ_x)`, replicates `w_ij = x_i + u_ij` with
/// `u_ij ~ N(0, γ·diag Σ_x)`, and the response for the setting.
pub fn gen_dataset<T: Scalar>(spec: &SimulationSpec, rng: &mut RngStream) -> Result<SimDataset<T>> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let band = if spec.setting.is_banded() {
        Some(BandPrecision::<T>::new(p, spec.band_magnitude)?)
    } else {
        None
    };
    let mut x = Array2::<T>::zeros((n, p));
    for mut row in x.rows_mut() {
        match &band {
            Some(b) => row.assign(&b.sample(rng)),
            None => row.mapv_inplace(|_| T::of(rng.std_normal())),
        }
    }
    // Both designs have unit covariance diagonal.
    let sigma_x_diag = Array1::<T>::ones(p);
    let noise_var_diag = sigma_x_diag.mapv(|s| s * T::of(spec.gamma));
    let noise_sd = noise_var_diag.mapv(|v| v.sqrt());
    let blocks: Vec<Array2<T>> = x
        .rows()
        .into_iter()
        .map(|row| Array2::from_shape_fn((spec.replicates, p), |(_, j)| row[j] + noise_sd[j] * T::of(rng.std_normal())))
        .collect();
    let beta_star = gen_beta_star::<T>(spec.setting.beta_kind(), p)?;
    let eta = x.dot(&beta_star);
    let y = match spec.setting.sigma2() {
        Some(s2) => {
            let sd = T::of(s2.sqrt());
            eta.mapv(|e| e + sd * T::of(rng.std_normal()))
        }
        None => eta.mapv(|e| {
            let prob = 1.0 / (1.0 + (-e.to_f64_lossy()).exp());
            if rng.uniform() < prob {
                T::one()
            } else {
                T::zero()
            }
        }),
    };
    Ok(SimDataset {
        x_true: x,
        data: ReplicateDataset::new(y, blocks)?,
        beta_star,
        sigma_x_diag,
        noise_var_diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_patterns() {
        let b1 = gen_beta_star::<f64>(1, 12).unwrap();
        assert_eq!(b1.to_vec(), vec![1., 1., 1., 1., 1., -1., -1., -1., -1., -1., 0., 0.]);
        let b2 = gen_beta_star::<f64>(2, 12).unwrap();
        assert_eq!(b2[1], 0.5);
        assert_eq!(b2[9], 0.1);
        assert_eq!(b2.iter().filter(|v| **v != 0.0).count(), 10);
        assert!(gen_beta_star::<f64>(1, 9).is_err());
    }

    #[test]
    fn band_precision_is_normalized_inverse_pair() {
        for p in [2, 5, 40] {
            let b = gen_band_precision::<f64>(p, 0.45).unwrap();
            let s = b.covariance_dense();
            for i in 0..p {
                assert!((s[[i, i]] - 1.0).abs() < 1e-12);
            }
            let prod = b.omega_dense().dot(&s);
            for ((i, j), v) in prod.indexed_iter() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-10);
            }
        }
        let s = gen_band_precision::<f64>(5, 0.45).unwrap().covariance_dense();
        for j in 1..4 {
            assert!(s[[0, j]].abs() > s[[0, j + 1]].abs());
        }
    }

    #[test]
    fn band_precision_rejects_indefinite() {
        assert!(gen_band_precision::<f64>(50, 0.55).is_err());
        assert!(gen_band_precision::<f64>(1, 0.3).is_err());
    }

    #[test]
    fn setting_parsing() {
        assert_eq!("g2".parse::<Setting>().unwrap(), Setting::G2);
        let err = "G9".parse::<Setting>().unwrap_err().to_string();
        assert!(err.contains("G1, G2, G3, B1, B2"));
    }

    #[test]
    fn zero_noise_replicates_equal_truth() {
        let spec = SimulationSpec {
            setting: Setting::G3,
            n: 20,
            p: 12,
            gamma: 0.0,
            ..Default::default()
        };
        let sim = gen_dataset::<f64>(&spec, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(sim.data.wbar(), sim.x_true);
        assert_eq!(sim.known_omega_u()[0], 1e8);
    }

    #[test]
    fn generator_moments() {
        let spec = SimulationSpec {
            setting: Setting::G1,
            n: 10_000,
            p: 10,
            gamma: 0.5,
            ..Default::default()
        };
        let sim = gen_dataset::<f64>(&spec, &mut RngStream::new(2, 0)).unwrap();
        let cov = sim.x_true.t().dot(&sim.x_true) / 10_000.0;
        for ((i, j), v) in cov.indexed_iter() {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 0.05, "({i},{j}) = {v}");
        }
        let mut sq = Array1::<f64>::zeros(10);
        for (i, b) in sim.data.blocks().iter().enumerate() {
            for row in b.rows() {
                let d = &row - &sim.x_true.row(i);
                sq += &(&d * &d);
            }
        }
        let var = sq / 30_000.0;
        assert!(var.iter().all(|v| (v / 0.5 - 1.0).abs() < 0.05), "{var}");
    }
}
