use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

use super::ReplicateDataset;

/// Diagonal noise covariance estimate and its reciprocal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate<T> {
    pub sigma_u_diag: Array1<T>,
    pub omega_u_diag: Array1<T>,
    /// Observations with at least two replicates.
    pub contributing: usize,
}

/// Per-coordinate `Σ_{j<k} (w_jm − w_km)² / (r(r−1))`, i.e. half the mean
/// squared pairwise difference, which equals the within-block sample variance.
fn block_half_pair_moment<T: Scalar>(block: ArrayView2<'_, T>) -> Array1<T> {
    let r = block.nrows();
    let mut acc = Array1::<T>::zeros(block.ncols());
    for j in 0..r {
        for k in j + 1..r {
            for (a, (&wj, &wk)) in acc.iter_mut().zip(block.row(j).iter().zip(block.row(k).iter())) {
                let d = wj - wk;
                *a += d * d;
            }
        }
    }
    acc / T::of_usize(r * (r - 1))
}

/// Estimates diag Ω_u from replicate differences.
///
/// Every pair `d_ijk = w_ij − w_ik` has variance `2Σ_u`, so halving the mean
/// squared difference within each observation gives an unbiased estimate of
/// diag Σ_u. Those are averaged over observations with `r_i ≥ 2` and inverted.
/// Observations with a single replicate carry no information and are skipped.
pub fn estimate_me_precision_diag<T: Scalar>(data: &ReplicateDataset<T>) -> Result<NoiseEstimate<T>> {
    let mut sigma = Array1::<T>::zeros(data.p());
    let mut contributing = 0usize;
    for block in data.blocks() {
        if block.nrows() < 2 {
            continue;
        }
        sigma += &block_half_pair_moment(block.view());
        contributing += 1;
    }
    if contributing == 0 {
        return Err(Error::NoiseUnavailable(
            "no observation has two or more replicates".into(),
        ));
    }
    sigma /= T::of_usize(contributing);
    let omega = invert_checked(&sigma)?;
    Ok(NoiseEstimate {
        sigma_u_diag: sigma,
        omega_u_diag: omega,
        contributing,
    })
}

/// One diag Ω_u estimate per observation, for heterogeneous contamination.
/// Every observation needs `r_i ≥ 2`.
pub fn estimate_me_precision_per_observation<T: Scalar>(data: &ReplicateDataset<T>) -> Result<Vec<Array1<T>>> {
    data.blocks()
        .iter()
        .enumerate()
        .map(|(i, block)| {
            if block.nrows() < 2 {
                return Err(Error::NoiseUnavailable(format!(
                    "observation {i} has a single replicate"
                )));
            }
            invert_checked(&block_half_pair_moment(block.view()))
        })
        .collect()
}

fn invert_checked<T: Scalar>(sigma: &Array1<T>) -> Result<Array1<T>> {
    if let Some(m) = sigma.iter().position(|s| !(s.is_finite() && *s > T::zero())) {
        return Err(Error::DegenerateNoise { coordinate: m });
    }
    Ok(sigma.mapv(|s| T::one() / s))
}

/// The raw-difference statistic `(1/√2)·(1/n)·Σ_i Σ_{j<k} d_ijk / C(r_i, 2)`.
///
/// It has expectation zero and is not a precision estimate; it is exposed only
/// so the repaired estimator can be audited against it.
pub fn literal_display_statistic<T: Scalar>(data: &ReplicateDataset<T>) -> Array1<T> {
    let mut acc = Array1::<T>::zeros(data.p());
    for block in data.blocks() {
        let r = block.nrows();
        if r < 2 {
            continue;
        }
        let mut s = Array1::<T>::zeros(data.p());
        for j in 0..r {
            for k in j + 1..r {
                s += &(&block.row(j) - &block.row(k));
            }
        }
        acc += &(s / T::of_usize(r * (r - 1) / 2));
    }
    acc / (T::of_usize(data.n()) * T::of(std::f64::consts::SQRT_2))
}
