use ndarray::{Array1, Array2};

use crate::{Error, Result, Scalar};

use super::fit::{null_intercept, validate_inputs};
use super::standardize::Standardized;
use super::{logistic, FamilySpec};

/// Smallest penalty level at which the fitted coefficients are all zero,
/// on the standardized design: `max_j |x̃_jᵀ(y − μ̂₀)| / n` where `μ̂₀` is
/// the fitted mean of the covariate-free model.
pub fn lambda_max<T: Scalar>(x: &Array2<T>, y: &Array1<T>, family: &FamilySpec<T>) -> Result<T> {
    validate_inputs(x, y, family)?;
    let std = Standardized::new(x);
    let n = x.nrows();
    let resid: Array1<T> = match family {
        FamilySpec::Gaussian { .. } => {
            let ybar = y.mean().unwrap_or(T::zero());
            y.mapv(|v| v - ybar)
        }
        _ => {
            let p0 = logistic(null_intercept(y, family)?);
            Array1::from_shape_fn(n, |i| y[i] - family.trials_at(i) * p0)
        }
    };
    let nf = T::of_usize(n);
    let lmax = (0..x.ncols())
        .filter(|&j| std.active(j))
        .map(|j| std.matrix().column(j).dot(&resid).abs() / nf)
        .fold(T::zero(), T::max);
    Ok(lmax.max(T::epsilon()))
}

/// Geometric grid of `length` levels from `λ_max` down to `ratio · λ_max`.
pub fn lambda_grid<T: Scalar>(
    x: &Array2<T>,
    y: &Array1<T>,
    family: &FamilySpec<T>,
    length: usize,
    ratio: T,
) -> Result<Vec<T>> {
    if length < 2 {
        return Err(Error::domain("lambda grid needs at least two levels"));
    }
    if !(ratio > T::zero() && ratio < T::one()) {
        return Err(Error::domain(format!("lambda ratio {ratio} must lie in (0, 1)")));
    }
    let lmax = lambda_max(x, y, family)?;
    let denom = T::of_usize(length - 1);
    Ok((0..length)
        .map(|k| lmax * ratio.powf(T::of_usize(k) / denom))
        .collect())
}
