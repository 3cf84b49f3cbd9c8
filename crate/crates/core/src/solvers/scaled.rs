use ndarray::{Array1, Array2};

use crate::{Error, Result, Scalar};

use super::fit::{solve_standardized, validate_inputs, FitOptions};
use super::standardize::Standardized;
use super::{FamilySpec, FitResult, PenaltySpec};

/// Stop when σ̂ moves less than this between alternations.
const SIGMA_TOL: f64 = 1e-6;
/// σ̂ below this is treated as a collapsed fit.
const SIGMA_FLOOR: f64 = 1e-8;
const MAX_ALTERNATIONS: usize = 1_000;

/// `sqrt(2 log p / n)`.
pub fn universal_lambda0<T: Scalar>(n: usize, p: usize) -> T {
    let p = p.max(2) as f64;
    T::of((2.0 * p.ln() / n as f64).sqrt())
}

/// Joint estimate of coefficients and noise level.
///
/// Alternates a lasso fit at `λ = λ0·σ̂` with `σ̂² = ‖y − Xβ̂‖²/n` until σ̂
/// changes by less than 1e-6. The returned `nuisance_estimate` is σ̂² computed
/// from the returned β̂, and `lambda` is the level β̂ was fitted at.
pub fn scaled_lasso<T: Scalar>(x: &Array2<T>, y: &Array1<T>, lambda0: T) -> Result<FitResult<T>> {
    if !(lambda0.is_finite() && lambda0 > T::zero()) {
        return Err(Error::domain(format!("scaled-lasso λ0 = {lambda0} must be > 0")));
    }
    let family = FamilySpec::Gaussian { sigma2: T::one() };
    validate_inputs(x, y, &family)?;
    let n = x.nrows();
    let nf = T::of_usize(n);
    let std = Standardized::new(x);
    let ybar = y.mean().unwrap_or(T::zero());
    let yc = y.mapv(|v| v - ybar);
    let floor = T::of(SIGMA_FLOOR);

    let mut sigma = (yc.dot(&yc) / nf).sqrt();
    if sigma < floor {
        return Err(Error::DegenerateFit(format!(
            "scaled lasso: response has no spread (σ̂ = {sigma})"
        )));
    }
    let opts = FitOptions::default();
    let mut beta = Array1::zeros(x.ncols());
    let mut b0 = ybar;
    for _ in 0..MAX_ALTERNATIONS {
        let penalty = PenaltySpec::lasso(lambda0 * sigma);
        let mut fit = solve_standardized(&std, y, &family, &penalty, &mut beta, &mut b0, &opts)?;
        let resid = &yc - &std.matrix().dot(&beta);
        let rss = resid.dot(&resid);
        let sigma_new = (rss / nf).sqrt();
        if sigma_new < floor {
            return Err(Error::DegenerateFit(format!(
                "scaled lasso: noise level collapsed (σ̂ = {sigma_new})"
            )));
        }
        let change = (sigma_new - sigma).abs();
        if change < T::of(SIGMA_TOL) {
            let l1: T = beta.iter().map(|b| b.abs()).sum();
            fit.objective = rss / (T::of(2.0) * nf * sigma_new) + T::of(0.5) * sigma_new + lambda0 * l1;
            fit.nuisance_estimate = Some(sigma_new * sigma_new);
            return Ok(fit);
        }
        sigma = sigma_new;
    }
    Err(Error::Convergence {
        reason: format!("scaled lasso did not settle within {MAX_ALTERNATIONS} alternations"),
        last_iterate: std.to_original(&beta).iter().map(|b| b.to_f64_lossy()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn zero_response_is_degenerate() {
        let mut rng = RngStream::new(1, 0);
        let x = Array2::from_shape_fn((20, 5), |_| rng.std_normal());
        let y = Array1::zeros(20);
        assert!(matches!(scaled_lasso(&x, &y, 0.3), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn noiseless_response_gives_small_sigma() {
        let mut rng = RngStream::new(2, 0);
        let x = Array2::from_shape_fn((100, 10), |_| rng.std_normal());
        let truth = Array1::from_shape_fn(10, |j| if j < 3 { 1.0 } else { 0.0 });
        let y = x.dot(&truth);
        let fit = scaled_lasso(&x, &y, 0.01).unwrap();
        let sigma = fit.nuisance_estimate.unwrap().sqrt();
        assert!(sigma < 0.05, "σ̂ = {sigma}");
    }

    #[test]
    fn fixed_point_holds() {
        let mut rng = RngStream::new(3, 0);
        let x = Array2::from_shape_fn((80, 30), |_| rng.std_normal());
        let y = Array1::from_shape_fn(80, |i| x[[i, 0]] - 0.5 * x[[i, 2]] + rng.std_normal());
        let l0 = universal_lambda0::<f64>(80, 30);
        let fit = scaled_lasso(&x, &y, l0).unwrap();
        let resid = &y - &x.dot(&fit.beta) - fit.intercept;
        let sigma = (resid.dot(&resid) / 80.0).sqrt();
        assert!((sigma * sigma - fit.nuisance_estimate.unwrap()).abs() < 1e-10);
        assert!((fit.lambda - l0 * sigma).abs() < l0 * 1e-6);
    }
}
