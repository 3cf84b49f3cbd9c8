use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::RngStream;
use crate::{Error, Result, Scalar};

use super::fit::{fit_path, FitOptions};
use super::scaled::scaled_lasso;
use super::{FamilySpec, FitResult, PenaltyKind};

/// Outcome of k-fold tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult<T> {
    pub lambda_star: T,
    /// Position of `lambda_star` in the grid.
    pub index: usize,
    /// Refit on all observations at `lambda_star`.
    pub fit: FitResult<T>,
    /// Mean held-out deviance per grid level; infinite where a fold failed.
    pub cv_loss: Vec<T>,
    /// Fold label of each observation.
    pub fold_of: Vec<usize>,
}

impl<T: Scalar> FamilySpec<T> {
    pub(crate) fn subset(&self, rows: &[usize]) -> Self {
        match self {
            FamilySpec::NegativeBinomial { trials } => FamilySpec::NegativeBinomial {
                trials: rows.iter().map(|&i| trials[i]).collect(),
            },
            other => other.clone(),
        }
    }

    /// Whether a binomial-type training response has both outcomes.
    fn has_variation(&self, y: &Array1<T>) -> bool {
        match self {
            FamilySpec::Gaussian { .. } => true,
            _ => {
                let total: T = y.sum();
                let trials: T = (0..y.len()).map(|i| self.trials_at(i)).sum();
                total > T::zero() && total < trials
            }
        }
    }
}

fn assign_folds(n: usize, folds: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    let mut fold_of = vec![0; n];
    for (k, &i) in perm.iter().enumerate() {
        fold_of[i] = k % folds;
    }
    fold_of
}

fn splits_ok<T: Scalar>(y: &Array1<T>, family: &FamilySpec<T>, fold_of: &[usize], folds: usize) -> bool {
    (0..folds).all(|f| {
        let train: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != f).collect();
        let yt = y.select(Axis(0), &train);
        family.subset(&train).has_variation(&yt)
    })
}

/// Selects λ on `lambda_grid` by k-fold cross-validation of the held-out
/// deviance (squared error for Gaussian responses, negative log-likelihood
/// otherwise), then refits on all data. Ties go to the larger λ.
///
/// For `PenaltyKind::ScaledLasso` the grid holds `λ0` values.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate<T: Scalar>(
    x: &Array2<T>,
    y: &Array1<T>,
    family: &FamilySpec<T>,
    kind: PenaltyKind,
    mcp_gamma: T,
    folds: usize,
    lambda_grid: &[T],
    rng: &mut RngStream,
) -> Result<CvResult<T>> {
    let n = x.nrows();
    if folds < 2 {
        return Err(Error::domain("cross-validation needs at least 2 folds"));
    }
    if folds > n {
        return Err(Error::domain(format!("{folds} folds requested for {n} observations")));
    }
    if lambda_grid.is_empty() {
        return Err(Error::domain("empty lambda grid"));
    }
    if lambda_grid.iter().any(|l| !(l.is_finite() && *l >= T::zero()))
        || lambda_grid.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::domain("lambda grid must be non-negative and strictly decreasing"));
    }
    Error::check_len("response length", n, y.len())?;
    family.check_response(y)?;

    let mut fold_of = assign_folds(n, folds, rng);
    if !splits_ok(y, family, &fold_of, folds) {
        fold_of = assign_folds(n, folds, rng);
        if !splits_ok(y, family, &fold_of, folds) {
            return Err(Error::SingleClassFold);
        }
    }

    let opts = FitOptions::default();
    let per_fold: Vec<Result<Vec<T>>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            let xt = x.select(Axis(0), &train);
            let yt = y.select(Axis(0), &train);
            let fam_t = family.subset(&train);
            // levels past a saturated fit are never selected
            let fits: Vec<Option<FitResult<T>>> = if kind == PenaltyKind::ScaledLasso {
                lambda_grid.iter().map(|&l0| scaled_lasso(&xt, &yt, l0).ok()).collect()
            } else {
                let mut path: Vec<_> = fit_path(&xt, &yt, &fam_t, kind, mcp_gamma, lambda_grid, &opts)?
                    .into_iter()
                    .map(Some)
                    .collect();
                path.resize(lambda_grid.len(), None);
                path
            };
            let xv = x.select(Axis(0), &test);
            Ok(fits
                .iter()
                .map(|fit| match fit {
                    Some(fit) => {
                        let eta = fit.predict_eta(&xv);
                        test.iter()
                            .zip(eta.iter())
                            .map(|(&i, &e)| family.unit_loss(i, y[i], e))
                            .sum::<T>()
                    }
                    None => T::infinity(),
                })
                .collect())
        })
        .collect();

    let mut total = vec![T::zero(); lambda_grid.len()];
    for fold_loss in per_fold {
        for (t, l) in total.iter_mut().zip(fold_loss?) {
            *t += l;
        }
    }
    let nf = T::of_usize(n);
    let cv_loss: Vec<T> = total.into_iter().map(|t| t / nf).collect();

    let mut index = 0;
    for (k, &l) in cv_loss.iter().enumerate() {
        if l < cv_loss[index] {
            index = k;
        }
    }
    if !cv_loss[index].is_finite() {
        return Err(Error::DegenerateFit("every grid level failed in cross-validation".into()));
    }
    let fit = if kind == PenaltyKind::ScaledLasso {
        scaled_lasso(x, y, lambda_grid[index])?
    } else {
        fit_path(x, y, family, kind, mcp_gamma, &lambda_grid[..=index], &opts)?
            .pop()
            .expect("non-empty path")
    };
    // the full-data path can saturate before the selected level
    let lambda_star = if kind == PenaltyKind::ScaledLasso { lambda_grid[index] } else { fit.lambda };
    Ok(CvResult {
        lambda_star,
        index,
        fit,
        cv_loss,
        fold_of,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::lambda_grid;

    fn gaussian_data(n: usize, p: usize, seed: u64, signal: f64) -> (Array2<f64>, Array1<f64>) {
        let mut rng = RngStream::new(seed, 0);
        let x = Array2::from_shape_fn((n, p), |_| rng.std_normal());
        let y = Array1::from_shape_fn(n, |i| signal * (x[[i, 0]] - x[[i, 1]]) + rng.std_normal());
        (x, y)
    }

    #[test]
    fn single_level_grid_selected() {
        let (x, y) = gaussian_data(40, 5, 1, 1.0);
        let res = cross_validate(
            &x,
            &y,
            &FamilySpec::gaussian(),
            PenaltyKind::Lasso,
            3.0,
            5,
            &[0.2],
            &mut RngStream::new(1, 1),
        )
        .unwrap();
        assert_eq!(res.lambda_star, 0.2);
        assert_eq!(res.index, 0);
    }

    #[test]
    fn fold_assignment_is_deterministic() {
        let (x, y) = gaussian_data(50, 6, 2, 1.0);
        let fam = FamilySpec::gaussian();
        let grid = lambda_grid(&x, &y, &fam, 10, 0.05).unwrap();
        let a = cross_validate(&x, &y, &fam, PenaltyKind::Mcp, 3.0, 5, &grid, &mut RngStream::new(3, 0)).unwrap();
        let b = cross_validate(&x, &y, &fam, PenaltyKind::Mcp, 3.0, 5, &grid, &mut RngStream::new(3, 0)).unwrap();
        assert_eq!(a, b);
        let mut counts = [0usize; 5];
        for &f in &a.fold_of {
            counts[f] += 1;
        }
        assert!(counts.iter().all(|&c| c == 10));
    }

    #[test]
    fn rejects_bad_grids_and_folds() {
        let (x, y) = gaussian_data(20, 3, 4, 1.0);
        let fam = FamilySpec::gaussian();
        let mut rng = RngStream::new(0, 0);
        assert!(cross_validate(&x, &y, &fam, PenaltyKind::Lasso, 3.0, 1, &[0.1], &mut rng).is_err());
        assert!(cross_validate(&x, &y, &fam, PenaltyKind::Lasso, 3.0, 5, &[], &mut rng).is_err());
        assert!(cross_validate(&x, &y, &fam, PenaltyKind::Lasso, 3.0, 5, &[0.1, 0.2], &mut rng).is_err());
    }

    #[test]
    fn single_class_training_split_errors() {
        // one success among 20: some training split must lack it when it is
        // the held-out observation
        let (x, _) = gaussian_data(20, 3, 5, 1.0);
        let mut y = Array1::zeros(20);
        y[7] = 1.0;
        let res = cross_validate(
            &x,
            &y,
            &FamilySpec::Binomial,
            PenaltyKind::Lasso,
            3.0,
            4,
            &[0.1, 0.05],
            &mut RngStream::new(1, 0),
        );
        assert!(matches!(res, Err(Error::SingleClassFold)));
    }

    #[test]
    fn strong_signal_is_recovered() {
        let (x, y) = gaussian_data(120, 20, 6, 2.0);
        let fam = FamilySpec::gaussian();
        let grid = lambda_grid(&x, &y, &fam, 30, 0.01).unwrap();
        let res = cross_validate(&x, &y, &fam, PenaltyKind::Lasso, 3.0, 10, &grid, &mut RngStream::new(6, 1)).unwrap();
        assert!(res.fit.beta[0] > 1.0 && res.fit.beta[1] < -1.0);
    }

    #[test]
    fn scaled_lasso_grid_of_lambda0() {
        let (x, y) = gaussian_data(60, 10, 7, 1.0);
        let res = cross_validate(
            &x,
            &y,
            &FamilySpec::gaussian(),
            PenaltyKind::ScaledLasso,
            3.0,
            5,
            &[0.5, 0.3, 0.1],
            &mut RngStream::new(7, 0),
        )
        .unwrap();
        assert!(res.fit.nuisance_estimate.is_some());
    }
}
