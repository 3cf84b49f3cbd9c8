use ndarray::{Array1, Array2};

use crate::polya_gamma::{pg_mean, PgParams};
use crate::{Error, Result, Scalar};

use super::standardize::Standardized;
use super::threshold::{penalty_value, univariate_penalized};
use super::{residual_variance, FamilySpec, FitResult, PenaltyKind, PenaltySpec};

/// Number of consecutive objective increases tolerated in the outer loop.
const MAX_CONSECUTIVE_INCREASES: usize = 5;

/// Inner coordinate-descent sweeps per IRLS step; the outer loop re-weights
/// and continues, so a truncated inner solve only makes that step inexact.
const MAX_INNER_SWEEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T> {
    /// Stop when the largest coefficient change in a sweep is below this.
    pub tol: T,
    pub max_sweeps: usize,
    /// Outer reweighting steps for binomial-type families.
    pub max_outer: usize,
    pub track_objective: bool,
    /// Along a path, stop after the first fit whose deviance falls below
    /// this fraction of the null deviance.
    pub saturation: Option<T>,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-7).max(T::epsilon() * T::of(100.0)),
            max_sweeps: 10_000,
            max_outer: 1_000,
            track_objective: false,
            saturation: Some(T::of(0.01)),
        }
    }
}

/// Starting point for a fit, on the original covariate scale.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart<T> {
    pub beta: Array1<T>,
    pub intercept: T,
}

pub(crate) struct SolveStats<T> {
    pub sweeps: usize,
    pub objective: T,
    pub trace: Vec<T>,
}

pub(crate) fn validate_inputs<T: Scalar>(x: &Array2<T>, y: &Array1<T>, family: &FamilySpec<T>) -> Result<()> {
    Error::check_len("response length", x.nrows(), y.len())?;
    if x.nrows() == 0 {
        return Err(Error::domain("empty design"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("design matrix has non-finite entries"));
    }
    family.check_response(y)
}

/// Coordinate-descent fit at a single penalty level, started from zero.
pub fn fit_penalized<T: Scalar>(
    x: &Array2<T>,
    y: &Array1<T>,
    family: &FamilySpec<T>,
    penalty: &PenaltySpec<T>,
) -> Result<FitResult<T>> {
    fit_penalized_warm(x, y, family, penalty, None, &FitOptions::default())
}

/// Coordinate-descent fit at a single penalty level from an optional warm start.
pub fn fit_penalized_warm<T: Scalar>(
    x: &Array2<T>,
    y: &Array1<T>,
    family: &FamilySpec<T>,
    penalty: &PenaltySpec<T>,
    warm: Option<&WarmStart<T>>,
    opts: &FitOptions<T>,
) -> Result<FitResult<T>> {
    penalty.validate()?;
    if penalty.kind == PenaltyKind::ScaledLasso {
        if family.family() != super::Family::Gaussian {
            return Err(Error::domain("the scaled lasso is defined for Gaussian responses only"));
        }
        return super::scaled_lasso(x, y, penalty.lambda);
    }
    validate_inputs(x, y, family)?;
    let std = Standardized::new(x);
    let (mut beta, mut b0) = initial_point(&std, y, family, warm)?;
    solve_standardized(&std, y, family, penalty, &mut beta, &mut b0, opts)
}

/// Fits along a sequence of penalty levels with warm starts, in the given
/// order (normally decreasing).
///
/// With `opts.saturation` set the path ends early once the model saturates,
/// so the result may be shorter than `lambdas`.
pub fn fit_path<T: Scalar>(
    x: &Array2<T>,
    y: &Array1<T>,
    family: &FamilySpec<T>,
    kind: PenaltyKind,
    mcp_gamma: T,
    lambdas: &[T],
    opts: &FitOptions<T>,
) -> Result<Vec<FitResult<T>>> {
    if kind == PenaltyKind::ScaledLasso {
        return lambdas.iter().map(|&l0| super::scaled_lasso(x, y, l0)).collect();
    }
    validate_inputs(x, y, family)?;
    let std = Standardized::new(x);
    let (mut beta, mut b0) = initial_point(&std, y, family, None)?;
    let null_dev = deviance(x, y, family, None);
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let penalty = PenaltySpec {
            kind,
            lambda,
            mcp_gamma,
        };
        penalty.validate()?;
        let fit = solve_standardized(&std, y, family, &penalty, &mut beta, &mut b0, opts)?;
        let saturated = opts
            .saturation
            .is_some_and(|frac| deviance(x, y, family, Some(&fit)) < frac * null_dev);
        out.push(fit);
        if saturated {
            break;
        }
    }
    Ok(out)
}

/// Twice the log-likelihood gap to the saturated model; `None` gives the
/// intercept-only fit.
fn deviance<T: Scalar>(x: &Array2<T>, y: &Array1<T>, family: &FamilySpec<T>, fit: Option<&FitResult<T>>) -> T {
    let eta = match fit {
        Some(f) => f.predict_eta(x),
        None => Array1::from_elem(y.len(), null_eta(y, family)),
    };
    deviance_at(y, family, eta.as_slice().expect("contiguous"))
}

fn null_eta<T: Scalar>(y: &Array1<T>, family: &FamilySpec<T>) -> T {
    match family {
        FamilySpec::Gaussian { .. } => y.mean().unwrap_or(T::zero()),
        _ => null_intercept(y, family).unwrap_or(T::zero()),
    }
}

fn deviance_at<T: Scalar>(y: &Array1<T>, family: &FamilySpec<T>, eta: &[T]) -> T {
    let mut dev = T::zero();
    for (i, (&yi, &e)) in y.iter().zip(eta).enumerate() {
        let sat = match family {
            FamilySpec::Gaussian { .. } => T::zero(),
            _ => {
                let m = family.trials_at(i);
                let xlogx = |a: T| if a > T::zero() { a * (a / m).ln() } else { T::zero() };
                -(xlogx(yi) + xlogx(m - yi))
            }
        };
        dev += family.unit_loss(i, yi, e) - sat;
    }
    dev + dev
}

pub(crate) fn initial_point<T: Scalar>(
    std: &Standardized<T>,
    y: &Array1<T>,
    family: &FamilySpec<T>,
    warm: Option<&WarmStart<T>>,
) -> Result<(Array1<T>, T)> {
    if let Some(w) = warm {
        Error::check_len("warm-start coefficients", std.ncols(), w.beta.len())?;
        let mut beta = std.to_standardized(&w.beta);
        for j in 0..beta.len() {
            if !std.active(j) {
                beta[j] = T::zero();
            }
        }
        let b0 = w.intercept + std.means.dot(&w.beta);
        return Ok((beta, b0));
    }
    let p = std.ncols();
    let b0 = match family {
        FamilySpec::Gaussian { .. } => y.mean().unwrap_or(T::zero()),
        _ => null_intercept(y, family)?,
    };
    Ok((Array1::zeros(p), b0))
}

/// Intercept of the covariate-free binomial-type model.
pub(crate) fn null_intercept<T: Scalar>(y: &Array1<T>, family: &FamilySpec<T>) -> Result<T> {
    let total_y: T = y.sum();
    let total_m: T = (0..y.len()).map(|i| family.trials_at(i)).sum();
    if total_y <= T::zero() || total_y >= total_m {
        return Err(Error::DegenerateFit(
            "binomial-type response has no variation (all failures or all successes)".into(),
        ));
    }
    let p = total_y / total_m;
    Ok((p / (T::one() - p)).ln())
}

pub(crate) fn solve_standardized<T: Scalar>(
    std: &Standardized<T>,
    y: &Array1<T>,
    family: &FamilySpec<T>,
    penalty: &PenaltySpec<T>,
    beta: &mut Array1<T>,
    b0: &mut T,
    opts: &FitOptions<T>,
) -> Result<FitResult<T>> {
    let n = std.nrows();
    let stats;
    let mut nuisance = None;
    match family {
        FamilySpec::Gaussian { .. } => {
            let ybar = y.mean().unwrap_or(T::zero());
            *b0 = ybar;
            let yc = y.mapv(|v| v - ybar);
            let (s, resid) = gaussian_cd(std, &yc, penalty, beta, opts);
            stats = s;
            nuisance = residual_variance(&resid, beta).ok();
        }
        _ => {
            stats = logistic_mm(std, y, family, penalty, beta, b0, opts)?;
        }
    }
    let beta_orig = std.to_original(beta);
    let intercept = std.intercept_to_original(*b0, &beta_orig);
    let nonzero_count = beta_orig.iter().filter(|b| **b != T::zero()).count();
    debug_assert!(n > 0);
    Ok(FitResult {
        beta: beta_orig,
        intercept,
        nonzero_count,
        nuisance_estimate: nuisance,
        objective: stats.objective,
        lambda: penalty.lambda,
        sweeps: stats.sweeps,
        objective_trace: stats.trace,
    })
}

fn penalty_total<T: Scalar>(beta: &Array1<T>, penalty: &PenaltySpec<T>) -> T {
    beta.iter()
        .map(|&b| penalty_value(b, penalty.lambda, penalty.kind, penalty.mcp_gamma))
        .sum()
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
/// `y -= alpha·x`
fn sub_scaled<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi -= alpha * xi;
    }
}

/// Cyclic coordinate descent for the centered Gaussian problem. Returns the
/// stats and the final residual `yc − Xs·β`.
fn gaussian_cd<T: Scalar>(
    std: &Standardized<T>,
    yc: &Array1<T>,
    penalty: &PenaltySpec<T>,
    beta: &mut Array1<T>,
    opts: &FitOptions<T>,
) -> (SolveStats<T>, Array1<T>) {
    let n = std.nrows();
    let p = std.ncols();
    let nf = T::of_usize(n);
    let ys = yc.as_slice().expect("contiguous response");
    let curv: Vec<T> = (0..p).map(|j| dot(std.col(j), std.col(j)) / nf).collect();
    let residual = |beta: &Array1<T>| {
        let mut r = yc.clone();
        for j in 0..p {
            if beta[j] != T::zero() {
                sub_scaled(beta[j], std.col(j), r.as_slice_mut().unwrap());
            }
        }
        r
    };
    let objective = |beta: &Array1<T>| {
        let r = residual(beta);
        r.dot(&r) / (T::of(2.0) * nf) + penalty_total(beta, penalty)
    };

    // covariance updates: g_j = x_jᵀr/n is kept current through Gram columns
    let mut g: Vec<T> = (0..p).map(|j| dot(std.col(j), ys) / nf).collect();
    for j in 0..p {
        if beta[j] != T::zero() {
            sub_scaled(beta[j], std.gram_col(j), &mut g);
        }
    }

    let mut sweeps = 0;
    let mut trace = Vec::new();
    let update = |j: usize, beta: &mut Array1<T>, g: &mut Vec<T>| -> T {
        let old = beta[j];
        let new = univariate_penalized(g[j] + curv[j] * old, curv[j], penalty);
        if new != old {
            sub_scaled(new - old, std.gram_col(j), g);
            beta[j] = new;
        }
        (new - old).abs()
    };

    'outer: while sweeps < opts.max_sweeps {
        let mut max_change = T::zero();
        for j in 0..p {
            if std.active(j) {
                max_change = max_change.max(update(j, beta, &mut g));
            }
        }
        sweeps += 1;
        if opts.track_objective {
            trace.push(objective(beta));
        }
        if max_change < opts.tol {
            break;
        }
        // iterate on the current support until it settles, then re-check all
        loop {
            if sweeps >= opts.max_sweeps {
                break 'outer;
            }
            let mut max_change = T::zero();
            for j in 0..p {
                if beta[j] != T::zero() {
                    max_change = max_change.max(update(j, beta, &mut g));
                }
            }
            sweeps += 1;
            if max_change < opts.tol {
                break;
            }
        }
    }
    let r = residual(beta);
    let obj = r.dot(&r) / (T::of(2.0) * nf) + penalty_total(beta, penalty);
    (
        SolveStats {
            sweeps,
            objective: obj,
            trace,
        },
        r,
    )
}

/// Outer quadratic approximation used by the binomial-type solver.
#[derive(Clone, Copy, PartialEq)]
enum Weights {
    /// Newton weights `m_i p_i (1 − p_i)` and working residual `(y_i − m_i p_i)/w_i`.
    Newton,
    /// Pólya-Gamma means `E[PG(m_i, ψ_i)]` with working response `κ_i / w_i`,
    /// `κ_i = y_i − m_i/2`. This quadratic majorizes the negative
    /// log-likelihood, so a step on it never increases the objective.
    PgMean,
}

/// Penalized IRLS for logit-link families.
///
/// Each outer step builds a weighted least-squares surrogate at the current
/// linear predictor and minimizes it (plus the penalty) by coordinate descent.
/// Newton steps are tried first, with step halving; when halving cannot
/// decrease the objective the step is redone on the Pólya-Gamma majorizer.
fn logistic_mm<T: Scalar>(
    std: &Standardized<T>,
    y: &Array1<T>,
    family: &FamilySpec<T>,
    penalty: &PenaltySpec<T>,
    beta: &mut Array1<T>,
    b0: &mut T,
    opts: &FitOptions<T>,
) -> Result<SolveStats<T>> {
    const MAX_HALVINGS: usize = 10;
    let n = std.nrows();
    let p = std.ncols();
    let nf = T::of_usize(n);
    let trials: Vec<T> = (0..n).map(|i| family.trials_at(i)).collect();
    let kappa: Vec<T> = (0..n).map(|i| y[i] - T::of(0.5) * trials[i]).collect();

    let linear_predictor = |beta: &Array1<T>, b0: T| -> Vec<T> {
        let mut eta = vec![b0; n];
        for j in 0..p {
            if beta[j] != T::zero() {
                let col = std.col(j);
                for (e, &x) in eta.iter_mut().zip(col) {
                    *e += beta[j] * x;
                }
            }
        }
        eta
    };
    let objective = |eta: &[T], beta: &Array1<T>| {
        let loss: T = (0..n).map(|i| family.unit_loss(i, y[i], eta[i])).sum();
        loss / nf + penalty_total(beta, penalty)
    };
    let not_worse = |obj: T, prev: T| obj <= prev + T::of(1e-12) * (T::one() + prev.abs());

    // a saturated fit ends the path, so it need not be polished
    let saturated_below = opts
        .saturation
        .map(|frac| frac * deviance_at(y, family, &vec![null_eta(y, family); n]));

    let mut eta = linear_predictor(beta, *b0);
    let mut prev_obj = objective(&eta, beta);
    let mut trace = Vec::new();
    if opts.track_objective {
        trace.push(prev_obj);
    }
    let mut sweeps = 0usize;
    let mut increases = 0usize;
    let mut w = vec![T::zero(); n];
    let mut r = vec![T::zero(); n];
    let mut curv = vec![T::zero(); p];

    for _outer in 0..opts.max_outer {
        let beta_before = beta.clone();
        let b0_before = *b0;
        let mut obj = prev_obj;
        for mode in [Weights::Newton, Weights::PgMean] {
            beta.assign(&beta_before);
            *b0 = b0_before;
            for i in 0..n {
                let (wi, ri) = match mode {
                    Weights::Newton => {
                        let pi = super::logistic(eta[i]);
                        let wi = (trials[i] * pi * (T::one() - pi)).max(T::of(1e-5) * trials[i]);
                        (wi, (y[i] - trials[i] * pi) / wi)
                    }
                    Weights::PgMean => {
                        let wi = pg_mean(PgParams {
                            b: trials[i],
                            c: eta[i],
                        })
                        .max(T::of(1e-12));
                        (wi, kappa[i] / wi - eta[i])
                    }
                };
                w[i] = wi;
                r[i] = ri;
            }
            for j in 0..p {
                if std.active(j) {
                    curv[j] = std.col(j).iter().zip(&w).map(|(&x, &wi)| wi * x * x).sum::<T>() / nf;
                }
            }
            sweeps += weighted_cd(std, &w, &mut r, &curv, penalty, beta, b0, opts, opts.max_sweeps.saturating_sub(sweeps).min(MAX_INNER_SWEEPS));
            eta = linear_predictor(beta, *b0);
            obj = objective(&eta, beta);
            if mode == Weights::PgMean || (obj.is_finite() && not_worse(obj, prev_obj)) {
                break;
            }
            // halve toward the previous iterate
            let target = beta.clone();
            let target_b0 = *b0;
            let mut t = T::one();
            for _ in 0..MAX_HALVINGS {
                t *= T::of(0.5);
                *b0 = b0_before + t * (target_b0 - b0_before);
                for (b, (&old, &new)) in beta.iter_mut().zip(beta_before.iter().zip(target.iter())) {
                    *b = old + t * (new - old);
                }
                eta = linear_predictor(beta, *b0);
                obj = objective(&eta, beta);
                if obj.is_finite() && not_worse(obj, prev_obj) {
                    break;
                }
            }
            if obj.is_finite() && not_worse(obj, prev_obj) {
                break;
            }
            eta = linear_predictor(&beta_before, b0_before);
        }
        if opts.track_objective {
            trace.push(obj);
        }
        if !obj.is_finite() {
            return Err(Error::Convergence {
                reason: "non-finite objective in IRLS".into(),
                last_iterate: beta.iter().map(|b| b.to_f64_lossy()).collect(),
            });
        }
        if !not_worse(obj, prev_obj) {
            increases += 1;
            if increases >= MAX_CONSECUTIVE_INCREASES {
                return Err(Error::Convergence {
                    reason: format!("IRLS objective increased for {MAX_CONSECUTIVE_INCREASES} consecutive outer steps"),
                    last_iterate: std.to_original(beta).iter().map(|b| b.to_f64_lossy()).collect(),
                });
            }
        } else {
            increases = 0;
        }
        let decrease = prev_obj - obj;
        prev_obj = obj;

        // ill-conditioned surrogates can creep in β long after the objective
        // has settled, so a negligible relative decrease also ends the loop
        let step = beta
            .iter()
            .zip(beta_before.iter())
            .fold((*b0 - b0_before).abs(), |m, (a, b)| m.max((*a - *b).abs()));
        let settled = decrease >= T::zero() && decrease < opts.tol * T::of(1e-3) * (T::one() + obj.abs());
        let saturated = saturated_below.is_some_and(|d| deviance_at(y, family, &eta) < d);
        if step < opts.tol || settled || saturated || sweeps >= opts.max_sweeps {
            break;
        }
    }
    Ok(SolveStats {
        sweeps,
        objective: prev_obj,
        trace,
    })
}

/// Coordinate descent on `(1/2n) Σ w_i (r_i − Δη_i)² + penalty`, updating
/// the working residual `r` in place. Converged when no update moves the
/// surrogate by more than `tol` (curvature times squared change). Returns
/// the number of sweeps.
#[allow(clippy::too_many_arguments)]
fn weighted_cd<T: Scalar>(
    std: &Standardized<T>,
    w: &[T],
    r: &mut [T],
    curv: &[T],
    penalty: &PenaltySpec<T>,
    beta: &mut Array1<T>,
    b0: &mut T,
    opts: &FitOptions<T>,
    budget: usize,
) -> usize {
    let nf = T::of_usize(std.nrows());
    let w_sum: T = w.iter().copied().sum();
    let mut sweeps = 0;
    while sweeps < budget.max(1) {
        let mut max_change = T::zero();
        let shift = r.iter().zip(w).map(|(&ri, &wi)| wi * ri).sum::<T>() / w_sum;
        if shift != T::zero() {
            *b0 += shift;
            for ri in r.iter_mut() {
                *ri -= shift;
            }
            max_change = max_change.max(w_sum / nf * shift * shift);
        }
        for j in 0..std.ncols() {
            if !std.active(j) || curv[j] <= T::zero() {
                continue;
            }
            let col = std.col(j);
            let old = beta[j];
            let g = col
                .iter()
                .zip(w)
                .zip(r.iter())
                .fold(T::zero(), |acc, ((&x, &wi), &ri)| acc + wi * x * ri)
                / nf;
            let new = univariate_penalized(g + curv[j] * old, curv[j], penalty);
            if new != old {
                sub_scaled(new - old, col, r);
                beta[j] = new;
                max_change = max_change.max(curv[j] * (new - old) * (new - old));
            }
        }
        sweeps += 1;
        if max_change < opts.tol {
            break;
        }
    }
    sweeps
}
