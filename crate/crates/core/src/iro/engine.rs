use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eiv::{
    estimate_me_precision_diag, estimate_omega_x_diag, impute_x_augmented, ImputationPlan, PrecisionPair,
    ReplicateDataset,
};
use crate::polya_gamma::{sample_pg, PgParams};
use crate::rng::{derive_seed_path, RngStream};
use crate::solvers::{
    cross_validate, fit_penalized_warm, lambda_grid, scaled_lasso, universal_lambda0, FamilySpec, FitOptions,
    FitResult, PenaltyKind, PenaltySpec, WarmStart,
};
use crate::{Error, Result, Scalar};

use super::aggregate::{aggregate_coefficients, aggregate_values, split_chain_diagnostic, SplitChainDiagnostic};
use super::IroConfig;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

// Stream tags under (seed, iteration).
const TAG_PG: u64 = 1;
const TAG_X: u64 = 2;
const TAG_CV: u64 = 3;

/// Residual variances below this are raised to it before being used as the
/// imputation noise level.
const SIGMA2_FLOOR: f64 = 1e-8;

/// Source of the noise precision Ω_u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", bound = "T: Scalar")]
pub enum NoiseSpec<T> {
    Known {
        omega_u_diag: Array1<T>,
        #[serde(default = "Option::default", skip_serializing_if = "Option::is_none")]
        overrides: Option<Vec<Array1<T>>>,
    },
    /// Estimate diag Ω_u once from the replicates before iterating.
    Estimate,
}

impl<T: Scalar> NoiseSpec<T> {
    pub fn known(omega_u_diag: Array1<T>) -> Self {
        NoiseSpec::Known {
            omega_u_diag,
            overrides: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TraceEntry<T> {
    /// 1-based iteration index.
    pub iteration: usize,
    pub beta: Array1<T>,
    /// Intercept on the centered covariate scale.
    pub intercept: T,
    pub lambda: T,
    pub nuisance: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CoefficientTrace<T> {
    /// Post burn-in iterations, in order.
    pub retained: Vec<TraceEntry<T>>,
    /// Burn-in iterations, kept only when requested.
    #[serde(default = "Vec::new", skip_serializing_if = "Vec::is_empty")]
    pub burn_in: Vec<TraceEntry<T>>,
}

impl<T: Scalar> CoefficientTrace<T> {
    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }

    /// Retained coefficients as a `k × p` matrix.
    pub fn beta_matrix(&self) -> Array2<T> {
        let p = self.retained.first().map_or(0, |e| e.beta.len());
        let mut out = Array2::zeros((self.retained.len(), p));
        for (mut row, e) in out.rows_mut().into_iter().zip(&self.retained) {
            row.assign(&e.beta);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IroResult<T> {
    /// Aggregate of the retained trace.
    pub beta_hat: Array1<T>,
    /// Aggregated intercept on the original covariate scale.
    pub intercept_hat: T,
    pub trace: CoefficientTrace<T>,
    pub omega_x_final: Array1<T>,
    pub omega_u_diag: Array1<T>,
    /// Whether Ω_u was estimated from the replicates.
    pub noise_estimated: bool,
    /// Last residual variance (Gaussian family only).
    pub nuisance_final: Option<T>,
    /// Absent when fewer than 4 iterations were retained.
    pub diagnostics: Option<SplitChainDiagnostic>,
    /// Columns whose Ω_x estimate hit the variance floor at some iteration.
    pub omega_x_floored: Vec<usize>,
    /// Column means of w̄ removed before fitting.
    pub centering_means: Array1<T>,
}

/// A failed run: the iteration that failed, the cause and everything
/// retained before it.
#[derive(Debug, Clone, thiserror::Error)]
#[error("IRO aborted at iteration {iteration}: {source}")]
pub struct IroError<T: std::fmt::Debug> {
    pub iteration: usize,
    pub source: Error,
    pub partial_trace: CoefficientTrace<T>,
}

impl<T: std::fmt::Debug> IroError<T> {
    pub fn into_inner(self) -> Error {
        self.source
    }
}

/// Starting values computed from the replicate averages.
#[derive(Debug, Clone, PartialEq)]
pub struct Initialization<T> {
    pub beta: Array1<T>,
    pub intercept: T,
    pub lambda: T,
    pub omega_x_diag: Array1<T>,
    pub omega_x_floored: Vec<usize>,
    /// Residual variance for Gaussian responses.
    pub nuisance: Option<T>,
}

fn sigma2_from<T: Scalar>(fit: &FitResult<T>, fallback: Option<T>) -> Option<T> {
    fit.nuisance_estimate
        .or(fallback)
        .map(|s| s.max(T::of(SIGMA2_FLOOR)))
}

/// One regularized fit on an imputed design: scaled lasso at the universal
/// λ0, a cross-validated fit, or (between tuning iterations) a warm refit at
/// the last selected λ.
fn regularized_fit<T: Scalar>(
    x: &Array2<T>,
    y: &Array1<T>,
    config: &IroConfig<T>,
    iteration: usize,
    reuse: Option<(T, WarmStart<T>)>,
) -> Result<FitResult<T>> {
    let (n, p) = x.dim();
    let kind = config.penalty_kind;
    if kind == PenaltyKind::ScaledLasso {
        return scaled_lasso(x, y, universal_lambda0(n, p));
    }
    if let Some((lambda, warm)) = reuse {
        let penalty = PenaltySpec {
            kind,
            lambda,
            mcp_gamma: config.mcp_gamma,
        };
        return fit_penalized_warm(x, y, &config.family, &penalty, Some(&warm), &FitOptions::default());
    }
    let grid = lambda_grid(x, y, &config.family, config.grid_length, config.grid_ratio_for(n, p))?;
    let mut rng = RngStream::new(derive_seed_path(config.seed, &[iteration as u64, TAG_CV]), 0);
    Ok(cross_validate(x, y, &config.family, kind, config.mcp_gamma, config.folds, &grid, &mut rng)?.fit)
}

/// Cross-validated naive fit on the replicate averages of `data` (as given,
/// no centering) together with diag Ω_x estimated from them.
pub fn initialize<T: Scalar>(data: &ReplicateDataset<T>, config: &IroConfig<T>) -> Result<Initialization<T>> {
    config.validate(data.n())?;
    let wbar = data.wbar();
    let fit = regularized_fit(&wbar, data.y(), config, 0, None)?;
    let ox = estimate_omega_x_diag(&wbar)?;
    let nuisance = match config.family {
        FamilySpec::Gaussian { .. } => sigma2_from(&fit, Some(data.y().var(T::zero()))),
        _ => None,
    };
    Ok(Initialization {
        beta: fit.beta,
        intercept: fit.intercept,
        lambda: fit.lambda,
        omega_x_diag: ox.omega_x_diag,
        omega_x_floored: ox.floored,
        nuisance,
    })
}

/// Complete state between iterations; enough to resume bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Checkpoint<T> {
    pub schema_version: u32,
    pub config: IroConfig<T>,
    /// Iterations finished so far.
    pub completed: usize,
    pub beta: Array1<T>,
    pub intercept: T,
    pub lambda: T,
    pub nuisance: Option<T>,
    /// Current Ω_x together with the Ω_u in use.
    pub precision: PrecisionPair<T>,
    pub noise_estimated: bool,
    pub centering_means: Array1<T>,
    /// Previous imputed design; kept for the Pólya-Gamma families, whose
    /// latents are drawn given it.
    pub x_prev: Option<Array2<T>>,
    pub trace: CoefficientTrace<T>,
    pub omega_x_floored: Vec<usize>,
}

/// A run in progress. Iterations are strictly sequential; work inside an
/// iteration runs in parallel with per-observation random streams keyed by
/// `(seed, iteration, purpose, observation)`, so results do not depend on the
/// thread count.
#[derive(Debug, Clone)]
pub struct IroRun<T> {
    data: ReplicateDataset<T>,
    wbar: Array2<T>,
    counts: Vec<usize>,
    state: Checkpoint<T>,
}

impl<T: Scalar> IroRun<T> {
    /// Centers the replicates, resolves Ω_u and computes starting values.
    pub fn new(data: &ReplicateDataset<T>, noise: &NoiseSpec<T>, config: &IroConfig<T>) -> Result<Self> {
        config.validate(data.n())?;
        config.family.check_response(data.y())?;
        let (centered, means) = data.centered();
        let (omega_u, overrides, noise_estimated) = match noise {
            NoiseSpec::Known {
                omega_u_diag,
                overrides,
            } => (omega_u_diag.clone(), overrides.clone(), false),
            // replicate differences ignore centering; the raw data keeps the
            // estimate identical to a standalone one
            NoiseSpec::Estimate => (estimate_me_precision_diag(data)?.omega_u_diag, None, true),
        };
        Error::check_len("omega_u_diag", data.p(), omega_u.len())?;
        if let Some(o) = &overrides {
            Error::check_len("noise overrides", data.n(), o.len())?;
        }
        let init = initialize(&centered, config)?;
        let mut precision = PrecisionPair::new(init.omega_x_diag, omega_u)?;
        if let Some(o) = overrides {
            precision = precision.with_overrides(o)?;
        }
        let wbar = centered.wbar();
        let x_prev = (!matches!(config.family, FamilySpec::Gaussian { .. }))
            .then(|| wbar.clone());
        let state = Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            config: config.clone(),
            completed: 0,
            beta: init.beta,
            intercept: init.intercept,
            lambda: init.lambda,
            nuisance: init.nuisance,
            precision,
            noise_estimated,
            centering_means: means,
            x_prev,
            trace: CoefficientTrace::default(),
            omega_x_floored: init.omega_x_floored,
        };
        Ok(Self {
            counts: centered.replicate_counts(),
            data: centered,
            wbar,
            state,
        })
    }

    /// Rebuilds a run from a checkpoint and the dataset it was taken on.
    pub fn resume(data: &ReplicateDataset<T>, checkpoint: Checkpoint<T>) -> Result<Self> {
        if checkpoint.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::domain(format!(
                "checkpoint schema_version {} is not supported (expected {CHECKPOINT_SCHEMA_VERSION})",
                checkpoint.schema_version
            )));
        }
        checkpoint.config.validate(data.n())?;
        Error::check_len("checkpoint coefficients", data.p(), checkpoint.beta.len())?;
        let (centered, means) = data.centered();
        if means != checkpoint.centering_means {
            return Err(Error::domain("checkpoint was taken on a different dataset"));
        }
        if checkpoint.completed > checkpoint.config.iterations {
            return Err(Error::domain("checkpoint is past the configured iteration count"));
        }
        Ok(Self {
            counts: centered.replicate_counts(),
            wbar: centered.wbar(),
            data: centered,
            state: checkpoint,
        })
    }

    pub fn checkpoint(&self) -> &Checkpoint<T> {
        &self.state
    }

    pub fn completed(&self) -> usize {
        self.state.completed
    }

    pub fn is_finished(&self) -> bool {
        self.state.completed >= self.state.config.iterations
    }

    /// Draws the imputed design for iteration `t` from the previous
    /// iteration's parameters.
    fn impute(&self, t: usize) -> Result<Array2<T>> {
        let st = &self.state;
        let cfg = &st.config;
        let prec = &st.precision;
        let plan = ImputationPlan::new(prec, &self.counts)?;
        let y = self.data.y();
        let beta = st.beta.view();
        let b0 = st.intercept;
        let x_seed = derive_seed_path(cfg.seed, &[t as u64, TAG_X]);
        let pg_seed = derive_seed_path(cfg.seed, &[t as u64, TAG_PG]);
        let sigma2 = st.nuisance.unwrap_or(T::one());

        let rows: Vec<Array1<T>> = (0..self.data.n())
            .into_par_iter()
            .map(|i| {
                let (scale, shift) = match &cfg.family {
                    FamilySpec::Gaussian { .. } => {
                        let inv = T::one() / sigma2;
                        (inv, (y[i] - b0) * inv)
                    }
                    family => {
                        let trials = family.trials_at(i);
                        let x_prev = st.x_prev.as_ref().expect("latent families keep the previous design");
                        let c = b0 + x_prev.row(i).dot(&beta);
                        let mut rng = RngStream::new(pg_seed, i as u64);
                        let z = sample_pg(PgParams::new(trials, c)?, &mut rng)?;
                        (z, cfg.kappa.kappa(y[i], trials) - z * b0)
                    }
                };
                let mut rng = RngStream::new(x_seed, i as u64);
                impute_x_augmented(
                    plan.combined(i),
                    prec.omega_u_for(i),
                    self.counts[i],
                    self.wbar.row(i),
                    scale,
                    beta,
                    shift,
                    &mut rng,
                )
            })
            .collect::<Result<_>>()?;

        let mut x = Array2::zeros((self.data.n(), self.data.p()));
        for (mut dst, src) in x.rows_mut().into_iter().zip(rows) {
            dst.assign(&src);
        }
        Ok(x)
    }

    /// Runs one iteration.
    pub fn step(&mut self) -> Result<()> {
        if self.is_finished() {
            return Err(Error::domain("all configured iterations have run"));
        }
        let t = self.state.completed + 1;
        let x = self.impute(t)?;
        let ox = estimate_omega_x_diag(&x)?;
        let cfg = &self.state.config;
        let reuse = (!(t - 1).is_multiple_of(cfg.tune_every)).then(|| {
            (
                self.state.lambda,
                WarmStart {
                    beta: self.state.beta.clone(),
                    intercept: self.state.intercept,
                },
            )
        });
        let fit = regularized_fit(&x, self.data.y(), cfg, t, reuse)?;
        let is_gaussian = matches!(cfg.family, FamilySpec::Gaussian { .. });
        let retain = t > cfg.burn_in;
        let keep_burn = cfg.retain_burn_in;

        let st = &mut self.state;
        if is_gaussian {
            st.nuisance = sigma2_from(&fit, st.nuisance);
        } else {
            st.x_prev = Some(x);
        }
        st.precision.omega_x_diag = ox.omega_x_diag;
        for j in ox.floored {
            if !st.omega_x_floored.contains(&j) {
                st.omega_x_floored.push(j);
            }
        }
        st.beta = fit.beta;
        st.intercept = fit.intercept;
        st.lambda = fit.lambda;
        let entry = TraceEntry {
            iteration: t,
            beta: st.beta.clone(),
            intercept: st.intercept,
            lambda: st.lambda,
            nuisance: st.nuisance,
        };
        if retain {
            st.trace.retained.push(entry);
        } else if keep_burn {
            st.trace.burn_in.push(entry);
        }
        st.completed = t;
        Ok(())
    }

    /// Runs the remaining iterations, aborting on the first failure.
    pub fn run_to_end(&mut self) -> std::result::Result<(), IroError<T>> {
        while !self.is_finished() {
            self.step().map_err(|source| IroError {
                iteration: self.state.completed + 1,
                source,
                partial_trace: self.state.trace.clone(),
            })?;
        }
        Ok(())
    }

    /// Aggregates the retained trace.
    pub fn result(&self) -> Result<IroResult<T>> {
        let st = &self.state;
        let method = st.config.aggregation;
        let beta_hat = aggregate_coefficients(&st.trace, method)?;
        let mut b0s: Vec<T> = st.trace.retained.iter().map(|e| e.intercept).collect();
        let intercept_hat = aggregate_values(&mut b0s, method)? - st.centering_means.dot(&beta_hat);
        let mut floored = st.omega_x_floored.clone();
        floored.sort_unstable();
        Ok(IroResult {
            beta_hat,
            intercept_hat,
            trace: st.trace.clone(),
            omega_x_final: st.precision.omega_x_diag.clone(),
            omega_u_diag: st.precision.omega_u_diag.clone(),
            noise_estimated: st.noise_estimated,
            nuisance_final: st.nuisance,
            diagnostics: split_chain_diagnostic(&st.trace).ok(),
            omega_x_floored: floored,
            centering_means: st.centering_means.clone(),
        })
    }
}

/// Runs the full procedure. Failures during initialization are reported at
/// iteration 0.
pub fn run_iro<T: Scalar>(
    data: &ReplicateDataset<T>,
    noise: &NoiseSpec<T>,
    config: &IroConfig<T>,
) -> std::result::Result<IroResult<T>, IroError<T>> {
    let wrap = |iteration: usize, source: Error, partial_trace: CoefficientTrace<T>| IroError {
        iteration,
        source,
        partial_trace,
    };
    let mut run = IroRun::new(data, noise, config).map_err(|e| wrap(0, e, CoefficientTrace::default()))?;
    run.run_to_end()?;
    run.result()
        .map_err(|e| wrap(run.completed(), e, run.checkpoint().trace.clone()))
}
