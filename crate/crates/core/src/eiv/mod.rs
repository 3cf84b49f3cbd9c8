//! Measurement-error structure: replicate data, noise precision estimation
//! and the imputation full conditionals.
//!
//! Each latent covariate vector has prior `x_i ~ N(0, Ω_x⁻¹)` and is seen
//! through `r_i` replicates `w_ij = x_i + u_ij`, `u_ij ~ N(0, Ω_u⁻¹)`. All
//! precisions are diagonal. Given the replicates alone, `x_i` is Gaussian with
//! precision `Ω_x + r_i·Ω_u` and canonical mean `r_i·Ω_u·w̄_i`; each response
//! family adds a rank-1 term along β.

mod dataset;
mod impute;
mod noise;

pub use dataset::{PrecisionPair, ReplicateDataset};
pub use impute::{
    estimate_omega_x_diag, impute_x_augmented, impute_x_binomial, impute_x_covariate_only, impute_x_gaussian,
    impute_x_negbin, sample_pg_latent, ImputationPlan, KappaConvention, OmegaXEstimate, OMEGA_X_VARIANCE_FLOOR,
};
pub use noise::{
    estimate_me_precision_diag, estimate_me_precision_per_observation, literal_display_statistic, NoiseEstimate,
};
