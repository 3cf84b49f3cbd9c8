use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::iro::{run_iro, IroConfig, NoiseSpec};
use crate::rng::{derive_seed_path, RngStream};
use crate::solvers::{cross_validate, lambda_grid, scaled_lasso, universal_lambda0, FamilySpec, PenaltyKind};
use crate::{Error, Result, Scalar};

use super::{gen_dataset, NoiseMode, SimulationSpec};

pub const CSV_HEADER: &str = "setting,p,n,gamma,arm,metric,value,n_success";

const TAG_DATA: u64 = 1;
const TAG_IDEAL: u64 = 2;
const TAG_NAIVE: u64 = 3;
const TAG_IRO: u64 = 4;

const ARMS: [&str; 3] = ["ideal", "naive", "iro"];

/// Squared ℓ2 error and support counts of one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub l2: f64,
    pub tp: usize,
    pub fp: usize,
}

/// `‖β̂ − β*‖²`, and the number of entries with `|β̂_j| > zero_tol` inside and
/// outside the support of β*.
pub fn compute_metrics<T: Scalar>(beta_hat: &Array1<T>, beta_star: &Array1<T>, zero_tol: f64) -> Result<Metrics> {
    Error::check_len("estimate", beta_star.len(), beta_hat.len())?;
    let mut m = Metrics { l2: 0.0, tp: 0, fp: 0 };
    for (&b, &s) in beta_hat.iter().zip(beta_star.iter()) {
        let (b, s) = (b.to_f64_lossy(), s.to_f64_lossy());
        m.l2 += (b - s) * (b - s);
        if b.abs() > zero_tol {
            if s != 0.0 {
                m.tp += 1;
            } else {
                m.fp += 1;
            }
        }
    }
    Ok(m)
}

/// Metrics of one arm on one instance, or why it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmOutcome {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ArmOutcome {
    fn from_result(r: Result<Metrics>) -> Self {
        match r {
            Ok(m) => Self {
                metrics: Some(m),
                error: None,
            },
            Err(e) => Self {
                metrics: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub index: usize,
    pub ideal: ArmOutcome,
    pub naive: ArmOutcome,
    pub iro: ArmOutcome,
}

impl InstanceOutcome {
    pub fn arm(&self, name: &str) -> Option<&ArmOutcome> {
        match name {
            "ideal" => Some(&self.ideal),
            "naive" => Some(&self.naive),
            "iro" => Some(&self.iro),
            _ => None,
        }
    }
}

/// Averages over the instances where the arm succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub arm: String,
    pub l2: Option<f64>,
    pub tp: Option<f64>,
    pub fp: Option<f64>,
    pub n_success: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub spec: SimulationSpec,
    pub rows: Vec<MetricRow>,
    pub instances: Vec<InstanceOutcome>,
}

impl ExperimentTable {
    pub fn row(&self, arm: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.arm == arm)
    }
}

/// Penalized fit of `y` on a fully observed design, tuned like the IRO arm.
fn direct_fit(
    x: &Array2<f64>,
    y: &Array1<f64>,
    family: &FamilySpec<f64>,
    spec: &SimulationSpec,
    seed: u64,
) -> Result<Array1<f64>> {
    let (n, p) = x.dim();
    if spec.penalty_kind == PenaltyKind::ScaledLasso {
        return Ok(scaled_lasso(x, y, universal_lambda0(n, p))?.beta);
    }
    let defaults = IroConfig::<f64>::default();
    let ratio = if n > p { 0.001 } else { 0.05 };
    let grid = lambda_grid(x, y, family, defaults.grid_length, ratio)?;
    let mut rng = RngStream::new(seed, 0);
    let cv = cross_validate(x, y, family, spec.penalty_kind, defaults.mcp_gamma, spec.folds, &grid, &mut rng)?;
    Ok(cv.fit.beta)
}

fn run_instance(spec: &SimulationSpec, index: usize) -> Result<InstanceOutcome> {
    let k = index as u64;
    let mut rng = RngStream::new(derive_seed_path(spec.seed, &[k, TAG_DATA]), 0);
    let sim = gen_dataset::<f64>(spec, &mut rng)?;
    let family = spec.family::<f64>();
    let y = sim.data.y();
    let metrics = |b: Result<Array1<f64>>| b.and_then(|b| compute_metrics(&b, &sim.beta_star, spec.zero_tol));

    let ideal = metrics(direct_fit(&sim.x_true, y, &family, spec, derive_seed_path(spec.seed, &[k, TAG_IDEAL])));
    let naive = metrics(direct_fit(&sim.data.wbar(), y, &family, spec, derive_seed_path(spec.seed, &[k, TAG_NAIVE])));

    let config = IroConfig {
        iterations: spec.iterations,
        burn_in: spec.burn_in,
        family,
        penalty_kind: spec.penalty_kind,
        folds: spec.folds,
        seed: derive_seed_path(spec.seed, &[k, TAG_IRO]),
        ..IroConfig::default()
    };
    let noise = match spec.noise {
        NoiseMode::Known => NoiseSpec::known(sim.known_omega_u()),
        NoiseMode::Estimate => NoiseSpec::Estimate,
    };
    let iro = metrics(
        run_iro(&sim.data, &noise, &config)
            .map(|r| r.beta_hat)
            .map_err(|e| e.into_inner()),
    );
    Ok(InstanceOutcome {
        index,
        ideal: ArmOutcome::from_result(ideal),
        naive: ArmOutcome::from_result(naive),
        iro: ArmOutcome::from_result(iro),
    })
}

fn summarize(arm: &str, instances: &[InstanceOutcome]) -> MetricRow {
    let ok: Vec<Metrics> = instances
        .iter()
        .filter_map(|o| o.arm(arm).and_then(|a| a.metrics))
        .collect();
    let k = ok.len();
    let mean = |f: &dyn Fn(&Metrics) -> f64| (k > 0).then(|| ok.iter().map(f).sum::<f64>() / k as f64);
    MetricRow {
        arm: arm.to_string(),
        l2: mean(&|m| m.l2),
        tp: mean(&|m| m.tp as f64),
        fp: mean(&|m| m.fp as f64),
        n_success: k,
        n_failed: instances.len() - k,
    }
}

/// Runs every Monte Carlo instance (in parallel, each with its own derived
/// random streams) and averages the metrics per arm. An arm that fails on an
/// instance is excluded from that arm's averages and counted in `n_failed`.
pub fn run_experiment(spec: &SimulationSpec) -> Result<ExperimentTable> {
    spec.validate()?;
    let instances = (0..spec.n_monte_carlo)
        .into_par_iter()
        .map(|i| run_instance(spec, i))
        .collect::<Result<Vec<_>>>()?;
    let rows = ARMS.iter().map(|a| summarize(a, &instances)).collect();
    Ok(ExperimentTable {
        spec: spec.clone(),
        rows,
        instances,
    })
}

/// Long-format table: one line per (arm, metric); `NA` where an arm never
/// succeeded.
pub fn to_csv(table: &ExperimentTable) -> String {
    let s = &table.spec;
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &table.rows {
        for (metric, value) in [("L2", row.l2), ("TP", row.tp), ("FP", row.fp)] {
            let v = value.map_or_else(|| "NA".to_string(), |v| format!("{v}"));
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.setting, s.p, s.n, s.gamma, row.arm, metric, v, row.n_success
            )
            .expect("writing to a String");
        }
    }
    out
}
