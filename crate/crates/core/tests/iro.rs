use eivglm::eiv::ReplicateDataset;
use eivglm::iro::{aggregate_coefficients, initialize, run_iro, Aggregation, Checkpoint, IroConfig, IroRun, NoiseSpec};
use eivglm::sim::{compute_metrics, gen_dataset, Setting, SimulationSpec};
use eivglm::solvers::{fit_penalized, FamilySpec, PenaltyKind, PenaltySpec};
use eivglm::RngStream;
use ndarray::{Array1, Array2};

fn small_spec(setting: Setting, seed: u64) -> SimulationSpec {
    SimulationSpec {
        setting,
        n: 80,
        p: 12,
        gamma: 0.5,
        n_monte_carlo: 1,
        seed,
        ..Default::default()
    }
}

fn small_config(family: FamilySpec<f64>, iterations: usize, burn_in: usize) -> IroConfig<f64> {
    IroConfig {
        iterations,
        burn_in,
        family,
        folds: 4,
        grid_length: 15,
        seed: 42,
        ..IroConfig::default()
    }
}

fn planted(setting: Setting, seed: u64) -> (eivglm::sim::SimDataset<f64>, NoiseSpec<f64>) {
    let spec = small_spec(setting, seed);
    let sim = gen_dataset::<f64>(&spec, &mut RngStream::new(seed, 0)).unwrap();
    let noise = NoiseSpec::known(sim.known_omega_u());
    (sim, noise)
}

#[test]
fn single_iteration_is_its_own_aggregate() {
    let (sim, noise) = planted(Setting::G2, 1);
    let cfg = small_config(SimulationSpec::default().family(), 1, 0);
    let res = run_iro(&sim.data, &noise, &cfg).unwrap();
    assert_eq!(res.trace.len(), 1);
    assert_eq!(res.beta_hat, res.trace.retained[0].beta);
    assert!(res.diagnostics.is_none());
}

#[test]
fn beta_hat_is_recomputable_from_trace() {
    let (sim, noise) = planted(Setting::G2, 2);
    for agg in [Aggregation::Median, Aggregation::Mean, Aggregation::Trimmed { alpha: 0.2 }] {
        let cfg = IroConfig {
            aggregation: agg,
            ..small_config(FamilySpec::Gaussian { sigma2: 1.0 }, 7, 2)
        };
        let res = run_iro(&sim.data, &noise, &cfg).unwrap();
        assert_eq!(res.trace.len(), 5);
        assert_eq!(aggregate_coefficients(&res.trace, agg).unwrap(), res.beta_hat);
        let d = res.diagnostics.unwrap();
        assert_eq!(d.rhat.len(), 12);
    }
}

#[test]
fn burn_in_discards_a_prefix() {
    let (sim, noise) = planted(Setting::G2, 3);
    let fam = FamilySpec::Gaussian { sigma2: 1.0 };
    let full = run_iro(&sim.data, &noise, &small_config(fam.clone(), 8, 0)).unwrap();
    let cfg = IroConfig {
        retain_burn_in: true,
        ..small_config(fam, 8, 3)
    };
    let burned = run_iro(&sim.data, &noise, &cfg).unwrap();
    assert_eq!(burned.trace.retained, full.trace.retained[3..]);
    assert_eq!(burned.trace.burn_in, full.trace.retained[..3]);
    let mut suffix = full.trace.clone();
    suffix.retained.drain(..3);
    assert_eq!(aggregate_coefficients(&suffix, Aggregation::Median).unwrap(), burned.beta_hat);
}

fn resume_matches(setting: Setting, family: FamilySpec<f64>) {
    let (sim, noise) = planted(setting, 4);
    let cfg = small_config(family, 6, 2);
    let straight = run_iro(&sim.data, &noise, &cfg).unwrap();

    let mut run = IroRun::new(&sim.data, &noise, &cfg).unwrap();
    for _ in 0..3 {
        run.step().unwrap();
    }
    let json = serde_json::to_string(run.checkpoint()).unwrap();
    drop(run);
    let ck: Checkpoint<f64> = serde_json::from_str(&json).unwrap();
    assert_eq!(ck.completed, 3);
    let mut resumed = IroRun::resume(&sim.data, ck).unwrap();
    resumed.run_to_end().unwrap();
    assert_eq!(resumed.result().unwrap(), straight);
}

#[test]
fn checkpoint_resume_gaussian() {
    resume_matches(Setting::G2, FamilySpec::Gaussian { sigma2: 1.0 });
}

#[test]
fn checkpoint_resume_binomial() {
    resume_matches(Setting::B1, FamilySpec::Binomial);
}

#[test]
fn checkpoint_rejects_other_schema_or_data() {
    let (sim, noise) = planted(Setting::G2, 5);
    let cfg = small_config(FamilySpec::Gaussian { sigma2: 1.0 }, 3, 0);
    let mut run = IroRun::new(&sim.data, &noise, &cfg).unwrap();
    run.step().unwrap();
    let mut ck = run.checkpoint().clone();
    ck.schema_version = 99;
    assert!(IroRun::resume(&sim.data, ck).is_err());
    let (other, _) = planted(Setting::G2, 6);
    assert!(IroRun::resume(&other.data, run.checkpoint().clone()).is_err());
}

#[test]
fn thread_count_does_not_change_results() {
    for (setting, family) in [
        (Setting::G2, FamilySpec::Gaussian { sigma2: 1.0 }),
        (Setting::B1, FamilySpec::Binomial),
    ] {
        let (sim, noise) = planted(setting, 7);
        let cfg = small_config(family, 4, 1);
        let run_with = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_iro(&sim.data, &noise, &cfg).unwrap())
        };
        let one = run_with(1);
        let eight = run_with(8);
        assert_eq!(
            serde_json::to_string(&one).unwrap(),
            serde_json::to_string(&eight).unwrap()
        );
    }
}

#[test]
fn noiseless_replicates_track_the_ideal_fit() {
    let spec = SimulationSpec {
        setting: Setting::G2,
        n: 200,
        p: 40,
        gamma: 0.0,
        seed: 8,
        ..Default::default()
    };
    let sim = gen_dataset::<f64>(&spec, &mut RngStream::new(8, 0)).unwrap();
    let noise = NoiseSpec::known(Array1::from_elem(40, 1e8));
    let cfg = IroConfig {
        folds: 5,
        ..small_config(spec.family(), 8, 2)
    };
    let res = run_iro(&sim.data, &noise, &cfg).unwrap();
    let ideal = initialize(&ReplicateDataset::from_exact(sim.data.y().clone(), &sim.x_true, 1).unwrap(), &cfg).unwrap();
    let l2_iro = compute_metrics(&res.beta_hat, &sim.beta_star, 1e-8).unwrap().l2;
    let l2_ideal = compute_metrics(&ideal.beta, &sim.beta_star, 1e-8).unwrap().l2;
    assert!(l2_iro <= 2.0 * l2_ideal, "IRO {l2_iro} vs Ideal {l2_ideal}");
}

#[test]
fn initialization_on_exact_replicates_is_a_fit_on_x() {
    let (sim, _) = planted(Setting::G2, 9);
    let y = sim.data.y().clone();
    let cfg = small_config(FamilySpec::Gaussian { sigma2: 1.0 }, 2, 0);
    let a = initialize(&ReplicateDataset::from_exact(y.clone(), &sim.x_true, 3).unwrap(), &cfg).unwrap();
    let b = initialize(&ReplicateDataset::from_exact(y.clone(), &sim.x_true, 1).unwrap(), &cfg).unwrap();
    assert_eq!(a, b);
    let direct = fit_penalized(
        &sim.x_true,
        &y,
        &FamilySpec::Gaussian { sigma2: 1.0 },
        &PenaltySpec {
            kind: PenaltyKind::Mcp,
            lambda: a.lambda,
            mcp_gamma: 3.0,
        },
    )
    .unwrap();
    for (u, v) in a.beta.iter().zip(direct.beta.iter()) {
        assert!((u - v).abs() < 1e-4, "{u} vs {v}");
    }
    assert_eq!(initialize(&sim.data, &cfg).unwrap(), initialize(&sim.data, &cfg).unwrap());
}

#[test]
fn constant_response_starts_at_zero() {
    let (sim, _) = planted(Setting::G2, 10);
    let data = sim.data.with_response(Array1::from_elem(80, 2.5)).unwrap();
    let cfg = small_config(FamilySpec::Gaussian { sigma2: 1.0 }, 2, 0);
    let init = initialize(&data, &cfg).unwrap();
    assert!(init.beta.iter().all(|&b| b == 0.0));
}

#[test]
fn estimated_noise_is_reported() {
    let (sim, _) = planted(Setting::G2, 11);
    let cfg = small_config(FamilySpec::Gaussian { sigma2: 1.0 }, 3, 1);
    let res = run_iro(&sim.data, &NoiseSpec::Estimate, &cfg).unwrap();
    assert!(res.noise_estimated);
    // true noise variance is γ = 0.5
    let mean_var = res.omega_u_diag.iter().map(|o| 1.0 / o).sum::<f64>() / 12.0;
    assert!((mean_var - 0.5).abs() < 0.15, "{mean_var}");
}

#[test]
fn failure_reports_iteration_and_partial_trace() {
    let blocks: Vec<Array2<f64>> = (0..10).map(|i| Array2::from_elem((2, 2), i as f64)).collect();
    let data = ReplicateDataset::new(Array1::from_iter((0..10).map(|i| (i % 2) as f64)), blocks).unwrap();
    let err = run_iro(&data, &NoiseSpec::Estimate, &small_config(FamilySpec::Binomial, 3, 0)).unwrap_err();
    assert_eq!(err.iteration, 0);
    assert!(err.partial_trace.is_empty());
    assert!(matches!(err.into_inner(), eivglm::Error::DegenerateNoise { .. }));
}
