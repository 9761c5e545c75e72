use dfrc_harness::config::{ExperimentConfig, Profile, Scenario};
use dfrc_harness::experiment::{derive_seed, run_experiment, Instance, TrialStatus};

fn config(dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_profile(Profile::Desk);
    cfg.scenario = Scenario::Perfect;
    cfg.n_trials = 2;
    cfg.sweep = Some("gamma_b_db=5,10".parse().unwrap());
    cfg.output_path = dir.join("r.csv");
    cfg
}

#[test]
fn records_are_ordered_and_independent_of_pool_size() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let one = pool(1).install(|| run_experiment(&cfg)).unwrap();
    let three = pool(3).install(|| run_experiment(&cfg)).unwrap();
    assert_eq!(one, three);
    let keys: Vec<_> = one.iter().map(|r| (r.swept_value.unwrap(), r.trial_index)).collect();
    assert_eq!(keys, [(5.0, 0), (5.0, 1), (10.0, 0), (10.0, 1)]);
    for (i, r) in one.iter().enumerate() {
        assert_eq!(r.seed, derive_seed(cfg.base_seed, i % 2, i / 2));
        assert_eq!(r.status, TrialStatus::Ok);
        assert!(r.min_user_sinr.unwrap() >= 10f64.powf(r.swept_value.unwrap() / 10.0) * (1.0 - 1e-4));
    }
}

#[test]
fn recorded_metrics_match_a_fresh_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.sweep = None;
    cfg.n_trials = 1;
    cfg.extraction = dfrc_harness::config::ExtractionChoice::None;
    let rec = &run_experiment(&cfg).unwrap()[0];
    let inst = Instance::sample(cfg.scenario, &cfg.params, rec.seed).unwrap();
    let bench = dfrc_harness::experiment::benchmark(&cfg.params, &inst.geom, cfg.solver.tol).unwrap();
    let run = dfrc_harness::experiment::run_design(cfg.scenario, &inst, Some(&bench), &cfg.solver.design_options()).unwrap();
    assert_eq!(rec.eve_sinr, Some(inst.eve_sinr(&run.design)));
    assert_eq!(rec.secrecy_rate, Some(inst.secrecy_rate(&run.design)));
    assert_eq!(rec.iterations, Some(run.trace.iterations));
    assert_eq!(rec.extraction_feasible, None);
}

#[test]
fn unwritable_output_is_reported_before_any_trial() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.n_trials = 1000;
    cfg.output_path = dir.path().join("no/such/dir.csv");
    let start = std::time::Instant::now();
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(start.elapsed().as_secs() < 5);
}
