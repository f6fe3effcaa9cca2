use fpp_harness::spec::{BaselineParams, FppParams};
use fpp_harness::sweep::EpsilonSpec;
use fpp_harness::*;

fn small_spec(algorithms: Vec<Algorithm>, snr: Vec<f64>, trials: usize) -> ExperimentSpec {
    ExperimentSpec {
        label: "small".into(),
        ensemble: EnsembleSpec::gaussian(4, 24),
        signal: SignalSpec::Harmonic { frequencies_pi: vec![0.16] },
        snr_grid_db: snr,
        trials,
        algorithms,
        init: InitKind::Spectral,
        base_seed: 42,
        fixed_ensemble: false,
        crb: true,
        keep_spectra: false,
        fpp: FppParams::default(),
        baseline: BaselineParams::default(),
        dictionary: None,
    }
}

#[test]
fn single_noiseless_lsfpp_trial_reaches_floor() {
    let spec = small_spec(vec![Algorithm::Lsfpp], vec![f64::INFINITY], 1);
    let r = run_experiment(&spec, Some(1)).unwrap();
    assert_eq!(r.records.len(), 1);
    let c = &r.cells[0];
    assert_eq!(c.outage_fraction, 0.0);
    assert_eq!(c.successes, 1);
    assert!(c.mse_signal_db.unwrap() < -80.0, "{:?}", c.mse_signal_db);
}

#[test]
fn reruns_are_bitwise_identical_and_independent_of_jobs() {
    let spec = small_spec(vec![Algorithm::Bfpp, Algorithm::Wf, Algorithm::Gs], vec![10.0, 20.0], 3);
    let a = serde_json::to_string(&run_experiment(&spec, Some(1)).unwrap()).unwrap();
    let b = serde_json::to_string(&run_experiment(&spec, Some(3)).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn adding_an_algorithm_leaves_other_records_unchanged() {
    let one = run_experiment(&small_spec(vec![Algorithm::Gs], vec![15.0], 3), Some(1)).unwrap();
    let two = run_experiment(&small_spec(vec![Algorithm::Wf, Algorithm::Gs], vec![15.0], 3), Some(1)).unwrap();
    let gs: Vec<_> = two.records.iter().filter(|r| r.algorithm == Algorithm::Gs).cloned().collect();
    assert_eq!(one.records, gs);
}

#[test]
fn every_trial_is_accounted_for_and_crb_is_shared() {
    let spec = small_spec(vec![Algorithm::Lsfpp, Algorithm::Wf, Algorithm::Gs], vec![0.0, 20.0], 4);
    let r = run_experiment(&spec, None).unwrap();
    assert_eq!(r.cells.len(), 6);
    for c in &r.cells {
        assert_eq!(c.trials, 4);
        assert_eq!(c.successes + c.outages + c.failures, c.trials);
        assert!((0.0..=1.0).contains(&c.outage_fraction));
        let first = r.cell(Algorithm::Lsfpp, c.snr_db).unwrap();
        assert_eq!(c.crb_signal_db.map(f64::to_bits), first.crb_signal_db.map(f64::to_bits));
        assert!(c.crb_amplitude_db.is_some() && c.crb_phase_db.is_some());
    }
}

fn eps_spec(sigma: f64, grid: Vec<f64>, trials: usize) -> EpsilonSpec {
    EpsilonSpec {
        ensemble: EnsembleSpec::gaussian(4, 24),
        signal: SignalSpec::Gaussian { seed: 3 },
        sigma_n: sigma,
        eps_grid: grid,
        trials,
        base_seed: 9,
        init: InitKind::Spectral,
        fpp: FppParams::default(),
    }
}

#[test]
fn noiseless_epsilon_sweep_sits_at_floor_for_tiny_eps() {
    let c = epsilon_sweep(&eps_spec(0.0, vec![1e-6, 1e-5, 1e-4], 2), Some(1)).unwrap();
    for p in &c.points {
        assert!(p.mse_db.unwrap() < -30.0, "eps {}: {:?}", p.epsilon, p.mse_db);
        assert_eq!(p.failures, 0);
    }
}

#[test]
fn epsilon_sweep_is_reproducible() {
    let s = eps_spec(0.2, vec![0.1, 0.4], 2);
    let a = epsilon_sweep(&s, Some(1)).unwrap();
    let b = epsilon_sweep(&s, Some(2)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn epsilon_grid_must_ascend() {
    assert!(epsilon_sweep(&eps_spec(0.2, vec![0.4, 0.1], 1), None).is_err());
    assert!(epsilon_sweep(&eps_spec(0.2, vec![], 1), None).is_err());
}

#[test]
fn every_preset_parses_and_validates() {
    for name in preset_names() {
        let p = Preset::named(name).unwrap();
        assert_eq!(p.id, name);
        assert!(p.trials() >= 1);
        assert!(p.full_trials.unwrap() >= p.trials());
        for f in &p.figures {
            assert!(FIGURE_IDS.contains(&f.as_str()), "{name}: {f}");
        }
        if let Study::Mse { experiments } = &p.study {
            for e in experiments {
                e.validate().unwrap();
            }
        }
    }
    assert!(matches!(Preset::named("fig9"), Err(HarnessError::UnknownPreset(..))));
}

#[test]
fn fig1_preset_uses_the_published_grid() {
    let p = Preset::named("fig1").unwrap();
    let Study::Epsilon(s) = &p.study else { panic!("fig1 is an epsilon study") };
    assert_eq!(s.eps_grid, vec![0.1, 0.2, 0.4, 0.8, 1.2, 1.6, 2.0]);
    assert_eq!((s.ensemble.n, s.ensemble.m), (16, Some(80)));
    assert_eq!(s.sigma_n, 0.4);
}

#[test]
fn fig2_emits_one_block_per_m() {
    let mut p = Preset::named("fig2").unwrap();
    p.set_trials(2);
    let r = p.run(Some(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = p.emit(&r, dir.path()).unwrap();
    let csv = std::fs::read_to_string(&files[0]).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "m,snr_db,crb_amp_db,crb_phase_db,crb_signal_db");
    let ms: Vec<String> = lines.map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert_eq!(ms.len(), 27);
    assert!(ms[..9].iter().all(|m| m == "32") && ms[18..].iter().all(|m| m == "128"));
}
