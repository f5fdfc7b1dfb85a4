use std::fs;
use std::path::Path;

use proptest::prelude::*;

use boostlab::engine::{run_boost, BoostConfig, BoostState};
use boostlab::harness::{read_curves, run_experiment, summarize, summary_csv, ExperimentConfig, ExperimentName};
use boostlab::simdata::{generate, SimModel, SimSpec};
use boostlab::Dataset;

fn small(name: ExperimentName, n: usize, m: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(name);
    cfg.sim.n = n;
    cfg.replications = 3;
    cfg.arms.iter_mut().for_each(|a| a.config.iterations = m);
    cfg
}

#[test]
fn summary_is_recomputable_from_curve_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(ExperimentName::E1, 200, 30);
    let result = run_experiment(&cfg, Some(tmp.path())).unwrap();

    let mut recomputed = Vec::new();
    for arm in &cfg.arms {
        let curves: Vec<_> = (0..cfg.replications)
            .map(|r| read_curves(&tmp.path().join(format!("curves_{}_{r}.csv", arm.name))).unwrap())
            .collect();
        let refs: Vec<&[_]> = curves.iter().map(|c| c.as_slice()).collect();
        recomputed.push(summarize(&arm.name, &refs));
    }
    assert_eq!(recomputed, result.summary);
    assert_eq!(
        summary_csv(&recomputed),
        fs::read_to_string(tmp.path().join("summary.csv")).unwrap()
    );
}

#[test]
fn curve_files_round_trip_at_nine_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(ExperimentName::E4, 150, 20);
    let result = run_experiment(&cfg, Some(tmp.path())).unwrap();
    for run in &result.runs {
        let read = read_curves(&tmp.path().join(format!("curves_{}_{}.csv", run.arm, run.replication))).unwrap();
        assert_eq!(read.len(), run.curves.len());
        for (a, b) in read.iter().zip(&run.curves) {
            assert_eq!((a.iteration, a.split), (b.iteration, b.split));
            assert!((a.exp_loss - b.exp_loss).abs() <= 1e-8 * b.exp_loss.abs());
            assert!((a.nll - b.nll).abs() <= 1e-8 * b.nll.abs().max(1e-300));
        }
    }
}

#[test]
fn experiments_are_reproducible_and_seed_sensitive() {
    let cfg = small(ExperimentName::E6, 150, 15);
    let a = run_experiment(&cfg, None).unwrap();
    let b = run_experiment(&cfg, None).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.sim.seed += 100;
    assert_ne!(run_experiment(&other, None).unwrap().runs, a.runs);
}

#[test]
fn dataset_csv_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = generate(&SimSpec {
        model: SimModel::LogisticAdditive,
        n: 60,
        q: 4,
        active: 2,
        seed: 9,
        ..SimSpec::default()
    })
    .unwrap();
    let path = tmp.path().join("d.csv");
    d.write_csv(&path).unwrap();
    let back = Dataset::load_csv(&path).unwrap();
    assert_eq!(back.len(), 60);
    assert_eq!(back.labels(), d.labels());
    let probs = back.true_probs().unwrap();
    for (a, b) in probs.iter().zip(d.true_probs().unwrap()) {
        assert!((a - b).abs() <= 1e-8 * b);
    }
    for i in 0..60 {
        for (a, b) in back.row(i).iter().zip(d.row(i)) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-300));
        }
    }
}

#[test]
fn dataset_csv_rejects_bad_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("f1,label\n0.1,0\n", "label"),
        ("f1,label\n0.1\n", ""),
        ("f1,label,true_prob\n0.1,1,1.5\n", "true_prob"),
        ("f2,label\n0.1,1\n", "column"),
        ("f1,label\nnan,1\n", "feature"),
    ];
    for (k, (text, needle)) in cases.iter().enumerate() {
        let path = tmp.path().join(format!("bad{k}.csv"));
        fs::write(&path, text).unwrap();
        let err = Dataset::load_csv(&path).unwrap_err();
        assert!(err.is_validation(), "{text:?}: {err}");
        assert!(err.to_string().contains(needle), "{text:?}: {err}");
    }
    assert!(!Dataset::load_csv(Path::new("/nonexistent/x.csv")).unwrap_err().to_string().is_empty());
}

fn sim(seed: u64, n: usize) -> Dataset {
    generate(&SimSpec {
        n,
        q: 6,
        active: 3,
        seed,
        ..SimSpec::default()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adaboost_weights_stay_a_distribution(seed in 0u64..10_000, lambda in 0.25f64..2.5, leaves in 2usize..9) {
        let d = sim(seed, 120);
        let cfg = BoostConfig::adaboost(leaves, lambda, 15);
        let mut s = BoostState::init(&d, &cfg).unwrap();
        for _ in 0..15 {
            if !s.is_running() {
                break;
            }
            s.adaboost_step(&d, &cfg).unwrap();
            let total: f64 = s.weights.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(s.weights.iter().all(|w| *w >= 0.0));
            prop_assert!(s.last_alpha >= 0.0);
        }
    }

    #[test]
    fn doubled_step_keeps_total_loss(seed in 0u64..10_000, leaves in 2usize..9) {
        let d = sim(seed, 150);
        let cfg = BoostConfig::adaboost(leaves, 2.0, 30);
        let mut s = BoostState::init(&d, &cfg).unwrap();
        let start = s.log_total_exp_loss;
        while s.is_running() && s.iteration < 30 {
            s.adaboost_step(&d, &cfg).unwrap();
            prop_assert!((s.log_total_exp_loss - start).abs() < 1e-9);
        }
    }

    #[test]
    fn ensemble_predictions_match_tracked_scores(seed in 0u64..10_000, shrinkage in 0.05f64..1.0) {
        let d = sim(seed, 100);
        let mut cfg = BoostConfig::adaboost(4, 1.0, 12);
        cfg.shrinkage = shrinkage;
        let (ens, curves) = run_boost(&d, &Dataset::empty(6), &cfg).unwrap();
        let mut s = BoostState::init(&d, &cfg).unwrap();
        for _ in 0..ens.terms().len() {
            s.adaboost_step(&d, &cfg).unwrap();
        }
        let predicted = ens.predict_dataset(&d).unwrap();
        for (a, b) in predicted.iter().zip(&s.scores) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        prop_assert_eq!(curves.len(), ens.terms().len());
    }
}
