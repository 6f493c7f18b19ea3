mod common;

use churn_core::config::{FeatureMode, OutlierMode};
use churn_core::experiments::{run_experiment, Experiment, RunKey, RunManifest, Stage};
use churn_core::models::Family;
use churn_core::resample::ResampleKind;

#[test]
fn suite_is_identical_across_runs_and_thread_counts() {
    let ds = common::dataset(900, 3);
    let mut cfg = common::small_config();
    cfg.threads = 1;
    let a = run_experiment(&ds, &cfg, &Stage::ALL).unwrap().manifest.to_json().unwrap();
    let b = run_experiment(&ds, &cfg, &Stage::ALL).unwrap().manifest.to_json().unwrap();
    cfg.threads = 3;
    let c = run_experiment(&ds, &cfg, &Stage::ALL).unwrap().manifest.to_json().unwrap();
    assert!(a == b, "two single-threaded runs differ");
    assert!(a == c, "thread count changed the manifest");
}

#[test]
fn manifest_numbers_recompute_from_stored_scores() {
    let ds = common::dataset(800, 4);
    let out = run_experiment(&ds, &common::small_config(), &Stage::ALL).unwrap();
    let m = &out.manifest;
    m.audit().unwrap();
    assert_eq!(m.runs.len(), 15);
    for run in m.runs.values() {
        assert_eq!(run.train_truth.len(), run.train_scores.len());
        assert_eq!(run.test_truth.len(), run.test_scores.len());
    }
    // a doctored cell is caught
    let mut bad: RunManifest = RunManifest::from_json(&m.to_json().unwrap()).unwrap();
    bad.runs.values_mut().next().unwrap().test.accuracy += 0.01;
    assert!(bad.audit().is_err());
    // and the manifest survives a JSON round trip exactly
    let back = RunManifest::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(&back, m);
}

#[test]
fn stage_shapes() {
    let ds = common::dataset(800, 5);
    let cfg = common::small_config();
    let m = run_experiment(&ds, &cfg, &[Stage::Outliers]).unwrap().manifest;
    let ids: Vec<&str> = m.runs.keys().map(String::as_str).collect();
    assert_eq!(
        ids,
        ["ann-top5-smote-drop", "ann-top5-smote-keep", "rf-top5-smote-drop", "rf-top5-smote-keep"]
    );
    let removed = m.outlier_rows_removed.as_ref().unwrap();
    let stayed_age = m
        .profile
        .outliers
        .iter()
        .find(|r| r.column == "Age" && r.class_label == Some(churn_core::data::Label::Stayed))
        .unwrap();
    assert_eq!(removed, &stayed_age.outlier_row_indices);
    let keep = m.run(&RunKey::new(Family::Rf).features(FeatureMode::Top5).resample(ResampleKind::Smote)).unwrap();
    let drop = m
        .run(&RunKey::new(Family::Rf).features(FeatureMode::Top5).resample(ResampleKind::Smote).outliers(OutlierMode::Drop))
        .unwrap();
    let total = |r: &churn_core::experiments::ModelRun| r.test_class_counts.0 + r.test_class_counts.1;
    assert!(total(drop) < total(keep) || removed.is_empty());
    // SMOTE balanced the training partition
    assert_eq!(keep.train_class_counts.0, keep.train_class_counts.1);
    // the selected predictors reach the model as six columns
    assert_eq!(keep.input.columns.len(), 6);
}

/// Every statistic fitted on training rows must ignore the test rows: the
/// same runs on data whose test predictors are scrambled give identical
/// tuning, models and training scores.
#[test]
fn test_rows_never_influence_training() {
    let ds = common::dataset(700, 6);
    let cfg = common::small_config();
    let mut keys: Vec<RunKey> = Family::ALL.iter().map(|&f| RunKey::new(f)).collect();
    for r in [ResampleKind::Under, ResampleKind::Smote] {
        for f in [Family::Rf, Family::Ann] {
            keys.push(RunKey::new(f).features(FeatureMode::Top5).resample(r));
        }
    }
    let mut clean = Experiment::new(&ds, &cfg).unwrap();
    let test_rows = clean.partitions(&keys[0]).unwrap().2.test;
    let noisy_ds = common::scramble_rows(&ds, &test_rows, 99);
    let mut noisy = Experiment::new(&noisy_ds, &cfg).unwrap();
    let mut test_scores_changed = 0;
    for key in keys {
        let (a, model_a) = clean.run(key, cfg.is_tuned(key.family)).unwrap();
        let (b, model_b) = noisy.run(key, cfg.is_tuned(key.family)).unwrap();
        assert_eq!(a.spec, b.spec, "{}", key.id());
        assert_eq!(a.tuning, b.tuning, "{}", key.id());
        assert_eq!(a.train_scores, b.train_scores, "{}", key.id());
        assert_eq!(a.train, b.train, "{}", key.id());
        assert_eq!(model_a.to_json().unwrap(), model_b.to_json().unwrap(), "{}", key.id());
        assert_eq!(a.test_truth, b.test_truth);
        if a.test_scores != b.test_scores {
            test_scores_changed += 1;
        }
    }
    // the perturbation did reach the evaluated rows
    assert!(test_scores_changed >= 8, "only {test_scores_changed} runs saw the scrambled rows");
}

#[test]
fn model_seed_and_split_seed_are_named_streams() {
    let s = churn_core::experiments::Seeds::from_master(42);
    let mut all = vec![s.split, s.cv, s.resample, s.rfe];
    all.extend(s.models.values());
    let n = all.len();
    all.sort_unstable();
    all.dedup();
    assert_eq!(all.len(), n);
    assert_eq!(s, churn_core::experiments::Seeds::from_master(42));
}
