//! Shared fixtures: a churn-shaped synthetic dataset and a configuration
//! small enough for the whole suite to run in seconds.

#![allow(dead_code)]

use std::collections::BTreeMap;

use churn_core::config::ExperimentConfig;
use churn_core::data::{churn_schema, ColumnData, Dataset, Role};
use churn_core::models::Family;
use rand::Rng;

pub fn dataset(n: usize, seed: u64) -> Dataset {
    churn_core::synth::synthetic_churn(n, seed).unwrap()
}

pub fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 11;
    cfg.cv.folds = 3;
    cfg.cv.repeats = 1;
    cfg.tuning.rf_trees = 15;
    cfg.rfe.sizes = vec![3, 10];
    cfg.rfe.folds = 2;
    cfg.rfe.n_trees = 15;
    let grid = |pairs: &[(&str, &[f64])]| pairs.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect();
    cfg.grids.insert(Family::Knn, grid(&[("k", &[5.0, 9.0])]));
    cfg.grids.insert(Family::Cart, grid(&[("cp", &[0.005, 0.02])]));
    cfg.grids.insert(Family::Rf, grid(&[("mtry", &[2.0, 3.0])]));
    cfg.grids.insert(Family::Ann, grid(&[("size", &[2.0, 3.0]), ("decay", &[0.1])]));
    cfg.models.insert(Family::Rf, BTreeMap::from([("n_trees".to_string(), 30.0)]));
    cfg.models.insert(Family::Ann, BTreeMap::from([("max_iter".to_string(), 150.0)]));
    cfg.validate().unwrap();
    cfg
}

/// Copy of `ds` with every predictor of the given rows replaced by random
/// values of the right kind. Labels stay put, so seeded splits are unchanged.
pub fn scramble_rows(ds: &Dataset, rows: &[usize], seed: u64) -> Dataset {
    let mut rng = churn_core::seed::rng(seed);
    let schema = churn_schema();
    let columns = schema
        .iter()
        .map(|c| match c.role {
            Role::Ignored => ColumnData::Text(vec!["x".into(); ds.n()]),
            Role::Numeric | Role::Binary => {
                let mut v = ds.numeric(&c.name).unwrap().to_vec();
                let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &x| (a.0.min(x), a.1.max(x)));
                for &r in rows {
                    v[r] = if c.role == Role::Binary { rng.gen_range(0..2) as f64 } else { rng.gen_range(lo..=hi).round() };
                }
                ColumnData::Numeric(v)
            }
            Role::Categorical => {
                let mut v = ds.text(&c.name).unwrap().to_vec();
                let levels = c.allowed_levels.clone().unwrap();
                for &r in rows {
                    v[r] = levels[rng.gen_range(0..levels.len())].clone();
                }
                ColumnData::Text(v)
            }
            Role::Outcome => ds.column(&c.name).unwrap().clone(),
        })
        .collect();
    Dataset::from_columns(schema, columns).unwrap()
}
