//! Bagged Gini trees with random feature subsets per node.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, DecisionTree, GrowParams};
use super::{wrap, FittedModel, ImportanceRanking, Model, ModelSpec};
use crate::error::{Error, Result};
use crate::preprocess::FeatureTable;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub feature_names: Vec<String>,
    pub mtry: usize,
    pub trees: Vec<DecisionTree>,
    /// Out-of-bag training rows per tree; only kept in memory for importance.
    #[serde(skip)]
    pub oob: Vec<Vec<u32>>,
}

impl RandomForest {
    /// Share of trees voting `Left`.
    pub fn predict_scores(&self, table: &FeatureTable) -> Vec<f64> {
        let n_trees = self.trees.len() as f64;
        (0..table.n_rows())
            .into_par_iter()
            .map(|i| {
                let row = table.row(i);
                let votes = self
                    .trees
                    .iter()
                    .filter(|t| t.leaf(row).score() >= 0.5)
                    .count();
                votes as f64 / n_trees
            })
            .collect()
    }
}

pub fn fit_rf(train: &FeatureTable, spec: &ModelSpec) -> Result<FittedModel> {
    let d = train.n_cols();
    let n_trees = spec.count("n_trees", 1)?;
    let mtry = match spec.get("mtry") {
        v if v.is_nan() => ((d as f64).sqrt().floor() as usize).max(1),
        _ => spec.count("mtry", 1)?.min(d),
    };
    let min_leaf = spec.count("min_leaf", 1)?;
    let bootstrap = spec.non_negative("bootstrap")? > 0.0;
    let params = GrowParams {
        min_split: 2 * min_leaf,
        min_leaf,
        max_depth: usize::MAX,
        max_features: Some(mtry),
    };
    let n = train.n_rows();

    let grown: Vec<(DecisionTree, Vec<u32>)> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(spec.seed, "rf/tree", t as u64));
            let (rows, oob) = if bootstrap {
                let mut in_bag = vec![false; n];
                let rows: Vec<u32> = (0..n)
                    .map(|_| {
                        let r = rng.gen_range(0..n);
                        in_bag[r] = true;
                        r as u32
                    })
                    .collect();
                let oob = (0..n as u32).filter(|&r| !in_bag[r as usize]).collect();
                (rows, oob)
            } else {
                ((0..n as u32).collect(), Vec::new())
            };
            (grow(train, rows, &params, &mut rng), oob)
        })
        .collect();
    let (trees, oob) = grown.into_iter().unzip();
    let forest = RandomForest {
        feature_names: train.names().to_vec(),
        mtry,
        trees,
        oob,
    };
    Ok(wrap(spec, train, Model::Rf(forest)))
}

/// Both forest importance measures for the training table the forest was
/// fitted on: mean decrease in accuracy over out-of-bag rows (one
/// permutation per tree and variable) and mean decrease in Gini.
pub fn rf_importance(
    forest: &RandomForest,
    train: &FeatureTable,
    seed_value: u64,
) -> Result<(ImportanceRanking, ImportanceRanking)> {
    if forest.oob.len() != forest.trees.len() || forest.oob.iter().all(|o| o.is_empty()) {
        return Err(Error::InvalidInput(
            "permutation importance needs out-of-bag rows from a freshly fitted bootstrap forest".into(),
        ));
    }
    if train.names() != forest.feature_names.as_slice() {
        return Err(Error::InvalidInput("importance table columns differ from the forest's".into()));
    }
    let d = forest.feature_names.len();
    let labels = train.labels();
    let per_tree: Vec<Vec<f64>> = forest
        .trees
        .par_iter()
        .zip(&forest.oob)
        .enumerate()
        .map(|(t, (tree, oob))| {
            let mut drop = vec![0.0; d];
            if oob.is_empty() {
                return drop;
            }
            let correct = |pred: f64, r: u32| (pred >= 0.5) == labels[r as usize].is_left();
            let base = oob
                .iter()
                .filter(|&&r| correct(tree.leaf(train.row(r as usize)).score(), r))
                .count();
            let mut rng = seed::rng(seed::derive(seed_value, "rf/permute", t as u64));
            for (f, slot) in drop.iter_mut().enumerate() {
                let mut shuffled: Vec<u32> = oob.clone();
                shuffled.shuffle(&mut rng);
                let permuted = oob
                    .iter()
                    .zip(&shuffled)
                    .filter(|&(&r, &s)| {
                        let row = train.row(r as usize);
                        let sv = train.value(s as usize, f);
                        let score = tree.leaf_with(|j| if j == f { sv } else { row[j] }).score();
                        correct(score, r)
                    })
                    .count();
                *slot = (base as f64 - permuted as f64) / oob.len() as f64;
            }
            drop
        })
        .collect();
    let n_trees = forest.trees.len() as f64;
    let mut mda = vec![0.0; d];
    let mut mdg = vec![0.0; d];
    for (drop, tree) in per_tree.iter().zip(&forest.trees) {
        for (f, g) in tree.gain_by_feature().into_iter().enumerate() {
            mda[f] += drop[f] / n_trees;
            mdg[f] += g / n_trees;
        }
    }
    Ok((
        ImportanceRanking::from_raw("mean_decrease_accuracy", &forest.feature_names, &mda),
        ImportanceRanking::from_raw("mean_decrease_gini", &forest.feature_names, &mdg),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label;
    use crate::models::{fit_model, Family};
    use crate::models::tree::{grow, GrowParams};

    fn table(seed_value: u64, n: usize) -> FeatureTable {
        let mut rng = seed::rng(seed_value);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..5).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let labels = rows
            .iter()
            .map(|r| {
                let p = if r[0] > 0.5 { 0.9 } else { 0.1 };
                if rng.gen_bool(p) { Label::Left } else { Label::Stayed }
            })
            .collect();
        FeatureTable::from_rows(&["a", "b", "c", "d", "e"], &rows, labels).unwrap()
    }

    fn forest(spec: &ModelSpec, t: &FeatureTable) -> RandomForest {
        match fit_model(spec, t).unwrap().model {
            Model::Rf(f) => f,
            _ => unreachable!(),
        }
    }

    #[test]
    fn single_tree_without_bagging_matches_grower() {
        let t = table(3, 200);
        let spec = ModelSpec::new(Family::Rf, 11)
            .with("n_trees", 1.0)
            .with("mtry", 5.0)
            .with("bootstrap", 0.0);
        let f = forest(&spec, &t);
        let params = GrowParams {
            min_split: 2,
            min_leaf: 1,
            max_depth: usize::MAX,
            max_features: None,
        };
        let mut rng = seed::rng(0);
        let tree = grow(&t, (0..200).collect(), &params, &mut rng);
        assert_eq!(f.predict_scores(&t), tree.predict_scores(&t));
    }

    #[test]
    fn same_seed_same_forest() {
        let t = table(4, 150);
        let spec = ModelSpec::new(Family::Rf, 2).with("n_trees", 20.0);
        assert_eq!(forest(&spec, &t).trees, forest(&spec, &t).trees);
        let other = ModelSpec::new(Family::Rf, 3).with("n_trees", 20.0);
        assert_ne!(forest(&spec, &t).trees, forest(&other, &t).trees);
    }

    #[test]
    fn informative_feature_ranks_first() {
        let t = table(5, 400);
        let spec = ModelSpec::new(Family::Rf, 1).with("n_trees", 60.0);
        let f = forest(&spec, &t);
        let (mda, mdg) = rf_importance(&f, &t, 1).unwrap();
        assert_eq!(mda.names()[0], "a");
        assert_eq!(mdg.names()[0], "a");
        assert_eq!(mda.score("a"), Some(100.0));
    }

    #[test]
    fn importance_needs_oob() {
        let t = table(6, 50);
        let spec = ModelSpec::new(Family::Rf, 1).with("n_trees", 3.0);
        let json = fit_model(&spec, &t).unwrap().to_json().unwrap();
        let back = crate::models::FittedModel::from_json(&json).unwrap();
        let Model::Rf(f) = back.model else { unreachable!() };
        assert!(rf_importance(&f, &t, 0).is_err());
    }

    #[test]
    fn scores_are_vote_fractions() {
        let t = table(7, 100);
        let spec = ModelSpec::new(Family::Rf, 1).with("n_trees", 7.0);
        let f = forest(&spec, &t);
        for s in f.predict_scores(&t) {
            let k = s * 7.0;
            assert!((k - k.round()).abs() < 1e-9);
        }
    }
}
