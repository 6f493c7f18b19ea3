//! Embedded importance rankings and recursive feature elimination.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{fit_model, rf_importance, tree_importance, ImportanceRanking, Model, ModelSpec};
use crate::preprocess::FeatureTable;
use crate::tuning::{fold_partitions, fold_scores, CvSpec};

/// The five predictors kept after feature selection.
pub fn top5_subset() -> Vec<&'static str> {
    vec!["Age", "NumOfProducts", "IsActiveMember", "Balance", "Geography"]
}

/// Reduced set for the side run with four predictors.
pub fn four_variable_subset() -> Vec<&'static str> {
    vec!["Age", "NumOfProducts", "IsActiveMember", "Balance"]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedRankings {
    pub cart: ImportanceRanking,
    pub rf_mda: ImportanceRanking,
    pub rf_mdg: ImportanceRanking,
}

/// Importance of every model column from a CART and a forest fitted on the
/// untransformed training table.
pub fn embedded_rankings(train: &FeatureTable, cart: &ModelSpec, rf: &ModelSpec) -> Result<EmbeddedRankings> {
    let Model::Cart(tree) = fit_model(cart, train)?.model else {
        return Err(Error::InvalidInput("cart ranking needs a cart spec".into()));
    };
    let Model::Rf(forest) = fit_model(rf, train)?.model else {
        return Err(Error::InvalidInput("forest ranking needs an rf spec".into()));
    };
    let (rf_mda, rf_mdg) = rf_importance(&forest, train, rf.seed)?;
    Ok(EmbeddedRankings {
        cart: tree_importance(&tree),
        rf_mda,
        rf_mdg,
    })
}

/// Predictor ranking by forest permutation importance, dummy columns summed
/// into their source predictor.
fn rank_sources(table: &FeatureTable, rf: &ModelSpec) -> Result<Vec<String>> {
    let Model::Rf(forest) = fit_model(rf, table)?.model else {
        return Err(Error::InvalidInput("elimination needs an rf spec".into()));
    };
    let (mda, _) = rf_importance(&forest, table, rf.seed)?;
    let grouped = mda.grouped(table.names(), table.sources());
    Ok(grouped.names().into_iter().map(String::from).collect())
}

/// Subsets for each size, largest first: every step re-ranks the surviving
/// predictors and keeps the best `size` of them.
fn eliminate(table: &FeatureTable, sizes_desc: &[usize], rf: &ModelSpec) -> Result<Vec<Vec<String>>> {
    let mut current = table.source_names();
    let mut out = Vec::with_capacity(sizes_desc.len());
    for &size in sizes_desc {
        if size < current.len() {
            let ranked = rank_sources(&table.select_sources(&current)?, rf)?;
            current = ranked.into_iter().take(size).collect();
        }
        out.push(current.clone());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    /// Ascending.
    pub sizes: Vec<usize>,
    /// Per size, one score per (repeat, fold).
    pub fold_accuracy: Vec<Vec<f64>>,
    pub fold_kappa: Vec<Vec<f64>>,
    pub mean_accuracy: Vec<f64>,
    pub mean_kappa: Vec<f64>,
    pub chosen_size: usize,
    pub chosen: Vec<String>,
}

impl RfeResult {
    pub fn best_accuracy(&self) -> f64 {
        self.mean_accuracy[self.sizes.iter().position(|&s| s == self.chosen_size).unwrap()]
    }

    pub fn best_kappa(&self) -> f64 {
        self.mean_kappa[self.sizes.iter().position(|&s| s == self.chosen_size).unwrap()]
    }
}

/// Recursive feature elimination over source predictors with a random
/// forest, scored by cross-validated accuracy. Rankings are recomputed
/// inside every resample so held-out rows never influence them.
pub fn rfe(train: &FeatureTable, sizes: &[usize], cv: &CvSpec, rf: &ModelSpec) -> Result<RfeResult> {
    let n_sources = train.source_names().len();
    if sizes.is_empty() {
        return Err(Error::InvalidInput("feature elimination needs at least one subset size".into()));
    }
    if let Some(bad) = sizes.iter().find(|&&s| s == 0 || s > n_sources) {
        return Err(Error::InvalidInput(format!("subset size {bad} outside 1..={n_sources}")));
    }
    let mut asc: Vec<usize> = sizes.to_vec();
    asc.sort_unstable();
    asc.dedup();
    let desc: Vec<usize> = asc.iter().rev().copied().collect();

    let parts = fold_partitions(train.labels(), cv)?;
    // per part: (accuracy, kappa) per size in descending order
    let per_part: Vec<Vec<(f64, f64)>> = parts
        .par_iter()
        .enumerate()
        .map(|(i, (fit, valid))| {
            let mut spec = rf.clone();
            spec.seed = crate::seed::derive(rf.seed, "rfe/part", i as u64);
            let fit_t = train.select_rows(fit);
            let valid_t = train.select_rows(valid);
            eliminate(&fit_t, &desc, &spec)?
                .iter()
                .map(|subset| {
                    let m = fit_model(&spec, &fit_t.select_sources(subset)?)?;
                    let held = valid_t.select_sources(subset)?;
                    let (acc, k, _) = fold_scores(held.labels(), &m.predict_scores(&held)?)?;
                    Ok((acc, k))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let n_parts = per_part.len() as f64;
    let mut fold_accuracy = Vec::new();
    let mut fold_kappa = Vec::new();
    for s in 0..asc.len() {
        let d = desc.len() - 1 - s;
        fold_accuracy.push(per_part.iter().map(|p| p[d].0).collect::<Vec<_>>());
        fold_kappa.push(per_part.iter().map(|p| p[d].1).collect::<Vec<_>>());
    }
    let mean_accuracy: Vec<f64> = fold_accuracy.iter().map(|v| v.iter().sum::<f64>() / n_parts).collect();
    let mean_kappa: Vec<f64> = fold_kappa.iter().map(|v| v.iter().sum::<f64>() / n_parts).collect();
    // smallest size among the most accurate
    let mut best = 0;
    for s in 1..asc.len() {
        if mean_accuracy[s] > mean_accuracy[best] {
            best = s;
        }
    }
    let chosen_size = asc[best];
    let final_sets = eliminate(train, &desc, rf)?;
    let chosen = final_sets[desc.len() - 1 - best].clone();
    Ok(RfeResult {
        sizes: asc,
        fold_accuracy,
        fold_kappa,
        mean_accuracy,
        mean_kappa,
        chosen_size,
        chosen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label;
    use crate::models::Family;
    use rand::Rng;

    fn synthetic(seed_value: u64, n: usize) -> FeatureTable {
        let mut rng = crate::seed::rng(seed_value);
        let names: Vec<String> = (0..10).map(|j| format!("v{j}")).collect();
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..10).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let labels = rows
            .iter()
            .map(|r| {
                let signal = r[3] + r[7] > 1.0;
                let flip = rng.gen_bool(0.05);
                if signal != flip { Label::Left } else { Label::Stayed }
            })
            .collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        FeatureTable::from_rows(&refs, &rows, labels).unwrap()
    }

    fn rf() -> ModelSpec {
        ModelSpec::new(Family::Rf, 3).with("n_trees", 30.0)
    }

    fn cv() -> CvSpec {
        CvSpec {
            folds: 3,
            repeats: 1,
            stratified: true,
            seed: 5,
        }
    }

    #[test]
    fn finds_informative_features() {
        let t = synthetic(1, 300);
        let r = rfe(&t, &[1, 2, 3, 5, 10], &cv(), &rf()).unwrap();
        assert!(r.chosen.contains(&"v3".to_string()) && r.chosen.contains(&"v7".to_string()), "{:?}", r.chosen);
        assert_eq!(r.chosen.len(), r.chosen_size);
        // reported best equals the mean of its stored fold scores
        let i = r.sizes.iter().position(|&s| s == r.chosen_size).unwrap();
        let fold = &r.fold_accuracy[i];
        assert_eq!(r.best_accuracy(), fold.iter().sum::<f64>() / fold.len() as f64);
        assert!(r.mean_accuracy.iter().all(|&a| a <= r.best_accuracy()));
    }

    #[test]
    fn full_size_only_keeps_everything() {
        let t = synthetic(2, 90);
        let r = rfe(&t, &[10], &cv(), &rf()).unwrap();
        assert_eq!(r.chosen_size, 10);
        assert_eq!(r.chosen.len(), 10);
    }

    #[test]
    fn bad_sizes_rejected() {
        let t = synthetic(3, 60);
        assert!(rfe(&t, &[], &cv(), &rf()).is_err());
        assert!(rfe(&t, &[11], &cv(), &rf()).is_err());
    }

    #[test]
    fn embedded_rankings_find_signal() {
        let t = synthetic(4, 400);
        let r = embedded_rankings(&t, &ModelSpec::new(Family::Cart, 0), &rf()).unwrap();
        for ranking in [&r.cart, &r.rf_mda, &r.rf_mdg] {
            let top2: Vec<&str> = ranking.names()[..2].to_vec();
            assert!(top2.contains(&"v3") && top2.contains(&"v7"), "{}: {top2:?}", ranking.criterion);
        }
    }

    #[test]
    fn subsets() {
        assert_eq!(top5_subset().len(), 5);
        assert!(!top5_subset().contains(&"HasCrCard"));
        assert!(four_variable_subset().iter().all(|v| top5_subset().contains(v)));
    }
}
