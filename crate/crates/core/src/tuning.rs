//! Repeated stratified k-fold cross-validation and exhaustive grid search.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::metrics::{confusion, kappa, label_for_score, roc_auc};
use crate::models::{Family, FittedPipeline, ModelSpec, Preprocessing};
use crate::preprocess::FeatureTable;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvSpec {
    pub folds: usize,
    pub repeats: usize,
    pub stratified: bool,
    pub seed: u64,
}

impl CvSpec {
    pub fn new(seed: u64) -> Self {
        CvSpec {
            folds: 10,
            repeats: 3,
            stratified: true,
            seed,
        }
    }
}

/// Fold id of every row, one vector per repeat. Each class is shuffled and
/// dealt round-robin so fold sizes differ by at most one overall and per
/// class.
pub fn fold_assignments(labels: &[Label], cv: &CvSpec) -> Result<Vec<Vec<usize>>> {
    if cv.folds < 2 || cv.repeats == 0 {
        return Err(Error::InvalidInput("cross-validation needs at least 2 folds and 1 repeat".into()));
    }
    let groups: Vec<Vec<usize>> = if cv.stratified {
        let (stayed, left): (Vec<usize>, Vec<usize>) =
            (0..labels.len()).partition(|&i| labels[i] == Label::Stayed);
        if stayed.len() < cv.folds || left.len() < cv.folds {
            return Err(Error::Degenerate(format!(
                "{} folds need at least that many rows per class, found {} Stayed and {} Left",
                cv.folds,
                stayed.len(),
                left.len()
            )));
        }
        vec![stayed, left]
    } else {
        if labels.len() < cv.folds {
            return Err(Error::Degenerate("fewer rows than folds".into()));
        }
        vec![(0..labels.len()).collect()]
    };
    Ok((0..cv.repeats)
        .map(|r| {
            let mut rng = seed::rng(seed::derive(cv.seed, "cv/repeat", r as u64));
            let mut fold = vec![0; labels.len()];
            let mut order: Vec<usize> = Vec::with_capacity(labels.len());
            for g in &groups {
                let mut g = g.clone();
                g.shuffle(&mut rng);
                order.extend(g);
            }
            for (pos, &row) in order.iter().enumerate() {
                fold[row] = pos % cv.folds;
            }
            fold
        })
        .collect())
}

/// Scores of one model specification over every fold of every repeat, in
/// (repeat, fold) order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub accuracy: Vec<f64>,
    pub kappa: Vec<f64>,
    pub roc_auc: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

impl CvResult {
    pub fn mean_accuracy(&self) -> f64 {
        mean(&self.accuracy)
    }
    pub fn sd_accuracy(&self) -> f64 {
        sd(&self.accuracy)
    }
    pub fn mean_kappa(&self) -> f64 {
        mean(&self.kappa)
    }
    pub fn sd_kappa(&self) -> f64 {
        sd(&self.kappa)
    }
    pub fn mean_roc_auc(&self) -> f64 {
        mean(&self.roc_auc)
    }
}

/// Accuracy, kappa and AUC of held-out predictions.
pub(crate) fn fold_scores(truth: &[Label], scores: &[f64]) -> Result<(f64, f64, f64)> {
    let pred: Vec<Label> = scores.iter().map(|&s| label_for_score(s)).collect();
    let cm = confusion(truth, &pred)?;
    let acc = (cm.tp + cm.tn) as f64 / cm.total() as f64;
    // kappa is undefined only when truth and prediction are both constant
    let k = kappa(&cm).unwrap_or(0.0);
    let auc = roc_auc(scores, truth).unwrap_or(f64::NAN);
    Ok((acc, k, auc))
}

/// Train/validation row indices for every (repeat, fold).
pub fn fold_partitions(labels: &[Label], cv: &CvSpec) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let assignments = fold_assignments(labels, cv)?;
    let mut out = Vec::with_capacity(cv.repeats * cv.folds);
    for fold_of in &assignments {
        for f in 0..cv.folds {
            let (valid, fit): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| fold_of[i] == f);
            out.push((fit, valid));
        }
    }
    Ok(out)
}

/// Model seed used inside fold `index`; shared by every grid cell so cells
/// are compared on identical randomness.
fn fold_model_seed(cv: &CvSpec, index: usize) -> u64 {
    seed::derive(cv.seed, "cv/model", index as u64)
}

/// Cross-validate one specification. Preprocessing is fitted inside each
/// training fold.
pub fn cv_evaluate(
    spec: &ModelSpec,
    train: &FeatureTable,
    cv: &CvSpec,
    preprocessing: Preprocessing,
) -> Result<CvResult> {
    let parts = fold_partitions(train.labels(), cv)?;
    evaluate_on_parts(spec, train, cv, preprocessing, &parts)
}

fn evaluate_on_parts(
    spec: &ModelSpec,
    train: &FeatureTable,
    cv: &CvSpec,
    preprocessing: Preprocessing,
    parts: &[(Vec<usize>, Vec<usize>)],
) -> Result<CvResult> {
    let scores: Vec<(f64, f64, f64)> = parts
        .par_iter()
        .enumerate()
        .map(|(i, (fit, valid))| {
            let mut s = spec.clone();
            s.seed = fold_model_seed(cv, i);
            let model = FittedPipeline::fit_with(&s, &train.select_rows(fit), preprocessing)?;
            let held_out = train.select_rows(valid);
            fold_scores(held_out.labels(), &model.predict_scores(&held_out)?)
        })
        .collect::<Result<_>>()?;
    Ok(CvResult {
        accuracy: scores.iter().map(|s| s.0).collect(),
        kappa: scores.iter().map(|s| s.1).collect(),
        roc_auc: scores.iter().map(|s| s.2).collect(),
    })
}

pub type Grid = BTreeMap<String, Vec<f64>>;

/// Every combination of grid values, varying the last parameter fastest.
pub fn grid_cells(grid: &Grid) -> Vec<BTreeMap<String, f64>> {
    let mut cells = vec![BTreeMap::new()];
    for (name, values) in grid {
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                values.iter().map(move |&v| {
                    let mut c = cell.clone();
                    c.insert(name.clone(), v);
                    c
                })
            })
            .collect();
    }
    cells
}

/// Sort key under which smaller means a simpler model.
fn simplicity(family: Family, params: &BTreeMap<String, f64>) -> Vec<f64> {
    let get = |k: &str| params.get(k).copied().unwrap_or(0.0);
    match family {
        Family::Knn => vec![get("k")],
        Family::Cart => vec![-get("cp")],
        Family::Rf => vec![get("mtry")],
        Family::Ann => vec![get("size"), -get("decay")],
        Family::Svm => vec![get("c"), get("gamma")],
        Family::Gnb => vec![],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub params: BTreeMap<String, f64>,
    pub cv: Option<CvResult>,
    pub error: Option<String>,
}

impl CellResult {
    pub fn mean_accuracy(&self) -> Option<f64> {
        self.cv.as_ref().map(|c| c.mean_accuracy())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridResult {
    pub family: Family,
    pub preprocessing: Preprocessing,
    pub cells: Vec<CellResult>,
    /// Cell indices from best to worst; failed cells are left out.
    pub ranking: Vec<usize>,
    pub best_spec: ModelSpec,
    /// Refit of the best cell on all training rows.
    #[serde(skip)]
    pub model: Option<FittedPipeline>,
}

impl GridResult {
    pub fn best(&self) -> &CellResult {
        &self.cells[self.ranking[0]]
    }

    /// 0-based rank of the cell whose parameters match `params` on every
    /// given key.
    pub fn rank_of(&self, params: &[(&str, f64)]) -> Option<usize> {
        self.ranking.iter().position(|&c| {
            params
                .iter()
                .all(|(k, v)| self.cells[c].params.get(*k).is_some_and(|x| (x - v).abs() < 1e-9))
        })
    }
}

/// Evaluate every cell on the same folds, pick the most accurate (simplest
/// on ties) and refit it on the whole training table.
pub fn grid_search(
    base: &ModelSpec,
    grid: &Grid,
    train: &FeatureTable,
    cv: &CvSpec,
    preprocessing: Preprocessing,
) -> Result<GridResult> {
    let family = base.family;
    let cells = grid_cells(grid);
    if cells.is_empty() || grid.values().any(|v| v.is_empty()) {
        return Err(Error::InvalidInput("grid has no cells".into()));
    }
    let parts = fold_partitions(train.labels(), cv)?;
    let spec_for = |params: &BTreeMap<String, f64>| {
        let mut s = base.clone();
        for (k, v) in params {
            s.params.insert(k.clone(), *v);
        }
        s
    };
    let results: Vec<CellResult> = cells
        .par_iter()
        .map(|params| {
            let spec = spec_for(params);
            let outcome = spec
                .validate_names()
                .and_then(|_| evaluate_on_parts(&spec, train, cv, preprocessing, &parts));
            match outcome {
                Ok(cv) => CellResult {
                    params: params.clone(),
                    cv: Some(cv),
                    error: None,
                },
                Err(e) => {
                    log::warn!("{family} cell {params:?} failed: {e}");
                    CellResult {
                        params: params.clone(),
                        cv: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    let mut ranking: Vec<usize> = (0..results.len()).filter(|&i| results[i].cv.is_some()).collect();
    if ranking.is_empty() {
        return Err(Error::InvalidInput(format!(
            "every {family} grid cell failed; first error: {}",
            results[0].error.as_deref().unwrap_or("unknown")
        )));
    }
    ranking.sort_by(|&a, &b| {
        let (ma, mb) = (results[a].mean_accuracy().unwrap(), results[b].mean_accuracy().unwrap());
        mb.total_cmp(&ma)
            .then_with(|| {
                let (sa, sb) = (simplicity(family, &results[a].params), simplicity(family, &results[b].params));
                sa.partial_cmp(&sb).unwrap_or(std::cmp::Ordering::Equal)
            })
            .then(a.cmp(&b))
    });
    let best_spec = spec_for(&results[ranking[0]].params);
    let model = FittedPipeline::fit_with(&best_spec, train, preprocessing)?;
    Ok(GridResult {
        family,
        preprocessing,
        cells: results,
        ranking,
        best_spec,
        model: Some(model),
    })
}
