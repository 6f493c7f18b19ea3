//! The six classifier families behind one fit/predict contract.
//!
//! Every family produces a score in [0, 1] per row (the estimated
//! probability, vote share, or squashed margin of `Left`) and the predicted
//! label is always `Left` iff the score is at least 0.5.

pub mod ann;
pub mod forest;
pub mod gnb;
pub mod knn;
pub mod pipeline;
pub mod svm;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::metrics::label_for_score;
use crate::preprocess::{FeatureTable, Fingerprint};

pub use ann::{ann_loss_gradient, fit_ann, Network};
pub use forest::{fit_rf, rf_importance, RandomForest};
pub use gnb::{fit_gnb, GaussianNb};
pub use knn::{fit_knn, knn_predict, Knn};
pub use pipeline::{FittedPipeline, Preprocessing};
pub use svm::{fit_svm, Svm};
pub use tree::{fit_cart, tree_importance, DecisionTree};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gnb,
    Knn,
    Svm,
    Cart,
    Rf,
    Ann,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Gnb,
        Family::Knn,
        Family::Svm,
        Family::Cart,
        Family::Rf,
        Family::Ann,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gnb => "gnb",
            Family::Knn => "knn",
            Family::Svm => "svm",
            Family::Cart => "cart",
            Family::Rf => "rf",
            Family::Ann => "ann",
        }
    }

    /// Column heading used in the report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Family::Gnb => "Naive Bayes",
            Family::Knn => "k-nn",
            Family::Svm => "SVM",
            Family::Cart => "Decision Trees",
            Family::Rf => "Random Forest",
            Family::Ann => "ANN",
        }
    }

    /// Accepted hyperparameters and their defaults. A default of NaN marks a
    /// value derived from the data at fit time.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            Family::Gnb => &[("sd_floor", 1e-3)],
            Family::Knn => &[("k", 9.0)],
            Family::Svm => &[
                ("c", 1.0),
                ("gamma", f64::NAN),
                ("tol", 1e-3),
                ("max_iter", 10_000_000.0),
                ("cache_mb", 256.0),
            ],
            Family::Cart => &[
                ("cp", 0.01),
                ("min_split", 20.0),
                ("min_leaf", 7.0),
                ("max_depth", 30.0),
            ],
            Family::Rf => &[
                ("n_trees", 500.0),
                ("mtry", f64::NAN),
                ("min_leaf", 1.0),
                ("bootstrap", 1.0),
            ],
            Family::Ann => &[("size", 5.0), ("decay", 0.1), ("max_iter", 500.0)],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model family {s:?}")))
    }
}

/// Family, hyperparameters, and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        ModelSpec {
            family,
            params: BTreeMap::new(),
            seed,
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    /// Reject names the family does not know.
    pub fn validate_names(&self) -> Result<()> {
        let known = self.family.defaults();
        for name in self.params.keys() {
            if !known.iter().any(|(k, _)| k == name) {
                return Err(Error::Hyperparameter(format!(
                    "{} has no hyperparameter {name:?}",
                    self.family
                )));
            }
        }
        Ok(())
    }

    /// Explicit value, or the family default (NaN when data-derived).
    pub fn get(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or_else(|| {
            self.family
                .defaults()
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .unwrap_or(f64::NAN)
        })
    }

    pub(crate) fn count(&self, name: &str, min: usize) -> Result<usize> {
        let v = self.get(name);
        if !(v.is_finite() && v.fract() == 0.0 && v >= min as f64) {
            return Err(Error::Hyperparameter(format!(
                "{}.{name} must be an integer ≥ {min}, got {v}",
                self.family
            )));
        }
        Ok(v as usize)
    }

    pub(crate) fn non_negative(&self, name: &str) -> Result<f64> {
        let v = self.get(name);
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Hyperparameter(format!(
                "{}.{name} must be finite and ≥ 0, got {v}",
                self.family
            )));
        }
        Ok(v)
    }

    pub(crate) fn positive(&self, name: &str) -> Result<f64> {
        let v = self.get(name);
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Hyperparameter(format!(
                "{}.{name} must be finite and > 0, got {v}",
                self.family
            )));
        }
        Ok(v)
    }

    /// Short human-readable parameter list, e.g. `size=5, decay=0.1`.
    pub fn describe(&self) -> String {
        self.params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Learned parameters of each family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Model {
    Gnb(GaussianNb),
    Knn(Knn),
    Svm(Svm),
    Cart(DecisionTree),
    Rf(RandomForest),
    Ann(Network),
}

/// A trained model plus the feature fingerprint it was trained on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub version: u32,
    pub spec: ModelSpec,
    pub fingerprint: Fingerprint,
    pub model: Model,
}

impl FittedModel {
    pub fn family(&self) -> Family {
        self.spec.family
    }

    fn check(&self, table: &FeatureTable) -> Result<()> {
        let found = table.fingerprint();
        if found != self.fingerprint {
            return Err(Error::Fingerprint {
                expected: self.fingerprint.to_string(),
                found: found.to_string(),
            });
        }
        Ok(())
    }

    /// Score of `Left` per row, in [0, 1].
    pub fn predict_scores(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        self.check(table)?;
        Ok(match &self.model {
            Model::Gnb(m) => m.predict_scores(table),
            Model::Knn(m) => m.predict_scores(table),
            Model::Svm(m) => m.predict_scores(table),
            Model::Cart(m) => m.predict_scores(table),
            Model::Rf(m) => m.predict_scores(table),
            Model::Ann(m) => m.predict_scores(table),
        })
    }

    pub fn predict_labels(&self, table: &FeatureTable) -> Result<Vec<Label>> {
        Ok(self
            .predict_scores(table)?
            .into_iter()
            .map(label_for_score)
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: FittedModel = serde_json::from_str(s)?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "model format version {} is not supported",
                m.version
            )));
        }
        Ok(m)
    }
}

/// Fit any family on an already-preprocessed table.
pub fn fit_model(spec: &ModelSpec, train: &FeatureTable) -> Result<FittedModel> {
    spec.validate_names()?;
    let (_, left) = train.class_counts();
    if left == 0 || left == train.n_rows() {
        return Err(Error::Degenerate("training data must contain both classes".into()));
    }
    match spec.family {
        Family::Gnb => fit_gnb(train, spec),
        Family::Knn => fit_knn(train, spec),
        Family::Svm => fit_svm(train, spec),
        Family::Cart => fit_cart(train, spec),
        Family::Rf => fit_rf(train, spec),
        Family::Ann => fit_ann(train, spec),
    }
}

pub(crate) fn wrap(spec: &ModelSpec, train: &FeatureTable, model: Model) -> FittedModel {
    FittedModel {
        version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        fingerprint: train.fingerprint(),
        model,
    }
}

/// Variables ordered by importance, scores min-max rescaled to [0, 100].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub criterion: String,
    /// (variable, scaled score, raw score), descending by score.
    pub entries: Vec<(String, f64, f64)>,
}

impl ImportanceRanking {
    pub fn from_raw(criterion: &str, names: &[String], raw: &[f64]) -> Self {
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = |v: f64| {
            if hi > lo {
                100.0 * (v - lo) / (hi - lo)
            } else if hi > 0.0 {
                100.0
            } else {
                0.0
            }
        };
        let mut entries: Vec<(String, f64, f64)> = names
            .iter()
            .zip(raw)
            .map(|(n, &r)| (n.clone(), scale(r), r))
            .collect();
        // stable: equal scores keep column order
        entries.sort_by(|a, b| b.1.total_cmp(&a.1));
        ImportanceRanking {
            criterion: criterion.to_string(),
            entries,
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.0.as_str()).collect()
    }

    pub fn score(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == name).map(|e| e.1)
    }

    /// 0-based position of `name` (0 = most important).
    pub fn rank(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.0 == name)
    }

    /// Sum raw scores of columns that share a source predictor, then rescale.
    pub fn grouped(&self, names: &[String], sources: &[String]) -> ImportanceRanking {
        let mut groups: Vec<String> = Vec::new();
        let mut raw: Vec<f64> = Vec::new();
        for (name, source) in names.iter().zip(sources) {
            let r = self.entries.iter().find(|e| &e.0 == name).map(|e| e.2).unwrap_or(0.0);
            match groups.iter().position(|g| g == source) {
                Some(i) => raw[i] += r,
                None => {
                    groups.push(source.clone());
                    raw.push(r);
                }
            }
        }
        ImportanceRanking::from_raw(&self.criterion, &groups, &raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_rescales_and_sorts() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let r = ImportanceRanking::from_raw("x", &names, &[2.0, 10.0, 0.0]);
        assert_eq!(r.names(), vec!["b", "a", "c"]);
        assert_eq!(r.score("b"), Some(100.0));
        assert_eq!(r.score("a"), Some(20.0));
        assert_eq!(r.score("c"), Some(0.0));
        let one = ImportanceRanking::from_raw("x", &names[..1], &[3.0]);
        assert_eq!(one.score("a"), Some(100.0));
        let none = ImportanceRanking::from_raw("x", &names, &[0.0; 3]);
        assert!(none.entries.iter().all(|e| e.1 == 0.0));
    }

    #[test]
    fn unknown_hyperparameter_rejected() {
        let spec = ModelSpec::new(Family::Knn, 0).with("depth", 3.0);
        assert!(matches!(spec.validate_names(), Err(Error::Hyperparameter(_))));
        assert_eq!(ModelSpec::new(Family::Ann, 0).get("decay"), 0.1);
    }

    #[test]
    fn grouped_sums_dummies() {
        let names: Vec<String> = ["Age", "GeoA", "GeoB"].iter().map(|s| s.to_string()).collect();
        let sources: Vec<String> = ["Age", "Geo", "Geo"].iter().map(|s| s.to_string()).collect();
        let r = ImportanceRanking::from_raw("x", &names, &[3.0, 1.0, 4.0]);
        let g = r.grouped(&names, &sources);
        assert_eq!(g.names(), vec!["Geo", "Age"]);
    }
}
