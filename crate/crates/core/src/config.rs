//! Experiment configuration. Every field has a default so a run needs only
//! a data path; a TOML file can override any subset.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Family;
use crate::resample::ResampleKind;
use crate::stats::QuartileMethod;
use crate::tuning::Grid;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    #[default]
    All,
    Top5,
    /// The four-predictor side run.
    Four,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::All => "all",
            FeatureMode::Top5 => "top5",
            FeatureMode::Four => "four",
        }
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(FeatureMode::All),
            "top5" => Ok(FeatureMode::Top5),
            "four" => Ok(FeatureMode::Four),
            _ => Err(Error::InvalidInput(format!("unknown feature mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierMode {
    #[default]
    Keep,
    /// Drop the Age outliers of the Stayed class before splitting.
    Drop,
}

impl std::str::FromStr for OutlierMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep" => Ok(OutlierMode::Keep),
            "drop" => Ok(OutlierMode::Drop),
            _ => Err(Error::InvalidInput(format!("unknown outlier mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::InvalidInput(format!("unknown report format {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.8,
            stratified: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { folds: 10, repeats: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    /// Families searched over their grid; the rest use fixed settings.
    pub families: Vec<Family>,
    /// Forest size while searching; the refit uses `models.rf.n_trees`.
    pub rf_trees: usize,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            families: vec![Family::Knn, Family::Cart, Family::Rf, Family::Ann],
            rf_trees: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfeConfig {
    pub sizes: Vec<usize>,
    pub folds: usize,
    pub repeats: usize,
    pub n_trees: usize,
}

impl Default for RfeConfig {
    fn default() -> Self {
        RfeConfig {
            sizes: (1..=10).collect(),
            folds: 5,
            repeats: 1,
            n_trees: 100,
        }
    }
}

/// Settings for the single-model `train` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub family: Family,
    pub features: FeatureMode,
    pub resample: ResampleKind,
    pub outliers: OutlierMode,
    pub tune: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            family: Family::Ann,
            features: FeatureMode::All,
            resample: ResampleKind::None,
            outliers: OutlierMode::Keep,
            tune: true,
        }
    }
}

fn grid(pairs: &[(&str, &[f64])]) -> Grid {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 picks the number of cores.
    pub threads: usize,
    pub formats: Vec<ReportFormat>,
    pub quartile_method: QuartileMethod,
    pub split: SplitConfig,
    pub cv: CvConfig,
    pub tuning: TuningConfig,
    /// Search grids per family.
    pub grids: BTreeMap<Family, Grid>,
    /// Fixed hyperparameters per family, applied under the grid values.
    pub models: BTreeMap<Family, BTreeMap<String, f64>>,
    pub rfe: RfeConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let odd: Vec<f64> = (0..12).map(|i| (2 * i + 1) as f64).collect();
        let grids = [
            (Family::Knn, grid(&[("k", &odd)])),
            (Family::Cart, grid(&[("cp", &[0.002, 0.005, 0.01, 0.02, 0.05])])),
            (Family::Rf, grid(&[("mtry", &[2.0, 3.0, 4.0, 5.0, 6.0])])),
            (
                Family::Ann,
                grid(&[("size", &[1.0, 3.0, 5.0, 7.0, 9.0]), ("decay", &[0.0, 0.1, 0.2, 0.5])]),
            ),
        ]
        .into_iter()
        .collect();
        ExperimentConfig {
            data: None,
            seed: 42,
            out: PathBuf::from("runs/default"),
            threads: 0,
            formats: vec![ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown],
            quartile_method: QuartileMethod::Linear,
            split: SplitConfig::default(),
            cv: CvConfig::default(),
            tuning: TuningConfig::default(),
            grids,
            models: BTreeMap::new(),
            rfe: RfeConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        // a file naming one grid keeps the defaults for the others
        for (family, grid) in ExperimentConfig::default().grids {
            cfg.grids.entry(family).or_insert(grid);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(Error::Config("split.train_fraction must lie in (0, 1)".into()));
        }
        if self.cv.folds < 2 || self.cv.repeats == 0 {
            return Err(Error::Config("cv needs folds >= 2 and repeats >= 1".into()));
        }
        if self.rfe.folds < 2 || self.rfe.repeats == 0 || self.rfe.n_trees == 0 || self.rfe.sizes.is_empty() {
            return Err(Error::Config("rfe needs folds >= 2, repeats >= 1, trees >= 1 and some sizes".into()));
        }
        if self.tuning.rf_trees == 0 {
            return Err(Error::Config("tuning.rf_trees must be positive".into()));
        }
        for family in &self.tuning.families {
            if self.grids.get(family).is_none_or(|g| g.is_empty()) {
                return Err(Error::Config(format!("{family} is tuned but has no grid")));
            }
        }
        for (family, params) in self.grids.iter().map(|(f, g)| (f, g.keys().collect::<Vec<_>>()))
            .chain(self.models.iter().map(|(f, m)| (f, m.keys().collect())))
        {
            for p in params {
                if !family.defaults().iter().any(|(k, _)| k == p) {
                    return Err(Error::Config(format!("{family} has no hyperparameter {p:?}")));
                }
            }
        }
        Ok(())
    }

    /// Fixed hyperparameters configured for `family`.
    pub fn fixed_params(&self, family: Family) -> BTreeMap<String, f64> {
        self.models.get(&family).cloned().unwrap_or_default()
    }

    pub fn is_tuned(&self, family: Family) -> bool {
        self.tuning.families.contains(&family)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_file_overrides_only_given_keys() {
        let cfg = ExperimentConfig::from_toml(
            "seed = 7\n[cv]\nfolds = 5\n[grids.knn]\nk = [3, 9]\n[models.rf]\nn_trees = 50\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.cv.folds, 5);
        assert_eq!(cfg.cv.repeats, 3);
        assert_eq!(cfg.grids[&Family::Knn]["k"], vec![3.0, 9.0]);
        assert_eq!(cfg.fixed_params(Family::Rf)["n_trees"], 50.0);
        // grids not mentioned keep their defaults
        assert!(cfg.grids.contains_key(&Family::Ann));
    }

    #[test]
    fn rejects_unknown_keys_and_params() {
        assert!(matches!(ExperimentConfig::from_toml("sed = 1"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml("[grids.knn]\ndepth = [1]"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml("[cv]\nfolds = 1"), Err(Error::Config(_))));
    }
}
