//! The four experiment stages: model comparison, feature selection, class
//! balancing and outlier removal. Each stage returns its runs into one
//! manifest; every metric in it can be recomputed from the stored scores.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, FeatureMode, OutlierMode};
use crate::data::{churn_schema, describe_column, load_dataset, map_outcome_labels, ColumnSummary, Dataset, Label};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_scores, MetricSet};
use crate::models::{Family, FittedPipeline, ModelSpec, Preprocessing};
use crate::preprocess::{dummy_encode, split_indices, EncoderSpec, FeatureTable, Fingerprint, Split, SplitSpec};
use crate::resample::{resample, ResampleKind, ResamplePlan};
use crate::seed;
use crate::selection::{embedded_rankings, four_variable_subset, rfe, top5_subset, EmbeddedRankings, RfeResult};
use crate::stats::{
    chi_square_independence, churn_figures, figure_data, iqr_outliers, pearson_correlation_matrix, ChiSquareResult,
    CorrelationMatrix, FigureData, OutlierReport, QuartileMethod,
};
use crate::tuning::{grid_search, CellResult, CvSpec, Grid};

/// Bumped when the manifest layout changes.
pub const MANIFEST_VERSION: u32 = 1;

/// Predictors tested against the outcome for independence.
pub const CHI_SQUARE_FACTORS: [&str; 5] = ["Gender", "Geography", "HasCrCard", "IsActiveMember", "NumOfProducts"];

/// Columns of the correlation table, outcome first.
pub const CORRELATION_COLUMNS: [&str; 9] = [
    "Exited",
    "CreditScore",
    "Age",
    "Tenure",
    "Balance",
    "NumOfProducts",
    "EstimatedSalary",
    "IsActiveMember",
    "HasCrCard",
];

/// Continuous columns screened for outliers within each class.
pub const OUTLIER_COLUMNS: [&str; 4] = ["CreditScore", "Age", "Balance", "EstimatedSalary"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Compare,
    Select,
    Balance,
    Outliers,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Compare, Stage::Select, Stage::Balance, Stage::Outliers];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Compare => "compare",
            Stage::Select => "select",
            Stage::Balance => "balance",
            Stage::Outliers => "outliers",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown stage {s:?}")))
    }
}

/// Identity of one model run; equal keys always give equal runs under a
/// fixed configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunKey {
    pub family: Family,
    pub features: FeatureMode,
    pub resample: ResampleKind,
    pub outliers: OutlierMode,
}

impl RunKey {
    pub fn new(family: Family) -> Self {
        RunKey {
            family,
            features: FeatureMode::All,
            resample: ResampleKind::None,
            outliers: OutlierMode::Keep,
        }
    }

    pub fn features(mut self, f: FeatureMode) -> Self {
        self.features = f;
        self
    }

    pub fn resample(mut self, r: ResampleKind) -> Self {
        self.resample = r;
        self
    }

    pub fn outliers(mut self, o: OutlierMode) -> Self {
        self.outliers = o;
        self
    }

    /// File-name friendly identifier, e.g. `rf-top5-smote-drop`.
    pub fn id(&self) -> String {
        let o = match self.outliers {
            OutlierMode::Keep => "keep",
            OutlierMode::Drop => "drop",
        };
        format!("{}-{}-{}-{o}", self.family, self.features.as_str(), self.resample.as_str())
    }
}

pub fn feature_subset(mode: FeatureMode) -> Option<Vec<String>> {
    let names = match mode {
        FeatureMode::All => return None,
        FeatureMode::Top5 => top5_subset(),
        FeatureMode::Four => four_variable_subset(),
    };
    Some(names.into_iter().map(String::from).collect())
}

/// Named sub-seeds derived from the master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub split: u64,
    pub cv: u64,
    pub resample: u64,
    pub rfe: u64,
    pub models: BTreeMap<Family, u64>,
}

impl Seeds {
    pub fn from_master(master: u64) -> Self {
        Seeds {
            master,
            split: seed::derive(master, "split", 0),
            cv: seed::derive(master, "cv", 0),
            resample: seed::derive(master, "resample", 0),
            rfe: seed::derive(master, "rfe", 0),
            models: Family::ALL
                .into_iter()
                .map(|f| (f, seed::derive(master, &format!("model/{f}"), 0)))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningSummary {
    pub cells: Vec<CellResult>,
    /// Cell indices from best to worst.
    pub ranking: Vec<usize>,
    pub best: BTreeMap<String, f64>,
}

impl TuningSummary {
    pub fn best_cell(&self) -> &CellResult {
        &self.cells[self.ranking[0]]
    }

    /// 0-based rank of the first cell matching every given parameter.
    pub fn rank_of(&self, params: &[(&str, f64)]) -> Option<usize> {
        self.ranking.iter().position(|&c| {
            params
                .iter()
                .all(|(k, v)| self.cells[c].params.get(*k).is_some_and(|x| (x - v).abs() < 1e-9))
        })
    }
}

/// One fitted and evaluated model together with the raw scores behind its
/// metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRun {
    pub key: RunKey,
    pub spec: ModelSpec,
    pub preprocessing: Preprocessing,
    pub input: Fingerprint,
    pub split_seed: u64,
    pub resample: Option<ResamplePlan>,
    /// (Stayed, Left) after resampling.
    pub train_class_counts: (usize, usize),
    pub test_class_counts: (usize, usize),
    pub tuning: Option<TuningSummary>,
    /// Mean cross-validated ROC AUC of the chosen cell.
    pub cv_roc_auc: Option<f64>,
    pub train: MetricSet,
    pub test: MetricSet,
    /// Outcome codes (1 = Left) and scores, row-aligned.
    pub train_truth: Vec<u8>,
    pub train_scores: Vec<f64>,
    pub test_truth: Vec<u8>,
    pub test_scores: Vec<f64>,
}

fn codes_to_labels(codes: &[u8]) -> Vec<Label> {
    codes.iter().map(|&c| if c == 1 { Label::Left } else { Label::Stayed }).collect()
}

impl ModelRun {
    /// Recompute (train, test) metrics from the stored scores.
    pub fn recompute(&self) -> Result<(MetricSet, MetricSet)> {
        Ok((
            evaluate_scores(&codes_to_labels(&self.train_truth), &self.train_scores)?,
            evaluate_scores(&codes_to_labels(&self.test_truth), &self.test_scores)?,
        ))
    }

    /// Recompute the cross-validated AUC from the stored fold scores.
    pub fn recompute_cv_roc_auc(&self) -> Option<f64> {
        self.tuning.as_ref().and_then(|t| t.best_cell().cv.as_ref()).map(|c| c.mean_roc_auc())
    }
}

/// Exploratory summaries of the full dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub rows: usize,
    /// (Stayed, Left).
    pub class_counts: (usize, usize),
    pub summaries: Vec<(String, ColumnSummary)>,
    pub correlations: CorrelationMatrix,
    pub chi_square: Vec<(String, ChiSquareResult)>,
    pub quartile_method: QuartileMethod,
    pub outliers: Vec<OutlierReport>,
    /// The same screen under the other quartile convention.
    pub outliers_alternative: Vec<OutlierReport>,
    pub figures: Vec<(String, FigureData)>,
}

pub fn load_churn_csv(path: &Path) -> Result<Dataset> {
    map_outcome_labels(&load_dataset(path, &churn_schema())?)
}

pub fn run_profile(ds: &Dataset, method: QuartileMethod) -> Result<Profile> {
    let mut summaries = Vec::new();
    for c in ds.predictors().chain(std::iter::once(ds.column_schema(ds.outcome_name())?)) {
        summaries.push((c.name.clone(), describe_column(ds, &c.name)?));
    }
    let chi_square = CHI_SQUARE_FACTORS
        .iter()
        .map(|f| Ok((f.to_string(), chi_square_independence(ds, f, ds.outcome_name())?)))
        .collect::<Result<_>>()?;
    let alternative = match method {
        QuartileMethod::Linear => QuartileMethod::TukeyHinges,
        QuartileMethod::TukeyHinges => QuartileMethod::Linear,
    };
    let screen = |m| -> Result<Vec<OutlierReport>> {
        let mut out = Vec::new();
        for c in OUTLIER_COLUMNS {
            out.extend(iqr_outliers(ds, c, true, m)?);
        }
        Ok(out)
    };
    let figures = churn_figures()
        .iter()
        .map(|f| Ok((f.name.clone(), figure_data(ds, f)?)))
        .collect::<Result<_>>()?;
    Ok(Profile {
        rows: ds.n(),
        class_counts: ds.class_counts()?,
        summaries,
        correlations: pearson_correlation_matrix(ds, &CORRELATION_COLUMNS)?,
        chi_square,
        quartile_method: method,
        outliers: screen(method)?,
        outliers_alternative: screen(alternative)?,
        figures,
    })
}

/// Rows dropped by the outlier stage: Age outliers of the Stayed class.
pub fn outlier_rows(ds: &Dataset, method: QuartileMethod) -> Result<Vec<usize>> {
    let reports = iqr_outliers(ds, "Age", true, method)?;
    Ok(reports
        .into_iter()
        .find(|r| r.class_label == Some(Label::Stayed))
        .map(|r| r.outlier_row_indices)
        .unwrap_or_default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub rankings: EmbeddedRankings,
    pub rfe: RfeResult,
    /// Predictors carried into the later stages.
    pub selected: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    /// Effective configuration minus output location and thread count,
    /// which never affect results.
    pub config: serde_json::Value,
    pub seeds: Seeds,
    pub stages: Vec<Stage>,
    pub profile: Profile,
    pub selection: Option<SelectionSummary>,
    /// Dataset rows removed before the outlier-stage split.
    pub outlier_rows_removed: Option<Vec<usize>>,
    pub runs: BTreeMap<String, ModelRun>,
}

impl RunManifest {
    pub fn run(&self, key: &RunKey) -> Option<&ModelRun> {
        self.runs.get(&key.id())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: RunManifest = serde_json::from_str(s)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::InvalidInput(format!(
                "manifest version {} is not supported (expected {MANIFEST_VERSION})",
                m.version
            )));
        }
        Ok(m)
    }

    /// Check every stored metric against a recomputation from its scores.
    pub fn audit(&self) -> Result<()> {
        for (id, run) in &self.runs {
            let (train, test) = run.recompute()?;
            if train != run.train || test != run.test || run.recompute_cv_roc_auc() != run.cv_roc_auc {
                return Err(Error::InvalidInput(format!("run {id} disagrees with its stored predictions")));
            }
        }
        Ok(())
    }
}

/// Wall-clock seconds, kept apart from the manifest so it stays reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub threads: usize,
    pub stages: BTreeMap<String, f64>,
    pub runs: BTreeMap<String, f64>,
}

pub struct ExperimentOutput {
    pub manifest: RunManifest,
    pub models: BTreeMap<String, FittedPipeline>,
    pub timings: Timings,
}

/// Run `f` on a dedicated pool of `threads` workers (0 = one per core).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Shared state of one experiment invocation.
pub struct Experiment<'a> {
    cfg: &'a ExperimentConfig,
    pub seeds: Seeds,
    full: FeatureTable,
    cleaned: Option<(FeatureTable, Vec<usize>)>,
    ds: &'a Dataset,
    runs: BTreeMap<RunKey, (ModelRun, FittedPipeline)>,
    timings: Timings,
}

impl<'a> Experiment<'a> {
    pub fn new(ds: &'a Dataset, cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Experiment {
            cfg,
            seeds: Seeds::from_master(cfg.seed),
            full: dummy_encode(ds, &EncoderSpec::churn())?,
            cleaned: None,
            ds,
            runs: BTreeMap::new(),
            timings: Timings::default(),
        })
    }

    fn table(&mut self, mode: OutlierMode) -> Result<&FeatureTable> {
        match mode {
            OutlierMode::Keep => Ok(&self.full),
            OutlierMode::Drop => {
                if self.cleaned.is_none() {
                    let drop = outlier_rows(self.ds, self.cfg.quartile_method)?;
                    let keep: Vec<usize> = {
                        let mut mask = vec![true; self.full.n_rows()];
                        drop.iter().for_each(|&i| mask[i] = false);
                        (0..mask.len()).filter(|&i| mask[i]).collect()
                    };
                    self.cleaned = Some((self.full.select_rows(&keep), drop));
                }
                Ok(&self.cleaned.as_ref().unwrap().0)
            }
        }
    }

    /// Train/test partitions for a key, before resampling.
    pub fn partitions(&mut self, key: &RunKey) -> Result<(FeatureTable, FeatureTable, Split)> {
        let split_spec = SplitSpec {
            train_fraction: self.cfg.split.train_fraction,
            seed: self.seeds.split,
            stratified: self.cfg.split.stratified,
        };
        let table = self.table(key.outliers)?.clone();
        let split = split_indices(table.labels(), &split_spec)?;
        let (mut train, mut test) = (table.select_rows(&split.train), table.select_rows(&split.test));
        if let Some(subset) = feature_subset(key.features) {
            train = train.select_sources(&subset)?;
            test = test.select_sources(&subset)?;
        }
        Ok((train, test, split))
    }

    fn base_spec(&self, family: Family) -> ModelSpec {
        let mut spec = ModelSpec::new(family, self.seeds.models[&family]);
        spec.params.extend(self.cfg.fixed_params(family));
        spec
    }

    fn cv_spec(&self) -> CvSpec {
        CvSpec {
            folds: self.cfg.cv.folds,
            repeats: self.cfg.cv.repeats,
            stratified: true,
            seed: self.seeds.cv,
        }
    }

    /// Grid for `family`, with values that cannot apply to `d` columns
    /// clipped away.
    fn grid_for(&self, family: Family, d: usize) -> Grid {
        let mut grid = self.cfg.grids[&family].clone();
        if family == Family::Rf {
            if let Some(m) = grid.get_mut("mtry") {
                m.retain(|&v| v <= d as f64);
                if m.is_empty() {
                    m.push(d as f64);
                }
            }
        }
        grid
    }

    /// Fit, optionally tune, and evaluate one configuration; cached by key.
    pub fn run(&mut self, key: RunKey, tune: bool) -> Result<(ModelRun, FittedPipeline)> {
        if let Some(r) = self.runs.get(&key) {
            return Ok(r.clone());
        }
        let started = Instant::now();
        let (train, test, _) = self.partitions(&key)?;
        let plan = (key.resample != ResampleKind::None).then(|| ResamplePlan::new(key.resample, self.seeds.resample));
        let train = match &plan {
            Some(p) => resample(&train, p)?,
            None => train,
        };
        let family = key.family;
        let preprocessing = Preprocessing::for_family(family);
        let base = self.base_spec(family);
        let (spec, tuning, model) = if tune {
            let mut search_base = base.clone();
            if family == Family::Rf {
                search_base.params.insert("n_trees".into(), self.cfg.tuning.rf_trees as f64);
            }
            log::info!("tuning {}", key.id());
            let grid = self.grid_for(family, train.n_cols());
            let gr = grid_search(&search_base, &grid, &train, &self.cv_spec(), preprocessing)?;
            let best = gr.best().params.clone();
            let mut spec = base.clone();
            spec.params.extend(best.clone());
            let model = if spec == gr.best_spec {
                gr.model.clone().expect("grid search refits the best cell")
            } else {
                FittedPipeline::fit_with(&spec, &train, preprocessing)?
            };
            let summary = TuningSummary {
                cells: gr.cells,
                ranking: gr.ranking,
                best,
            };
            (spec, Some(summary), model)
        } else {
            log::info!("fitting {}", key.id());
            let model = FittedPipeline::fit_with(&base, &train, preprocessing)?;
            (base, None, model)
        };
        let train_scores = model.predict_scores(&train)?;
        let test_scores = model.predict_scores(&test)?;
        let codes = |t: &FeatureTable| t.labels().iter().map(|l| l.code()).collect::<Vec<u8>>();
        let run = ModelRun {
            key,
            spec,
            preprocessing,
            input: model.input.clone(),
            split_seed: self.seeds.split,
            resample: plan,
            train_class_counts: train.class_counts(),
            test_class_counts: test.class_counts(),
            cv_roc_auc: tuning
                .as_ref()
                .and_then(|t| t.best_cell().cv.as_ref())
                .map(|c| c.mean_roc_auc()),
            tuning,
            train: evaluate_scores(train.labels(), &train_scores)?,
            test: evaluate_scores(test.labels(), &test_scores)?,
            train_truth: codes(&train),
            train_scores,
            test_truth: codes(&test),
            test_scores,
        };
        self.timings.runs.insert(key.id(), started.elapsed().as_secs_f64());
        self.runs.insert(key, (run.clone(), model.clone()));
        Ok((run, model))
    }

    fn run_default(&mut self, key: RunKey) -> Result<ModelRun> {
        let tune = self.cfg.is_tuned(key.family);
        Ok(self.run(key, tune)?.0)
    }

    /// Six families on all predictors, no resampling.
    pub fn run_model_comparison(&mut self) -> Result<()> {
        for family in Family::ALL {
            self.run_default(RunKey::new(family))?;
        }
        Ok(())
    }

    /// Importance rankings, elimination profile, and forest and network
    /// retuned on the selected predictors.
    pub fn run_feature_selection(&mut self) -> Result<SelectionSummary> {
        let (train, _, _) = self.partitions(&RunKey::new(Family::Rf))?;
        let cart = self.base_spec(Family::Cart);
        let rf = self.base_spec(Family::Rf);
        log::info!("importance rankings");
        let rankings = embedded_rankings(&train, &cart, &rf)?;
        let n_sources = train.source_names().len();
        let sizes: Vec<usize> = self.cfg.rfe.sizes.iter().copied().filter(|&s| s >= 1 && s <= n_sources).collect();
        let rfe_cv = CvSpec {
            folds: self.cfg.rfe.folds,
            repeats: self.cfg.rfe.repeats,
            stratified: true,
            seed: self.seeds.rfe,
        };
        let mut rfe_forest = rf.clone();
        rfe_forest.params.insert("n_trees".into(), self.cfg.rfe.n_trees as f64);
        log::info!("recursive feature elimination over sizes {sizes:?}");
        let rfe = rfe(&train, &sizes, &rfe_cv, &rfe_forest)?;
        for family in [Family::Rf, Family::Ann] {
            self.run_default(RunKey::new(family))?;
            self.run_default(RunKey::new(family).features(FeatureMode::Top5))?;
        }
        // side run on four predictors with untuned forest settings
        self.run(RunKey::new(Family::Rf).features(FeatureMode::Four), false)?;
        Ok(SelectionSummary {
            rankings,
            rfe,
            selected: feature_subset(FeatureMode::Top5).unwrap_or_default(),
        })
    }

    /// Selected predictors with and without each resampling scheme.
    pub fn run_imbalance(&mut self) -> Result<()> {
        for family in [Family::Rf, Family::Ann] {
            for r in [ResampleKind::None, ResampleKind::Under, ResampleKind::Smote] {
                self.run_default(RunKey::new(family).features(FeatureMode::Top5).resample(r))?;
            }
        }
        Ok(())
    }

    /// Selected predictors with SMOTE, before and after dropping outliers.
    pub fn run_outlier_ablation(&mut self) -> Result<Vec<usize>> {
        for family in [Family::Rf, Family::Ann] {
            for o in [OutlierMode::Keep, OutlierMode::Drop] {
                let key = RunKey::new(family)
                    .features(FeatureMode::Top5)
                    .resample(ResampleKind::Smote)
                    .outliers(o);
                self.run_default(key)?;
            }
        }
        self.table(OutlierMode::Drop)?;
        Ok(self.cleaned.as_ref().map(|c| c.1.clone()).unwrap_or_default())
    }

    /// Run the given stages in canonical order.
    pub fn run_stages(mut self, stages: &[Stage]) -> Result<ExperimentOutput> {
        let mut ordered: Vec<Stage> = stages.to_vec();
        ordered.sort();
        ordered.dedup();
        let started = Instant::now();
        let profile = run_profile(self.ds, self.cfg.quartile_method)?;
        self.timings.stages.insert("profile".into(), started.elapsed().as_secs_f64());
        let mut selection = None;
        let mut removed = None;
        for &stage in &ordered {
            let started = Instant::now();
            log::info!("stage {}", stage.as_str());
            match stage {
                Stage::Compare => self.run_model_comparison()?,
                Stage::Select => selection = Some(self.run_feature_selection()?),
                Stage::Balance => self.run_imbalance()?,
                Stage::Outliers => removed = Some(self.run_outlier_ablation()?),
            }
            self.timings.stages.insert(stage.as_str().into(), started.elapsed().as_secs_f64());
        }
        let mut config = serde_json::to_value(self.cfg)?;
        if let Some(obj) = config.as_object_mut() {
            obj.remove("out");
            obj.remove("threads");
        }
        let mut runs = BTreeMap::new();
        let mut models = BTreeMap::new();
        for (key, (run, model)) in std::mem::take(&mut self.runs) {
            runs.insert(key.id(), run);
            models.insert(key.id(), model);
        }
        let manifest = RunManifest {
            version: MANIFEST_VERSION,
            config,
            seeds: self.seeds.clone(),
            stages: ordered,
            profile,
            selection,
            outlier_rows_removed: removed,
            runs,
        };
        self.timings.threads = rayon::current_num_threads();
        Ok(ExperimentOutput {
            manifest,
            models,
            timings: self.timings,
        })
    }
}

/// Run `stages` on `ds` inside a pool sized by the configuration.
pub fn run_experiment(ds: &Dataset, cfg: &ExperimentConfig, stages: &[Stage]) -> Result<ExperimentOutput> {
    with_threads(cfg.threads, || Experiment::new(ds, cfg)?.run_stages(stages))?
}
