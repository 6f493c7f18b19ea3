//! Report tables derived from a manifest, and the files written for them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{FeatureMode, OutlierMode, ReportFormat};
use crate::data::ColumnSummary;
use crate::error::{Error, Result};
use crate::experiments::{ModelRun, Profile, RunKey, RunManifest, Timings};
use crate::metrics::MetricSet;
use crate::models::{Family, FittedPipeline};
use crate::resample::ResampleKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Count(u64),
    Number(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Count(c) => c.to_string(),
            Cell::Number(x) => format_number(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Three decimals; magnitudes that would print as zero switch to
/// scientific notation so tiny p-values stay visible.
pub fn format_number(x: f64) -> String {
    if x != 0.0 && x.abs() < 5e-4 {
        format!("{x:.3e}")
    } else {
        format!("{x:.3}")
    }
}

fn round3(x: f64) -> f64 {
    if x != 0.0 && x.abs() < 5e-4 {
        x
    } else {
        (x * 1000.0).round() / 1000.0
    }
}

fn num(x: Option<f64>) -> Option<Cell> {
    x.filter(|v| v.is_finite()).map(Cell::Number)
}

fn text(s: impl Into<String>) -> Option<Cell> {
    Some(Cell::Text(s.into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    /// File stem.
    pub name: String,
    /// Short label such as "Table 4".
    pub tag: String,
    pub title: String,
    pub header: Vec<String>,
    /// `None` marks an undefined value.
    pub rows: Vec<Vec<Option<Cell>>>,
}

impl ReportTable {
    fn new(name: &str, tag: &str, title: &str, header: Vec<String>) -> Self {
        ReportTable {
            name: name.into(),
            tag: tag.into(),
            title: title.into(),
            header,
            rows: Vec::new(),
        }
    }

    /// Cell at the row whose first column reads `row` and the column headed
    /// `column`.
    pub fn get(&self, row: &str, column: &str) -> Option<&Cell> {
        let j = self.header.iter().position(|h| h == column)?;
        let r = self.rows.iter().find(|r| matches!(&r[0], Some(Cell::Text(t)) if t == row))?;
        r[j].as_ref()
    }

    pub fn number(&self, row: &str, column: &str) -> Option<f64> {
        match self.get(row, column)? {
            Cell::Number(x) => Some(*x),
            Cell::Count(c) => Some(*c as f64),
            Cell::Text(_) => None,
        }
    }

    fn rendered_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|c| c.as_ref().map(Cell::render).unwrap_or_else(|| "NA".into())).collect())
            .collect()
    }

    fn rounded(&self) -> ReportTable {
        let mut t = self.clone();
        for r in &mut t.rows {
            for c in r.iter_mut().flatten() {
                if let Cell::Number(x) = c {
                    *x = round3(*x);
                }
            }
        }
        t
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in self.rendered_rows() {
            w.write_record(&r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("## {}. {}\n\n", self.tag, self.title);
        let _ = writeln!(s, "| {} |", self.header.join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(self.header.len()));
        for r in self.rendered_rows() {
            let _ = writeln!(s, "| {} |", r.join(" | "));
        }
        s
    }
}

// ---------------------------------------------------------------------------
// table builders

pub const METRIC_ROWS: [&str; 7] = ["Sensitivity", "Specificity", "Kappa", "Accuracy", "Precision", "Recall", "F1"];
pub const COMPARISON_ROWS: [&str; 5] = ["Kappa", "Accuracy", "Precision", "Recall", "F1"];

pub fn metric_value(m: &MetricSet, name: &str) -> Option<f64> {
    match name {
        "Sensitivity" => m.sensitivity,
        "Specificity" => m.specificity,
        "Kappa" => m.kappa,
        "Accuracy" => Some(m.accuracy),
        "Precision" => m.precision,
        "Recall" => m.recall,
        "F1" => m.f1,
        "ROC" => m.roc_auc,
        _ => None,
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Train,
    Test,
}

struct MetricTable<'a> {
    name: &'a str,
    tag: &'a str,
    title: &'a str,
    rows: &'a [&'a str],
    columns: Vec<(String, RunKey)>,
    side: Side,
    /// Append the cross-validated ROC AUC.
    cv_roc: bool,
}

fn metric_table(m: &RunManifest, spec: MetricTable<'_>) -> Option<ReportTable> {
    let runs: Vec<Option<&ModelRun>> = spec.columns.iter().map(|(_, k)| m.run(k)).collect();
    // a table appears only once every column's run exists
    if runs.iter().any(Option::is_none) {
        return None;
    }
    let mut header = vec![String::new()];
    header.extend(spec.columns.iter().map(|(h, _)| h.clone()));
    let mut t = ReportTable::new(spec.name, spec.tag, spec.title, header);
    for &row in spec.rows {
        let mut cells = vec![text(row)];
        for r in &runs {
            cells.push(num(r.and_then(|r| {
                metric_value(if spec.side == Side::Train { &r.train } else { &r.test }, row)
            })));
        }
        t.rows.push(cells);
    }
    if spec.cv_roc {
        let mut cells = vec![text("ROC")];
        cells.extend(runs.iter().map(|r| num(r.and_then(|r| r.cv_roc_auc))));
        t.rows.push(cells);
    }
    Some(t)
}

fn rf_ann_columns(labels: &[&str], keys: &[RunKey]) -> Vec<(String, RunKey)> {
    let mut cols = Vec::new();
    for (family, name) in [(Family::Rf, "Random Forest"), (Family::Ann, "ANN")] {
        for (label, key) in labels.iter().zip(keys) {
            let mut k = *key;
            k.family = family;
            cols.push((format!("{name} {label}"), k));
        }
    }
    cols
}

fn table01(p: &Profile) -> ReportTable {
    let header = ["Variable", "Minimum", "Maximum", "Mean", "Std. Deviation", "Levels"];
    let mut t = ReportTable::new(
        "table01_descriptive",
        "Table 1",
        "Descriptive statistics",
        header.iter().map(|s| s.to_string()).collect(),
    );
    let (stayed, left) = p.class_counts;
    for (name, summary) in &p.summaries {
        let row = match summary {
            ColumnSummary::Numeric {
                min,
                max,
                mean,
                std_dev,
                ..
            } => vec![text(name), num(Some(*min)), num(Some(*max)), num(Some(*mean)), num(Some(*std_dev)), None],
            ColumnSummary::Levels { level_counts } => {
                let levels = level_counts.iter().map(|(l, c)| format!("{l}: {c}")).collect::<Vec<_>>().join("; ");
                if level_counts.keys().all(|k| k == "Left" || k == "Stayed") {
                    // the outcome as its 0/1 code
                    let n = (stayed + left) as f64;
                    let p = left as f64 / n;
                    let sd = (p * (1.0 - p) * n / (n - 1.0)).sqrt();
                    vec![text(name), num(Some(0.0)), num(Some(1.0)), num(Some(p)), num(Some(sd)), text(levels)]
                } else {
                    vec![text(name), None, None, None, None, text(levels)]
                }
            }
        };
        t.rows.push(row);
    }
    t
}

fn table02(p: &Profile) -> ReportTable {
    let c = &p.correlations;
    let mut header = vec![String::new()];
    header.extend(c.labels.iter().cloned());
    let mut t = ReportTable::new("table02_correlation", "Table 2", "Correlation table", header);
    for (label, row) in c.labels.iter().zip(&c.values) {
        let mut cells = vec![text(label)];
        cells.extend(row.iter().map(|&v| num(Some(v))));
        t.rows.push(cells);
    }
    t
}

fn chi_square_table(p: &Profile) -> ReportTable {
    let header = ["Variable", "X-squared", "df", "p-value"];
    let mut t = ReportTable::new(
        "chi_square",
        "Chi-square",
        "Independence of each predictor and the outcome",
        header.iter().map(|s| s.to_string()).collect(),
    );
    for (name, r) in &p.chi_square {
        t.rows.push(vec![text(name), num(Some(r.statistic)), Some(Cell::Count(r.df as u64)), num(Some(r.p_value))]);
    }
    t
}

fn outlier_table(p: &Profile) -> ReportTable {
    let header = ["Variable", "Class", "Quartiles", "Lower fence", "Upper fence", "Outliers"];
    let mut t = ReportTable::new(
        "outliers",
        "Outliers",
        "Values beyond 1.5 IQR within each class",
        header.iter().map(|s| s.to_string()).collect(),
    );
    for r in p.outliers.iter().chain(&p.outliers_alternative) {
        let method = serde_json::to_value(r.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        t.rows.push(vec![
            text(&r.column),
            text(r.class_label.map(|l| l.to_string()).unwrap_or_else(|| "all".into())),
            text(method),
            num(Some(r.fences.0)),
            num(Some(r.fences.1)),
            Some(Cell::Count(r.outlier_row_indices.len() as u64)),
        ]);
    }
    t
}

fn importance_table(m: &RunManifest) -> Option<ReportTable> {
    let sel = m.selection.as_ref()?;
    let header = [
        "Rank",
        "Decision Trees",
        "Score",
        "Random Forest",
        "Score",
        "Random Forest (accuracy)",
        "Score",
    ];
    let mut t = ReportTable::new(
        "table05_importance",
        "Table 5",
        "Variable importance by tree-based models",
        header.iter().map(|s| s.to_string()).collect(),
    );
    let r = &sel.rankings;
    let n = r.cart.entries.len().max(r.rf_mdg.entries.len());
    for i in 0..n {
        let mut row = vec![Some(Cell::Count(i as u64 + 1))];
        for ranking in [&r.cart, &r.rf_mdg, &r.rf_mda] {
            match ranking.entries.get(i) {
                Some((name, score, _)) => row.extend([text(name), num(Some(*score))]),
                None => row.extend([None, None]),
            }
        }
        t.rows.push(row);
    }
    Some(t)
}

fn rfe_table(m: &RunManifest) -> Option<ReportTable> {
    let rfe = &m.selection.as_ref()?.rfe;
    let header = ["Variables", "Accuracy", "Kappa", "Accuracy SD", "Selected"];
    let mut t = ReportTable::new(
        "rfe",
        "RFE",
        "Recursive feature elimination resampling profile",
        header.iter().map(|s| s.to_string()).collect(),
    );
    for (i, &size) in rfe.sizes.iter().enumerate() {
        let acc = &rfe.fold_accuracy[i];
        let mean = rfe.mean_accuracy[i];
        let sd = if acc.len() > 1 {
            Some((acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (acc.len() - 1) as f64).sqrt())
        } else {
            None
        };
        t.rows.push(vec![
            Some(Cell::Count(size as u64)),
            num(Some(mean)),
            num(Some(rfe.mean_kappa[i])),
            num(sd),
            text(if size == rfe.chosen_size { "*" } else { "" }),
        ]);
    }
    Some(t)
}

fn four_variable_table(m: &RunManifest) -> Option<ReportTable> {
    let run = m.run(&RunKey::new(Family::Rf).features(FeatureMode::Four))?;
    let rfe = m.selection.as_ref().map(|s| &s.rfe);
    let at4 = rfe.and_then(|r| r.sizes.iter().position(|&s| s == 4));
    let header = ["", "Test set", "RFE resampling"];
    let mut t = ReportTable::new(
        "four_variable",
        "Side run",
        "Random forest on Age, NumOfProducts, IsActiveMember and Balance",
        header.iter().map(|s| s.to_string()).collect(),
    );
    t.rows.push(vec![
        text("Accuracy"),
        num(Some(run.test.accuracy)),
        num(at4.and_then(|i| rfe.map(|r| r.mean_accuracy[i]))),
    ]);
    t.rows.push(vec![
        text("Kappa"),
        num(run.test.kappa),
        num(at4.and_then(|i| rfe.map(|r| r.mean_kappa[i]))),
    ]);
    Some(t)
}

fn tuning_table(m: &RunManifest) -> Option<ReportTable> {
    let header = ["Run", "Rank", "Parameters", "Accuracy", "Accuracy SD", "Kappa", "ROC", "Error"];
    let mut t = ReportTable::new(
        "tuning",
        "Tuning",
        "Cross-validated grid search",
        header.iter().map(|s| s.to_string()).collect(),
    );
    for (id, run) in &m.runs {
        let Some(tuning) = &run.tuning else { continue };
        let mut rank = vec![None; tuning.cells.len()];
        for (pos, &c) in tuning.ranking.iter().enumerate() {
            rank[c] = Some(pos + 1);
        }
        for (cell, rank) in tuning.cells.iter().zip(rank) {
            let params = cell.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ");
            let cv = cell.cv.as_ref();
            t.rows.push(vec![
                text(id),
                rank.map(|r| Cell::Count(r as u64)),
                text(params),
                num(cv.map(|c| c.mean_accuracy())),
                num(cv.map(|c| c.sd_accuracy())),
                num(cv.map(|c| c.mean_kappa())),
                num(cv.map(|c| c.mean_roc_auc())),
                text(cell.error.clone().unwrap_or_default()),
            ]);
        }
    }
    (!t.rows.is_empty()).then_some(t)
}

/// Descriptive statistics, correlations, independence tests and outliers.
pub fn profile_tables(p: &Profile) -> Vec<ReportTable> {
    vec![table01(p), table02(p), chi_square_table(p), outlier_table(p)]
}

/// Every table the manifest supports, in report order.
pub fn build_tables(m: &RunManifest) -> Vec<ReportTable> {
    let mut out = profile_tables(&m.profile);
    let compare: Vec<(String, RunKey)> =
        Family::ALL.iter().map(|&f| (f.display_name().to_string(), RunKey::new(f))).collect();
    let top5 = RunKey::new(Family::Rf).features(FeatureMode::Top5);
    let smote = top5.resample(ResampleKind::Smote);
    let tables = [
        MetricTable {
            name: "table03_train",
            tag: "Table 3",
            title: "Performance measures for the training set",
            rows: &COMPARISON_ROWS,
            columns: compare.clone(),
            side: Side::Train,
            cv_roc: false,
        },
        MetricTable {
            name: "table04_test",
            tag: "Table 4",
            title: "Performance measures for the testing set",
            rows: &COMPARISON_ROWS,
            columns: compare,
            side: Side::Test,
            cv_roc: false,
        },
        MetricTable {
            name: "table06_selection_train",
            tag: "Table 6",
            title: "Performance measures following feature selection for the training set",
            rows: &METRIC_ROWS,
            columns: rf_ann_columns(&["Initial", "After Feature Selection"], &[RunKey::new(Family::Rf), top5]),
            side: Side::Train,
            cv_roc: false,
        },
        MetricTable {
            name: "table07_selection_test",
            tag: "Table 7",
            title: "Performance measures following feature selection for the testing set",
            rows: &METRIC_ROWS,
            columns: rf_ann_columns(&["Initial", "After Feature Selection"], &[RunKey::new(Family::Rf), top5]),
            side: Side::Test,
            cv_roc: false,
        },
        MetricTable {
            name: "table08_balance_train",
            tag: "Table 8",
            title: "Performance measures following balancing data for the training set",
            rows: &METRIC_ROWS,
            columns: rf_ann_columns(
                &["Initial", "Under-Sampled", "Over-Sampled"],
                &[top5, top5.resample(ResampleKind::Under), smote],
            ),
            side: Side::Train,
            cv_roc: true,
        },
        MetricTable {
            name: "table09_balance_test",
            tag: "Table 9",
            title: "Performance measures following balancing data for the testing set",
            rows: &METRIC_ROWS,
            columns: rf_ann_columns(
                &["Initial", "Under-Sampled", "Over-Sampled"],
                &[top5, top5.resample(ResampleKind::Under), smote],
            ),
            side: Side::Test,
            cv_roc: false,
        },
        MetricTable {
            name: "table10_outliers_train",
            tag: "Table 10",
            title: "Performance measures in the absence of outliers for the training set",
            rows: &METRIC_ROWS,
            columns: rf_ann_columns(&["Initial", "Cleaned"], &[smote, smote.outliers(OutlierMode::Drop)]),
            side: Side::Train,
            cv_roc: false,
        },
        MetricTable {
            name: "table11_outliers_test",
            tag: "Table 11",
            title: "Performance measures in the absence of outliers for the testing set",
            rows: &METRIC_ROWS,
            columns: rf_ann_columns(&["Initial", "Cleaned"], &[smote, smote.outliers(OutlierMode::Drop)]),
            side: Side::Test,
            cv_roc: false,
        },
    ];
    // Tables 3-4 precede the selection tables, the rest follow them
    let (comparison, rest): (Vec<ReportTable>, Vec<ReportTable>) = tables
        .into_iter()
        .filter_map(|s| metric_table(m, s))
        .partition(|t| t.tag == "Table 3" || t.tag == "Table 4");
    out.extend(comparison);
    out.extend(importance_table(m));
    out.extend(rfe_table(m));
    out.extend(four_variable_table(m));
    out.extend(rest);
    out.extend(tuning_table(m));
    out
}

// ---------------------------------------------------------------------------
// emission

fn write(path: &Path, contents: &str) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Write the manifest, report tables in each requested format, figure data,
/// and optionally fitted models and timings. Returns the files written.
pub fn emit_report(
    manifest: &RunManifest,
    formats: &[ReportFormat],
    out: &Path,
    models: Option<&BTreeMap<String, FittedPipeline>>,
    timings: Option<&Timings>,
) -> Result<Vec<PathBuf>> {
    let mut written = vec![write(&out.join("manifest.json"), &manifest.to_json()?)?];
    let tables = build_tables(manifest);
    if formats.contains(&ReportFormat::Csv) {
        for t in &tables {
            written.push(write(&out.join("tables").join(format!("{}.csv", t.name)), &t.to_csv()?)?);
        }
    }
    if formats.contains(&ReportFormat::Json) {
        let rounded: Vec<ReportTable> = tables.iter().map(ReportTable::rounded).collect();
        written.push(write(&out.join("report.json"), &serde_json::to_string_pretty(&rounded)?)?);
    }
    if formats.contains(&ReportFormat::Markdown) {
        let mut md = String::from("# Churn classification report\n\n");
        for t in &tables {
            md.push_str(&t.to_markdown());
            md.push('\n');
        }
        written.push(write(&out.join("report.md"), &md)?);
    }
    for (name, fig) in &manifest.profile.figures {
        let mut buf = Vec::new();
        fig.write_csv(&mut buf)?;
        let s = String::from_utf8(buf).expect("csv output is utf-8");
        written.push(write(&out.join("figures").join(format!("{name}.csv")), &s)?);
    }
    if let Some(models) = models {
        for (id, model) in models {
            written.push(write(&out.join("models").join(format!("{id}.json")), &model.to_json()?)?);
        }
    }
    if let Some(t) = timings {
        written.push(write(&out.join("timings.json"), &serde_json::to_string_pretty(t)?)?);
    }
    Ok(written)
}
