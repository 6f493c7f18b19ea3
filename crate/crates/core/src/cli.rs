//! The `churn` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, FeatureMode, OutlierMode, ReportFormat};
use crate::error::{Error, Result};
use crate::experiments::{load_churn_csv, run_experiment, run_profile, with_threads, Experiment, RunKey, RunManifest, Stage};
use crate::metrics::{evaluate_scores, MetricSet};
use crate::models::{Family, FittedPipeline};
use crate::preprocess::{dummy_encode, split_indices, EncoderSpec, SplitSpec};
use crate::report::{build_tables, emit_report, format_number, profile_tables, ReportTable};
use crate::resample::ResampleKind;

#[derive(Debug, Parser)]
#[command(name = "churn", version, about = "Bank customer churn classification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Churn CSV file (overrides `data` in the config)
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// TOML configuration file; every key is optional
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed from which every random stream is derived
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core; never changes results
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Log progress to stderr
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct RunSelection {
    /// Model family: gnb, knn, svm, cart, rf or ann
    #[arg(long)]
    family: Option<Family>,
    /// Predictor set: all, top5 or four
    #[arg(long)]
    features: Option<FeatureMode>,
    /// Training-set balancing: none, under or smote
    #[arg(long)]
    resample: Option<ResampleKind>,
    /// Age outliers of the Stayed class: keep or drop
    #[arg(long)]
    outliers: Option<OutlierMode>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print descriptive statistics and class counts
    Inspect {
        #[command(flatten)]
        common: Common,
    },
    /// Correlations, chi-square tests, outlier screen and figure data
    Eda {
        #[command(flatten)]
        common: Common,
        /// Only test independence of this predictor and the outcome
        #[arg(long, value_name = "VARIABLE")]
        chi2: Option<String>,
    },
    /// Cross-validated grid search for one configuration
    Tune {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunSelection,
    },
    /// Fit one configuration and write the model and its evaluation
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunSelection,
        /// Use fixed hyperparameters instead of searching the grid
        #[arg(long)]
        no_tune: bool,
    },
    /// Score a saved model on a dataset
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Model file written by `train`
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Rows to score: all, or the held-out partition of the seeded split
        #[arg(long, default_value = "all", value_parser = ["all", "test"])]
        split: String,
    },
    /// Run experiment stages and write the manifest and report
    Experiment {
        #[command(flatten)]
        common: Common,
        /// compare, select, balance, outliers or all (comma separated)
        #[arg(long, value_delimiter = ',', default_value = "all")]
        stage: Vec<String>,
        /// Report formats: csv, json, markdown (comma separated)
        #[arg(long, value_delimiter = ',')]
        format: Vec<ReportFormat>,
    },
    /// Rebuild report files from a saved manifest
    Report {
        #[command(flatten)]
        common: Common,
        /// Manifest to read (default: OUT/manifest.json)
        #[arg(long, value_name = "FILE")]
        manifest: Option<PathBuf>,
        /// Report formats: csv, json, markdown (comma separated)
        #[arg(long, value_delimiter = ',')]
        format: Vec<ReportFormat>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Inspect { common }
            | Command::Eda { common, .. }
            | Command::Tune { common, .. }
            | Command::Train { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Experiment { common, .. }
            | Command::Report { common, .. } => common,
        }
    }
}

/// Parse `args` (program name first), run, and return the exit code:
/// 0 on success, 1 on a pipeline error, 2 on a usage error.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = if cli.command.common().verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &common.data {
        cfg.data = Some(d.clone());
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_data(cfg: &ExperimentConfig) -> Result<crate::data::Dataset> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("no dataset given; pass --data or set `data` in the config".into()))?;
    load_churn_csv(path)
}

fn print_table(out: &mut impl Write, t: &ReportTable) -> Result<()> {
    write!(out, "{}", t.to_markdown()).map_err(|e| Error::io("<stdout>", e))?;
    writeln!(out).map_err(|e| Error::io("<stdout>", e))
}

fn say(out: &mut impl Write, line: &str) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

/// Compact significant-figure rendering for test statistics.
fn significant(x: f64, digits: i32) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (digits - 1 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

fn p_value(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.3e}")
    } else {
        format!("{p:.4}")
    }
}

fn run_key(cfg: &ExperimentConfig, sel: &RunSelection) -> RunKey {
    RunKey {
        family: sel.family.unwrap_or(cfg.train.family),
        features: sel.features.unwrap_or(cfg.train.features),
        resample: sel.resample.unwrap_or(cfg.train.resample),
        outliers: sel.outliers.unwrap_or(cfg.train.outliers),
    }
}

fn metrics_line(m: &MetricSet) -> String {
    let f = |x: Option<f64>| x.map(format_number).unwrap_or_else(|| "NA".into());
    format!(
        "accuracy {}  kappa {}  precision {}  recall {}  F1 {}  ROC {}",
        format_number(m.accuracy),
        f(m.kappa),
        f(m.precision),
        f(m.recall),
        f(m.f1),
        f(m.roc_auc)
    )
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn parse_stages(raw: &[String]) -> Result<Vec<Stage>> {
    let mut stages = Vec::new();
    for s in raw {
        if s == "all" {
            stages.extend(Stage::ALL);
        } else {
            stages.push(s.parse()?);
        }
    }
    Ok(stages)
}

fn dispatch(command: Command) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let common = command.common();
    let cfg = load_config(common)?;
    match &command {
        Command::Inspect { .. } => {
            let ds = load_data(&cfg)?;
            let profile = run_profile(&ds, cfg.quartile_method)?;
            let (stayed, left) = profile.class_counts;
            say(&mut out, &format!("{} rows: Stayed {stayed}, Left {left}\n", profile.rows))?;
            print_table(&mut out, &profile_tables(&profile)[0])?;
        }
        Command::Eda { chi2, .. } => {
            let ds = load_data(&cfg)?;
            if let Some(var) = chi2 {
                let r = crate::stats::chi_square_independence(&ds, var, ds.outcome_name())?;
                say(
                    &mut out,
                    &format!(
                        "{var}: X-squared = {}, df = {}, p-value = {}",
                        significant(r.statistic, 5),
                        r.df,
                        p_value(r.p_value)
                    ),
                )?;
                return Ok(());
            }
            let profile = run_profile(&ds, cfg.quartile_method)?;
            for t in profile_tables(&profile).iter().skip(1) {
                print_table(&mut out, t)?;
            }
            if common.out.is_some() {
                for (name, fig) in &profile.figures {
                    let path = cfg.out.join("figures").join(format!("{name}.csv"));
                    let mut buf = Vec::new();
                    fig.write_csv(&mut buf)?;
                    write_file(&path, &String::from_utf8(buf).expect("csv output is utf-8"))?;
                }
                say(&mut out, &format!("figure data written to {}", cfg.out.join("figures").display()))?;
            }
        }
        Command::Tune { run, .. } => {
            let ds = load_data(&cfg)?;
            let key = run_key(&cfg, run);
            let (result, _) = with_threads(cfg.threads, || Experiment::new(&ds, &cfg)?.run(key, true))??;
            let tuning = result.tuning.as_ref().expect("tuned run has a summary");
            say(&mut out, &format!("{}: best {:?}", key.id(), tuning.best))?;
            for (pos, &c) in tuning.ranking.iter().enumerate() {
                let cell = &tuning.cells[c];
                let cv = cell.cv.as_ref().expect("ranked cells succeeded");
                say(
                    &mut out,
                    &format!(
                        "{:>3}  {:?}  accuracy {} (sd {})  kappa {}  ROC {}",
                        pos + 1,
                        cell.params,
                        format_number(cv.mean_accuracy()),
                        format_number(cv.sd_accuracy()),
                        format_number(cv.mean_kappa()),
                        format_number(cv.mean_roc_auc())
                    ),
                )?;
            }
            if common.out.is_some() {
                write_file(&cfg.out.join("tuning.json"), &serde_json::to_string_pretty(tuning)?)?;
            }
        }
        Command::Train { run, no_tune, .. } => {
            let ds = load_data(&cfg)?;
            let key = run_key(&cfg, run);
            let tune = !no_tune && cfg.is_tuned(key.family) && cfg.train.tune;
            let (result, model) = with_threads(cfg.threads, || Experiment::new(&ds, &cfg)?.run(key, tune))??;
            write_file(&cfg.out.join("model.json"), &model.to_json()?)?;
            write_file(&cfg.out.join("run.json"), &serde_json::to_string_pretty(&result)?)?;
            say(&mut out, &format!("{} {}", key.id(), result.spec.describe()))?;
            say(&mut out, &format!("train  {}", metrics_line(&result.train)))?;
            say(&mut out, &format!("test   {}", metrics_line(&result.test)))?;
            say(&mut out, &format!("model written to {}", cfg.out.join("model.json").display()))?;
        }
        Command::Evaluate { model, split, .. } => {
            let ds = load_data(&cfg)?;
            let text = std::fs::read_to_string(model).map_err(|e| Error::io(model, e))?;
            let pipeline = FittedPipeline::from_json(&text)?;
            let mut table = dummy_encode(&ds, &EncoderSpec::churn())?;
            if split == "test" {
                let spec = SplitSpec {
                    train_fraction: cfg.split.train_fraction,
                    seed: crate::experiments::Seeds::from_master(cfg.seed).split,
                    stratified: cfg.split.stratified,
                };
                table = table.select_rows(&split_indices(table.labels(), &spec)?.test);
            }
            let table = table.select_columns(&pipeline.input.columns)?;
            let m = evaluate_scores(table.labels(), &pipeline.predict_scores(&table)?)?;
            say(&mut out, &format!("{} rows  {}", table.n_rows(), metrics_line(&m)))?;
        }
        Command::Experiment { stage, format, .. } => {
            let stages = parse_stages(stage)?;
            let formats = if format.is_empty() { cfg.formats.clone() } else { format.clone() };
            let ds = load_data(&cfg)?;
            let result = run_experiment(&ds, &cfg, &stages)?;
            result.manifest.audit()?;
            emit_report(&result.manifest, &formats, &cfg.out, Some(&result.models), Some(&result.timings))?;
            for (id, run) in &result.manifest.runs {
                say(&mut out, &format!("{id:<24} test {}", metrics_line(&run.test)))?;
            }
            say(&mut out, &format!("manifest written to {}", cfg.out.join("manifest.json").display()))?;
        }
        Command::Report { manifest, format, .. } => {
            let path = manifest.clone().unwrap_or_else(|| cfg.out.join("manifest.json"));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let m = RunManifest::from_json(&text)?;
            m.audit()?;
            let formats = if format.is_empty() { cfg.formats.clone() } else { format.clone() };
            let written = emit_report(&m, &formats, &cfg.out, None, None)?;
            say(&mut out, &format!("{} tables, {} files written to {}", build_tables(&m).len(), written.len(), cfg.out.display()))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_figures() {
        assert_eq!(significant(112.9207, 5), "112.92");
        assert_eq!(significant(1503.629, 5), "1503.6");
        assert_eq!(significant(0.471338, 5), "0.47134");
        assert_eq!(significant(301.2553, 5), "301.26");
    }

    #[test]
    fn stages_expand() {
        assert_eq!(parse_stages(&["all".into()]).unwrap(), Stage::ALL.to_vec());
        assert_eq!(parse_stages(&["select".into(), "compare".into()]).unwrap(), vec![Stage::Select, Stage::Compare]);
        assert!(parse_stages(&["tables".into()]).is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_cli(["churn", "frobnicate"]), 2);
        assert_eq!(run_cli(["churn", "inspect", "--bogus"]), 2);
        assert_eq!(run_cli(["churn", "experiment", "--threads", "many"]), 2);
    }
}
