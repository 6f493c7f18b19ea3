mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn churn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_churn")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        common::dataset(700, 21).save_csv(&dir.path().join("bank.csv")).unwrap();
        std::fs::write(dir.path().join("small.toml"), common::small_config().to_toml().unwrap()).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

const COMMON_FLAGS: [&str; 6] = ["--data", "--config", "--seed", "--out", "--threads", "--verbose"];

#[test]
fn every_subcommand_documents_its_flags() {
    let specific: [(&str, &[&str]); 7] = [
        ("inspect", &[]),
        ("eda", &["--chi2"]),
        ("tune", &["--family", "--features", "--resample", "--outliers"]),
        ("train", &["--family", "--features", "--resample", "--outliers", "--no-tune"]),
        ("evaluate", &["--model", "--split"]),
        ("experiment", &["--stage", "--format"]),
        ("report", &["--manifest", "--format"]),
    ];
    for (sub, flags) in specific {
        let o = churn(&[sub, "--help"]);
        assert!(o.status.success(), "{sub} --help failed");
        let help = stdout(&o);
        for flag in COMMON_FLAGS.iter().chain(flags.iter()) {
            assert!(help.contains(flag), "`{sub} --help` does not mention {flag}");
        }
    }
    let top = stdout(&churn(&["--help"]));
    for sub in ["inspect", "eda", "tune", "train", "evaluate", "experiment", "report"] {
        assert!(top.contains(sub), "top-level help lacks {sub}");
    }
}

#[test]
fn usage_errors_exit_2_and_pipeline_errors_exit_1() {
    assert_eq!(churn(&["nonsense"]).status.code(), Some(2));
    assert_eq!(churn(&["inspect", "--nope"]).status.code(), Some(2));
    assert_eq!(churn(&["experiment", "--format", "pdf"]).status.code(), Some(2));
    assert_eq!(churn(&[]).status.code(), Some(2));

    let missing = churn(&["inspect"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--data"));
    let absent = churn(&["inspect", "--data", "/definitely/not/here.csv"]);
    assert_eq!(absent.status.code(), Some(1));
    assert!(absent.stdout.is_empty());
}

#[test]
fn inspect_and_eda_print_summaries() {
    let f = Fixture::new();
    let o = churn(&["inspect", "--data", &f.arg("bank.csv")]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.starts_with("700 rows: Stayed "));
    assert!(s.contains("Table 1") && s.contains("| CreditScore |"));

    let o = churn(&["eda", "--data", &f.arg("bank.csv"), "--chi2", "Gender"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.starts_with("Gender: X-squared = ") && s.contains(", df = 1, p-value = "), "{s}");

    let o = churn(&["eda", "--data", &f.arg("bank.csv"), "--chi2", "Surname"]);
    assert_eq!(o.status.code(), Some(1));

    let o = churn(&["eda", "--data", &f.arg("bank.csv"), "--out", &f.arg("eda")]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("Chi-square"));
    assert!(f.path("eda/figures/fig02_age.csv").is_file());
}

#[test]
fn experiment_twice_gives_byte_identical_manifests() {
    let f = Fixture::new();
    let run = |out: &str, threads: &str| {
        let o = churn(&[
            "experiment", "--stage", "compare,balance", "--data", &f.arg("bank.csv"), "--config", &f.arg("small.toml"),
            "--seed", "42", "--out", &f.arg(out), "--threads", threads,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(f.path(out).join("manifest.json")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "2");
    assert!(a == b, "manifests differ");
    assert!(f.path("a/tables/table04_test.csv").is_file());
    assert!(f.path("a/tables/table09_balance_test.csv").is_file());
    // stages that did not run leave their tables out
    assert!(!f.path("a/tables/table11_outliers_test.csv").exists());

    // flags override the file: the seed is echoed in the manifest
    let m: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(m["config"]["seed"], 42);
    assert_eq!(m["seeds"]["master"], 42);

    // the report command rebuilds the same tables from the manifest
    let before = std::fs::read_to_string(f.path("a/tables/table08_balance_train.csv")).unwrap();
    std::fs::remove_dir_all(f.path("a/tables")).unwrap();
    let o = churn(&["report", "--out", &f.arg("a"), "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(f.path("a/tables/table08_balance_train.csv")).unwrap(), before);
}

#[test]
fn train_then_evaluate_on_the_held_out_rows() {
    let f = Fixture::new();
    let o = churn(&[
        "train", "--data", &f.arg("bank.csv"), "--config", &f.arg("small.toml"), "--family", "cart", "--features",
        "top5", "--out", &f.arg("m"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(f.path("m/run.json")).unwrap()).unwrap();
    let o = churn(&[
        "evaluate", "--data", &f.arg("bank.csv"), "--config", &f.arg("small.toml"), "--model", &f.arg("m/model.json"),
        "--split", "test",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    let acc = run["test"]["accuracy"].as_f64().unwrap();
    assert!(s.contains(&format!("accuracy {acc:.3}")), "{s}");
    assert!(s.starts_with("140 rows"), "{s}");
}

#[test]
fn tune_lists_ranked_cells() {
    let f = Fixture::new();
    let o = churn(&[
        "tune", "--data", &f.arg("bank.csv"), "--config", &f.arg("small.toml"), "--family", "knn", "--out",
        &f.arg("t"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.starts_with("knn-all-none-keep: best"));
    assert_eq!(s.lines().count(), 3);
    assert!(Path::new(&f.path("t/tuning.json")).is_file());
}
