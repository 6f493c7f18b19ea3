mod common;

use std::path::Path;

use churn_core::config::ReportFormat;
use churn_core::experiments::{run_experiment, RunKey, RunManifest, Stage};
use churn_core::models::Family;
use churn_core::report::{build_tables, emit_report, Cell, ReportTable, COMPARISON_ROWS};

const ALL_FORMATS: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown];

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn manifest() -> (RunManifest, churn_core::experiments::ExperimentOutput) {
    let ds = common::dataset(800, 8);
    let out = run_experiment(&ds, &common::small_config(), &Stage::ALL).unwrap();
    (out.manifest.clone(), out)
}

#[test]
fn emits_every_table_and_the_output_layout() {
    let (m, out) = manifest();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&m, &ALL_FORMATS, dir.path(), Some(&out.models), Some(&out.timings)).unwrap();
    for f in ["manifest.json", "report.json", "report.md", "timings.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    for n in 1..=11 {
        let found = std::fs::read_dir(dir.path().join("tables"))
            .unwrap()
            .any(|e| e.unwrap().file_name().to_string_lossy().starts_with(&format!("table{n:02}_")));
        assert!(found, "no csv for table {n}");
    }
    assert_eq!(std::fs::read_dir(dir.path().join("figures")).unwrap().count(), 11);
    assert_eq!(std::fs::read_dir(dir.path().join("models")).unwrap().count(), m.runs.len());
    // saved models load back
    let model = churn_core::models::FittedPipeline::from_json(&read(&dir.path().join("models/ann-all-none-keep.json"))).unwrap();
    assert_eq!(model.family(), Family::Ann);

    let md = read(&dir.path().join("report.md"));
    for n in 1..=11 {
        assert!(md.contains(&format!("## Table {n}. ")), "markdown lacks Table {n}");
    }
}

#[test]
fn table4_shape_and_values() {
    let (m, _) = manifest();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&m, &[ReportFormat::Csv], dir.path(), None, None).unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join("tables/table04_test.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    assert_eq!(header.len(), 7);
    assert_eq!(&header[1], "Naive Bayes");
    assert_eq!(&header[6], "ANN");
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    let labels: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(labels, COMPARISON_ROWS);
    // three decimals, matching the manifest
    let ann = m.run(&RunKey::new(Family::Ann)).unwrap();
    assert_eq!(&rows[1][6], format!("{:.3}", ann.test.accuracy));
    for r in &rows {
        for cell in r.iter().skip(1) {
            assert!(cell == "NA" || cell.split('.').nth(1).is_some_and(|d| d.len() == 3), "{cell}");
        }
    }
}

#[test]
fn json_report_is_self_consistent() {
    let (m, _) = manifest();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&m, &[ReportFormat::Json], dir.path(), None, None).unwrap();
    let tables: Vec<ReportTable> = serde_json::from_str(&read(&dir.path().join("report.json"))).unwrap();
    let mut checked = 0;
    for t in tables.iter().filter(|t| t.rows.iter().any(|r| matches!(&r[0], Some(Cell::Text(s)) if s == "F1"))) {
        for col in t.header.iter().skip(1) {
            let (Some(p), Some(r), Some(f1)) = (t.number("Precision", col), t.number("Recall", col), t.number("F1", col))
            else {
                continue;
            };
            // cells are rounded to three decimals
            assert!((2.0 * p * r / (p + r) - f1).abs() < 2e-3, "{} {col}: {p} {r} {f1}", t.tag);
            checked += 1;
        }
    }
    assert!(checked >= 30, "only {checked} F1 cells checked");
}

#[test]
fn report_rebuilds_identically_from_the_manifest() {
    let (m, _) = manifest();
    let a = tempfile::tempdir().unwrap();
    emit_report(&m, &ALL_FORMATS, a.path(), None, None).unwrap();
    let reread = RunManifest::from_json(&read(&a.path().join("manifest.json"))).unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_report(&reread, &ALL_FORMATS, b.path(), None, None).unwrap();
    for f in ["manifest.json", "report.json", "report.md", "tables/table09_balance_test.csv"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
    assert_eq!(build_tables(&m), build_tables(&reread));
}

#[test]
fn unwritable_destination_is_an_error() {
    let (m, _) = manifest();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert!(emit_report(&m, &ALL_FORMATS, &blocker.join("out"), None, None).is_err());
}
