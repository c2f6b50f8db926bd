//! Result tables on disk and the human-readable report.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use twinreg_core::bench::{format_setting, parse_setting, AggregateRow, Method, ResultRow};

use crate::dataset_io::{csv_error, sidecar_path, write_json};
use crate::{Error, Result};

pub const ROW_HEADER: [&str; 8] = [
    "dataset",
    "method",
    "k",
    "split_seed",
    "test_rmse",
    "train_s",
    "infer_s",
    "status",
];

pub const AGGREGATE_HEADER: [&str; 8] = [
    "dataset",
    "method",
    "k",
    "mean_rmse",
    "sem_rmse",
    "mean_train_s",
    "mean_infer_s",
    "gain_vs_tnnr",
];

/// Columns that hold wall-clock measurements and vary between identical runs.
pub const TIMING_COLUMNS: [&str; 4] = ["train_s", "infer_s", "mean_train_s", "mean_infer_s"];

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).map_err(|e| csv_error(path, e))
}

fn check_header(path: &Path, r: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let got = r.headers().map_err(|e| csv_error(path, e))?;
    if got.iter().ne(expected.iter().copied()) {
        return Err(Error::format(path, format!("unexpected header {got:?}")));
    }
    Ok(())
}

fn parse_f64(path: &Path, line: usize, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::format(path, format!("row {line}: not a number: {s:?}")))
}

fn parse_method(path: &Path, line: usize, s: &str) -> Result<Method> {
    s.parse()
        .map_err(|e| Error::format(path, format!("row {line}: {e}")))
}

pub fn write_rows(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(ROW_HEADER).map_err(|e| csv_error(path, e))?;
    for r in rows {
        let status = r.failure.clone().unwrap_or_else(|| "ok".to_string());
        w.write_record([
            r.dataset.clone(),
            r.method.to_string(),
            format_setting(&r.setting),
            r.split_seed.to_string(),
            r.test_rmse.to_string(),
            r.train_seconds.to_string(),
            r.inference_seconds.to_string(),
            status,
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let mut r = reader(path)?;
    check_header(path, &mut r, &ROW_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let status = &rec[7];
        out.push(ResultRow {
            dataset: rec[0].to_string(),
            method: parse_method(path, line, &rec[1])?,
            setting: parse_setting(&rec[2])
                .map_err(|e| Error::format(path, format!("row {line}: {e}")))?,
            split_seed: rec[3]
                .parse()
                .map_err(|_| Error::format(path, format!("row {line}: bad split seed")))?,
            test_rmse: parse_f64(path, line, &rec[4])?,
            train_seconds: parse_f64(path, line, &rec[5])?,
            inference_seconds: parse_f64(path, line, &rec[6])?,
            failure: (status != "ok").then(|| status.to_string()),
        });
    }
    Ok(out)
}

pub fn write_aggregates(rows: &[AggregateRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(AGGREGATE_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.method.to_string(),
            format_setting(&r.setting),
            r.mean_rmse.to_string(),
            r.sem_rmse.to_string(),
            r.mean_train_seconds.to_string(),
            r.mean_inference_seconds.to_string(),
            r.gain_vs_tnnr.map(|g| g.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_aggregates(path: impl AsRef<Path>) -> Result<Vec<AggregateRow>> {
    let path = path.as_ref();
    let mut r = reader(path)?;
    check_header(path, &mut r, &AGGREGATE_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| csv_error(path, e))?;
        out.push(AggregateRow {
            dataset: rec[0].to_string(),
            method: parse_method(path, line, &rec[1])?,
            setting: parse_setting(&rec[2])
                .map_err(|e| Error::format(path, format!("row {line}: {e}")))?,
            mean_rmse: parse_f64(path, line, &rec[3])?,
            sem_rmse: parse_f64(path, line, &rec[4])?,
            mean_train_seconds: parse_f64(path, line, &rec[5])?,
            mean_inference_seconds: parse_f64(path, line, &rec[6])?,
            gain_vs_tnnr: match &rec[7] {
                "" => None,
                g => Some(parse_f64(path, line, g)?),
            },
        });
    }
    Ok(out)
}

/// Writes the aggregate CSV and `<path>.json` echoing `config`.
pub fn emit_results<C: Serialize>(
    rows: &[AggregateRow],
    path: impl AsRef<Path>,
    config: &C,
) -> Result<()> {
    let path = path.as_ref();
    write_aggregates(rows, path)?;
    write_json(config, sidecar_path(path))
}

/// CSV text with the timing columns removed, for run-to-run comparisons.
pub fn strip_timing_columns(csv_text: &str) -> String {
    let mut lines = csv_text.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let keep: Vec<bool> = header
        .split(',')
        .map(|h| !TIMING_COLUMNS.contains(&h))
        .collect();
    let filter = |line: &str| {
        line.split(',')
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(c, _)| c)
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut out = filter(header);
    for line in lines {
        out.push('\n');
        out.push_str(&filter(line));
    }
    out
}

/// Fixed-width table: RMSE as `mean ± sem`, gain in percent.
pub fn format_report(rows: &[AggregateRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<20} {:>5}  {:>25}  {:>9}  {:>10}  {:>10}",
        "dataset", "method", "k", "test RMSE (mean ± s.e.)", "gain", "train [s]", "infer [s]"
    );
    for r in rows {
        let gain = r
            .gain_vs_tnnr
            .map(|g| format!("{:.2}%", 100.0 * g))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<10} {:<20} {:>5}  {:>25}  {:>9}  {:>10.3}  {:>10.3}",
            r.dataset,
            r.method.name(),
            format_setting(&r.setting),
            format!("{:.4} ± {:.4}", r.mean_rmse, r.sem_rmse),
            gain,
            r.mean_train_seconds,
            r.mean_inference_seconds,
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use twinreg_core::bench::aggregate;
    use twinreg_core::Neighbors;

    fn rows() -> Vec<ResultRow> {
        let mut v = Vec::new();
        for (seed, a, b) in [(0, 0.1, 0.07), (1, 0.3, 1.0 / 3.0)] {
            v.push(ResultRow {
                dataset: "TF".into(),
                method: Method::Tnnr,
                setting: None,
                split_seed: seed,
                test_rmse: a,
                train_seconds: 1.5,
                inference_seconds: 0.25,
                failure: None,
            });
            v.push(ResultRow {
                dataset: "TF".into(),
                method: Method::NntnnrInfer,
                setting: Some(Neighbors::Count(16)),
                split_seed: seed,
                test_rmse: b,
                train_seconds: 1.5,
                inference_seconds: 0.125,
                failure: None,
            });
        }
        v.push(ResultRow {
            dataset: "TF".into(),
            method: Method::Ann,
            setting: None,
            split_seed: 0,
            test_rmse: f64::NAN,
            train_seconds: 0.0,
            inference_seconds: 0.0,
            failure: Some("training diverged at epoch 3: non-finite loss".into()),
        });
        v
    }

    #[test]
    fn rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let rows = rows();
        write_rows(&rows, &path).unwrap();
        let back = read_rows(&path).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in back.iter().zip(&rows) {
            assert_eq!(a.failure, b.failure);
            assert_eq!(a.test_rmse.to_bits(), b.test_rmse.to_bits());
            assert_eq!(
                (a.method, a.setting, a.split_seed),
                (b.method, b.setting, b.split_seed)
            );
        }
    }

    #[test]
    fn aggregates_round_trip_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agg.csv");
        let agg = aggregate(&rows()[..4]).unwrap().rows;
        emit_results(&agg, &path, &serde_json::json!({"base_seed": 42})).unwrap();
        assert_eq!(read_aggregates(&path).unwrap(), agg);
        let side: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(side["base_seed"], 42);
    }

    #[test]
    fn empty_aggregates_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agg.csv");
        write_aggregates(&[], &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "dataset,method,k,mean_rmse,sem_rmse,mean_train_s,mean_infer_s,gain_vs_tnnr\n"
        );
        assert!(read_aggregates(&path).unwrap().is_empty());
    }

    #[test]
    fn timing_columns_are_stripped() {
        let text = "dataset,method,k,split_seed,test_rmse,train_s,infer_s,status\nTF,KNN,1,0,0.5,0.1,0.2,ok";
        assert_eq!(
            strip_timing_columns(text),
            "dataset,method,k,split_seed,test_rmse,status\nTF,KNN,1,0,0.5,ok"
        );
    }

    #[test]
    fn report_lists_every_row() {
        let agg = aggregate(&rows()[..4]).unwrap().rows;
        let text = format_report(&agg);
        assert_eq!(text.lines().count(), 1 + agg.len());
        assert!(text.contains("NNTNNR_INFER"));
        assert!(text.contains('%'));
    }
}
