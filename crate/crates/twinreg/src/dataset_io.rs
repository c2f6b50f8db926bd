//! Dataset sources: the synthetic generators and numeric CSV files.
//!
//! CSV layout: comma separated, one header row, dot decimals. The target is
//! the last column unless one is named.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twinreg_core::data::{self, Dataset, FeatureKind, RclRanges, TfRanges, WsbFormula, WsbRanges};
use twinreg_core::Matrix;

use crate::{Error, Result};

fn default_tf_n() -> usize {
    data::TF_DEFAULT_N
}
fn default_rcl_n() -> usize {
    data::RCL_DEFAULT_N
}
fn default_wsb_n() -> usize {
    data::WSB_DEFAULT_N
}
fn default_noise() -> f64 {
    data::DEFAULT_NOISE_STD
}

/// Where an experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    Tf {
        #[serde(default = "default_tf_n")]
        n: usize,
        /// Generator seed; the experiment's base seed when absent.
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        ranges: TfRanges,
    },
    Rcl {
        #[serde(default = "default_rcl_n")]
        n: usize,
        #[serde(default = "default_noise")]
        noise_std: f64,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        ranges: RclRanges,
    },
    Wsb {
        #[serde(default = "default_wsb_n")]
        n: usize,
        #[serde(default = "default_noise")]
        noise_std: f64,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        ranges: WsbRanges,
        #[serde(default)]
        formula: WsbFormula,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        target: Option<String>,
    },
}

impl DatasetSpec {
    /// `tf`, `rcl` or `wsb` with default sizes and noise, or a path to a CSV file.
    pub fn from_name(name: &str) -> Self {
        match name.to_ascii_lowercase().as_str() {
            "tf" => DatasetSpec::Tf {
                n: default_tf_n(),
                seed: None,
                ranges: TfRanges::default(),
            },
            "rcl" => DatasetSpec::Rcl {
                n: default_rcl_n(),
                noise_std: default_noise(),
                seed: None,
                ranges: RclRanges::default(),
            },
            "wsb" => DatasetSpec::Wsb {
                n: default_wsb_n(),
                noise_std: default_noise(),
                seed: None,
                ranges: WsbRanges::default(),
                formula: WsbFormula::default(),
            },
            _ => DatasetSpec::Csv {
                path: PathBuf::from(name),
                target: None,
            },
        }
    }

    /// Fills in the generator seed so the description fully determines the data.
    pub fn resolved(mut self, fallback_seed: u64) -> Self {
        match &mut self {
            DatasetSpec::Tf { seed, .. }
            | DatasetSpec::Rcl { seed, .. }
            | DatasetSpec::Wsb { seed, .. } => {
                seed.get_or_insert(fallback_seed);
            }
            DatasetSpec::Csv { .. } => {}
        }
        self
    }

    pub fn load(&self, fallback_seed: u64) -> Result<Dataset> {
        Ok(match self {
            DatasetSpec::Tf { n, seed, ranges } => {
                data::gen_tf_with(*n, seed.unwrap_or(fallback_seed), ranges)?
            }
            DatasetSpec::Rcl {
                n,
                noise_std,
                seed,
                ranges,
            } => data::gen_rcl_with(*n, seed.unwrap_or(fallback_seed), *noise_std, ranges)?,
            DatasetSpec::Wsb {
                n,
                noise_std,
                seed,
                ranges,
                formula,
            } => data::gen_wsb_with(
                *n,
                seed.unwrap_or(fallback_seed),
                *noise_std,
                ranges,
                *formula,
            )?,
            DatasetSpec::Csv { path, target } => load_csv(path, target.as_deref())?,
        })
    }
}

/// Reads a rectangular numeric table. Rows are numbered from 1 after the header.
pub fn load_csv(path: impl AsRef<Path>, target: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 2 {
        return Err(Error::format(
            path,
            "need at least one feature and one target column",
        ));
    }
    let target_col = match target {
        None => header.len() - 1,
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format(path, format!("no column named {name:?}")))?,
    };

    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::format(path, format!("row {row}: {e}")))?;
        if record.len() != header.len() {
            return Err(Error::format(
                path,
                format!(
                    "row {row}: expected {} fields, found {}",
                    header.len(),
                    record.len()
                ),
            ));
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::format(
                    path,
                    format!("row {row}, column {:?}: not a number: {cell:?}", header[j]),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::format(
                    path,
                    format!("row {row}, column {:?}: non-finite value", header[j]),
                ));
            }
            if j == target_col {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::format(path, "table has no data rows"));
    }
    let d = header.len() - 1;
    let x = Matrix::from_vec(y.len(), d, x)?;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target_col)
        .map(|(_, h)| h.clone())
        .collect();
    let kinds = (0..d)
        .map(|j| {
            if x.iter_rows().all(|r| r[j].fract() == 0.0) {
                FeatureKind::Discrete
            } else {
                FeatureKind::Continuous
            }
        })
        .collect();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".to_string());
    Ok(Dataset::new(name, x, y, names, kinds)?)
}

/// Writes features then the target as `y`. Values use the shortest
/// representation that parses back to the same bits.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = ds.feature_names.clone();
    header.push("y".to_string());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (row, y) in ds.x.iter_rows().zip(&ds.y) {
        let rec: Vec<String> = row
            .iter()
            .chain(std::iter::once(y))
            .map(|v| v.to_string())
            .collect();
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

/// Sidecar recording how a generated CSV was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedMetadata {
    pub dataset: String,
    pub rows: usize,
    pub features: Vec<String>,
    pub source: DatasetSpec,
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Generates the dataset described by `spec` and writes `<path>` plus `<path>.json`.
pub fn export_generated(spec: &DatasetSpec, seed: u64, path: impl AsRef<Path>) -> Result<Dataset> {
    if matches!(spec, DatasetSpec::Csv { .. }) {
        return Err(Error::Config(
            "only synthetic datasets can be generated".into(),
        ));
    }
    let path = path.as_ref();
    let spec = spec.clone().resolved(seed);
    let ds = spec.load(seed)?;
    write_csv(&ds, path)?;
    let meta = GeneratedMetadata {
        dataset: ds.name.clone(),
        rows: ds.len(),
        features: ds.feature_names.clone(),
        source: spec,
    };
    write_json(&meta, sidecar_path(path))?;
    Ok(ds)
}

/// `data.csv` -> `data.csv.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}
