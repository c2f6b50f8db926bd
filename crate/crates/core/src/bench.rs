//! Scoring and aggregation of benchmark runs.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;
use core::str::FromStr;

use crate::knn::Neighbors;
use crate::{Error, Result};

/// Root mean squared error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::invalid("rmse of an empty vector"));
    }
    Error::check_dim(truth.len(), pred.len())?;
    let ss: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(libm::sqrt(ss / pred.len() as f64))
}

/// Method families compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    #[cfg_attr(feature = "serde", serde(rename = "KNN"))]
    Knn,
    #[cfg_attr(feature = "serde", serde(rename = "ANN"))]
    Ann,
    #[cfg_attr(feature = "serde", serde(rename = "ANN_ENSEMBLE"))]
    AnnEnsemble,
    #[cfg_attr(feature = "serde", serde(rename = "TNNR"))]
    Tnnr,
    #[cfg_attr(feature = "serde", serde(rename = "NNTNNR_INFER"))]
    NntnnrInfer,
    #[cfg_attr(feature = "serde", serde(rename = "NNTNNR_TRAIN_INFER"))]
    NntnnrTrainInfer,
    #[cfg_attr(feature = "serde", serde(rename = "TNNR_RANDOM_ANCHORS"))]
    TnnrRandomAnchors,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Knn,
        Method::Ann,
        Method::AnnEnsemble,
        Method::Tnnr,
        Method::NntnnrInfer,
        Method::NntnnrTrainInfer,
        Method::TnnrRandomAnchors,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Knn => "KNN",
            Method::Ann => "ANN",
            Method::AnnEnsemble => "ANN_ENSEMBLE",
            Method::Tnnr => "TNNR",
            Method::NntnnrInfer => "NNTNNR_INFER",
            Method::NntnnrTrainInfer => "NNTNNR_TRAIN_INFER",
            Method::TnnrRandomAnchors => "TNNR_RANDOM_ANCHORS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

/// The k (neighbors), m (anchors) or ensemble size of a row; `None` when not applicable.
pub type Setting = Option<Neighbors>;

pub fn format_setting(s: &Setting) -> String {
    match s {
        None => String::from("N/A"),
        Some(n) => format!("{n}"),
    }
}

pub fn parse_setting(s: &str) -> Result<Setting> {
    if s.trim().eq_ignore_ascii_case("n/a") || s.trim().is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

/// One method evaluated on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub method: Method,
    pub setting: Setting,
    pub split_seed: u64,
    /// NaN when the run failed.
    pub test_rmse: f64,
    pub train_seconds: f64,
    pub inference_seconds: f64,
    /// Failure marker, e.g. a divergence message; `None` on success.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub dataset: String,
    pub method: Method,
    pub setting: Setting,
    pub mean_rmse: f64,
    /// Standard error of the mean over splits.
    pub sem_rmse: f64,
    pub mean_train_seconds: f64,
    pub mean_inference_seconds: f64,
    /// `1 - mean_rmse / mean_rmse(TNNR)` on the same dataset.
    pub gain_vs_tnnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Aggregation {
    pub rows: Vec<AggregateRow>,
    pub warnings: Vec<String>,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation over `√n`; 0 for a single value.
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
    libm::sqrt(var) / libm::sqrt(n as f64)
}

pub fn gain(rmse: f64, baseline: f64) -> f64 {
    1.0 - rmse / baseline
}

/// Groups rows by `(dataset, method, setting)`, sorted by that key.
pub fn aggregate(rows: &[ResultRow]) -> Result<Aggregation> {
    if rows.is_empty() {
        return Err(Error::invalid("no rows to aggregate"));
    }
    let mut groups: BTreeMap<(&str, Method, Setting), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.dataset.as_str(), r.method, r.setting))
            .or_default()
            .push(r);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((dataset, method, setting), members) in &groups {
        let rmses: Vec<f64> = members.iter().map(|r| r.test_rmse).collect();
        let train: Vec<f64> = members.iter().map(|r| r.train_seconds).collect();
        let infer: Vec<f64> = members.iter().map(|r| r.inference_seconds).collect();
        out.push(AggregateRow {
            dataset: String::from(*dataset),
            method: *method,
            setting: *setting,
            mean_rmse: mean(&rmses),
            sem_rmse: standard_error(&rmses),
            mean_train_seconds: mean(&train),
            mean_inference_seconds: mean(&infer),
            gain_vs_tnnr: None,
        });
    }

    let mut baselines: BTreeMap<String, f64> = BTreeMap::new();
    for r in out.iter().filter(|r| r.method == Method::Tnnr) {
        baselines.insert(r.dataset.clone(), r.mean_rmse);
    }
    let mut warnings = vec![];
    for r in &mut out {
        match baselines.get(&r.dataset) {
            Some(&b) => r.gain_vs_tnnr = Some(gain(r.mean_rmse, b)),
            None => {
                let w = format!("no TNNR baseline for dataset {}; gain omitted", r.dataset);
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
        }
    }
    Ok(Aggregation {
        rows: out,
        warnings,
    })
}
