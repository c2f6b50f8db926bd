//! Experiment configuration and the per-split runner.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twinreg_core::bench::{rmse, Method, ResultRow, Setting};
use twinreg_core::data::{split, standardize, Dataset, SplitSpec};
use twinreg_core::knn::{knn_predict, KnnIndex};
use twinreg_core::nn::{fit, MlpParams, TrainConfig};
use twinreg_core::pairing::{NnPairOptions, PairMode};
use twinreg_core::twin::{train_twin, Estimator, PredictOptions, TwinConfig, TwinModel};
use twinreg_core::Neighbors;

use crate::dataset_io::DatasetSpec;
use crate::{Error, Result};

pub const DEFAULT_SPLITS: usize = 25;

/// Default neighbor sweep for k-based methods.
pub fn default_k_sweep() -> Vec<Neighbors> {
    let mut ks: Vec<Neighbors> = [1, 2, 4, 8, 16, 32, 64].map(Neighbors::Count).to_vec();
    ks.push(Neighbors::All);
    ks
}

pub fn default_ensemble_sizes() -> Vec<Neighbors> {
    [1, 2, 4, 8].map(Neighbors::Count).to_vec()
}

/// A method with its sweep values: k for the nearest-neighbor methods, the
/// anchor count m for random anchors, the ensemble size for ANN ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub method: Method,
    #[serde(
        default,
        alias = "m",
        alias = "sizes",
        skip_serializing_if = "Vec::is_empty"
    )]
    pub k: Vec<Neighbors>,
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        MethodSpec {
            method,
            k: Vec::new(),
        }
    }

    pub fn takes_values(method: Method) -> bool {
        !matches!(method, Method::Ann | Method::Tnnr)
    }

    /// Fills an empty sweep with the method's default.
    pub fn resolved(mut self, k_sweep: &[Neighbors]) -> Self {
        if self.k.is_empty() && Self::takes_values(self.method) {
            self.k = match self.method {
                Method::AnnEnsemble => default_ensemble_sizes(),
                _ => k_sweep.to_vec(),
            };
        }
        self
    }
}

fn default_splits() -> usize {
    DEFAULT_SPLITS
}
fn yes() -> bool {
    true
}
fn default_twin_train() -> TrainConfig {
    TrainConfig::twin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_splits")]
    pub n_splits: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Training settings for plain networks; `seed` is replaced per run.
    #[serde(default)]
    pub ann: TrainConfig,
    /// Training settings for twin networks; `seed` is replaced per run.
    #[serde(default = "default_twin_train")]
    pub twin: TrainConfig,
    #[serde(default)]
    pub val_pair_limit: Option<usize>,
    /// Train nearest-neighbor pairs in both orientations.
    #[serde(default = "yes")]
    pub reversed_pairs: bool,
    /// Leave a training point out of its own neighbor list.
    #[serde(default = "yes")]
    pub exclude_self: bool,
    #[serde(default)]
    pub estimator: Estimator,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec, methods: Vec<MethodSpec>) -> Self {
        ExperimentConfig {
            dataset,
            methods,
            n_splits: DEFAULT_SPLITS,
            base_seed: 0,
            ann: TrainConfig::default(),
            twin: TrainConfig::twin(),
            val_pair_limit: None,
            reversed_pairs: true,
            exclude_self: true,
            estimator: Estimator::Symmetrized,
        }
    }

    /// Reads JSON, or TOML when the extension is `.toml`.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?
        };
        Ok(cfg)
    }

    /// Fills defaults so that the echoed config fully determines the run.
    pub fn resolved(mut self) -> Self {
        self.dataset = self.dataset.resolved(self.base_seed);
        let sweep = default_k_sweep();
        self.methods = self
            .methods
            .into_iter()
            .map(|m| m.resolved(&sweep))
            .collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_splits == 0 {
            return Err(Error::Config("n_splits must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        self.ann.validate()?;
        self.twin.validate()?;
        for m in &self.methods {
            if MethodSpec::takes_values(m.method) && m.k.is_empty() {
                return Err(Error::Config(format!(
                    "{} needs a nonempty value list",
                    m.method
                )));
            }
            if !MethodSpec::takes_values(m.method) && !m.k.is_empty() {
                return Err(Error::Config(format!("{} takes no value list", m.method)));
            }
            if m.method == Method::AnnEnsemble && m.k.contains(&Neighbors::All) {
                return Err(Error::Config("ensemble size cannot be ALL".into()));
            }
        }
        Ok(())
    }

    fn nn_options(&self, k: Neighbors) -> NnPairOptions {
        NnPairOptions {
            k,
            include_reversed: self.reversed_pairs,
            exclude_self: self.exclude_self,
        }
    }

    fn predict_options(&self) -> PredictOptions {
        PredictOptions {
            estimator: self.estimator,
            ..PredictOptions::fast()
        }
    }
}

/// SplitMix64 finalizer, used to derive independent seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(split_seed: u64, stream: u64, value: u64) -> u64 {
    mix(mix(mix(split_seed) ^ stream) ^ value)
}

fn setting_code(s: Neighbors) -> u64 {
    match s {
        Neighbors::Count(k) => k as u64,
        Neighbors::All => u64::MAX,
    }
}

const STREAM_ANN: u64 = 1;
const STREAM_TWIN_ALL: u64 = 2;
const STREAM_TWIN_NN: u64 = 3;
const STREAM_ANCHORS: u64 = 4;

/// Standardized train/validation/test splits for one seed.
pub struct SplitData {
    pub seed: u64,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

pub fn prepare_split(ds: &Dataset, seed: u64) -> Result<SplitData> {
    let (tr, va, te) = split(ds, &SplitSpec::new(seed))?;
    let (train, val, test, _) = standardize(&tr, &va, &te)?;
    Ok(SplitData {
        seed,
        train,
        val,
        test,
    })
}

/// Runs every split (in parallel) and returns rows sorted by
/// `(split, method, setting)`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let config = config.clone().resolved();
    config.validate()?;
    let ds = config.dataset.load(config.base_seed)?;
    let seeds: Vec<u64> = (0..config.n_splits as u64)
        .map(|i| config.base_seed.wrapping_add(i))
        .collect();
    let per_split: Vec<Vec<ResultRow>> = seeds
        .par_iter()
        .map(|&seed| {
            let data = prepare_split(&ds, seed)?;
            run_split(&config, &ds.name, &data)
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<ResultRow> = per_split.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (a.split_seed, a.method, a.setting).cmp(&(b.split_seed, b.method, b.setting))
    });
    Ok(rows)
}

struct Trained<T> {
    model: std::result::Result<T, String>,
    seconds: f64,
}

fn timed<T>(f: impl FnOnce() -> twinreg_core::Result<T>) -> Trained<T> {
    let start = Instant::now();
    let model = f().map_err(|e| e.to_string());
    Trained {
        model,
        seconds: start.elapsed().as_secs_f64(),
    }
}

struct SplitRunner<'a> {
    config: &'a ExperimentConfig,
    dataset: &'a str,
    data: &'a SplitData,
    rows: Vec<ResultRow>,
    full_twin: Option<Trained<TwinModel>>,
    anns: Vec<Trained<MlpParams>>,
}

/// Runs every configured method on one prepared split.
pub fn run_split(
    config: &ExperimentConfig,
    dataset: &str,
    data: &SplitData,
) -> Result<Vec<ResultRow>> {
    let mut runner = SplitRunner {
        config,
        dataset,
        data,
        rows: Vec::new(),
        full_twin: None,
        anns: Vec::new(),
    };
    for spec in &config.methods {
        runner.run(spec)?;
    }
    Ok(runner.rows)
}

impl SplitRunner<'_> {
    fn push(
        &mut self,
        method: Method,
        setting: Setting,
        pred: std::result::Result<(Vec<f64>, f64), String>,
        train_seconds: f64,
    ) -> Result<()> {
        let (test_rmse, inference_seconds, failure) = match pred {
            Ok((p, secs)) => (rmse(&p, &self.data.test.y)?, secs, None),
            Err(msg) => (f64::NAN, 0.0, Some(msg)),
        };
        if let Some(msg) = &failure {
            log::warn!("{method} {setting:?} split {}: {msg}", self.data.seed);
        }
        self.rows.push(ResultRow {
            dataset: self.dataset.to_string(),
            method,
            setting,
            split_seed: self.data.seed,
            test_rmse,
            train_seconds,
            inference_seconds,
            failure,
        });
        Ok(())
    }

    fn predict_all(
        &self,
        f: impl Fn(&[f64]) -> twinreg_core::Result<f64>,
    ) -> std::result::Result<(Vec<f64>, f64), String> {
        let start = Instant::now();
        let p = self
            .data
            .test
            .x
            .iter_rows()
            .map(f)
            .collect::<twinreg_core::Result<Vec<f64>>>()
            .map_err(|e| e.to_string())?;
        Ok((p, start.elapsed().as_secs_f64()))
    }

    fn run(&mut self, spec: &MethodSpec) -> Result<()> {
        let data = self.data;
        let cfg = self.config;
        match spec.method {
            Method::Knn => {
                let start = Instant::now();
                let index = KnnIndex::build(data.train.x.clone())?;
                let build = start.elapsed().as_secs_f64();
                for &k in &spec.k {
                    let pred = self.predict_all(|x| knn_predict(&index, &data.train.y, x, k));
                    self.push(Method::Knn, Some(k), pred, build)?;
                }
            }
            Method::Ann => {
                self.ensure_anns(1);
                let pred = self.ann_ensemble_prediction(1);
                let secs = self.anns[0].seconds;
                self.push(Method::Ann, None, pred, secs)?;
            }
            Method::AnnEnsemble => {
                let max = spec.k.iter().map(|s| s.clip(usize::MAX)).max().unwrap_or(1);
                self.ensure_anns(max);
                for &size in &spec.k {
                    let s = size.clip(max);
                    let pred = self.ann_ensemble_prediction(s);
                    let secs = self.anns[..s].iter().map(|t| t.seconds).sum();
                    self.push(Method::AnnEnsemble, Some(size), pred, secs)?;
                }
            }
            Method::Tnnr => {
                self.ensure_full_twin();
                let opts = cfg.predict_options();
                let (pred, secs) =
                    self.with_full_twin(|m, x| m.predict_full(x, &opts).map(|r| r.value));
                self.push(Method::Tnnr, None, pred, secs)?;
            }
            Method::NntnnrInfer => {
                self.ensure_full_twin();
                let opts = cfg.predict_options();
                for &k in &spec.k {
                    let (pred, secs) =
                        self.with_full_twin(|m, x| m.predict_nn(x, k, &opts).map(|r| r.value));
                    self.push(Method::NntnnrInfer, Some(k), pred, secs)?;
                }
            }
            Method::TnnrRandomAnchors => {
                self.ensure_full_twin();
                let opts = cfg.predict_options();
                for &m in &spec.k {
                    let count = m.clip(data.train.len());
                    let base = derive_seed(data.seed, STREAM_ANCHORS, setting_code(m));
                    let (pred, secs) = self.with_full_twin(|model, x| {
                        // Each test point draws its own anchors; seed from its features.
                        let s = x.iter().fold(base, |acc, v| mix(acc ^ v.to_bits()));
                        model
                            .predict_random_anchors(x, count, s, &opts)
                            .map(|r| r.value)
                    });
                    self.push(Method::TnnrRandomAnchors, Some(m), pred, secs)?;
                }
            }
            Method::NntnnrTrainInfer => {
                let opts = cfg.predict_options();
                for &k in &spec.k {
                    let twin_cfg = TwinConfig {
                        train: cfg.twin.clone().with_seed(derive_seed(
                            data.seed,
                            STREAM_TWIN_NN,
                            setting_code(k),
                        )),
                        pair_mode: PairMode::NearestNeighbors(cfg.nn_options(k)),
                        val_pair_limit: cfg.val_pair_limit,
                    };
                    let trained = timed(|| {
                        train_twin(&data.train, &data.val, &twin_cfg).map(|(m, h)| {
                            log::debug!(
                                "{} k={k} split {}: {} epochs",
                                Method::NntnnrTrainInfer,
                                data.seed,
                                h.epochs_run
                            );
                            m
                        })
                    });
                    let pred = match &trained.model {
                        Ok(model) => {
                            self.predict_all(|x| model.predict_nn(x, k, &opts).map(|r| r.value))
                        }
                        Err(e) => Err(e.clone()),
                    };
                    self.push(Method::NntnnrTrainInfer, Some(k), pred, trained.seconds)?;
                }
            }
        }
        Ok(())
    }

    fn ensure_anns(&mut self, count: usize) {
        let data = self.data;
        while self.anns.len() < count {
            let member = self.anns.len() as u64;
            let train = self
                .config
                .ann
                .clone()
                .with_seed(derive_seed(data.seed, STREAM_ANN, member));
            self.anns.push(timed(|| {
                fit(
                    &data.train.x,
                    &data.train.y,
                    &data.val.x,
                    &data.val.y,
                    &train,
                )
                .map(|(p, _)| p)
            }));
        }
    }

    /// Mean prediction of the first `size` plain networks.
    fn ann_ensemble_prediction(&self, size: usize) -> std::result::Result<(Vec<f64>, f64), String> {
        let members: Vec<&MlpParams> = self.anns[..size]
            .iter()
            .map(|t| t.model.as_ref().map_err(Clone::clone))
            .collect::<std::result::Result<_, _>>()?;
        let start = Instant::now();
        let mut sum = vec![0.0; self.data.test.len()];
        for p in &members {
            let out = p
                .forward_rows(&self.data.test.x)
                .map_err(|e| e.to_string())?;
            sum.iter_mut().zip(out).for_each(|(s, o)| *s += o);
        }
        let pred = sum.into_iter().map(|s| s / size as f64).collect();
        Ok((pred, start.elapsed().as_secs_f64()))
    }

    fn ensure_full_twin(&mut self) {
        if self.full_twin.is_some() {
            return;
        }
        let data = self.data;
        let twin_cfg = TwinConfig {
            train: self
                .config
                .twin
                .clone()
                .with_seed(derive_seed(data.seed, STREAM_TWIN_ALL, 0)),
            pair_mode: PairMode::AllPairs,
            val_pair_limit: self.config.val_pair_limit,
        };
        self.full_twin = Some(timed(|| {
            train_twin(&data.train, &data.val, &twin_cfg).map(|(m, h)| {
                log::debug!("TNNR split {}: {} epochs", data.seed, h.epochs_run);
                m
            })
        }));
    }

    fn with_full_twin(
        &self,
        f: impl Fn(&TwinModel, &[f64]) -> twinreg_core::Result<f64>,
    ) -> (std::result::Result<(Vec<f64>, f64), String>, f64) {
        let trained = self.full_twin.as_ref().expect("trained above");
        let pred = match &trained.model {
            Ok(model) => self.predict_all(|x| f(model, x)),
            Err(e) => Err(e.clone()),
        };
        (pred, trained.seconds)
    }
}
