//! Twin-network regression: a difference model `F(a ‖ b) ≈ y_a - y_b`,
//! trained on paired data and turned back into point predictions by
//! averaging over labelled anchors.

use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::knn::{KnnIndex, Neighbors};
use crate::nn::{fit, MlpParams, TrainConfig, TrainHistory};
use crate::pairing::{all_pairs, make_inference_pairs, nn_pairs_with_index, PairMode};
use crate::{Error, Matrix, Result};

/// Anything that scores an ordered pair of inputs.
pub trait DifferenceFn {
    fn difference(&self, a: &[f64], b: &[f64]) -> Result<f64>;
}

impl DifferenceFn for MlpParams {
    fn difference(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        Error::check_dim(a.len(), b.len())?;
        let mut ab = Vec::with_capacity(a.len() * 2);
        ab.extend_from_slice(a);
        ab.extend_from_slice(b);
        self.forward(&ab)
    }
}

impl<F: Fn(&[f64], &[f64]) -> f64> DifferenceFn for F {
    fn difference(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok(self(a, b))
    }
}

/// `½F(a, b) − ½F(b, a)`. Exactly antisymmetric in floating point.
pub fn sym_diff<F: DifferenceFn + ?Sized>(f: &F, a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(0.5 * f.difference(a, b)? - 0.5 * f.difference(b, a)?)
}

/// Mean absolute loop sum `|s(a,b) + s(b,c) + s(c,a)|` over `n_triples`
/// seeded triples of distinct rows of `points`, with `s` the symmetrized difference.
pub fn loop_violation<F: DifferenceFn + ?Sized>(
    f: &F,
    points: &Matrix,
    n_triples: usize,
    seed: u64,
) -> Result<f64> {
    if points.rows() < 3 {
        return Err(Error::invalid("loop violation needs at least 3 points"));
    }
    if n_triples == 0 {
        return Err(Error::invalid("n_triples must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..n_triples {
        let t = index::sample(&mut rng, points.rows(), 3);
        let (a, b, c) = (
            points.row(t.index(0)),
            points.row(t.index(1)),
            points.row(t.index(2)),
        );
        total += libm::fabs(sym_diff(f, a, b)? + sym_diff(f, b, c)? + sym_diff(f, c, a)?);
    }
    Ok(total / n_triples as f64)
}

/// Per-anchor estimate used in the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Estimator {
    /// `½F(x, a) − ½F(a, x) + y_a`
    #[default]
    Symmetrized,
    /// `F(x, a) + y_a`
    OneSided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictOptions {
    pub estimator: Estimator,
    /// Triples `(x, a_i, a_j)` sampled for the loop-consistency statistic; 0 skips it.
    pub loop_triples: usize,
    pub seed: u64,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions {
            estimator: Estimator::Symmetrized,
            loop_triples: 64,
            seed: 0,
        }
    }
}

impl PredictOptions {
    /// Point estimate and ensemble spread only.
    pub fn fast() -> Self {
        PredictOptions {
            loop_triples: 0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub value: f64,
    pub anchor_count: usize,
    /// Sample standard deviation of the per-anchor estimates, 0 for a single anchor.
    pub ensemble_std: f64,
    /// `None` with fewer than two anchors or when loop sampling is disabled.
    pub loop_violation: Option<f64>,
}

/// Training settings for a twin model.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinConfig {
    pub train: TrainConfig,
    pub pair_mode: PairMode,
    /// Cap on validation pairs; a fixed seeded subset is used above it.
    pub val_pair_limit: Option<usize>,
}

impl TwinConfig {
    pub fn new(pair_mode: PairMode, train: TrainConfig) -> Self {
        TwinConfig {
            train,
            pair_mode,
            val_pair_limit: None,
        }
    }
}

/// Trained difference network with its labelled anchors.
#[derive(Debug, Clone)]
pub struct TwinModel {
    params: MlpParams,
    index: KnnIndex,
    anchors_y: Vec<f64>,
    train_mode: PairMode,
}

impl TwinModel {
    /// Assembles a model from existing parameters; the anchor index is rebuilt.
    pub fn from_parts(
        params: MlpParams,
        anchors_x: Matrix,
        anchors_y: Vec<f64>,
        train_mode: PairMode,
    ) -> Result<Self> {
        Error::check_dim(anchors_x.rows(), anchors_y.len())?;
        Error::check_dim(2 * anchors_x.cols(), params.d_in())?;
        Ok(TwinModel {
            params,
            index: KnnIndex::build(anchors_x)?,
            anchors_y,
            train_mode,
        })
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn anchors_x(&self) -> &Matrix {
        self.index.points()
    }

    pub fn anchors_y(&self) -> &[f64] {
        &self.anchors_y
    }

    pub fn anchor_index(&self) -> &KnnIndex {
        &self.index
    }

    pub fn train_mode(&self) -> PairMode {
        self.train_mode
    }

    pub fn n_anchors(&self) -> usize {
        self.anchors_y.len()
    }

    pub fn sym_diff(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        sym_diff(&self.params, a, b)
    }

    pub fn loop_violation(&self, points: &Matrix, n_triples: usize, seed: u64) -> Result<f64> {
        loop_violation(&self.params, points, n_triples, seed)
    }

    /// Ensemble over every anchor.
    pub fn predict_full(&self, x: &[f64], opts: &PredictOptions) -> Result<PredictionResult> {
        let ids: Vec<usize> = (0..self.n_anchors()).collect();
        self.predict_with_anchors(x, &ids, opts)
    }

    /// Ensemble over the `k` nearest anchors of `x`.
    pub fn predict_nn(
        &self,
        x: &[f64],
        k: Neighbors,
        opts: &PredictOptions,
    ) -> Result<PredictionResult> {
        let mut ids = self.index.query(x, k, None)?;
        ids.sort_unstable();
        self.predict_with_anchors(x, &ids, opts)
    }

    /// Ensemble over `m` anchors drawn uniformly without replacement; `m` is clipped to the anchor count.
    pub fn predict_random_anchors(
        &self,
        x: &[f64],
        m: usize,
        seed: u64,
        opts: &PredictOptions,
    ) -> Result<PredictionResult> {
        if m == 0 {
            return Err(Error::invalid("need at least one anchor"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ids = index::sample(&mut rng, self.n_anchors(), m.min(self.n_anchors())).into_vec();
        ids.sort_unstable();
        self.predict_with_anchors(x, &ids, opts)
    }

    /// Ensemble over the given anchor rows, summed in the order given.
    pub fn predict_with_anchors(
        &self,
        x: &[f64],
        ids: &[usize],
        opts: &PredictOptions,
    ) -> Result<PredictionResult> {
        Error::check_dim(self.index.dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("query contains non-finite values"));
        }
        let anchors = self.index.points().select_rows(ids);
        let forward = self
            .params
            .forward_rows(&make_inference_pairs(x, &anchors)?)?;
        let backward = self
            .params
            .forward_rows(&reversed_inference_pairs(x, &anchors))?;

        let sym: Vec<f64> = forward
            .iter()
            .zip(&backward)
            .map(|(f, b)| 0.5 * f - 0.5 * b)
            .collect();
        let estimates: Vec<f64> = match opts.estimator {
            Estimator::Symmetrized => sym
                .iter()
                .zip(ids)
                .map(|(s, &j)| s + self.anchors_y[j])
                .collect(),
            Estimator::OneSided => forward
                .iter()
                .zip(ids)
                .map(|(f, &j)| f + self.anchors_y[j])
                .collect(),
        };

        let m = estimates.len();
        let value = estimates.iter().sum::<f64>() / m as f64;
        let ensemble_std = if m > 1 {
            let ss: f64 = estimates.iter().map(|e| (e - value) * (e - value)).sum();
            libm::sqrt(ss / (m - 1) as f64)
        } else {
            0.0
        };
        let loop_violation = if m >= 2 && opts.loop_triples > 0 {
            Some(self.query_loop_violation(&anchors, &sym, opts)?)
        } else {
            None
        };
        Ok(PredictionResult {
            value,
            anchor_count: m,
            ensemble_std,
            loop_violation,
        })
    }

    /// Loops `x -> a_i -> a_j -> x`; `sym[i]` already holds `s(x, a_i)`.
    fn query_loop_violation(
        &self,
        anchors: &Matrix,
        sym: &[f64],
        opts: &PredictOptions,
    ) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut total = 0.0;
        for _ in 0..opts.loop_triples {
            let t = index::sample(&mut rng, anchors.rows(), 2);
            let (i, j) = (t.index(0), t.index(1));
            let between = self.sym_diff(anchors.row(i), anchors.row(j))?;
            total += libm::fabs(sym[i] + between - sym[j]);
        }
        Ok(total / opts.loop_triples as f64)
    }
}

fn reversed_inference_pairs(x: &[f64], anchors: &Matrix) -> Matrix {
    let mut data = Vec::with_capacity(anchors.rows() * 2 * x.len());
    for a in anchors.iter_rows() {
        data.extend_from_slice(a);
        data.extend_from_slice(x);
    }
    Matrix::from_vec(anchors.rows(), 2 * x.len(), data).expect("sized above")
}

/// Validation pairs: each validation point against its anchors under `mode`,
/// in both orientations unless the mode trains one orientation only.
pub fn validation_pairs(
    index: &KnnIndex,
    anchors_y: &[f64],
    val: &Dataset,
    mode: &PairMode,
    limit: Option<usize>,
    seed: u64,
) -> Result<(Matrix, Vec<f64>)> {
    let both = match mode {
        PairMode::AllPairs => true,
        PairMode::NearestNeighbors(o) => o.include_reversed,
    };
    let d = index.dim();
    let mut rows: Vec<f64> = Vec::new();
    let mut targets = Vec::new();
    for (v, &yv) in val.x.iter_rows().zip(&val.y) {
        for j in index.query(v, mode.anchor_count(), None)? {
            let a = index.points().row(j);
            rows.extend_from_slice(v);
            rows.extend_from_slice(a);
            targets.push(yv - anchors_y[j]);
            if both {
                rows.extend_from_slice(a);
                rows.extend_from_slice(v);
                targets.push(anchors_y[j] - yv);
            }
        }
    }
    let mut x = Matrix::from_vec(targets.len(), 2 * d, rows)?;
    if let Some(limit) = limit {
        if targets.len() > limit {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2);
            let mut keep = index::sample(&mut rng, targets.len(), limit).into_vec();
            keep.sort_unstable();
            x = x.select_rows(&keep);
            targets = keep.iter().map(|&i| targets[i]).collect();
        }
    }
    Ok((x, targets))
}

/// Training pairs for `mode` over an index built on the training rows.
pub fn training_pairs(
    index: &KnnIndex,
    train_y: &[f64],
    mode: &PairMode,
) -> Result<(Matrix, Vec<f64>)> {
    let paired = match mode {
        PairMode::AllPairs => all_pairs(index.points(), train_y)?,
        PairMode::NearestNeighbors(o) => nn_pairs_with_index(index, train_y, *o)?,
    };
    Ok((paired.pair_x, paired.pair_y))
}

/// Builds the paired training and validation sets and fits the difference network.
pub fn train_twin(
    train: &Dataset,
    val: &Dataset,
    config: &TwinConfig,
) -> Result<(TwinModel, TrainHistory)> {
    if train.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: train.len(),
        });
    }
    if val.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Error::check_dim(train.dim(), val.dim())?;
    let index = KnnIndex::build(train.x.clone())?;
    let (pair_x, pair_y) = training_pairs(&index, &train.y, &config.pair_mode)?;
    let (val_x, val_y) = validation_pairs(
        &index,
        &train.y,
        val,
        &config.pair_mode,
        config.val_pair_limit,
        config.train.seed,
    )?;
    let (params, history) = fit(&pair_x, &pair_y, &val_x, &val_y, &config.train)?;
    Ok((
        TwinModel {
            params,
            index,
            anchors_y: train.y.clone(),
            train_mode: config.pair_mode,
        },
        history,
    ))
}
