//! Paired datasets: turning `(x_i, y_i)` into `(x_i ‖ x_j, y_i - y_j)`.

use alloc::vec::Vec;

use crate::knn::{KnnIndex, Neighbors};
use crate::{Error, Matrix, Result};

/// How training pairs are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PairMode {
    /// Every ordered pair, self-pairs included.
    AllPairs,
    /// Each point paired with its nearest training neighbors.
    NearestNeighbors(NnPairOptions),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NnPairOptions {
    pub k: Neighbors,
    /// Also emit `(x_j, x_i)` for every `(x_i, x_j)`.
    pub include_reversed: bool,
    /// Leave the point itself out of its own neighbor list.
    pub exclude_self: bool,
}

impl NnPairOptions {
    pub fn new(k: Neighbors) -> Self {
        NnPairOptions {
            k,
            include_reversed: true,
            exclude_self: true,
        }
    }
}

impl PairMode {
    pub fn nearest(k: Neighbors) -> Self {
        PairMode::NearestNeighbors(NnPairOptions::new(k))
    }

    /// Neighbor count used when anchoring validation points; all-pairs uses every anchor.
    pub fn anchor_count(&self) -> Neighbors {
        match self {
            PairMode::AllPairs => Neighbors::All,
            PairMode::NearestNeighbors(o) => o.k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    /// Row `p` is `x_i ‖ x_j` for `pair_ids[p] = (i, j)`.
    pub pair_x: Matrix,
    pub pair_y: Vec<f64>,
    pub pair_ids: Vec<(usize, usize)>,
    pub mode: PairMode,
}

impl PairedDataset {
    pub fn len(&self) -> usize {
        self.pair_y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pair_y.is_empty()
    }
}

fn check_training(train_x: &Matrix, train_y: &[f64]) -> Result<()> {
    Error::check_dim(train_x.rows(), train_y.len())?;
    if train_x.rows() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: train_x.rows(),
        });
    }
    Ok(())
}

/// Every ordered pair `(i, j)` of `n` rows, row-major in `i`.
pub fn all_pair_ids(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).map(move |j| (i, j)))
}

/// Materializes the given pairs of rows. Callers holding too many pairs to
/// fit in memory can feed `ids` in chunks.
pub fn materialize(
    x: &Matrix,
    y: &[f64],
    ids: impl IntoIterator<Item = (usize, usize)>,
) -> (Matrix, Vec<f64>, Vec<(usize, usize)>) {
    let d = x.cols();
    let ids: Vec<(usize, usize)> = ids.into_iter().collect();
    let mut data = Vec::with_capacity(ids.len() * 2 * d);
    let mut targets = Vec::with_capacity(ids.len());
    for &(i, j) in &ids {
        data.extend_from_slice(x.row(i));
        data.extend_from_slice(x.row(j));
        targets.push(y[i] - y[j]);
    }
    let m = Matrix::from_vec(ids.len(), 2 * d, data).expect("sized above");
    (m, targets, ids)
}

pub fn all_pairs(train_x: &Matrix, train_y: &[f64]) -> Result<PairedDataset> {
    check_training(train_x, train_y)?;
    let (pair_x, pair_y, pair_ids) = materialize(train_x, train_y, all_pair_ids(train_x.rows()));
    Ok(PairedDataset {
        pair_x,
        pair_y,
        pair_ids,
        mode: PairMode::AllPairs,
    })
}

/// Pair ids for nearest-neighbor training over an index built on the training rows.
///
/// For each row `i` and each neighbor `j`, emits `(i, j)` and, if enabled,
/// `(j, i)` right after it. A pair found from both ends appears twice.
pub fn nn_pair_ids(index: &KnnIndex, opts: &NnPairOptions) -> Result<Vec<(usize, usize)>> {
    opts.k.validate()?;
    let n = index.len();
    let per_row = opts.k.clip(if opts.exclude_self { n - 1 } else { n });
    let mut ids = Vec::with_capacity(n * per_row * if opts.include_reversed { 2 } else { 1 });
    for i in 0..n {
        let exclude = opts.exclude_self.then_some(i);
        for j in index.query(index.points().row(i), opts.k, exclude)? {
            ids.push((i, j));
            if opts.include_reversed {
                ids.push((j, i));
            }
        }
    }
    Ok(ids)
}

pub fn nn_pairs(train_x: &Matrix, train_y: &[f64], opts: NnPairOptions) -> Result<PairedDataset> {
    check_training(train_x, train_y)?;
    let index = KnnIndex::build(train_x.clone())?;
    nn_pairs_with_index(&index, train_y, opts)
}

/// [`nn_pairs`] reusing an existing index over the training rows.
pub fn nn_pairs_with_index(
    index: &KnnIndex,
    train_y: &[f64],
    opts: NnPairOptions,
) -> Result<PairedDataset> {
    check_training(index.points(), train_y)?;
    let ids = nn_pair_ids(index, &opts)?;
    let (pair_x, pair_y, pair_ids) = materialize(index.points(), train_y, ids);
    Ok(PairedDataset {
        pair_x,
        pair_y,
        pair_ids,
        mode: PairMode::NearestNeighbors(opts),
    })
}

pub fn make_pairs(train_x: &Matrix, train_y: &[f64], mode: PairMode) -> Result<PairedDataset> {
    match mode {
        PairMode::AllPairs => all_pairs(train_x, train_y),
        PairMode::NearestNeighbors(opts) => nn_pairs(train_x, train_y, opts),
    }
}

/// Rows `x_query ‖ anchors_x[j]`, in anchor order.
pub fn make_inference_pairs(x_query: &[f64], anchors_x: &Matrix) -> Result<Matrix> {
    if anchors_x.rows() == 0 {
        return Err(Error::invalid("no anchors"));
    }
    Error::check_dim(anchors_x.cols(), x_query.len())?;
    let mut data = Vec::with_capacity(anchors_x.rows() * 2 * x_query.len());
    for a in anchors_x.iter_rows() {
        data.extend_from_slice(x_query);
        data.extend_from_slice(a);
    }
    Matrix::from_vec(anchors_x.rows(), 2 * x_query.len(), data)
}
