//! Datasets: the three closed-form generators, seeded 70/10/20 splits
//! and train-split standardization.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};

use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FeatureKind {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub feature_kinds: Vec<FeatureKind>,
    pub x: Matrix,
    pub y: Vec<f64>,
}

impl Dataset {
    /// Validates shapes and finiteness. Feature names default to `x0, x1, ...`
    /// and kinds to continuous when left empty.
    pub fn new(
        name: impl Into<String>,
        x: Matrix,
        y: Vec<f64>,
        mut feature_names: Vec<String>,
        mut feature_kinds: Vec<FeatureKind>,
    ) -> Result<Self> {
        Error::check_dim(x.rows(), y.len())?;
        if feature_names.is_empty() {
            feature_names = (0..x.cols()).map(|j| format!("x{j}")).collect();
        }
        if feature_kinds.is_empty() {
            feature_kinds = vec![FeatureKind::Continuous; x.cols()];
        }
        Error::check_dim(x.cols(), feature_names.len())?;
        Error::check_dim(x.cols(), feature_kinds.len())?;
        if !x.all_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        Ok(Dataset {
            name: name.into(),
            feature_names,
            feature_kinds,
            x,
            y,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, ids: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            feature_kinds: self.feature_kinds.clone(),
            x: self.x.select_rows(ids),
            y: ids.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn with_x(&self, x: Matrix) -> Dataset {
        Dataset { x, ..self.clone() }
    }
}

/// Closed interval a feature is sampled from.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn sampler(&self) -> Result<Uniform<f64>> {
        Uniform::new_inclusive(self.lo, self.hi)
            .map_err(|_| Error::invalid(format!("bad sampling range [{}, {}]", self.lo, self.hi)))
    }

    fn strictly_positive(&self) -> bool {
        self.lo > 0.0 && self.hi >= self.lo
    }
}

pub fn tf_formula(x1: f64, x2: f64) -> f64 {
    x1 * x1 * x1 + x1 * x1 - x1 - 1.0 + x1 * x2 + libm::sin(x2)
}

/// Current amplitude of a driven series RCL circuit.
pub fn rcl_formula(v0: f64, omega: f64, t: f64, r: f64, l: f64, c: f64) -> f64 {
    let reactance = omega * l - 1.0 / (omega * c);
    v0 * libm::cos(omega * t) / libm::sqrt(r * r + reactance * reactance)
}

/// Bridge voltage with the second arm taken as `R3` against `R2`.
pub fn wsb_formula(u: f64, r1: f64, r2: f64, r3: f64) -> f64 {
    u * (r2 / (r1 + r2) - r3 / (r2 + r3))
}

/// Alternative bridge where the second arm is `R3` against `R1`.
pub fn wsb_formula_corrected(u: f64, r1: f64, r2: f64, r3: f64) -> f64 {
    u * (r2 / (r1 + r2) - r3 / (r1 + r3))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum WsbFormula {
    #[default]
    AsPrinted,
    Corrected,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TfRanges {
    pub x1: Range,
    pub x2: Range,
}

impl Default for TfRanges {
    fn default() -> Self {
        TfRanges {
            x1: Range::new(-2.0, 2.0),
            x2: Range::new(-2.0, 2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RclRanges {
    pub v0: Range,
    pub omega: Range,
    pub t: Range,
    pub r: Range,
    pub l: Range,
    pub c: Range,
}

impl Default for RclRanges {
    fn default() -> Self {
        RclRanges {
            v0: Range::new(1.0, 10.0),
            omega: Range::new(10.0, 1000.0),
            t: Range::new(0.0, 0.1),
            r: Range::new(1.0, 100.0),
            l: Range::new(0.01, 1.0),
            c: Range::new(1e-4, 1e-2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WsbRanges {
    pub u: Range,
    pub r1: Range,
    pub r2: Range,
    pub r3: Range,
}

impl Default for WsbRanges {
    fn default() -> Self {
        WsbRanges {
            u: Range::new(1.0, 10.0),
            r1: Range::new(1.0, 100.0),
            r2: Range::new(1.0, 100.0),
            r3: Range::new(1.0, 100.0),
        }
    }
}

pub const TF_DEFAULT_N: usize = 1000;
pub const RCL_DEFAULT_N: usize = 4000;
pub const WSB_DEFAULT_N: usize = 200;
pub const DEFAULT_NOISE_STD: f64 = 0.1;

/// Features come from stream 0 of the seed and target noise from stream 1,
/// so the same seed yields the same inputs with or without noise.
fn generate(
    name: &str,
    n: usize,
    seed: u64,
    noise_std: f64,
    columns: &[(&str, Range)],
    formula: impl Fn(&[f64]) -> f64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if !noise_std.is_finite() || noise_std < 0.0 {
        return Err(Error::invalid("noise_std must be finite and nonnegative"));
    }
    let samplers = columns
        .iter()
        .map(|(_, r)| r.sampler())
        .collect::<Result<Vec<_>>>()?;
    let mut feat_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::invalid(e.to_string()))?;

    let d = columns.len();
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut row = vec![0.0; d];
    for _ in 0..n {
        for (v, s) in row.iter_mut().zip(&samplers) {
            *v = s.sample(&mut feat_rng);
        }
        let mut target = formula(&row);
        if noise_std > 0.0 {
            target += noise.sample(&mut noise_rng);
        }
        data.extend_from_slice(&row);
        y.push(target);
    }
    Dataset::new(
        name,
        Matrix::from_vec(n, d, data)?,
        y,
        columns.iter().map(|(c, _)| c.to_string()).collect(),
        vec![FeatureKind::Continuous; d],
    )
}

/// Noise-free test function over the default square.
pub fn gen_tf(n: usize, seed: u64) -> Result<Dataset> {
    gen_tf_with(n, seed, &TfRanges::default())
}

pub fn gen_tf_with(n: usize, seed: u64, ranges: &TfRanges) -> Result<Dataset> {
    let cols = [("x1", ranges.x1), ("x2", ranges.x2)];
    generate("TF", n, seed, 0.0, &cols, |r| tf_formula(r[0], r[1]))
}

pub fn gen_rcl(n: usize, seed: u64, noise_std: f64) -> Result<Dataset> {
    gen_rcl_with(n, seed, noise_std, &RclRanges::default())
}

pub fn gen_rcl_with(n: usize, seed: u64, noise_std: f64, ranges: &RclRanges) -> Result<Dataset> {
    let positive = [ranges.v0, ranges.omega, ranges.r, ranges.l, ranges.c];
    if !positive.iter().all(Range::strictly_positive) {
        return Err(Error::invalid(
            "RCL ranges for V0, omega, R, L and C must be positive",
        ));
    }
    let cols = [
        ("V0", ranges.v0),
        ("omega", ranges.omega),
        ("t", ranges.t),
        ("R", ranges.r),
        ("L", ranges.l),
        ("C", ranges.c),
    ];
    generate("RCL", n, seed, noise_std, &cols, |r| {
        rcl_formula(r[0], r[1], r[2], r[3], r[4], r[5])
    })
}

pub fn gen_wsb(n: usize, seed: u64, noise_std: f64) -> Result<Dataset> {
    gen_wsb_with(
        n,
        seed,
        noise_std,
        &WsbRanges::default(),
        WsbFormula::AsPrinted,
    )
}

pub fn gen_wsb_with(
    n: usize,
    seed: u64,
    noise_std: f64,
    ranges: &WsbRanges,
    formula: WsbFormula,
) -> Result<Dataset> {
    if ![ranges.r1, ranges.r2, ranges.r3]
        .iter()
        .all(Range::strictly_positive)
    {
        return Err(Error::invalid("WSB resistor ranges must be positive"));
    }
    let cols = [
        ("U", ranges.u),
        ("R1", ranges.r1),
        ("R2", ranges.r2),
        ("R3", ranges.r3),
    ];
    let f = match formula {
        WsbFormula::AsPrinted => wsb_formula,
        WsbFormula::Corrected => wsb_formula_corrected,
    };
    generate("WSB", n, seed, noise_std, &cols, |r| {
        f(r[0], r[1], r[2], r[3])
    })
}

/// Train/validation/test fractions with the seed of the permutation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            train_frac: 0.70,
            val_frac: 0.10,
            test_frac: 0.20,
            seed,
        }
    }

    /// `(train, val, test)` counts for `n` rows; test takes the remainder.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        let fr = [self.train_frac, self.val_frac, self.test_frac];
        if fr.iter().any(|f| f.is_nan() || *f < 0.0)
            || libm::fabs(fr.iter().sum::<f64>() - 1.0) > 1e-9
        {
            return Err(Error::invalid(
                "split fractions must be nonnegative and sum to 1",
            ));
        }
        // The epsilon keeps e.g. 0.7 * 100 from flooring to 69.
        let count = |f: f64| libm::floor(f * n as f64 + 1e-9) as usize;
        let train = count(self.train_frac);
        let val = count(self.val_frac);
        Ok((train, val, n - train - val))
    }
}

pub const MIN_SPLIT_ROWS: usize = 10;

/// Seeded permutation cut into contiguous train/val/test index blocks.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    if n < MIN_SPLIT_ROWS {
        return Err(Error::InsufficientData {
            needed: MIN_SPLIT_ROWS,
            got: n,
        });
    }
    let (n_train, n_val, _) = spec.sizes(n)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = perm.split_off(n_train + n_val);
    let val = perm.split_off(n_train);
    Ok((perm, val, test))
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let (tr, va, te) = split_indices(ds.len(), spec)?;
    Ok((ds.subset(&tr), ds.subset(&va), ds.subset(&te)))
}

/// Per-feature affine map fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    /// Constant columns store `1` here and `0` in `mean`, so they pass through unchanged.
    pub std: Vec<f64>,
}

impl StandardizationStats {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let n = x.rows() as f64;
        let mut mean = vec![0.0; x.cols()];
        let mut std = vec![0.0; x.cols()];
        for j in 0..x.cols() {
            let m = x.iter_rows().map(|r| r[j]).sum::<f64>() / n;
            let var = x.iter_rows().map(|r| (r[j] - m) * (r[j] - m)).sum::<f64>() / n;
            let s = libm::sqrt(var);
            if s <= 1e-12 * libm::fmax(libm::fabs(m), 1.0) {
                mean[j] = 0.0;
                std[j] = 1.0;
            } else {
                mean[j] = m;
                std[j] = s;
            }
        }
        Ok(StandardizationStats { mean, std })
    }

    pub fn identity(d: usize) -> Self {
        StandardizationStats {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        Error::check_dim(self.mean.len(), x.cols())?;
        let rows: Vec<Vec<f64>> = x.iter_rows().map(|r| self.apply_row(r)).collect();
        Ok(if rows.is_empty() {
            Matrix::zeros(0, x.cols())
        } else {
            Matrix::from_rows(&rows)?
        })
    }

    pub fn invert(&self, x: &Matrix) -> Result<Matrix> {
        Error::check_dim(self.mean.len(), x.cols())?;
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }
}

/// Standardizes all three splits with statistics of `train` only. Targets are untouched.
pub fn standardize(
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
) -> Result<(Dataset, Dataset, Dataset, StandardizationStats)> {
    let stats = StandardizationStats::fit(&train.x)?;
    Ok((
        train.with_x(stats.apply(&train.x)?),
        val.with_x(stats.apply(&val.x)?),
        test.with_x(stats.apply(&test.x)?),
        stats,
    ))
}
