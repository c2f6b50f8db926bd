use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::{init_params, Activations, AdadeltaState, MlpParams};
use crate::{Error, Matrix, Result};

/// Mini-batch training settings. The loss is always mean squared error.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before training stops.
    pub early_stop_patience: usize,
    /// Epochs without validation improvement before the learning rate is halved.
    pub lr_reduce_patience: usize,
    /// Minimum decrease of the validation loss that counts as improvement.
    pub min_delta: f64,
    pub seed: u64,
    pub rho: f64,
    pub epsilon: f64,
    pub initial_lr: f64,
    /// When set, each epoch visits only this many rows of a fresh shuffle
    /// instead of the full training set.
    pub samples_per_epoch: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            max_epochs: 2000,
            early_stop_patience: 50,
            lr_reduce_patience: 25,
            min_delta: 1e-6,
            seed: 0,
            rho: 0.95,
            epsilon: 1e-6,
            initial_lr: 1.0,
            samples_per_epoch: None,
        }
    }
}

impl TrainConfig {
    /// Defaults for the twin network, which gets a larger epoch cap.
    pub fn twin() -> Self {
        TrainConfig {
            max_epochs: 10_000,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::invalid("batch_size and max_epochs must be positive"));
        }
        if self.lr_reduce_patience == 0 || self.lr_reduce_patience >= self.early_stop_patience {
            return Err(Error::invalid(
                "need 0 < lr_reduce_patience < early_stop_patience",
            ));
        }
        if self.min_delta.is_nan() || self.min_delta < 0.0 {
            return Err(Error::invalid("min_delta must be nonnegative"));
        }
        if self.samples_per_epoch == Some(0) {
            return Err(Error::invalid("samples_per_epoch must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub epochs_run: usize,
    pub lr_reductions: usize,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch - 1]
    }
}

/// Mean squared error of `params` on `(x, y)`.
pub fn mse(params: &MlpParams, x: &Matrix, y: &[f64]) -> Result<f64> {
    if x.rows() == 0 {
        return Err(Error::invalid("empty evaluation set"));
    }
    Error::check_dim(x.rows(), y.len())?;
    let pred = params.forward_rows(x)?;
    let sum: f64 = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / y.len() as f64)
}

/// Trains a freshly initialized network with Adadelta, halving the learning
/// rate on validation plateaus and stopping early. Returns the parameters of
/// the epoch with the lowest validation loss.
pub fn fit(
    train_x: &Matrix,
    train_y: &[f64],
    val_x: &Matrix,
    val_y: &[f64],
    config: &TrainConfig,
) -> Result<(MlpParams, TrainHistory)> {
    config.validate()?;
    if train_x.rows() == 0 || val_x.rows() == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Error::check_dim(train_x.rows(), train_y.len())?;
    Error::check_dim(val_x.rows(), val_y.len())?;
    Error::check_dim(train_x.cols(), val_x.cols())?;

    let d = train_x.cols();
    let mut params = init_params(d, config.seed)?;
    let mut opt = AdadeltaState::new(d, config.rho, config.epsilon, config.initial_lr)?;
    let mut grad = MlpParams::zeros(d)?;
    let mut buf = Activations::new();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let n = train_x.rows();
    let per_epoch = config.samples_per_epoch.map_or(n, |m| m.min(n));
    let mut order: Vec<usize> = (0..n).collect();

    let mut history = TrainHistory::default();
    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut plateau_ref = f64::INFINITY;
    let mut stop_wait = 0;
    let mut lr_wait = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order[..per_epoch].chunks(config.batch_size) {
            let loss = params.accumulate_gradient(train_x, train_y, batch, &mut grad, &mut buf);
            total += loss * batch.len() as f64;
            opt.step(&mut params, &grad)?;
        }
        let train_loss = total / per_epoch as f64;
        let val_loss = mse(&params, val_x, val_y)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.epochs_run = epoch;

        if val_loss < best_val {
            best_val = val_loss;
            best.as_flat_mut().copy_from_slice(params.as_flat());
            history.best_epoch = epoch;
        }
        if val_loss < plateau_ref - config.min_delta {
            plateau_ref = val_loss;
            stop_wait = 0;
            lr_wait = 0;
        } else {
            stop_wait += 1;
            lr_wait += 1;
            if stop_wait >= config.early_stop_patience {
                break;
            }
            if lr_wait >= config.lr_reduce_patience {
                opt.halve_lr();
                history.lr_reductions += 1;
                lr_wait = 0;
            }
        }
    }
    Ok((best, history))
}
