//! Fixed-architecture regression MLP: `d_in -> 128 -> 128 -> 1`, ReLU hidden
//! activations, linear output.
//!
//! The same network serves as the plain regressor `f(x)` and, with
//! `d_in = 2d`, as the twin difference model `F(a ‖ b)`.

mod adadelta;
mod train;

pub use adadelta::AdadeltaState;
pub use train::{fit, mse, TrainConfig, TrainHistory};

use alloc::vec;
use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Matrix, Result};

/// Width of both hidden layers.
pub const HIDDEN: usize = 128;

/// Weights and biases of the network, stored in one flat buffer.
///
/// Layout (all row-major, rows = output units): `w1 [H x d_in]`, `b1 [H]`,
/// `w2 [H x H]`, `b2 [H]`, `w3 [H]`, `b3 [1]`. The same type doubles as a
/// gradient or optimizer accumulator, since those share the parameter shapes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpParams {
    d_in: usize,
    data: Vec<f64>,
}

/// Gradient of the loss, one entry per parameter.
pub type Gradient = MlpParams;

impl MlpParams {
    pub fn param_count(d_in: usize) -> usize {
        HIDDEN * d_in + HIDDEN + HIDDEN * HIDDEN + HIDDEN + HIDDEN + 1
    }

    pub fn zeros(d_in: usize) -> Result<Self> {
        if d_in == 0 {
            return Err(Error::InvalidDimension {
                expected: 1,
                got: 0,
            });
        }
        Ok(MlpParams {
            d_in,
            data: vec![0.0; Self::param_count(d_in)],
        })
    }

    /// Rebuilds parameters from a flat buffer in the layout described above.
    pub fn from_flat(d_in: usize, data: Vec<f64>) -> Result<Self> {
        if d_in == 0 {
            return Err(Error::InvalidDimension {
                expected: 1,
                got: 0,
            });
        }
        Error::check_dim(Self::param_count(d_in), data.len())?;
        Ok(MlpParams { d_in, data })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn offsets(&self) -> [usize; 6] {
        let w1 = 0;
        let b1 = w1 + HIDDEN * self.d_in;
        let w2 = b1 + HIDDEN;
        let b2 = w2 + HIDDEN * HIDDEN;
        let w3 = b2 + HIDDEN;
        let b3 = w3 + HIDDEN;
        [w1, b1, w2, b2, w3, b3]
    }

    pub fn w1(&self) -> &[f64] {
        let o = self.offsets();
        &self.data[o[0]..o[1]]
    }
    pub fn b1(&self) -> &[f64] {
        let o = self.offsets();
        &self.data[o[1]..o[2]]
    }
    pub fn w2(&self) -> &[f64] {
        let o = self.offsets();
        &self.data[o[2]..o[3]]
    }
    pub fn b2(&self) -> &[f64] {
        let o = self.offsets();
        &self.data[o[3]..o[4]]
    }
    pub fn w3(&self) -> &[f64] {
        let o = self.offsets();
        &self.data[o[4]..o[5]]
    }
    pub fn b3(&self) -> f64 {
        self.data[self.offsets()[5]]
    }

    pub fn w1_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.data[o[0]..o[1]]
    }
    pub fn b1_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.data[o[1]..o[2]]
    }
    pub fn w2_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.data[o[2]..o[3]]
    }
    pub fn b2_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.data[o[3]..o[4]]
    }
    pub fn w3_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.data[o[4]..o[5]]
    }
    pub fn b3_mut(&mut self) -> &mut f64 {
        let o = self.offsets();
        &mut self.data[o[5]]
    }

    fn layers(&self) -> Layers<'_> {
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        Layers {
            d_in: self.d_in,
            w1: &self.data[w1..b1],
            b1: &self.data[b1..w2],
            w2: &self.data[w2..b2],
            b2: &self.data[b2..w3],
            w3: &self.data[w3..b3],
            b3: self.data[b3],
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Network output for a single input.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Error::check_dim(self.d_in, x.len())?;
        let mut buf = Activations::new();
        Ok(self.layers().forward(x, &mut buf))
    }

    /// Outputs for every row of `x`; row `i` is bitwise equal to `forward(x.row(i))`.
    pub fn forward_rows(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.rows() > 0 {
            Error::check_dim(self.d_in, x.cols())?;
        }
        let layers = self.layers();
        let mut buf = Activations::new();
        Ok(x.iter_rows().map(|r| layers.forward(r, &mut buf)).collect())
    }

    /// Mean squared error over the batch and its exact gradient.
    pub fn loss_and_gradient(&self, batch_x: &Matrix, batch_y: &[f64]) -> Result<(f64, Gradient)> {
        if batch_x.rows() == 0 {
            return Err(Error::invalid("empty batch"));
        }
        Error::check_dim(self.d_in, batch_x.cols())?;
        Error::check_dim(batch_x.rows(), batch_y.len())?;
        let mut grad = MlpParams::zeros(self.d_in)?;
        let ids: Vec<usize> = (0..batch_x.rows()).collect();
        let mut buf = Activations::new();
        let loss = self.accumulate_gradient(batch_x, batch_y, &ids, &mut grad, &mut buf);
        Ok((loss, grad))
    }

    /// Overwrites `grad` with the gradient over rows `ids` and returns the batch loss.
    fn accumulate_gradient(
        &self,
        x: &Matrix,
        y: &[f64],
        ids: &[usize],
        grad: &mut Gradient,
        buf: &mut Activations,
    ) -> f64 {
        grad.data.iter_mut().for_each(|g| *g = 0.0);
        let layers = self.layers();
        let [gw1, gb1, gw2, gb2, gw3, gb3] = grad.offsets();
        let (gw1, rest) = grad.data.split_at_mut(gb1 - gw1);
        let (gb1s, rest) = rest.split_at_mut(gw2 - gb1);
        let (gw2, rest) = rest.split_at_mut(gb2 - gw2);
        let (gb2s, rest) = rest.split_at_mut(gw3 - gb2);
        let (gw3, gb3s) = rest.split_at_mut(gb3 - gw3);

        let scale = 2.0 / ids.len() as f64;
        let mut loss = 0.0;
        let d_in = self.d_in;
        let mut d1 = [0.0; HIDDEN];
        let mut d2 = [0.0; HIDDEN];
        for &i in ids {
            let xi = x.row(i);
            let out = layers.forward(xi, buf);
            let err = out - y[i];
            loss += err * err;
            let g = scale * err;

            gb3s[0] += g;
            axpy(g, &buf.h2, gw3);
            for ((d, &h), &w) in d2.iter_mut().zip(&buf.h2).zip(layers.w3) {
                *d = if h > 0.0 { g * w } else { 0.0 };
            }
            d1.iter_mut().for_each(|v| *v = 0.0);
            for o in 0..HIDDEN {
                let d = d2[o];
                if d == 0.0 {
                    continue;
                }
                gb2s[o] += d;
                axpy(d, &buf.h1, &mut gw2[o * HIDDEN..(o + 1) * HIDDEN]);
                axpy(d, &layers.w2[o * HIDDEN..(o + 1) * HIDDEN], &mut d1);
            }
            for o in 0..HIDDEN {
                if buf.h1[o] <= 0.0 {
                    continue;
                }
                let d = d1[o];
                gb1s[o] += d;
                axpy(d, xi, &mut gw1[o * d_in..(o + 1) * d_in]);
            }
        }
        loss / ids.len() as f64
    }
}

/// Glorot-uniform weights and zero biases, deterministic in `seed`.
pub fn init_params(d_in: usize, seed: u64) -> Result<MlpParams> {
    let mut params = MlpParams::zeros(d_in)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fill = |w: &mut [f64], fan_in: usize, fan_out: usize| {
        let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite positive limit");
        w.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
    };
    fill(params.w1_mut(), d_in, HIDDEN);
    fill(params.w2_mut(), HIDDEN, HIDDEN);
    fill(params.w3_mut(), HIDDEN, 1);
    Ok(params)
}

struct Layers<'a> {
    d_in: usize,
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
    w3: &'a [f64],
    b3: f64,
}

/// Post-ReLU hidden activations of the last forward pass.
struct Activations {
    h1: [f64; HIDDEN],
    h2: [f64; HIDDEN],
}

impl Activations {
    fn new() -> Self {
        Activations {
            h1: [0.0; HIDDEN],
            h2: [0.0; HIDDEN],
        }
    }
}

impl Layers<'_> {
    #[inline]
    fn forward(&self, x: &[f64], buf: &mut Activations) -> f64 {
        let d = self.d_in;
        for o in 0..HIDDEN {
            buf.h1[o] = relu(self.b1[o] + dot(&self.w1[o * d..(o + 1) * d], x));
        }
        for o in 0..HIDDEN {
            buf.h2[o] = relu(self.b2[o] + dot(&self.w2[o * HIDDEN..(o + 1) * HIDDEN], &buf.h1));
        }
        self.b3 + dot(self.w3, &buf.h2)
    }
}

#[inline]
fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Dot product with four interleaved accumulators; the summation order is fixed.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = init_params(4, 7).unwrap();
        let b = init_params(4, 7).unwrap();
        assert_eq!(a.as_flat(), b.as_flat());
        assert_eq!(a.b1().len(), HIDDEN);
        assert!(a.b1().iter().all(|&v| v == 0.0));
        assert!(a.b2().iter().all(|&v| v == 0.0));
        assert_eq!(a.b3(), 0.0);
        let c = init_params(4, 8).unwrap();
        assert!(a.w1().iter().zip(c.w1()).any(|(x, y)| x != y));
    }

    #[test]
    fn init_respects_glorot_limits() {
        let p = init_params(3, 1).unwrap();
        let lim1 = libm::sqrt(6.0 / (3 + HIDDEN) as f64);
        let lim2 = libm::sqrt(6.0 / (2 * HIDDEN) as f64);
        assert!(p.w1().iter().all(|v| v.abs() <= lim1));
        assert!(p.w2().iter().all(|v| v.abs() <= lim2));
        assert!(p.w2().iter().any(|v| v.abs() > 0.5 * lim2));
    }

    #[test]
    fn zero_input_dimension_is_rejected() {
        assert_eq!(
            init_params(0, 1).unwrap_err(),
            Error::InvalidDimension {
                expected: 1,
                got: 0
            }
        );
    }

    #[test]
    fn zero_and_constant_networks() {
        let mut p = MlpParams::zeros(3).unwrap();
        assert_eq!(p.forward(&[1.0, -2.0, 5.0]).unwrap(), 0.0);
        *p.b3_mut() = 2.5;
        assert_eq!(p.forward(&[1.0, -2.0, 5.0]).unwrap(), 2.5);
        assert_eq!(p.forward(&[0.0, 0.0, 0.0]).unwrap(), 2.5);
    }

    #[test]
    fn forward_is_pure_and_matches_batch() {
        let p = init_params(5, 3).unwrap();
        let snapshot = p.clone();
        let x = [0.3, -1.2, 0.7, 2.0, -0.1];
        let a = p.forward(&x).unwrap();
        let b = p.forward(&x).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(p, snapshot);
        let m = Matrix::from_rows(&[x, [1.0; 5]]).unwrap();
        let rows = p.forward_rows(&m).unwrap();
        assert_eq!(rows[0].to_bits(), a.to_bits());
        assert_eq!(rows[1].to_bits(), p.forward(&[1.0; 5]).unwrap().to_bits());
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let p = MlpParams::zeros(3).unwrap();
        assert_eq!(
            p.forward(&[1.0]).unwrap_err(),
            Error::InvalidDimension {
                expected: 3,
                got: 1
            }
        );
    }

    #[test]
    fn perfect_fit_has_zero_loss_and_gradient() {
        let p = init_params(2, 11).unwrap();
        let x = Matrix::from_rows(&[[0.5, -0.5], [1.5, 0.25], [-1.0, 2.0]]).unwrap();
        let y = p.forward_rows(&x).unwrap();
        let (loss, grad) = p.loss_and_gradient(&x, &y).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.as_flat().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn zero_network_single_sample_gradient() {
        let p = MlpParams::zeros(2).unwrap();
        let x = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let (loss, grad) = p.loss_and_gradient(&x, &[2.0]).unwrap();
        assert_eq!(loss, 4.0);
        assert_eq!(grad.b3(), -4.0);
        // Hidden units are dead, so nothing else receives gradient.
        assert!(grad.as_flat()[..grad.as_flat().len() - 1]
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn empty_batch_is_rejected() {
        let p = MlpParams::zeros(2).unwrap();
        let x = Matrix::zeros(0, 2);
        assert!(matches!(
            p.loss_and_gradient(&x, &[]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn dot_handles_remainders() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 1.0, 1.0, 1.0, 2.0, 2.0];
        assert_eq!(dot(&a, &b), 32.0);
        assert_eq!(dot(&[], &[]), 0.0);
    }
}
