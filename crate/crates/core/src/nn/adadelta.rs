use crate::nn::{Gradient, MlpParams};
use crate::{Error, Result};

/// Per-parameter Adadelta accumulators.
///
/// `lr_scale` multiplies every update; the plateau callback halves it and
/// nothing ever raises it.
#[derive(Debug, Clone, PartialEq)]
pub struct AdadeltaState {
    pub accum_grad: MlpParams,
    pub accum_update: MlpParams,
    pub rho: f64,
    pub epsilon: f64,
    pub lr_scale: f64,
}

impl AdadeltaState {
    pub fn new(d_in: usize, rho: f64, epsilon: f64, lr_scale: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::invalid("adadelta rho must lie in (0, 1)"));
        }
        if epsilon.is_nan()
            || epsilon <= 0.0
            || lr_scale.is_nan()
            || lr_scale <= 0.0
            || lr_scale > 1.0
        {
            return Err(Error::invalid(
                "adadelta epsilon must be positive and lr_scale in (0, 1]",
            ));
        }
        Ok(AdadeltaState {
            accum_grad: MlpParams::zeros(d_in)?,
            accum_update: MlpParams::zeros(d_in)?,
            rho,
            epsilon,
            lr_scale,
        })
    }

    /// Halves the learning-rate scale.
    pub fn halve_lr(&mut self) {
        self.lr_scale *= 0.5;
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut MlpParams, grad: &Gradient) -> Result<()> {
        Error::check_dim(params.d_in(), grad.d_in())?;
        Error::check_dim(params.d_in(), self.accum_grad.d_in())?;
        let (rho, eps, lr) = (self.rho, self.epsilon, self.lr_scale);
        let theta = params.as_flat_mut().iter_mut();
        let eg = self.accum_grad.as_flat_mut().iter_mut();
        let eu = self.accum_update.as_flat_mut().iter_mut();
        for (((t, &g), eg), eu) in theta.zip(grad.as_flat()).zip(eg).zip(eu) {
            *eg = rho * *eg + (1.0 - rho) * g * g;
            let delta = -lr * libm::sqrt(*eu + eps) / libm::sqrt(*eg + eps) * g;
            *eu = rho * *eu + (1.0 - rho) * delta * delta;
            *t += delta;
            flush_subnormal(eg);
            flush_subnormal(eu);
        }
        Ok(())
    }
}

fn flush_subnormal(v: &mut f64) {
    if v.abs() < f64::MIN_POSITIVE {
        *v = 0.0;
    }
}
