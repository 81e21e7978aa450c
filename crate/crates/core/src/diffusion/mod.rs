//! Conditional denoising diffusion on trajectory rasters: noise schedule,
//! forward/posterior process math, the noise-prediction network, training,
//! sampling, and checkpointing.
//!
//! Process math operates on plain `N×N` images in model space, where
//! trajectory rasters live in [−1, 1] before noising; values outside that
//! range occur freely during diffusion. The index convention is
//! `q(l_t | l_{t-1})` with coefficient `α_t`, so `γ_t = Π_{i=1..t} α_i`
//! and `t` runs from 1 to `T`.

mod checkpoint;
mod nn;
mod sample;
mod train;
mod unet;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use sample::{generate, sample_step, sample_step_from_eps};
pub use train::{batch_loss, loss_and_grad, train, LossLog, OptConfig, TrainBatch};
pub use unet::{denoiser_apply, DenoiserParams, NetConfig};

use crate::error::{Error, Result};
use ndarray::Array2;

/// Per-step noise levels `α_t` and their running products `γ_t`.
///
/// Steps are 1-based: `alpha(1)` is the first noising step. `gamma(0)` is
/// defined as 1 so posterior formulas hold at `t = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alpha: Vec<f64>,
    gamma: Vec<f64>,
}

impl NoiseSchedule {
    /// Number of diffusion steps `T`.
    pub fn t_max(&self) -> usize {
        self.alpha.len()
    }

    /// `α_t` for `t` in `1..=T`.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    /// `γ_t` for `t` in `0..=T`, with `γ_0 = 1`.
    pub fn gamma(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.gamma[t - 1]
        }
    }

    /// Whether the terminal marginal is near-pure noise (`√γ_T < 0.05`),
    /// the regime where sampling from a standard normal start is sound.
    pub fn is_generation_ready(&self) -> bool {
        self.gamma(self.t_max()).sqrt() < 0.05
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t < 1 || t > self.t_max() {
            return Err(Error::validation(format!(
                "diffusion step {t} outside 1..={}",
                self.t_max()
            )));
        }
        Ok(())
    }

    /// Per-step α values (checkpoint serialization).
    pub(crate) fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    /// Rebuilds a schedule from stored per-step α values.
    pub(crate) fn from_alphas(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::validation(format!(
                "schedule needs at least 2 steps, got {}",
                alpha.len()
            )));
        }
        if alpha.iter().any(|&a| !(0.0 < a && a < 1.0)) {
            return Err(Error::validation(
                "per-step noise levels must lie strictly inside (0, 1)",
            ));
        }
        let mut gamma = Vec::with_capacity(alpha.len());
        let mut prod = 1.0;
        for &a in &alpha {
            prod *= a;
            gamma.push(prod);
        }
        Ok(NoiseSchedule { alpha, gamma })
    }
}

/// Builds a linear-β schedule: `β` linearly spaced from `beta_start` to
/// `beta_end` over `T` steps, `α_t = 1 − β_t`, `γ` by cumulative product.
pub fn make_schedule(t_steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if t_steps < 2 {
        return Err(Error::validation(format!(
            "schedule needs at least 2 steps, got {t_steps}"
        )));
    }
    if !(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::validation(format!(
            "betas must satisfy 0 < start ≤ end < 1, got [{beta_start}, {beta_end}]"
        )));
    }
    let mut alpha = Vec::with_capacity(t_steps);
    let mut gamma = Vec::with_capacity(t_steps);
    let mut prod = 1.0;
    for k in 0..t_steps {
        let beta = beta_start + (beta_end - beta_start) * k as f64 / (t_steps - 1) as f64;
        let a = 1.0 - beta;
        prod *= a;
        alpha.push(a);
        gamma.push(prod);
    }
    Ok(NoiseSchedule { alpha, gamma })
}

pub(crate) fn check_same_shape(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::validation(format!(
            "image shapes differ: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// One forward noising step: a sample of `q(l_t | l_{t-1})`, namely
/// `√α_t·l + √(1−α_t)·noise`.
pub fn forward_step(l: &Array2<f64>, alpha_t: f64, noise: &Array2<f64>) -> Result<Array2<f64>> {
    check_same_shape(l, noise)?;
    Ok(alpha_t.sqrt() * l + (1.0 - alpha_t).sqrt() * noise)
}

/// Jump straight to step `t` of the forward chain:
/// `l_t = √γ_t·l_0 + √(1−γ_t)·eps`.
pub fn forward_marginal(
    l0: &Array2<f64>,
    schedule: &NoiseSchedule,
    t: usize,
    eps: &Array2<f64>,
) -> Result<Array2<f64>> {
    schedule.check_t(t)?;
    check_same_shape(l0, eps)?;
    let g = schedule.gamma(t);
    Ok(g.sqrt() * l0 + (1.0 - g).sqrt() * eps)
}

/// Mean and variance of the exact reverse posterior
/// `q(l_{t-1} | l_t, l_0)`.
pub fn posterior_params(
    l0: &Array2<f64>,
    lt: &Array2<f64>,
    schedule: &NoiseSchedule,
    t: usize,
) -> Result<(Array2<f64>, f64)> {
    schedule.check_t(t)?;
    check_same_shape(l0, lt)?;
    let a = schedule.alpha(t);
    let g_prev = schedule.gamma(t - 1);
    let g = schedule.gamma(t);
    let denom = 1.0 - g;
    let coef0 = g_prev.sqrt() * (1.0 - a) / denom;
    let coeft = a.sqrt() * (1.0 - g_prev) / denom;
    let mu = coef0 * l0 + coeft * lt;
    let sigma2 = (1.0 - g_prev) * (1.0 - a) / denom;
    Ok((mu, sigma2))
}

/// Recovers the clean image implied by a noise estimate:
/// `(l_t − √(1−γ_t)·eps_hat) / √γ_t`.
pub fn estimate_x0(
    lt: &Array2<f64>,
    eps_hat: &Array2<f64>,
    schedule: &NoiseSchedule,
    t: usize,
) -> Result<Array2<f64>> {
    schedule.check_t(t)?;
    check_same_shape(lt, eps_hat)?;
    let g = schedule.gamma(t);
    Ok((lt - &((1.0 - g).sqrt() * eps_hat)) / g.sqrt())
}
