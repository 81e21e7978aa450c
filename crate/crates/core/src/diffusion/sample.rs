//! Iterative reverse-process sampling: one denoising step given a noise
//! estimate, the network-driven step, and full map-conditioned generation
//! from pure noise.

use super::unet::{denoiser_apply, DenoiserParams};
use super::{check_same_shape, NoiseSchedule};
use crate::error::{Error, Result};
use crate::raster::RasterGrid;
use crate::rng::{derive_seed, stream_rng, streams};
use ndarray::{Array2, Array3, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// One reverse step from a given noise estimate:
/// `l_{t−1} = (l_t − ((1−α_t)/√(1−γ_t))·eps_hat)/√α_t + √(1−α_t)·noise`.
///
/// The final step (`t = 1`) must not add noise, so `noise` is required to
/// be zero there.
pub fn sample_step_from_eps(
    l_t: &Array2<f64>,
    eps_hat: &Array2<f64>,
    schedule: &NoiseSchedule,
    t: usize,
    noise: &Array2<f64>,
) -> Result<Array2<f64>> {
    if t < 1 || t > schedule.t_max() {
        return Err(Error::validation(format!(
            "diffusion step {t} outside 1..={}",
            schedule.t_max()
        )));
    }
    check_same_shape(l_t, eps_hat)?;
    check_same_shape(l_t, noise)?;
    if t == 1 && noise.iter().any(|&v| v != 0.0) {
        return Err(Error::validation(
            "the final sampling step (t = 1) must use zero noise",
        ));
    }
    let a = schedule.alpha(t);
    let g = schedule.gamma(t);
    let mean = (l_t - &((1.0 - a) / (1.0 - g).sqrt() * eps_hat)) / a.sqrt();
    Ok(mean + (1.0 - a).sqrt() * noise)
}

/// One reverse step driven by the denoiser's noise prediction.
pub fn sample_step(
    params: &DenoiserParams,
    map: &Array3<f64>,
    l_t: &Array2<f64>,
    schedule: &NoiseSchedule,
    t: usize,
    noise: &Array2<f64>,
) -> Result<Array2<f64>> {
    let eps_hat = denoiser_apply(params, map, l_t, t)?;
    sample_step_from_eps(l_t, &eps_hat, schedule, t, noise)
}

/// Generates `count` trajectory images conditioned on a street-map
/// raster: each sample starts from standard-normal noise and runs the
/// reverse chain from `t = T` down to 1, then is rescaled from the
/// model's [−1, 1] range to a [0, 1] raster (clamped).
///
/// Samples are independent and deterministic per `(seed, index)`, so the
/// result does not depend on thread count.
pub fn generate(
    params: &DenoiserParams,
    map: &RasterGrid,
    schedule: &NoiseSchedule,
    count: usize,
    seed: u64,
) -> Result<Vec<RasterGrid>> {
    if map.channels() != 2 {
        return Err(Error::validation(format!(
            "conditioning raster must have 2 channels, got {}",
            map.channels()
        )));
    }
    let model_map = map.data();
    let n = map.n();
    (0..count)
        .into_par_iter()
        .map(|index| {
            let mut rng = stream_rng(derive_seed(seed, index as u64), streams::GENERATE);
            let mut l: Array2<f64> =
                Array2::from_shape_fn((n, n), |_| rng.sample(StandardNormal));
            for t in (1..=schedule.t_max()).rev() {
                let noise = if t > 1 {
                    Array2::from_shape_fn((n, n), |_| rng.sample(StandardNormal))
                } else {
                    Array2::zeros((n, n))
                };
                l = sample_step(params, model_map, &l, schedule, t, &noise)?;
                if l.iter().any(|v| !v.is_finite()) {
                    return Err(Error::numeric(format!(
                        "sample {index} became non-finite at step {t}"
                    )));
                }
            }
            let img = l.mapv(|v| ((v + 1.0) / 2.0).clamp(0.0, 1.0));
            let data = img.insert_axis(Axis(0));
            RasterGrid::from_array(*map.extent(), data)
        })
        .collect()
}
