//! Baseline mobility models: random waypoint and Gauss-Markov, each in a
//! free-space and a street-restricted variant.
//!
//! All generators are pure functions of (config, seed): the same inputs
//! always yield the same trajectory, so batches can be produced in
//! parallel with disjoint seeds.

mod free;
mod mapped;
mod street;

pub use free::{gen_gm, gen_rwp};
pub use mapped::{gen_m_gm, gen_m_rwp};
pub use street::{bfs_path, largest_street_component, GridPath};

use crate::error::{Error, Result};

/// Which mobility model a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MobilityModel {
    Rwp,
    Gm,
    MRwp,
    MGm,
}

/// Parameters shared by all mobility models.
///
/// The Gauss-Markov processes use the variance-stabilized recurrence
/// `s_t = a·s_{t-1} + (1-a)·μ + σ·sqrt(1-a²)·w_t`, so `gm_sigma` (and
/// `gm_sigma_dir` for heading, in radians) are stationary standard
/// deviations regardless of the memory level `gm_alpha`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MobilityConfig {
    pub model: MobilityModel,
    /// Lower speed bound for waypoint legs, m/s.
    pub speed_min: f64,
    /// Upper speed bound for waypoint legs, m/s.
    pub speed_max: f64,
    /// Gauss-Markov memory level in [0, 1]; 1 freezes the state.
    pub gm_alpha: f64,
    /// Stationary mean of the Gauss-Markov speed process, m/s.
    pub gm_mean_speed: f64,
    /// Stationary standard deviation of the speed process, m/s.
    pub gm_sigma: f64,
    /// Stationary standard deviation of the heading process, radians.
    pub gm_sigma_dir: f64,
    /// Simulation step length, seconds.
    pub step_seconds: f64,
    /// Number of emitted points per trajectory.
    pub horizon_steps: usize,
}

impl MobilityConfig {
    /// Pedestrian-scale defaults for the given model: 0.5–2.0 m/s on 1 s
    /// steps, matched to 10 m raster cells.
    pub fn defaults(model: MobilityModel) -> Self {
        MobilityConfig {
            model,
            speed_min: 0.5,
            speed_max: 2.0,
            gm_alpha: 0.9,
            gm_mean_speed: 1.25,
            gm_sigma: 0.4,
            gm_sigma_dir: 0.3,
            step_seconds: 1.0,
            horizon_steps: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.speed_min && self.speed_min <= self.speed_max) {
            return Err(Error::validation(format!(
                "speed bounds must satisfy 0 ≤ min ≤ max, got [{}, {}]",
                self.speed_min, self.speed_max
            )));
        }
        if !(0.0..=1.0).contains(&self.gm_alpha) {
            return Err(Error::validation(format!(
                "gm_alpha must lie in [0, 1], got {}",
                self.gm_alpha
            )));
        }
        if !(self.step_seconds > 0.0) {
            return Err(Error::validation(format!(
                "step_seconds must be positive, got {}",
                self.step_seconds
            )));
        }
        if self.horizon_steps < 1 {
            return Err(Error::validation("horizon_steps must be at least 1"));
        }
        if self.gm_sigma < 0.0 || self.gm_sigma_dir < 0.0 {
            return Err(Error::validation("Gauss-Markov sigmas must be nonnegative"));
        }
        Ok(())
    }

    pub(crate) fn expect_model(&self, model: MobilityModel) -> Result<()> {
        self.validate()?;
        if self.model != model {
            return Err(Error::validation(format!(
                "config selects {:?} but generator implements {:?}",
                self.model, model
            )));
        }
        Ok(())
    }
}

/// One draw of the variance-stabilized Gauss-Markov recurrence.
pub(crate) fn gm_step(prev: f64, mean: f64, sigma: f64, alpha: f64, w: f64) -> f64 {
    alpha * prev + (1.0 - alpha) * mean + sigma * (1.0 - alpha * alpha).sqrt() * w
}
