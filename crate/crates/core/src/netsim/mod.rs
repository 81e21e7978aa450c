//! Multi-cell wireless network simulation over moving users.
//!
//! The environment is a hexagonal layout of dual-band base stations with a
//! 3GPP urban-macrocell path-loss model and spatially correlated shadow
//! fading. Users follow trajectories (from any mobility model, recorded
//! data, or the diffusion sampler), an association policy assigns each user
//! a (station, band) serving cell every step, and per-step KPIs — 5th
//! percentile user rate, log-utility, handover count — measure how well the
//! policy handles the load the trajectories create.
//!
//! The module splits into:
//! - layout and domain types (this file): [`Band`], [`BaseStation`],
//!   [`NetworkState`], [`hex_layout`];
//! - [`channel`]: path loss, shadow fields, SINR;
//! - [`policy`]: the [`AssociationPolicy`] trait and the max-SINR,
//!   load-aware greedy, and external-process policies;
//! - [`episode`]: rates, KPIs, and the step-based [`run_episode`] loop.

mod channel;
mod episode;
mod policy;

pub use channel::{
    candidate_sinrs, noise_dbm, pathloss_db, rx_power_dbm, shadow_db, sinr_db, ShadowField,
};
pub use episode::{
    kpis, kpis_with_base, run_episode, user_rates, EpisodeResult, EpisodeSummary, KpiRecord,
};
pub use policy::{
    max_sinr_policy, Association, AssociationPolicy, CandidateSinr, ExternPolicy,
    LoadAwareGreedyPolicy, MaxSinrPolicy, PolicyRequest,
};

use crate::error::{Error, Result};
use crate::geodata::{Extent, Point};
use serde::{Deserialize, Serialize};

/// A carrier the stations transmit on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub carrier_ghz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
}

impl Band {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_ghz > 0.0) || !(self.bandwidth_hz > 0.0) {
            return Err(Error::validation(format!(
                "band carrier ({} GHz) and bandwidth ({} Hz) must be positive",
                self.carrier_ghz, self.bandwidth_hz
            )));
        }
        if !self.tx_power_dbm.is_finite() || !self.noise_figure_db.is_finite() {
            return Err(Error::validation(
                "band tx power and noise figure must be finite".to_string(),
            ));
        }
        Ok(())
    }
}

/// The dual-band configuration used throughout: a 3.7 GHz / 40 MHz capacity
/// layer and a 0.7 GHz / 10 MHz coverage layer.
pub fn default_bands() -> Vec<Band> {
    vec![
        Band {
            carrier_ghz: 3.7,
            bandwidth_hz: 40e6,
            tx_power_dbm: 43.0,
            noise_figure_db: 9.0,
        },
        Band {
            carrier_ghz: 0.7,
            bandwidth_hz: 10e6,
            tx_power_dbm: 40.0,
            noise_figure_db: 9.0,
        },
    ]
}

/// A transmitter site. All stations in a layout share the same band list,
/// indexed consistently, so `(station id, band index)` identifies a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: usize,
    pub position: Point,
    pub height: f64,
    pub bands: Vec<Band>,
}

/// One user's slot in the episode state machine.
#[derive(Debug, Clone, PartialEq)]
pub struct UserState {
    pub id: usize,
    pub position: Point,
    /// Index of the next trajectory point to consume.
    pub cursor: usize,
}

/// Everything the channel and policy layers read: stations, user positions,
/// and the current association.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub stations: Vec<BaseStation>,
    pub users: Vec<UserState>,
    /// Antenna height of every user terminal, meters.
    pub ut_height: f64,
    /// Per-user serving `(station, band)`, parallel to `users`. Empty until
    /// the first association round.
    pub association: Association,
    /// Seconds of simulated time per step.
    pub time_step: f64,
    /// Total handovers accumulated so far; never decreases within an episode.
    pub handover_count: usize,
}

impl NetworkState {
    /// Number of bands per station (uniform across the layout).
    pub fn n_bands(&self) -> usize {
        self.stations.first().map_or(0, |s| s.bands.len())
    }
}

/// Full configuration of one episode, JSON-serializable so a run can be
/// reproduced from its manifest alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    /// Nearest-neighbor distance of the station lattice, meters.
    pub spacing_m: f64,
    pub bs_height_m: f64,
    pub ut_height_m: f64,
    pub bands: Vec<Band>,
    /// Shadow-fading standard deviation, dB (0 disables shadowing).
    pub sigma_db: f64,
    /// Shadow-fading decorrelation distance, meters.
    pub decorr_m: f64,
    /// Sinusoid components per shadow field.
    pub n_sinusoids: usize,
    pub user_count: usize,
    /// Number of simulation steps.
    pub horizon: usize,
    pub step_seconds: f64,
    /// Handover penalty weight in the per-step reward.
    pub handover_lambda: f64,
    /// Base of the logarithm in the rate utility.
    pub utility_log_base: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            spacing_m: 500.0,
            bs_height_m: 25.0,
            ut_height_m: 1.5,
            bands: default_bands(),
            sigma_db: 6.0,
            decorr_m: 50.0,
            n_sinusoids: 100,
            user_count: 100,
            horizon: 100,
            step_seconds: 1.0,
            handover_lambda: 0.0,
            utility_log_base: 10.0,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing_m > 0.0) {
            return Err(Error::validation(format!(
                "station spacing must be positive, got {}",
                self.spacing_m
            )));
        }
        if !(self.bs_height_m > 0.0) || !(self.ut_height_m > 0.0) {
            return Err(Error::validation(
                "station and user heights must be positive".to_string(),
            ));
        }
        if self.bands.is_empty() {
            return Err(Error::validation("at least one band is required".to_string()));
        }
        for band in &self.bands {
            band.validate()?;
        }
        if !(self.sigma_db >= 0.0) {
            return Err(Error::validation(format!(
                "shadow sigma must be non-negative, got {} dB",
                self.sigma_db
            )));
        }
        if !(self.decorr_m > 0.0) {
            return Err(Error::validation(format!(
                "shadow decorrelation distance must be positive, got {} m",
                self.decorr_m
            )));
        }
        if self.n_sinusoids == 0 {
            return Err(Error::validation(
                "shadow fields need at least one sinusoid".to_string(),
            ));
        }
        if self.user_count == 0 || self.horizon == 0 {
            return Err(Error::validation(
                "user count and horizon must be positive".to_string(),
            ));
        }
        if !(self.step_seconds > 0.0) {
            return Err(Error::validation(format!(
                "step duration must be positive, got {} s",
                self.step_seconds
            )));
        }
        if !(self.utility_log_base > 1.0) {
            return Err(Error::validation(format!(
                "utility log base must exceed 1, got {}",
                self.utility_log_base
            )));
        }
        if !self.handover_lambda.is_finite() {
            return Err(Error::validation("handover lambda must be finite".to_string()));
        }
        Ok(())
    }
}

/// Lays out base stations on a triangular lattice covering `extent` plus one
/// guard ring, with the default band set and station height.
///
/// Rows are `spacing·√3/2` apart, every other row is shifted by `spacing/2`,
/// so every station's nearest neighbors sit exactly `spacing` away. The
/// guard ring (one extra row/column beyond every edge) keeps interference
/// conditions at the extent boundary comparable to the interior.
pub fn hex_layout(extent: &Extent, spacing: f64) -> Result<Vec<BaseStation>> {
    hex_layout_with(extent, spacing, 25.0, &default_bands())
}

/// [`hex_layout`] with explicit station height and band list.
pub fn hex_layout_with(
    extent: &Extent,
    spacing: f64,
    height: f64,
    bands: &[Band],
) -> Result<Vec<BaseStation>> {
    if !(spacing > 0.0) {
        return Err(Error::validation(format!(
            "station spacing must be positive, got {spacing}"
        )));
    }
    if !(height > 0.0) {
        return Err(Error::validation(format!(
            "station height must be positive, got {height}"
        )));
    }
    if bands.is_empty() {
        return Err(Error::validation("at least one band is required".to_string()));
    }
    for band in bands {
        band.validate()?;
    }
    let pitch = spacing * 3f64.sqrt() / 2.0;
    let y0 = extent.origin_y;
    let x0 = extent.origin_x;
    let x1 = extent.origin_x + extent.side;
    // Rows covering [y0, y0 + side] plus one guard row on each side.
    let rows_in = (extent.side / pitch).floor() as i64;
    let mut stations = Vec::new();
    let mut id = 0;
    for r in -1..=(rows_in + 1) {
        let y = y0 + r as f64 * pitch;
        let offset = if r.rem_euclid(2) == 1 { spacing / 2.0 } else { 0.0 };
        // Columns covering [x0, x1] plus one guard column on each side.
        let c_lo = (-offset / spacing).floor() as i64 - 1;
        let c_hi = ((x1 - offset - x0) / spacing).ceil() as i64 + 1;
        for c in c_lo..=c_hi {
            let x = x0 + offset + c as f64 * spacing;
            if x < x0 - spacing - 1e-9 || x > x1 + spacing + 1e-9 {
                continue;
            }
            stations.push(BaseStation {
                id,
                position: Point::new(x, y),
                height,
                bands: bands.to_vec(),
            });
            id += 1;
        }
    }
    Ok(stations)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extent_1920() -> Extent {
        Extent::new(0.0, 0.0, 1920.0, 10.0).unwrap()
    }

    #[test]
    fn lattice_has_expected_pitch_and_interior_rows() {
        let stations = hex_layout(&extent_1920(), 500.0).unwrap();
        let mut ys: Vec<f64> = stations.iter().map(|s| s.position.y).collect();
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ys.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        // Consecutive rows are spacing·√3/2 apart.
        let pitch = ys[1] - ys[0];
        assert!((pitch - 433.0127018922193).abs() < 1e-9);
        // Five rows fall inside the extent (y in [0, 1920]): 0, 433, 866,
        // 1299, 1732 — plus one guard row on each side.
        let interior = ys.iter().filter(|y| **y >= 0.0 && **y <= 1920.0).count();
        assert_eq!(interior, 5);
        assert_eq!(ys.len(), 7);
    }

    #[test]
    fn nearest_neighbor_distance_equals_spacing() {
        let stations = hex_layout(&extent_1920(), 500.0).unwrap();
        for a in &stations {
            let mut nearest = f64::INFINITY;
            for b in &stations {
                if a.id != b.id {
                    nearest = nearest.min(a.position.dist(&b.position));
                }
            }
            assert!(
                (nearest - 500.0).abs() < 1e-6,
                "station {} nearest neighbor at {nearest}",
                a.id
            );
        }
    }

    #[test]
    fn doubling_spacing_quarters_the_station_count() {
        // Density scales with 1/spacing²; a large extent keeps the guard
        // ring from skewing the ratio.
        let extent = Extent::new(0.0, 0.0, 7680.0, 40.0).unwrap();
        let fine = hex_layout(&extent, 250.0).unwrap().len() as f64;
        let coarse = hex_layout(&extent, 500.0).unwrap().len() as f64;
        let ratio = fine / coarse;
        assert!((3.0..=5.0).contains(&ratio), "count ratio {ratio}");
    }

    #[test]
    fn layout_is_deterministic_and_ids_are_sequential() {
        let a = hex_layout(&extent_1920(), 500.0).unwrap();
        let b = hex_layout(&extent_1920(), 500.0).unwrap();
        assert_eq!(a, b);
        for (i, s) in a.iter().enumerate() {
            assert_eq!(s.id, i);
        }
    }

    #[test]
    fn guard_ring_extends_beyond_every_edge() {
        let stations = hex_layout(&extent_1920(), 500.0).unwrap();
        assert!(stations.iter().any(|s| s.position.y < 0.0));
        assert!(stations.iter().any(|s| s.position.y > 1920.0));
        assert!(stations.iter().any(|s| s.position.x < 0.0));
        assert!(stations.iter().any(|s| s.position.x > 1920.0));
        // ... but not by more than one lattice step.
        for s in &stations {
            assert!(s.position.x >= -500.0 - 1e-9 && s.position.x <= 2420.0 + 1e-9);
            assert!(s.position.y >= -433.02 && s.position.y <= 1920.0 + 433.02);
        }
    }

    #[test]
    fn layout_rejects_bad_parameters() {
        let e = extent_1920();
        assert!(hex_layout(&e, 0.0).is_err());
        assert!(hex_layout(&e, -10.0).is_err());
        assert!(hex_layout_with(&e, 500.0, 0.0, &default_bands()).is_err());
        assert!(hex_layout_with(&e, 500.0, 25.0, &[]).is_err());
    }

    #[test]
    fn episode_config_validates() {
        assert!(EpisodeConfig::default().validate().is_ok());
        let mut cfg = EpisodeConfig::default();
        cfg.bands.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = EpisodeConfig::default();
        cfg.sigma_db = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = EpisodeConfig::default();
        cfg.horizon = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = EpisodeConfig::default();
        cfg.utility_log_base = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn episode_config_round_trips_through_json() {
        let cfg = EpisodeConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: EpisodeConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        // Partial configs fill in defaults.
        let partial: EpisodeConfig = serde_json::from_str(r#"{"user_count": 7}"#).unwrap();
        assert_eq!(partial.user_count, 7);
        assert_eq!(partial.spacing_m, 500.0);
    }
}
