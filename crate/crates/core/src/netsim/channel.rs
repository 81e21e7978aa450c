//! Radio propagation: path loss, correlated shadow fading, and SINR.
//!
//! Path loss follows the 3GPP TR 38.901 urban-macrocell NLOS curve; every
//! link is treated as NLOS so the channel is a deterministic function of
//! geometry and the shadow field. Shadowing is a sum-of-sinusoids random
//! field, one independent field per (station, band), with wavenumber
//! magnitudes drawn so the field's spatial autocorrelation approximates
//! `exp(−d / decorr_m)`.

use crate::error::{Error, Result};
use crate::geodata::Point;
use crate::netsim::policy::CandidateSinr;
use crate::netsim::{BaseStation, Band, NetworkState};
use crate::rng::{stream_rng, streams};
use rand::Rng;
use std::f64::consts::TAU;

/// Urban-macrocell NLOS path loss in dB.
///
/// `PL = 13.54 + 39.08·log10(d3D) + 20·log10(f_GHz) − 0.6·(ut_height − 1.5)`
/// with `d3D = sqrt(d2d² + (bs_height − ut_height)²)`. The model is not
/// specified below 1 m ground distance; shorter links are an error.
pub fn pathloss_db(band: &Band, d2d: f64, bs_height: f64, ut_height: f64) -> Result<f64> {
    band.validate()?;
    if !(d2d >= 1.0) {
        return Err(Error::validation(format!(
            "path-loss model requires ground distance >= 1 m, got {d2d}"
        )));
    }
    let dh = bs_height - ut_height;
    let d3d = (d2d * d2d + dh * dh).sqrt();
    Ok(13.54 + 39.08 * d3d.log10() + 20.0 * band.carrier_ghz.log10() - 0.6 * (ut_height - 1.5))
}

/// Thermal noise power over the band's bandwidth, in dBm, including the
/// receiver noise figure: `−174 + 10·log10(bandwidth_hz) + noise_figure`.
pub fn noise_dbm(band: &Band) -> f64 {
    -174.0 + 10.0 * band.bandwidth_hz.log10() + band.noise_figure_db
}

/// One component of a sum-of-sinusoids field: a plane wave with wavevector
/// `(kx, ky)` rad/m and phase offset rad.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Sinusoid {
    kx: f64,
    ky: f64,
    phase: f64,
}

/// Spatially correlated shadow fading for every (station, band) cell.
///
/// Each cell gets an independent realization of
/// `σ·sqrt(2/N)·Σ_k cos(k_k·pos + φ_k)` whose directions and phases are
/// uniform and whose wavenumber magnitudes follow the radial density
/// `p(k) ∝ k / (k² + a²)^{3/2}` with `a = 1/decorr_m`. That density is the
/// 2D spectral measure of the exponential autocorrelation `exp(−a·d)`, so
/// the field decorrelates to `e^{−1}` at one decorrelation distance. The
/// inverse-CDF draw is `k = a·sqrt(1/(1−u)² − 1)` for uniform `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowField {
    sigma_db: f64,
    decorr_m: f64,
    n_stations: usize,
    n_bands: usize,
    /// Indexed `station · n_bands + band`.
    components: Vec<Vec<Sinusoid>>,
}

impl ShadowField {
    /// Draws independent fields for `n_stations × n_bands` cells. The same
    /// `(seed, shape, parameters)` always produces the same field.
    pub fn generate(
        n_stations: usize,
        n_bands: usize,
        sigma_db: f64,
        decorr_m: f64,
        n_sinusoids: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_stations == 0 || n_bands == 0 {
            return Err(Error::validation(
                "shadow field needs at least one station and band".to_string(),
            ));
        }
        if !(sigma_db >= 0.0) || !(decorr_m > 0.0) || n_sinusoids == 0 {
            return Err(Error::validation(format!(
                "invalid shadow parameters: sigma {sigma_db} dB, decorrelation {decorr_m} m, \
                 {n_sinusoids} sinusoids"
            )));
        }
        let mut rng = stream_rng(seed, streams::NET_INIT);
        let a = 1.0 / decorr_m;
        let components = (0..n_stations * n_bands)
            .map(|_| {
                (0..n_sinusoids)
                    .map(|_| {
                        let theta = rng.gen_range(0.0..TAU);
                        let phase = rng.gen_range(0.0..TAU);
                        let u: f64 = rng.gen();
                        let k = a * (1.0 / ((1.0 - u) * (1.0 - u)) - 1.0).sqrt();
                        Sinusoid {
                            kx: k * theta.cos(),
                            ky: k * theta.sin(),
                            phase,
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(ShadowField {
            sigma_db,
            decorr_m,
            n_stations,
            n_bands,
            components,
        })
    }

    pub fn sigma_db(&self) -> f64 {
        self.sigma_db
    }

    pub fn decorr_m(&self) -> f64 {
        self.decorr_m
    }

    pub fn n_stations(&self) -> usize {
        self.n_stations
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    /// Shadow value in dB for one cell at one position.
    pub fn value(&self, station: usize, band: usize, pos: Point) -> Result<f64> {
        if station >= self.n_stations || band >= self.n_bands {
            return Err(Error::validation(format!(
                "no shadow field for station {station} band {band} \
                 ({}×{} cells initialized)",
                self.n_stations, self.n_bands
            )));
        }
        let comps = &self.components[station * self.n_bands + band];
        let scale = self.sigma_db * (2.0 / comps.len() as f64).sqrt();
        let sum: f64 = comps
            .iter()
            .map(|s| (s.kx * pos.x + s.ky * pos.y + s.phase).cos())
            .sum();
        Ok(scale * sum)
    }
}

/// Free-function form of [`ShadowField::value`].
pub fn shadow_db(field: &ShadowField, station: usize, band: usize, position: Point) -> Result<f64> {
    field.value(station, band, position)
}

/// Received power in dBm from one station's band at a user position:
/// `tx_power − path loss − shadow`. Ground distances below the path-loss
/// model's 1 m validity floor are clamped to 1 m.
pub fn rx_power_dbm(
    station: &BaseStation,
    band_idx: usize,
    field: &ShadowField,
    position: Point,
    ut_height: f64,
) -> Result<f64> {
    let band = station.bands.get(band_idx).ok_or_else(|| {
        Error::validation(format!(
            "station {} has no band {band_idx} ({} bands)",
            station.id,
            station.bands.len()
        ))
    })?;
    let d2d = station.position.dist(&position).max(1.0);
    let pl = pathloss_db(band, d2d, station.height, ut_height)?;
    let sh = field.value(station.id, band_idx, position)?;
    Ok(band.tx_power_dbm - pl - sh)
}

fn dbm_to_linear(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// SINRs for the full user × station × band grid, in the station-major
/// order policies expect: `result[u][s · n_bands + b]` is user `u`'s SINR
/// if served by station `s` on band `b`.
///
/// Computes each user's received power from every cell once and reuses the
/// per-band totals for the interference sums, so the whole grid costs the
/// same as one received-power matrix. Agrees with [`sinr_db`] up to
/// floating-point rounding of the interference sum. Requires the uniform
/// layout produced by [`crate::netsim::hex_layout`]: station ids equal to
/// their index and one shared band list.
pub fn candidate_sinrs(
    state: &NetworkState,
    field: &ShadowField,
) -> Result<Vec<Vec<CandidateSinr>>> {
    let n_bands = state.n_bands();
    if state.stations.is_empty() || n_bands == 0 {
        return Err(Error::validation(
            "candidate grid needs at least one station with one band".to_string(),
        ));
    }
    for (idx, st) in state.stations.iter().enumerate() {
        if st.id != idx {
            return Err(Error::validation(format!(
                "station ids must equal their index (station {} at index {idx})",
                st.id
            )));
        }
        if st.bands.len() != n_bands {
            return Err(Error::validation(format!(
                "station {} has {} bands, expected {n_bands}",
                st.id,
                st.bands.len()
            )));
        }
    }
    let noise_lin: Vec<f64> = state.stations[0]
        .bands
        .iter()
        .map(|b| dbm_to_linear(noise_dbm(b)))
        .collect();
    let mut grid = Vec::with_capacity(state.users.len());
    for user in &state.users {
        let mut rx_lin = vec![0.0; state.stations.len() * n_bands];
        let mut totals = vec![0.0; n_bands];
        for (s, st) in state.stations.iter().enumerate() {
            for b in 0..n_bands {
                let lin =
                    dbm_to_linear(rx_power_dbm(st, b, field, user.position, state.ut_height)?);
                rx_lin[s * n_bands + b] = lin;
                totals[b] += lin;
            }
        }
        let mut cands = Vec::with_capacity(rx_lin.len());
        for (s, st) in state.stations.iter().enumerate() {
            for b in 0..n_bands {
                let lin = rx_lin[s * n_bands + b];
                let denom = totals[b] - lin + noise_lin[b];
                cands.push(CandidateSinr {
                    station: st.id,
                    band: b,
                    sinr_db: 10.0 * (lin / denom).log10(),
                });
            }
        }
        grid.push(cands);
    }
    Ok(grid)
}

/// SINR in dB for `user` if served by `(station, band)`: signal from that
/// station, interference from every other station transmitting on the same
/// band, thermal noise over the band's bandwidth.
pub fn sinr_db(
    state: &NetworkState,
    field: &ShadowField,
    user: usize,
    station: usize,
    band: usize,
) -> Result<f64> {
    let u = state.users.get(user).ok_or_else(|| {
        Error::validation(format!("no user {user} ({} users)", state.users.len()))
    })?;
    if station >= state.stations.len() {
        return Err(Error::validation(format!(
            "no station {station} ({} stations)",
            state.stations.len()
        )));
    }
    let band_cfg = state.stations[station].bands.get(band).ok_or_else(|| {
        Error::validation(format!("station {station} has no band {band}"))
    })?;
    let signal_dbm = rx_power_dbm(&state.stations[station], band, field, u.position, state.ut_height)?;
    let mut interference = 0.0;
    for other in &state.stations {
        if other.id != state.stations[station].id {
            interference +=
                dbm_to_linear(rx_power_dbm(other, band, field, u.position, state.ut_height)?);
        }
    }
    let noise = dbm_to_linear(noise_dbm(band_cfg));
    Ok(10.0 * (dbm_to_linear(signal_dbm) / (interference + noise)).log10())
}
