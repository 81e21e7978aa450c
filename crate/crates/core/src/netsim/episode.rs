//! User rates, KPIs, and the step-based episode loop.
//!
//! One episode walks users along their trajectories for a fixed horizon.
//! Every step the policy re-associates all users from the full candidate
//! SINR grid, each cell's bandwidth is split equally among the users it
//! serves, and three KPIs summarize the step: the 5th-percentile user rate
//! (cell-edge experience), the mean log-rate utility (aggregate experience
//! with diminishing returns), and the handover count (association churn).

use crate::error::{Error, Result};
use crate::geodata::{Extent, Trajectory};
use crate::netsim::channel::{candidate_sinrs, sinr_db};
use crate::netsim::policy::{Association, AssociationPolicy, CandidateSinr, PolicyRequest};
use crate::netsim::{hex_layout_with, EpisodeConfig, NetworkState, ShadowField, UserState};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// KPIs of one simulation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiRecord {
    /// 1-based step index.
    pub step: usize,
    /// 5th-percentile user rate, bit/s.
    pub p5_rate: f64,
    /// Mean log-rate across users (log base from the episode config).
    pub utility: f64,
    /// Users whose serving cell changed since the previous step.
    pub handovers: usize,
    /// `utility − λ · handovers`, the shaped reward for external agents.
    pub reward: f64,
}

/// Episode-level aggregates of the per-step records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub policy: String,
    pub steps: usize,
    pub user_count: usize,
    pub station_count: usize,
    /// Mean of the per-step 5th-percentile rates.
    pub mean_p5_rate: f64,
    /// 5th percentile over all (user, step) rates pooled.
    pub episode_p5_rate: f64,
    pub mean_utility: f64,
    pub total_handovers: usize,
    pub mean_reward: f64,
}

/// Per-step records plus their episode summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub records: Vec<KpiRecord>,
    pub summary: EpisodeSummary,
}

impl EpisodeResult {
    /// KPI series as `step,p5_rate,utility,handovers` CSV. Floats print in
    /// shortest round-trip form, so equal runs produce identical bytes.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("step,p5_rate,utility,handovers\n");
        for r in &self.records {
            writeln!(out, "{},{},{},{}", r.step, r.p5_rate, r.utility, r.handovers)
                .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(&self.summary)?;
        text.push('\n');
        Ok(text)
    }
}

/// Linear interpolation percentile at rank `0.05 · (n − 1)` of the sorted
/// values; the definition behind every "5% rate" in this module.
fn percentile5(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("rates are never NaN"));
    let h = 0.05 * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Current data rate of every user in bit/s: each cell's bandwidth divides
/// equally among the users it serves, so
/// `rate(u) = bandwidth / n_u · log2(1 + SINR_u)`.
pub fn user_rates(state: &NetworkState, field: &ShadowField) -> Result<Vec<f64>> {
    if state.association.len() != state.users.len() {
        return Err(Error::validation(format!(
            "association covers {} users but the state has {}",
            state.association.len(),
            state.users.len()
        )));
    }
    let n_bands = state.n_bands();
    let mut loads = vec![0usize; state.stations.len() * n_bands];
    for &(s, b) in &state.association {
        if s >= state.stations.len() || b >= n_bands {
            return Err(Error::validation(format!(
                "association target ({s}, {b}) is outside the layout"
            )));
        }
        loads[s * n_bands + b] += 1;
    }
    let mut rates = Vec::with_capacity(state.users.len());
    for (u, &(s, b)) in state.association.iter().enumerate() {
        let sinr = sinr_db(state, field, u, s, b)?;
        let share = state.stations[s].bands[b].bandwidth_hz / loads[s * n_bands + b] as f64;
        rates.push(share * (1.0 + 10f64.powf(sinr / 10.0)).log2());
    }
    Ok(rates)
}

/// Same sharing rule evaluated from an already-computed candidate grid.
fn rates_from_grid(
    grid: &[Vec<CandidateSinr>],
    assoc: &Association,
    bandwidths_hz: &[f64],
    n_stations: usize,
) -> Result<Vec<f64>> {
    let n_bands = bandwidths_hz.len();
    let mut loads = vec![0usize; n_stations * n_bands];
    for &(s, b) in assoc {
        if s >= n_stations || b >= n_bands {
            return Err(Error::validation(format!(
                "association target ({s}, {b}) is outside the layout"
            )));
        }
        loads[s * n_bands + b] += 1;
    }
    assoc
        .iter()
        .enumerate()
        .map(|(u, &(s, b))| {
            let cand = grid[u]
                .get(s * n_bands + b)
                .filter(|c| c.station == s && c.band == b)
                .ok_or_else(|| {
                    Error::validation(format!(
                        "candidate grid for user {u} does not cover cell ({s}, {b})"
                    ))
                })?;
            let share = bandwidths_hz[b] / loads[s * n_bands + b] as f64;
            Ok(share * (1.0 + 10f64.powf(cand.sinr_db / 10.0)).log2())
        })
        .collect()
}

/// Step KPIs with an explicit utility log base: the 5th-percentile rate,
/// the mean log-rate (rates floored at 1 bit/s so the log stays finite),
/// and the number of users whose serving cell changed.
pub fn kpis_with_base(
    rates: &[f64],
    prev_assoc: &[(usize, usize)],
    new_assoc: &[(usize, usize)],
    log_base: f64,
) -> Result<(f64, f64, usize)> {
    if rates.is_empty() {
        return Err(Error::validation("KPIs need at least one user rate".to_string()));
    }
    if prev_assoc.len() != rates.len() || new_assoc.len() != rates.len() {
        return Err(Error::validation(format!(
            "KPI inputs disagree on user count: {} rates, {} previous and {} new assignments",
            rates.len(),
            prev_assoc.len(),
            new_assoc.len()
        )));
    }
    if !(log_base > 1.0) {
        return Err(Error::validation(format!(
            "utility log base must exceed 1, got {log_base}"
        )));
    }
    let p5 = percentile5(rates);
    let ln_base = log_base.ln();
    let utility =
        rates.iter().map(|r| r.max(1.0).ln() / ln_base).sum::<f64>() / rates.len() as f64;
    let handovers = prev_assoc
        .iter()
        .zip(new_assoc)
        .filter(|(a, b)| a != b)
        .count();
    Ok((p5, utility, handovers))
}

/// [`kpis_with_base`] with the default base-10 utility.
pub fn kpis(
    rates: &[f64],
    prev_assoc: &[(usize, usize)],
    new_assoc: &[(usize, usize)],
) -> Result<(f64, f64, usize)> {
    kpis_with_base(rates, prev_assoc, new_assoc, 10.0)
}

fn count_loads(assoc: &Association, n_stations: usize, n_bands: usize) -> Vec<Vec<usize>> {
    let mut loads = vec![vec![0usize; n_bands]; n_stations];
    for &(s, b) in assoc {
        loads[s][b] += 1;
    }
    loads
}

/// Runs one episode: lay out stations over `extent`, draw the shadow fields
/// from `seed`, then for each of `cfg.horizon` steps move every user to its
/// next trajectory point, hand the policy the candidate SINR grid and the
/// previous step's loads, and score the association it returns.
///
/// Takes the first `cfg.user_count` trajectories as the users; every one of
/// them must have at least `cfg.horizon` points. The result is an exact
/// function of `(trajectories, policy, cfg, extent, seed)`.
pub fn run_episode(
    trajectories: &[Trajectory],
    policy: &mut dyn AssociationPolicy,
    cfg: &EpisodeConfig,
    extent: &Extent,
    seed: u64,
) -> Result<EpisodeResult> {
    cfg.validate()?;
    if trajectories.len() < cfg.user_count {
        return Err(Error::validation(format!(
            "episode needs {} user trajectories, got {}",
            cfg.user_count,
            trajectories.len()
        )));
    }
    for (u, traj) in trajectories[..cfg.user_count].iter().enumerate() {
        if traj.len() < cfg.horizon {
            return Err(Error::validation(format!(
                "trajectory {u} has {} points but the horizon is {} steps",
                traj.len(),
                cfg.horizon
            )));
        }
    }
    let stations = hex_layout_with(extent, cfg.spacing_m, cfg.bs_height_m, &cfg.bands)?;
    let n_stations = stations.len();
    let n_bands = cfg.bands.len();
    let field = ShadowField::generate(
        n_stations,
        n_bands,
        cfg.sigma_db,
        cfg.decorr_m,
        cfg.n_sinusoids,
        seed,
    )?;
    let bandwidths_hz: Vec<f64> = cfg.bands.iter().map(|b| b.bandwidth_hz).collect();
    let mut state = NetworkState {
        stations,
        users: trajectories[..cfg.user_count]
            .iter()
            .enumerate()
            .map(|(id, traj)| UserState {
                id,
                position: traj.points[0],
                cursor: 0,
            })
            .collect(),
        ut_height: cfg.ut_height_m,
        association: Association::new(),
        time_step: cfg.step_seconds,
        handover_count: 0,
    };
    let mut loads = vec![vec![0usize; n_bands]; n_stations];
    let mut prev: Option<Association> = None;
    let mut records = Vec::with_capacity(cfg.horizon);
    let mut all_rates = Vec::with_capacity(cfg.horizon * cfg.user_count);
    for step in 1..=cfg.horizon {
        for (u, user) in state.users.iter_mut().enumerate() {
            user.position = trajectories[u].points[step - 1];
            user.cursor = step;
        }
        let request = PolicyRequest {
            step,
            bandwidths_hz: bandwidths_hz.clone(),
            candidates: candidate_sinrs(&state, &field)?,
            loads: loads.clone(),
        };
        let assoc = policy.associate(&request)?;
        if assoc.len() != cfg.user_count {
            return Err(Error::validation(format!(
                "policy {} returned {} assignments for {} users",
                policy.name(),
                assoc.len(),
                cfg.user_count
            )));
        }
        let rates = rates_from_grid(&request.candidates, &assoc, &bandwidths_hz, n_stations)?;
        let prev_assoc = prev.as_ref().unwrap_or(&assoc);
        let (p5_rate, utility, handovers) =
            kpis_with_base(&rates, prev_assoc, &assoc, cfg.utility_log_base)?;
        let reward = utility - cfg.handover_lambda * handovers as f64;
        state.handover_count += handovers;
        state.association = assoc.clone();
        loads = count_loads(&assoc, n_stations, n_bands);
        all_rates.extend_from_slice(&rates);
        records.push(KpiRecord {
            step,
            p5_rate,
            utility,
            handovers,
            reward,
        });
        prev = Some(assoc);
    }
    let n = records.len() as f64;
    let summary = EpisodeSummary {
        policy: policy.name().to_string(),
        steps: cfg.horizon,
        user_count: cfg.user_count,
        station_count: n_stations,
        mean_p5_rate: records.iter().map(|r| r.p5_rate).sum::<f64>() / n,
        episode_p5_rate: percentile5(&all_rates),
        mean_utility: records.iter().map(|r| r.utility).sum::<f64>() / n,
        total_handovers: state.handover_count,
        mean_reward: records.iter().map(|r| r.reward).sum::<f64>() / n,
    };
    Ok(EpisodeResult { records, summary })
}
