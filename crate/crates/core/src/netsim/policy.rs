//! User-association policies.
//!
//! A policy sees, once per step, the full candidate grid — every user's SINR
//! toward every (station, band) — plus the previous step's per-cell loads
//! and the per-band bandwidths, and returns one serving cell per user. Two
//! baselines ship here: [`MaxSinrPolicy`] (signal-strength-greedy, the
//! traditional baseline) and [`LoadAwareGreedyPolicy`] (assigns users
//! sequentially to the cell with the best marginal rate after sharing).
//!
//! [`ExternPolicy`] bridges to out-of-process agents over newline-delimited
//! JSON on stdin/stdout, one request and one response line per step:
//!
//! ```json
//! {"step":1,"bandwidths_hz":[4e7,1e7],
//!  "candidates":[[{"station":0,"band":0,"sinr_db":-1.2}, ...], ...],
//!  "loads":[[3,0], ...]}
//! ```
//!
//! and the response maps user index to `[station, band]`:
//!
//! ```json
//! {"0":[4,1],"1":[4,0]}
//! ```

use crate::error::{Error, Result};
use crate::netsim::channel::candidate_sinrs;
use crate::netsim::{NetworkState, ShadowField};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

/// Per-user serving cells: entry `u` holds user `u`'s `(station, band)`.
pub type Association = Vec<(usize, usize)>;

/// One candidate serving cell for one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateSinr {
    pub station: usize,
    pub band: usize,
    pub sinr_db: f64,
}

/// Everything a policy may condition on for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRequest {
    /// 1-based step index within the episode.
    pub step: usize,
    /// Bandwidth of each band, indexed like the stations' band lists.
    pub bandwidths_hz: Vec<f64>,
    /// `candidates[u]` covers the full station × band grid for user `u`,
    /// station-major in station-id order.
    pub candidates: Vec<Vec<CandidateSinr>>,
    /// `loads[station][band]`: users served by that cell on the previous
    /// step (all zeros on step 1).
    pub loads: Vec<Vec<usize>>,
}

/// A per-step user-association strategy. Policies may keep state between
/// steps; the episode loop calls `associate` exactly once per step.
pub trait AssociationPolicy {
    fn name(&self) -> &str;
    fn associate(&mut self, request: &PolicyRequest) -> Result<Association>;
}

fn best_candidate<F>(cands: &[CandidateSinr], score: F) -> Result<(usize, usize)>
where
    F: Fn(&CandidateSinr) -> f64,
{
    let mut best: Option<(&CandidateSinr, f64)> = None;
    for c in cands {
        let s = score(c);
        let replace = match &best {
            None => true,
            Some((b, bs)) => {
                s > *bs
                    || (s == *bs
                        && (c.station, c.band) < (b.station, b.band))
            }
        };
        if replace {
            best = Some((c, s));
        }
    }
    best.map(|(c, _)| (c.station, c.band))
        .ok_or_else(|| Error::validation("user has no candidate cells".to_string()))
}

/// Serve every user from the cell with the strongest SINR; ties go to the
/// lowest station id, then the first band.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxSinrPolicy;

impl AssociationPolicy for MaxSinrPolicy {
    fn name(&self) -> &str {
        "maxsinr"
    }

    fn associate(&mut self, request: &PolicyRequest) -> Result<Association> {
        request
            .candidates
            .iter()
            .map(|cands| best_candidate(cands, |c| c.sinr_db))
            .collect()
    }
}

/// Assign users one at a time to the cell maximizing their marginal rate
/// `bandwidth / (n_assigned + 1) · log2(1 + SINR)`, where `n_assigned`
/// counts users placed earlier in the same step. Unlike [`MaxSinrPolicy`]
/// this trades signal strength against the load already on a cell, which is
/// what rescues the 5th-percentile rate when users cluster.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadAwareGreedyPolicy;

impl AssociationPolicy for LoadAwareGreedyPolicy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn associate(&mut self, request: &PolicyRequest) -> Result<Association> {
        let mut loads: Vec<Vec<usize>> = request
            .loads
            .iter()
            .map(|row| vec![0; row.len()])
            .collect();
        let mut assoc = Association::with_capacity(request.candidates.len());
        for cands in &request.candidates {
            let (s, b) = best_candidate(cands, |c| {
                let bw = request
                    .bandwidths_hz
                    .get(c.band)
                    .copied()
                    .unwrap_or(0.0);
                let share = loads
                    .get(c.station)
                    .and_then(|row| row.get(c.band))
                    .copied()
                    .unwrap_or(0) as f64
                    + 1.0;
                bw / share * (1.0 + 10f64.powf(c.sinr_db / 10.0)).log2()
            })?;
            if s < loads.len() && b < loads[s].len() {
                loads[s][b] += 1;
            }
            assoc.push((s, b));
        }
        Ok(assoc)
    }
}

/// Serve every user from its strongest cell given the current state; the
/// one-shot form of [`MaxSinrPolicy`] for callers outside the episode loop.
pub fn max_sinr_policy(state: &NetworkState, field: &ShadowField) -> Result<Association> {
    let candidates = candidate_sinrs(state, field)?;
    let n_bands = state.n_bands();
    let request = PolicyRequest {
        step: 0,
        bandwidths_hz: state.stations[0].bands.iter().map(|b| b.bandwidth_hz).collect(),
        candidates,
        loads: vec![vec![0; n_bands]; state.stations.len()],
    };
    MaxSinrPolicy.associate(&request)
}

/// An association policy living in another process, spoken to over
/// newline-delimited JSON (one request line out, one response line back per
/// step). The child is spawned on construction and killed on drop.
pub struct ExternPolicy {
    name: String,
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ExternPolicy {
    /// Launch `program args...` with piped stdin/stdout.
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("failed to launch policy process {program}: {e}"),
                ))
            })?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = BufReader::new(child.stdout.take().expect("stdout was piped"));
        Ok(ExternPolicy {
            name: format!("extern:{program}"),
            child,
            stdin,
            stdout,
        })
    }
}

impl AssociationPolicy for ExternPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn associate(&mut self, request: &PolicyRequest) -> Result<Association> {
        let line = serde_json::to_string(request)?;
        writeln!(self.stdin, "{line}")?;
        self.stdin.flush()?;
        let mut reply = String::new();
        let n = self.stdout.read_line(&mut reply)?;
        if n == 0 {
            return Err(Error::parse(
                "policy process closed its stdout before replying".to_string(),
            ));
        }
        let map: BTreeMap<usize, (usize, usize)> = serde_json::from_str(reply.trim())?;
        (0..request.candidates.len())
            .map(|u| {
                map.get(&u).copied().ok_or_else(|| {
                    Error::parse(format!("policy response is missing user {u}"))
                })
            })
            .collect()
    }
}

impl Drop for ExternPolicy {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn cand(station: usize, band: usize, sinr_db: f64) -> CandidateSinr {
        CandidateSinr {
            station,
            band,
            sinr_db,
        }
    }

    fn request(candidates: Vec<Vec<CandidateSinr>>, n_stations: usize, n_bands: usize) -> PolicyRequest {
        PolicyRequest {
            step: 1,
            bandwidths_hz: vec![40e6; n_bands],
            candidates,
            loads: vec![vec![0; n_bands]; n_stations],
        }
    }

    #[test]
    fn max_sinr_picks_the_strongest_cell_with_deterministic_ties() {
        let req = request(
            vec![
                vec![cand(0, 0, 5.0), cand(1, 0, 7.0)],
                vec![cand(2, 1, 3.0), cand(1, 0, 3.0), cand(1, 1, 3.0)],
            ],
            3,
            2,
        );
        let assoc = MaxSinrPolicy.associate(&req).unwrap();
        assert_eq!(assoc, vec![(1, 0), (1, 0)]);
    }

    #[test]
    fn max_sinr_rejects_users_without_candidates() {
        let req = request(vec![vec![]], 1, 1);
        assert!(MaxSinrPolicy.associate(&req).is_err());
    }

    #[test]
    fn greedy_spreads_equal_users_across_cells() {
        // Two users with identical SINR toward two one-band stations:
        // max-SINR piles both onto station 0, the greedy policy parks the
        // second user on the empty station for double the marginal rate.
        let cands = vec![cand(0, 0, 10.0), cand(1, 0, 10.0)];
        let req = request(vec![cands.clone(), cands], 2, 1);
        assert_eq!(
            MaxSinrPolicy.associate(&req).unwrap(),
            vec![(0, 0), (0, 0)]
        );
        assert_eq!(
            LoadAwareGreedyPolicy.associate(&req).unwrap(),
            vec![(0, 0), (1, 0)]
        );
    }

    #[test]
    fn greedy_accepts_a_weaker_but_empty_cell() {
        // 3 users, one strong cell vs one 3 dB weaker cell. After two users
        // land on the strong cell, its marginal share (1/3) loses to the
        // weaker cell's full bandwidth.
        let cands = vec![cand(0, 0, 10.0), cand(1, 0, 7.0)];
        let req = request(vec![cands.clone(), cands.clone(), cands], 2, 1);
        let assoc = LoadAwareGreedyPolicy.associate(&req).unwrap();
        assert_eq!(assoc[0], (0, 0));
        assert_eq!(assoc[1], (1, 0));
        // Third user: strong cell at share 1/2 → 0.5·log2(11) ≈ 1.73 beats
        // the weak cell at share 1/2 → 0.5·log2(8) = 1.5; back to cell 0.
        assert_eq!(assoc[2], (0, 0));
    }

    #[test]
    fn request_wire_format_is_stable() {
        let req = PolicyRequest {
            step: 3,
            bandwidths_hz: vec![40e6],
            candidates: vec![vec![cand(1, 0, -2.5)]],
            loads: vec![vec![4]],
        };
        assert_eq!(
            serde_json::to_value(&req).unwrap(),
            json!({
                "step": 3,
                "bandwidths_hz": [40e6],
                "candidates": [[{"station": 1, "band": 0, "sinr_db": -2.5}]],
                "loads": [[4]],
            })
        );
        let map: BTreeMap<usize, (usize, usize)> =
            serde_json::from_str(r#"{"0": [4, 1], "1": [0, 0]}"#).unwrap();
        assert_eq!(map.get(&0), Some(&(4, 1)));
        assert_eq!(map.get(&1), Some(&(0, 0)));
    }

    #[test]
    fn extern_policy_round_trips_through_a_child_process() {
        // A minimal stdin/stdout agent that always picks each user's first
        // candidate. Skipped when no python3 is on PATH.
        let script = r#"import sys, json
for line in sys.stdin:
    req = json.loads(line)
    out = {str(u): [c[0]["station"], c[0]["band"]] for u, c in enumerate(req["candidates"])}
    print(json.dumps(out), flush=True)
"#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("first_candidate.py");
        std::fs::write(&path, script).unwrap();
        let spawned = ExternPolicy::spawn("python3", &[path.display().to_string()]);
        let mut policy = match spawned {
            Ok(p) => p,
            Err(_) => {
                eprintln!("skipping extern-policy test: python3 not available");
                return;
            }
        };
        let req = request(
            vec![
                vec![cand(2, 1, 1.0), cand(0, 0, 9.0)],
                vec![cand(0, 1, 4.0)],
            ],
            3,
            2,
        );
        for _ in 0..3 {
            let assoc = policy.associate(&req).unwrap();
            assert_eq!(assoc, vec![(2, 1), (0, 1)]);
        }
    }

    #[test]
    fn extern_policy_reports_missing_users() {
        let script = r#"import sys, json
for line in sys.stdin:
    json.loads(line)
    print(json.dumps({"0": [0, 0]}), flush=True)
"#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("half_reply.py");
        std::fs::write(&path, script).unwrap();
        let Ok(mut policy) = ExternPolicy::spawn("python3", &[path.display().to_string()]) else {
            eprintln!("skipping extern-policy test: python3 not available");
            return;
        };
        let req = request(
            vec![vec![cand(0, 0, 1.0)], vec![cand(0, 0, 2.0)]],
            1,
            1,
        );
        let err = policy.associate(&req).unwrap_err();
        assert!(err.to_string().contains("missing user 1"), "{err}");
    }
}
