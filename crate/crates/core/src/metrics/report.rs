//! Batch evaluation protocol: best-match trajectory metrics plus
//! distribution metrics between a generated and a reference set.

use super::{cosine_sim, dtw, edr, heatmap_from, sliced_wasserstein};
use crate::error::{Error, Result};
use crate::geodata::{Extent, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Result of comparing a generated trajectory set against a reference set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    /// Mean over generated trajectories of the minimum EDR against any
    /// reference trajectory.
    pub edr_mean: f64,
    /// Mean over generated trajectories of the minimum DTW cost (m²).
    pub dtw_mean: f64,
    /// Cosine similarity of the two occupancy heatmaps.
    pub cosine: f64,
    /// Sliced Wasserstein distance between the heatmaps, meters.
    pub sliced_wasserstein: f64,
    pub n_generated: usize,
    pub n_reference: usize,
    /// EDR match threshold, meters.
    pub tau: f64,
    /// Number of sliced Wasserstein projections.
    pub n_proj: usize,
    pub seed: u64,
}

/// Evaluates a generated trajectory set against a reference set.
///
/// Per-trajectory metrics follow the best-match protocol: each generated
/// trajectory keeps its minimum EDR and minimum DTW over all reference
/// trajectories, and the report stores the means of those minima.
/// Distribution metrics compare the occupancy heatmaps of the two sets.
/// Pair computations run in parallel; minima and means do not depend on
/// evaluation order, so the result is deterministic.
pub fn evaluate_sets(
    generated: &[Trajectory],
    reference: &[Trajectory],
    extent: &Extent,
    tau: f64,
    n_proj: usize,
    seed: u64,
) -> Result<SimilarityReport> {
    if generated.is_empty() || reference.is_empty() {
        return Err(Error::validation(
            "evaluation requires nonempty generated and reference sets",
        ));
    }
    let per_generated: Vec<(usize, f64)> = generated
        .par_iter()
        .map(|g| {
            let mut best_edr = usize::MAX;
            let mut best_dtw = f64::INFINITY;
            for r in reference {
                best_edr = best_edr.min(edr(g, r, tau)?);
                best_dtw = best_dtw.min(dtw(g, r)?);
            }
            Ok((best_edr, best_dtw))
        })
        .collect::<Result<_>>()?;

    let n = generated.len() as f64;
    let edr_mean = per_generated.iter().map(|&(e, _)| e as f64).sum::<f64>() / n;
    let dtw_mean = per_generated.iter().map(|&(_, d)| d).sum::<f64>() / n;

    let hm_gen = heatmap_from(generated, extent)?;
    let hm_ref = heatmap_from(reference, extent)?;
    let cosine = cosine_sim(&hm_gen, &hm_ref)?;
    let sw = sliced_wasserstein(&hm_gen, &hm_ref, n_proj, seed)?;

    Ok(SimilarityReport {
        edr_mean,
        dtw_mean,
        cosine,
        sliced_wasserstein: sw,
        n_generated: generated.len(),
        n_reference: reference.len(),
        tau,
        n_proj,
        seed,
    })
}
