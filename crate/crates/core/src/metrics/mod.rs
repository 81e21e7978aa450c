//! Similarity metrics between trajectories and between trajectory sets:
//! edit distance on real sequences (EDR), dynamic time warping (DTW),
//! occupancy heatmaps with cosine similarity, sliced Wasserstein distance,
//! and the batch evaluation protocol combining them.

mod report;
mod sw;

pub use report::{evaluate_sets, SimilarityReport};
pub use sw::sliced_wasserstein;

use crate::error::{Error, Result};
use crate::geodata::{Extent, Trajectory};
use crate::raster::rasterize_trajectory;
use ndarray::Array2;

/// Edit distance on real sequences: the minimum number of insertions,
/// deletions, and substitutions (unit cost each) needed to align the two
/// trajectories, where two points "match" free of charge when their
/// Euclidean distance is strictly below `tau` meters.
pub fn edr(a: &Trajectory, b: &Trajectory, tau: f64) -> Result<usize> {
    if !(tau > 0.0) {
        return Err(Error::validation(format!(
            "EDR threshold must be positive, got {tau}"
        )));
    }
    let (na, nb) = (a.len(), b.len());
    // dp[j] holds the cost for the current prefix of `a` vs b[..j].
    let mut prev: Vec<usize> = (0..=nb).collect();
    let mut cur = vec![0usize; nb + 1];
    for i in 1..=na {
        cur[0] = i;
        for j in 1..=nb {
            let sub = if a.points[i - 1].dist(&b.points[j - 1]) < tau {
                0
            } else {
                1
            };
            cur[j] = (prev[j - 1] + sub)
                .min(prev[j] + 1)
                .min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[nb])
}

/// Dynamic time warping cost with squared-Euclidean point distance,
/// boundary-aligned, without path-length normalization: the unit is
/// accumulated square meters.
pub fn dtw(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("DTW requires nonempty trajectories"));
    }
    let nb = b.len();
    let mut prev = vec![f64::INFINITY; nb + 1];
    let mut cur = vec![f64::INFINITY; nb + 1];
    prev[0] = 0.0;
    for i in 1..=a.len() {
        cur[0] = f64::INFINITY;
        for j in 1..=nb {
            let cost = a.points[i - 1].dist2(&b.points[j - 1]);
            cur[j] = cost + prev[j - 1].min(prev[j]).min(cur[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[nb])
}

/// Cell-occupancy probability distribution aggregated from a trajectory
/// set. Values are nonnegative and sum to 1, except for the all-zero map
/// from an empty input.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub extent: Extent,
    /// `(j, i)` indexed like raster channels: `j` is the y index.
    pub data: Array2<f64>,
}

impl Heatmap {
    pub fn total_mass(&self) -> f64 {
        self.data.sum()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

/// Aggregates trajectories into a normalized occupancy heatmap: each
/// trajectory is rasterized to its binary visited-cell image, the images
/// are summed cellwise, and the result is scaled to unit mass.
pub fn heatmap_from(trajs: &[Trajectory], extent: &Extent) -> Result<Heatmap> {
    let n = extent.grid_size();
    let mut data = Array2::<f64>::zeros((n, n));
    for traj in trajs {
        let raster = rasterize_trajectory(traj, extent)?;
        for (i, j) in raster.set_cells(0) {
            data[(j, i)] += 1.0;
        }
    }
    let mass = data.sum();
    if mass > 0.0 {
        data.mapv_inplace(|v| v / mass);
    }
    Ok(Heatmap {
        extent: *extent,
        data,
    })
}

/// Cosine similarity between two heatmaps flattened to vectors. For
/// nonnegative inputs the result lies in [0, 1], reaching 1 exactly when
/// the heatmaps are proportional.
pub fn cosine_sim(p: &Heatmap, q: &Heatmap) -> Result<f64> {
    if p.is_zero() || q.is_zero() {
        return Err(Error::validation(
            "cosine similarity is undefined for a zero heatmap",
        ));
    }
    if p.data.dim() != q.data.dim() {
        return Err(Error::validation("heatmap grids differ in size"));
    }
    let mut dot = 0.0;
    let mut np = 0.0;
    let mut nq = 0.0;
    for (&a, &b) in p.data.iter().zip(q.data.iter()) {
        dot += a * b;
        np += a * a;
        nq += b * b;
    }
    Ok((dot / (np.sqrt() * nq.sqrt())).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::Point;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn traj(points: &[(f64, f64)]) -> Trajectory {
        Trajectory::new(points.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    fn extent() -> Extent {
        Extent::new(0.0, 0.0, 80.0, 10.0).unwrap()
    }

    #[test]
    fn edr_identity_and_empty_cases() {
        let a = traj(&[(0.0, 0.0), (10.0, 0.0), (20.0, 5.0)]);
        assert_eq!(edr(&a, &a, 20.0).unwrap(), 0);
        let empty = traj(&[]);
        assert_eq!(edr(&empty, &a, 20.0).unwrap(), 3);
        assert_eq!(edr(&a, &empty, 20.0).unwrap(), 3);
        assert_eq!(edr(&empty, &empty, 20.0).unwrap(), 0);
    }

    #[test]
    fn edr_single_substitution() {
        let a = traj(&[(0.0, 0.0)]);
        let b = traj(&[(30.0, 0.0)]);
        assert_eq!(edr(&a, &b, 20.0).unwrap(), 1);
        // At distance < tau the points match for free.
        let c = traj(&[(19.9, 0.0)]);
        assert_eq!(edr(&a, &c, 20.0).unwrap(), 0);
        // The threshold is strict: exactly tau apart is not a match.
        let d = traj(&[(20.0, 0.0)]);
        assert_eq!(edr(&a, &d, 20.0).unwrap(), 1);
    }

    #[test]
    fn edr_rejects_nonpositive_tau() {
        let a = traj(&[(0.0, 0.0)]);
        assert!(edr(&a, &a, 0.0).is_err());
    }

    #[test]
    fn dtw_identity_and_stretching() {
        let a = traj(&[(0.0, 0.0), (10.0, 0.0)]);
        assert_eq!(dtw(&a, &a).unwrap(), 0.0);
        // Repeating a matched point costs nothing under DTW.
        let b = traj(&[(0.0, 0.0), (0.0, 0.0), (10.0, 0.0)]);
        assert_eq!(dtw(&a, &b).unwrap(), 0.0);
        let c = traj(&[(0.0, 0.0), (30.0, 0.0)]);
        assert_eq!(dtw(&a, &c).unwrap(), 400.0);
    }

    #[test]
    fn dtw_rejects_empty_input() {
        let a = traj(&[(0.0, 0.0)]);
        assert!(dtw(&a, &traj(&[])).is_err());
        assert!(dtw(&traj(&[]), &a).is_err());
    }

    /// Exhaustive recursive EDR: minimum over match/substitute, delete,
    /// and insert at the head of either sequence.
    fn edr_brute(a: &[Point], b: &[Point], tau: f64) -> usize {
        match (a.first(), b.first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some(pa), Some(pb)) => {
                let sub = if pa.dist(pb) < tau { 0 } else { 1 };
                (edr_brute(&a[1..], &b[1..], tau) + sub)
                    .min(edr_brute(&a[1..], b, tau) + 1)
                    .min(edr_brute(a, &b[1..], tau) + 1)
            }
        }
    }

    /// Exhaustive recursive DTW over all monotone boundary alignments.
    fn dtw_brute(a: &[Point], b: &[Point]) -> f64 {
        fn rec(a: &[Point], b: &[Point], i: usize, j: usize) -> f64 {
            let cost = a[i].dist2(&b[j]);
            if i == 0 && j == 0 {
                return cost;
            }
            let mut best = f64::INFINITY;
            if i > 0 && j > 0 {
                best = best.min(rec(a, b, i - 1, j - 1));
            }
            if i > 0 {
                best = best.min(rec(a, b, i - 1, j));
            }
            if j > 0 {
                best = best.min(rec(a, b, i, j - 1));
            }
            cost + best
        }
        rec(a, b, a.len() - 1, b.len() - 1)
    }

    #[test]
    fn dp_matches_brute_force_enumeration() {
        let mut rng = crate::rng::seeded_rng(23);
        for _ in 0..200 {
            let la = rng.gen_range(0..=6);
            let lb = rng.gen_range(0..=6);
            let mk = |rng: &mut rand_chacha::ChaCha8Rng, l: usize| {
                Trajectory::new(
                    (0..l)
                        .map(|_| Point::new(rng.gen::<f64>() * 50.0, rng.gen::<f64>() * 50.0))
                        .collect(),
                )
            };
            let a = mk(&mut rng, la);
            let b = mk(&mut rng, lb);
            assert_eq!(
                edr(&a, &b, 20.0).unwrap(),
                edr_brute(&a.points, &b.points, 20.0)
            );
            if la > 0 && lb > 0 {
                assert_relative_eq!(
                    dtw(&a, &b).unwrap(),
                    dtw_brute(&a.points, &b.points),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn both_metrics_are_symmetric_and_bounded() {
        let mut rng = crate::rng::seeded_rng(29);
        for _ in 0..50 {
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let l = rng.gen_range(1..=8);
                Trajectory::new(
                    (0..l)
                        .map(|_| Point::new(rng.gen::<f64>() * 50.0, rng.gen::<f64>() * 50.0))
                        .collect(),
                )
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let e = edr(&a, &b, 20.0).unwrap();
            assert_eq!(e, edr(&b, &a, 20.0).unwrap());
            assert!(e <= a.len() + b.len());
            assert_relative_eq!(
                dtw(&a, &b).unwrap(),
                dtw(&b, &a).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn heatmap_single_point_and_normalization() {
        let h = heatmap_from(&[traj(&[(5.0, 5.0)])], &extent()).unwrap();
        assert_eq!(h.data[(0, 0)], 1.0);
        assert_relative_eq!(h.total_mass(), 1.0);
    }

    #[test]
    fn heatmap_is_invariant_to_duplication() {
        let t = traj(&[(5.0, 5.0), (55.0, 25.0)]);
        let once = heatmap_from(&[t.clone()], &extent()).unwrap();
        let thrice = heatmap_from(&[t.clone(), t.clone(), t], &extent()).unwrap();
        assert_eq!(once, thrice);
    }

    #[test]
    fn heatmap_splits_mass_between_disjoint_cells() {
        let h = heatmap_from(
            &[traj(&[(5.0, 5.0)]), traj(&[(75.0, 75.0)])],
            &extent(),
        )
        .unwrap();
        assert_eq!(h.data[(0, 0)], 0.5);
        assert_eq!(h.data[(7, 7)], 0.5);
        assert_relative_eq!(h.total_mass(), 1.0);
    }

    #[test]
    fn heatmap_empty_input_is_zero() {
        let h = heatmap_from(&[], &extent()).unwrap();
        assert!(h.is_zero());
    }

    #[test]
    fn cosine_basic_values() {
        let e = extent();
        let p = heatmap_from(&[traj(&[(5.0, 5.0)])], &e).unwrap();
        assert_relative_eq!(cosine_sim(&p, &p).unwrap(), 1.0);
        let q = heatmap_from(&[traj(&[(75.0, 75.0)])], &e).unwrap();
        assert_eq!(cosine_sim(&p, &q).unwrap(), 0.0);
    }

    #[test]
    fn cosine_partial_overlap() {
        let e = extent();
        // p uniform over 2 cells; q uniform over those plus 2 more.
        let p = heatmap_from(&[traj(&[(5.0, 5.0)]), traj(&[(15.0, 5.0)])], &e).unwrap();
        let q = heatmap_from(
            &[
                traj(&[(5.0, 5.0)]),
                traj(&[(15.0, 5.0)]),
                traj(&[(45.0, 45.0)]),
                traj(&[(75.0, 75.0)]),
            ],
            &e,
        )
        .unwrap();
        assert_relative_eq!(
            cosine_sim(&p, &q).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cosine_rejects_zero_heatmaps() {
        let e = extent();
        let p = heatmap_from(&[traj(&[(5.0, 5.0)])], &e).unwrap();
        let z = heatmap_from(&[], &e).unwrap();
        assert!(cosine_sim(&p, &z).is_err());
    }

    #[test]
    fn cosine_equals_one_iff_proportional() {
        let e = extent();
        let a = heatmap_from(&[traj(&[(5.0, 5.0), (25.0, 5.0)])], &e).unwrap();
        let mut b = a.clone();
        b.data.mapv_inplace(|v| v * 0.5); // proportional, not normalized
        assert_relative_eq!(cosine_sim(&a, &b).unwrap(), 1.0);
        let c = heatmap_from(&[traj(&[(5.0, 5.0), (25.0, 25.0)])], &e).unwrap();
        assert!(cosine_sim(&a, &c).unwrap() < 1.0 - 1e-9);
    }
}
