//! Street-restricted mobility: waypoint and Gauss-Markov variants whose
//! every emitted point is a street-cell center.

use super::street::{bfs_path, largest_street_component};
use super::{gm_step, MobilityConfig, MobilityModel};
use crate::error::Result;
use crate::geodata::{Point, Trajectory};
use crate::raster::RasterGrid;
use crate::rng::{streams, stream_rng};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{PI, TAU};

/// Street-restricted random waypoint trajectory.
///
/// Waypoints are drawn uniformly from the largest 4-connected street
/// component; each leg walks the breadth-first shortest street path at a
/// leg speed uniform in `[speed_min, speed_max]`, measured as arc length
/// along the path. Leftover step time rolls into the next leg.
pub fn gen_m_rwp(cfg: &MobilityConfig, mask: &RasterGrid, seed: u64) -> Result<Trajectory> {
    cfg.expect_model(MobilityModel::MRwp)?;
    let component = largest_street_component(mask)?;
    let extent = *mask.extent();
    let cs = extent.cell_size;
    let mut rng = stream_rng(seed, streams::M_RWP);

    let mut cell = component[rng.gen_range(0..component.len())];
    let mut points = Vec::with_capacity(cfg.horizon_steps);
    points.push(extent.cell_center(cell.0, cell.1));
    if component.len() == 1 {
        let center = points[0];
        points.resize(cfg.horizon_steps, center);
        return Ok(Trajectory {
            points,
            point_interval: Some(cfg.step_seconds),
        });
    }

    let mut leg: Vec<(usize, usize)> = Vec::new();
    let mut leg_len = 0.0;
    let mut arc = 0.0;
    let mut speed = 0.0;
    let mut on_leg = false;

    for _ in 1..cfg.horizon_steps {
        let mut remaining = cfg.step_seconds;
        while remaining > 1e-12 {
            if !on_leg {
                let mut target = component[rng.gen_range(0..component.len())];
                while target == cell {
                    target = component[rng.gen_range(0..component.len())];
                }
                // Both cells sit on one connected component, so the path
                // always exists.
                leg = bfs_path(mask, cell, target)?.cells;
                leg_len = (leg.len() - 1) as f64 * cs;
                arc = 0.0;
                speed = rng.gen_range(cfg.speed_min..=cfg.speed_max);
                on_leg = true;
            }
            if speed <= 0.0 {
                break; // zero-speed leg: the user stays put
            }
            let left = leg_len - arc;
            let reach = speed * remaining;
            if reach < left {
                arc += reach;
                remaining = 0.0;
            } else {
                remaining -= left / speed;
                cell = *leg.last().expect("leg paths are non-empty");
                on_leg = false;
            }
        }
        let here = if on_leg {
            leg[((arc / cs).round() as usize).min(leg.len() - 1)]
        } else {
            cell
        };
        points.push(extent.cell_center(here.0, here.1));
    }
    Ok(Trajectory {
        points,
        point_interval: Some(cfg.step_seconds),
    })
}

/// Smallest-magnitude difference between two angles, in [0, π].
fn angle_deviation(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % TAU;
    if d > PI {
        d -= TAU;
    }
    if d < -PI {
        d += TAU;
    }
    d.abs()
}

/// Street-restricted Gauss-Markov trajectory.
///
/// The user keeps a continuous position and the usual speed/heading
/// recurrences. A proposed step that stays on street is taken as-is; one
/// that would leave the street area instead hops to the 8-neighbor street
/// cell whose bearing deviates least from the current heading, and the
/// heading state (and its stationary mean) turn to follow that hop so the
/// walk tracks corridors instead of grinding against their walls. With no
/// admissible neighbor the heading resamples uniformly and the user stays.
/// Every emitted point is the center of the occupied street cell.
pub fn gen_m_gm(cfg: &MobilityConfig, mask: &RasterGrid, seed: u64) -> Result<Trajectory> {
    cfg.expect_model(MobilityModel::MGm)?;
    let component = largest_street_component(mask)?;
    let extent = *mask.extent();
    let n = mask.n();
    let mut rng = stream_rng(seed, streams::M_GM);

    let start = component[rng.gen_range(0..component.len())];
    let mut pos = extent.cell_center(start.0, start.1);
    let mut speed = cfg.gm_mean_speed;
    let mut mean_dir = rng.gen::<f64>() * TAU;
    let mut dir = mean_dir;

    let on_street = |p: &Point| -> bool {
        if !extent.contains_point(p) {
            return false;
        }
        let (i, j) = extent.cell_of(p.x, p.y);
        mask.get(0, i, j) > 0.5
    };

    let mut points = Vec::with_capacity(cfg.horizon_steps);
    let start_cell = extent.cell_of(pos.x, pos.y);
    points.push(extent.cell_center(start_cell.0, start_cell.1));
    for _ in 1..cfg.horizon_steps {
        let ws: f64 = rng.sample(StandardNormal);
        let wd: f64 = rng.sample(StandardNormal);
        speed = gm_step(speed, cfg.gm_mean_speed, cfg.gm_sigma, cfg.gm_alpha, ws);
        dir = gm_step(dir, mean_dir, cfg.gm_sigma_dir, cfg.gm_alpha, wd);
        let step = speed * cfg.step_seconds;
        let proposal = Point::new(pos.x + step * dir.cos(), pos.y + step * dir.sin());

        if on_street(&proposal) {
            pos = proposal;
        } else {
            let (ci, cj) = extent.cell_of(pos.x, pos.y);
            let mut best: Option<(f64, Point)> = None;
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ni, nj) = (ci as i64 + di, cj as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= n as i64 || nj >= n as i64 {
                        continue;
                    }
                    if mask.get(0, ni as usize, nj as usize) <= 0.5 {
                        continue;
                    }
                    let center = extent.cell_center(ni as usize, nj as usize);
                    let bearing = (center.y - pos.y).atan2(center.x - pos.x);
                    let dev = angle_deviation(bearing, dir);
                    if best.map_or(true, |(b, _)| dev < b) {
                        best = Some((dev, center));
                    }
                }
            }
            match best {
                Some((_, center)) => {
                    let bearing = (center.y - pos.y).atan2(center.x - pos.x);
                    pos = center;
                    dir = bearing;
                    mean_dir = bearing;
                }
                None => {
                    dir = rng.gen::<f64>() * TAU;
                    mean_dir = dir;
                }
            }
        }
        let (i, j) = extent.cell_of(pos.x, pos.y);
        points.push(extent.cell_center(i, j));
    }
    Ok(Trajectory {
        points,
        point_interval: Some(cfg.step_seconds),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::{synth_map, Extent};
    use crate::raster::{rasterize_map, street_mask};

    fn extent() -> Extent {
        Extent::new(0.0, 0.0, 640.0, 10.0).unwrap()
    }

    fn grid_mask() -> RasterGrid {
        let map = synth_map(2, extent(), 160.0, 0).unwrap();
        street_mask(&rasterize_map(&map).unwrap()).unwrap()
    }

    fn single_cell_mask() -> RasterGrid {
        let mut mask = RasterGrid::zeros(extent(), 1).unwrap();
        mask.set(0, 5, 5, 1.0);
        mask
    }

    #[test]
    fn m_rwp_single_cell_is_constant() {
        let cfg = MobilityConfig::defaults(MobilityModel::MRwp);
        let traj = gen_m_rwp(&cfg, &single_cell_mask(), 3).unwrap();
        assert_eq!(traj.len(), cfg.horizon_steps);
        assert!(traj.points.iter().all(|p| *p == Point::new(55.0, 55.0)));
    }

    #[test]
    fn m_rwp_emits_only_street_cell_centers() {
        let mask = grid_mask();
        let cfg = MobilityConfig::defaults(MobilityModel::MRwp);
        for seed in 0..20 {
            let traj = gen_m_rwp(&cfg, &mask, seed).unwrap();
            assert_eq!(traj.len(), cfg.horizon_steps);
            for p in &traj.points {
                let (i, j) = extent().cell_of(p.x, p.y);
                assert!(mask.get(0, i, j) > 0.5, "off-street point {p:?}");
                assert_eq!(*p, extent().cell_center(i, j), "not a cell center");
            }
        }
    }

    #[test]
    fn m_rwp_occupancy_support_within_mask() {
        let mask = grid_mask();
        let cfg = MobilityConfig::defaults(MobilityModel::MRwp);
        let street: std::collections::HashSet<_> = mask.set_cells(0).into_iter().collect();
        let mut visited = std::collections::HashSet::new();
        for seed in 0..50 {
            let traj = gen_m_rwp(&cfg, &mask, seed).unwrap();
            for p in &traj.points {
                visited.insert(extent().cell_of(p.x, p.y));
            }
        }
        assert!(visited.is_subset(&street));
        assert!(visited.len() > 10, "walks should cover many street cells");
    }

    #[test]
    fn m_gm_single_row_stays_in_row() {
        let mut mask = RasterGrid::zeros(extent(), 1).unwrap();
        for i in 0..64 {
            mask.set(0, i, 30, 1.0);
        }
        let cfg = MobilityConfig::defaults(MobilityModel::MGm);
        for seed in 0..5 {
            let traj = gen_m_gm(&cfg, &mask, seed).unwrap();
            assert!(traj.points.iter().all(|p| p.y == 305.0), "left the row");
        }
    }

    #[test]
    fn m_gm_emits_only_street_cell_centers() {
        let mask = grid_mask();
        let cfg = MobilityConfig::defaults(MobilityModel::MGm);
        for seed in 0..20 {
            let traj = gen_m_gm(&cfg, &mask, seed).unwrap();
            for p in &traj.points {
                let (i, j) = extent().cell_of(p.x, p.y);
                assert!(mask.get(0, i, j) > 0.5, "off-street point {p:?}");
                assert_eq!(*p, extent().cell_center(i, j));
            }
        }
    }

    #[test]
    fn both_mapped_models_are_deterministic() {
        let mask = grid_mask();
        let rwp = MobilityConfig::defaults(MobilityModel::MRwp);
        let gm = MobilityConfig::defaults(MobilityModel::MGm);
        assert_eq!(
            gen_m_rwp(&rwp, &mask, 7).unwrap(),
            gen_m_rwp(&rwp, &mask, 7).unwrap()
        );
        assert_eq!(
            gen_m_gm(&gm, &mask, 7).unwrap(),
            gen_m_gm(&gm, &mask, 7).unwrap()
        );
    }

    /// Mean angle between consecutive nonzero displacement vectors.
    fn mean_turn_angle(trajs: &[Trajectory]) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for t in trajs {
            let moves: Vec<(f64, f64)> = t
                .points
                .windows(2)
                .map(|w| (w[1].x - w[0].x, w[1].y - w[0].y))
                .filter(|&(dx, dy)| dx != 0.0 || dy != 0.0)
                .collect();
            for w in moves.windows(2) {
                let a = w[0].1.atan2(w[0].0);
                let b = w[1].1.atan2(w[1].0);
                sum += angle_deviation(a, b);
                count += 1;
            }
        }
        sum / count as f64
    }

    #[test]
    fn m_gm_turns_less_than_m_rwp() {
        // Momentum contrast: on a small grid map with fast users, the
        // waypoint model changes course at every corner and every (short)
        // leg change, while the Gauss-Markov model keeps tracking one
        // corridor direction.
        let small = Extent::new(0.0, 0.0, 160.0, 10.0).unwrap();
        let map = synth_map(2, small, 40.0, 0).unwrap();
        let mask = street_mask(&rasterize_map(&map).unwrap()).unwrap();

        let mut rwp = MobilityConfig::defaults(MobilityModel::MRwp);
        rwp.horizon_steps = 400;
        rwp.speed_min = 10.0;
        rwp.speed_max = 14.0;
        let mut gm = MobilityConfig::defaults(MobilityModel::MGm);
        gm.horizon_steps = 400;
        gm.gm_mean_speed = 12.0;
        gm.gm_sigma = 1.0;
        gm.gm_sigma_dir = 0.15;
        gm.gm_alpha = 0.95;

        let rwp_trajs: Vec<_> = (0..30)
            .map(|s| gen_m_rwp(&rwp, &mask, s).unwrap())
            .collect();
        let gm_trajs: Vec<_> = (0..30).map(|s| gen_m_gm(&gm, &mask, s).unwrap()).collect();
        let a_rwp = mean_turn_angle(&rwp_trajs);
        let a_gm = mean_turn_angle(&gm_trajs);
        assert!(
            a_gm < a_rwp,
            "momentum model turns more: {a_gm:.3} rad vs {a_rwp:.3} rad"
        );
    }
}
