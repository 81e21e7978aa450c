//! Free-space mobility: random waypoint and Gauss-Markov over a
//! continuous extent.

use super::{gm_step, MobilityConfig, MobilityModel};
use crate::error::Result;
use crate::geodata::{Extent, Point, Trajectory};
use crate::rng::{streams, stream_rng};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn uniform_point(rng: &mut ChaCha8Rng, extent: &Extent) -> Point {
    Point::new(
        extent.origin_x + rng.gen::<f64>() * extent.side,
        extent.origin_y + rng.gen::<f64>() * extent.side,
    )
}

/// Folds a coordinate back into `[lo, lo + len]` by repeated reflection.
fn fold(v: f64, lo: f64, len: f64) -> f64 {
    let period = 2.0 * len;
    let mut u = (v - lo) % period;
    if u < 0.0 {
        u += period;
    }
    if u > len {
        u = period - u;
    }
    lo + u
}

fn reflect_into(extent: &Extent, p: Point) -> Point {
    Point::new(
        fold(p.x, extent.origin_x, extent.side),
        fold(p.y, extent.origin_y, extent.side),
    )
}

/// Random waypoint trajectory: straight legs between uniformly drawn
/// waypoints, each leg at a speed uniform in `[speed_min, speed_max]`,
/// sampled once per simulation step. Motion is continuous: time left over
/// when a waypoint is reached mid-step is spent on the next leg.
pub fn gen_rwp(cfg: &MobilityConfig, extent: &Extent, seed: u64) -> Result<Trajectory> {
    cfg.expect_model(MobilityModel::Rwp)?;
    let mut rng = stream_rng(seed, streams::RWP);

    let mut pos = uniform_point(&mut rng, extent);
    let mut target = uniform_point(&mut rng, extent);
    let mut speed = rng.gen_range(cfg.speed_min..=cfg.speed_max);

    let mut points = Vec::with_capacity(cfg.horizon_steps);
    points.push(pos);
    for _ in 1..cfg.horizon_steps {
        let mut remaining = cfg.step_seconds;
        while remaining > 1e-12 {
            if speed <= 0.0 {
                break; // zero-speed leg: the user stays put
            }
            let d = pos.dist(&target);
            let reach = speed * remaining;
            if reach < d {
                let f = reach / d;
                pos = Point::new(pos.x + (target.x - pos.x) * f, pos.y + (target.y - pos.y) * f);
                remaining = 0.0;
            } else {
                pos = target;
                remaining -= d / speed;
                target = uniform_point(&mut rng, extent);
                speed = rng.gen_range(cfg.speed_min..=cfg.speed_max);
            }
        }
        points.push(pos);
    }
    Ok(Trajectory {
        points,
        point_interval: Some(cfg.step_seconds),
    })
}

/// Gauss-Markov trajectory: speed and heading each follow the
/// variance-stabilized recurrence around their stationary means
/// (`gm_mean_speed` for speed; the initial heading for direction), and
/// positions reflect off the extent boundary. The internal speed/heading
/// states are never clipped, so the recurrence statistics are exact.
pub fn gen_gm(cfg: &MobilityConfig, extent: &Extent, seed: u64) -> Result<Trajectory> {
    cfg.expect_model(MobilityModel::Gm)?;
    let mut rng = stream_rng(seed, streams::GM);

    let mut pos = uniform_point(&mut rng, extent);
    let mut speed = cfg.gm_mean_speed;
    let mean_dir = rng.gen::<f64>() * std::f64::consts::TAU;
    let mut dir = mean_dir;

    let mut points = Vec::with_capacity(cfg.horizon_steps);
    points.push(pos);
    for _ in 1..cfg.horizon_steps {
        let ws: f64 = rng.sample(StandardNormal);
        let wd: f64 = rng.sample(StandardNormal);
        speed = gm_step(speed, cfg.gm_mean_speed, cfg.gm_sigma, cfg.gm_alpha, ws);
        dir = gm_step(dir, mean_dir, cfg.gm_sigma_dir, cfg.gm_alpha, wd);
        let step = speed * cfg.step_seconds;
        let proposal = Point::new(pos.x + step * dir.cos(), pos.y + step * dir.sin());
        pos = reflect_into(extent, proposal);
        points.push(pos);
    }
    Ok(Trajectory {
        points,
        point_interval: Some(cfg.step_seconds),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extent() -> Extent {
        Extent::new(0.0, 0.0, 640.0, 10.0).unwrap()
    }

    #[test]
    fn rwp_zero_speed_stays_put() {
        let mut cfg = MobilityConfig::defaults(MobilityModel::Rwp);
        cfg.speed_min = 0.0;
        cfg.speed_max = 0.0;
        let traj = gen_rwp(&cfg, &extent(), 5).unwrap();
        assert_eq!(traj.len(), cfg.horizon_steps);
        assert!(traj.points.iter().all(|p| *p == traj.points[0]));
    }

    #[test]
    fn rwp_single_step_horizon() {
        let mut cfg = MobilityConfig::defaults(MobilityModel::Rwp);
        cfg.horizon_steps = 1;
        let traj = gen_rwp(&cfg, &extent(), 5).unwrap();
        assert_eq!(traj.len(), 1);
    }

    #[test]
    fn rwp_displacement_bounded_by_max_speed() {
        let cfg = MobilityConfig::defaults(MobilityModel::Rwp);
        for seed in 0..10 {
            let traj = gen_rwp(&cfg, &extent(), seed).unwrap();
            for w in traj.points.windows(2) {
                let d = w[0].dist(&w[1]);
                assert!(
                    d <= cfg.speed_max * cfg.step_seconds + 1e-9,
                    "step of {d} m exceeds the speed bound"
                );
            }
        }
    }

    #[test]
    fn rwp_rejects_wrong_model() {
        let cfg = MobilityConfig::defaults(MobilityModel::Gm);
        assert!(gen_rwp(&cfg, &extent(), 0).is_err());
    }

    #[test]
    fn generators_are_deterministic_per_seed() {
        let rwp = MobilityConfig::defaults(MobilityModel::Rwp);
        assert_eq!(
            gen_rwp(&rwp, &extent(), 9).unwrap(),
            gen_rwp(&rwp, &extent(), 9).unwrap()
        );
        assert_ne!(
            gen_rwp(&rwp, &extent(), 9).unwrap(),
            gen_rwp(&rwp, &extent(), 10).unwrap()
        );
        let gm = MobilityConfig::defaults(MobilityModel::Gm);
        assert_eq!(
            gen_gm(&gm, &extent(), 9).unwrap(),
            gen_gm(&gm, &extent(), 9).unwrap()
        );
        assert_ne!(
            gen_gm(&gm, &extent(), 9).unwrap(),
            gen_gm(&gm, &extent(), 10).unwrap()
        );
    }

    #[test]
    fn all_points_stay_inside_the_extent() {
        let e = extent();
        let rwp = MobilityConfig::defaults(MobilityModel::Rwp);
        let mut gm = MobilityConfig::defaults(MobilityModel::Gm);
        gm.gm_mean_speed = 20.0; // fast enough to hit boundaries often
        gm.gm_sigma = 5.0;
        for seed in 0..10 {
            for traj in [
                gen_rwp(&rwp, &e, seed).unwrap(),
                gen_gm(&gm, &e, seed).unwrap(),
            ] {
                assert!(traj.points.iter().all(|p| e.contains_point(p)));
            }
        }
    }

    #[test]
    fn gm_full_memory_freezes_velocity() {
        // alpha = 1 degenerates the recurrence to s_t = s_{t-1}; away from
        // boundaries every step must then be the same displacement vector.
        let e = Extent::new(0.0, 0.0, 100_000.0, 10.0).unwrap();
        let mut cfg = MobilityConfig::defaults(MobilityModel::Gm);
        cfg.gm_alpha = 1.0;
        cfg.horizon_steps = 100;
        let traj = gen_gm(&cfg, &e, 4).unwrap();
        let margin = cfg.gm_mean_speed * cfg.step_seconds;
        assert!(
            traj.points
                .iter()
                .all(|p| p.x > margin && p.x < e.side - margin && p.y > margin),
            "trajectory touched the boundary; pick a different seed"
        );
        let d0 = (
            traj.points[1].x - traj.points[0].x,
            traj.points[1].y - traj.points[0].y,
        );
        for w in traj.points.windows(2) {
            assert!((w[1].x - w[0].x - d0.0).abs() < 1e-9);
            assert!((w[1].y - w[0].y - d0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn gm_memoryless_speed_is_iid_normal() {
        // alpha = 0 with a frozen heading makes per-step displacement
        // |s_t| with s_t ~ N(mu, sigma) i.i.d.; mu = 10 sigma keeps the
        // negative tail negligible. The extent is huge so the drifting
        // walk never reaches a boundary, where reflection would distort
        // displacements.
        let e = Extent::new(0.0, 0.0, 1e9, 10.0).unwrap();
        let mut cfg = MobilityConfig::defaults(MobilityModel::Gm);
        cfg.gm_alpha = 0.0;
        cfg.gm_sigma_dir = 0.0;
        cfg.gm_mean_speed = 5.0;
        cfg.gm_sigma = 0.5;
        cfg.horizon_steps = 100_001;
        let traj = gen_gm(&cfg, &e, 12).unwrap();
        let margin = 10.0 * cfg.gm_mean_speed;
        assert!(
            traj.points
                .iter()
                .all(|p| p.x > margin && p.x < e.side - margin
                    && p.y > margin && p.y < e.side - margin),
            "walk reached the boundary; enlarge the extent"
        );
        let steps: Vec<f64> = traj.points.windows(2).map(|w| w[0].dist(&w[1])).collect();
        let n = steps.len() as f64;
        let mean = steps.iter().sum::<f64>() / n;
        let var = steps.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        assert!((mean - cfg.gm_mean_speed).abs() < 0.05, "mean {mean}");
        let target = cfg.gm_sigma * cfg.gm_sigma;
        assert!((var - target).abs() / target < 0.1, "variance {var}");
    }
}
