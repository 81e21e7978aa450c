//! Synthetic desk-scale data: grid street maps and ground-truth
//! trajectories that follow class-weighted shortest street paths.

use super::{Extent, Point, Road, RoadClass, StreetMap, Trajectory};
use crate::error::{Error, Result};
use crate::raster::{rasterize_map, street_mask};
use crate::rng::{streams, stream_rng};
use rand::Rng;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Probability that a grid line is promoted from Minor to Major.
const MAJOR_PROMOTION_PROB: f64 = 0.3;
/// Cost of entering a Minor-only street cell, relative to a Major cell.
const MINOR_COST_RATIO: u64 = 3;

/// Generates a deterministic synthetic street map: an axis-aligned grid of
/// roads at `grid_pitch` spacing with a random subset promoted to Major,
/// plus `diagonal_count` random chords between grid intersections.
///
/// The resulting road graph is connected by construction: every chord ends
/// on a grid intersection and every grid line crosses all perpendicular
/// lines.
pub fn synth_map(
    seed: u64,
    extent: Extent,
    grid_pitch: f64,
    diagonal_count: usize,
) -> Result<StreetMap> {
    if grid_pitch < 2.0 * extent.cell_size {
        return Err(Error::validation(format!(
            "grid pitch {grid_pitch} must be at least twice the cell size {}",
            extent.cell_size
        )));
    }
    let mut rng = stream_rng(seed, streams::SYNTH_MAP);

    let line_offsets = |origin: f64| -> Vec<f64> {
        let mut offsets = Vec::new();
        let mut k = 0u32;
        loop {
            let v = origin + k as f64 * grid_pitch;
            if v > origin + extent.side + 1e-9 {
                break;
            }
            offsets.push(v.min(origin + extent.side));
            k += 1;
        }
        offsets
    };
    let xs = line_offsets(extent.origin_x);
    let ys = line_offsets(extent.origin_y);

    let mut roads = Vec::new();
    let y0 = extent.origin_y;
    let y1 = extent.origin_y + extent.side;
    let x0 = extent.origin_x;
    let x1 = extent.origin_x + extent.side;
    for &x in &xs {
        let class = if rng.gen_bool(MAJOR_PROMOTION_PROB) {
            RoadClass::Major
        } else {
            RoadClass::Minor
        };
        roads.push(Road {
            class,
            points: vec![Point::new(x, y0), Point::new(x, y1)],
        });
    }
    for &y in &ys {
        let class = if rng.gen_bool(MAJOR_PROMOTION_PROB) {
            RoadClass::Major
        } else {
            RoadClass::Minor
        };
        roads.push(Road {
            class,
            points: vec![Point::new(x0, y), Point::new(x1, y)],
        });
    }
    // Guarantee at least one Major corridor so the two-class structure is
    // always present.
    if roads.iter().all(|r| r.class == RoadClass::Minor) {
        roads[xs.len()].class = RoadClass::Major;
    }

    for _ in 0..diagonal_count {
        let mut pick = || {
            let ix = rng.gen_range(0..xs.len());
            let iy = rng.gen_range(0..ys.len());
            (ix, iy)
        };
        let a = pick();
        let mut b = pick();
        // Prefer chords that are genuinely diagonal; give up after a bounded
        // number of tries on degenerate grids (a single line per axis).
        for _ in 0..64 {
            if a.0 != b.0 && a.1 != b.1 {
                break;
            }
            b = pick();
        }
        if a == b {
            continue;
        }
        roads.push(Road {
            class: RoadClass::Minor,
            points: vec![
                Point::new(xs[a.0], ys[a.1]),
                Point::new(xs[b.0], ys[b.1]),
            ],
        });
    }
    StreetMap::new(extent, roads)
}

/// Per-cell entry cost over the rasterized map: Major cells cost 1, cells
/// covered only by Minor roads cost `MINOR_COST_RATIO`.
fn cell_costs(map_raster: &crate::raster::RasterGrid) -> Vec<Option<u64>> {
    let n = map_raster.n();
    let mut costs = vec![None; n * n];
    for j in 0..n {
        for i in 0..n {
            let major = map_raster.get(0, i, j) > 0.5;
            let minor = map_raster.get(1, i, j) > 0.5;
            if major {
                costs[j * n + i] = Some(1);
            } else if minor {
                costs[j * n + i] = Some(MINOR_COST_RATIO);
            }
        }
    }
    costs
}

/// Lowest-cost street path between two street cells, 4-connected, with the
/// cost of a step being the entry cost of the target cell. Ties resolve
/// deterministically (lowest flattened cell index first).
fn dijkstra_path(
    costs: &[Option<u64>],
    n: usize,
    start: (usize, usize),
    goal: (usize, usize),
) -> Option<Vec<(usize, usize)>> {
    let idx = |(i, j): (usize, usize)| j * n + i;
    let mut dist = vec![u64::MAX; n * n];
    let mut prev = vec![usize::MAX; n * n];
    let mut heap = BinaryHeap::new();
    dist[idx(start)] = 0;
    heap.push(Reverse((0u64, idx(start))));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u == idx(goal) {
            break;
        }
        let (i, j) = (u % n, u / n);
        // Neighbor order north, east, south, west.
        let neighbors = [
            (i as i64, j as i64 + 1),
            (i as i64 + 1, j as i64),
            (i as i64, j as i64 - 1),
            (i as i64 - 1, j as i64),
        ];
        for (ni, nj) in neighbors {
            if ni < 0 || nj < 0 || ni >= n as i64 || nj >= n as i64 {
                continue;
            }
            let v = nj as usize * n + ni as usize;
            let Some(step) = costs[v] else { continue };
            let nd = d + step;
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    if dist[idx(goal)] == u64::MAX {
        return None;
    }
    let mut path = vec![goal];
    let mut u = idx(goal);
    while u != idx(start) {
        u = prev[u];
        path.push((u % n, u / n));
    }
    path.reverse();
    Some(path)
}

/// Generates ground-truth trajectories on a street map.
///
/// Each trajectory is the lowest-cost street path between two uniformly
/// drawn street cells, with Minor cells costing three times Major cells,
/// so traffic concentrates on major roads. Points are street cell centers.
pub fn synth_trajectories(map: &StreetMap, count: usize, seed: u64) -> Result<Vec<Trajectory>> {
    let map_raster = rasterize_map(map)?;
    let mask = street_mask(&map_raster)?;
    let street_cells = mask.set_cells(0);
    if street_cells.is_empty() {
        return Err(Error::validation("map rasterizes to no street cells"));
    }
    let costs = cell_costs(&map_raster);
    let n = map_raster.n();
    let extent = map.extent;

    let mut rng = stream_rng(seed, streams::SYNTH_TRAJ);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let start = street_cells[rng.gen_range(0..street_cells.len())];
        let goal = street_cells[rng.gen_range(0..street_cells.len())];
        if start == goal {
            continue;
        }
        // Unreachable pairs are resampled, never surfaced; on a connected
        // map every pair is reachable.
        let Some(path) = dijkstra_path(&costs, n, start, goal) else {
            continue;
        };
        let points = path
            .into_iter()
            .map(|(i, j)| extent.cell_center(i, j))
            .collect();
        out.push(Trajectory::new(points));
    }
    Ok(out)
}
