//! Raster images on the extent grid: map/trajectory rasterization, channel
//! masks, square symmetries, trajectory extraction, and image export.
//!
//! A raster cell `(i, j)` covers the square `[i·cs, (i+1)·cs) × [j·cs,
//! (j+1)·cs)` in extent-relative meters, so `j = 0` is the bottom row.
//! Image exports flip vertically to put north at the top.

mod export;
mod extract;

pub use export::{export_pgm, export_png};
pub use extract::image_to_trajectory;

use crate::error::{Error, Result};
use crate::geodata::{Extent, Point, RoadClass, StreetMap, Trajectory};
use ndarray::Array3;

/// Fixed-size multi-channel image on an extent grid, all values in [0, 1].
///
/// Data layout is `(channel, j, i)` with `i` the x index and `j` the y
/// index.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    extent: Extent,
    data: Array3<f64>,
}

impl RasterGrid {
    /// All-zero raster with the given channel count.
    pub fn zeros(extent: Extent, channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::validation("raster needs at least one channel"));
        }
        let n = extent.grid_size();
        Ok(RasterGrid {
            extent,
            data: Array3::zeros((channels, n, n)),
        })
    }

    /// Wraps an existing `(channels, N, N)` array, validating shape and the
    /// unit-interval range.
    pub fn from_array(extent: Extent, data: Array3<f64>) -> Result<Self> {
        let n = extent.grid_size();
        let shape = data.shape();
        if shape[0] == 0 || shape[1] != n || shape[2] != n {
            return Err(Error::validation(format!(
                "raster shape {shape:?} does not match extent grid {n}×{n}"
            )));
        }
        if data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::validation(
                "raster values must lie in the unit interval",
            ));
        }
        Ok(RasterGrid { extent, data })
    }

    pub fn extent(&self) -> &Extent {
        &self.extent
    }

    /// Cells per side.
    pub fn n(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c, j, i)]
    }

    pub fn set(&mut self, c: usize, i: usize, j: usize, v: f64) {
        assert!(
            (0.0..=1.0).contains(&v),
            "raster value {v} outside unit interval"
        );
        self.data[(c, j, i)] = v;
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    /// Number of cells above 0.5 in one channel.
    pub fn popcount(&self, c: usize) -> usize {
        self.data
            .index_axis(ndarray::Axis(0), c)
            .iter()
            .filter(|&&v| v > 0.5)
            .count()
    }

    /// Whether every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Cells above 0.5 in one channel, in `(i, j)` scan order (j outer).
    pub fn set_cells(&self, c: usize) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for j in 0..n {
            for i in 0..n {
                if self.get(c, i, j) > 0.5 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// 8-connected discrete line between two cells (Bresenham), endpoints
/// included.
pub(crate) fn line_cells_8(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let (x1, y1) = b;
    let dx = (x1 - x).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let dy = -(y1 - y).abs();
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = vec![(x, y)];
    while (x, y) != (x1, y1) {
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
        out.push((x, y));
    }
    out
}

/// 4-connected discrete line between two cells: like Bresenham but never
/// stepping diagonally, so every consecutive pair shares an edge. Yields
/// `|dx| + |dy| + 1` cells.
pub(crate) fn line_cells_4(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let (x1, y1) = b;
    let dx = (x1 - x).abs();
    let dy = (y1 - y).abs();
    let sx = (x1 - x).signum();
    let sy = (y1 - y).signum();
    let (mut ix, mut iy) = (0i64, 0i64);
    let mut out = vec![(x, y)];
    while ix < dx || iy < dy {
        // Advance whichever axis crosses its next half-step first.
        if (2 * ix + 1) * dy < (2 * iy + 1) * dx {
            x += sx;
            ix += 1;
        } else {
            y += sy;
            iy += 1;
        }
        out.push((x, y));
    }
    out
}

fn clamped_cell(extent: &Extent, p: &Point) -> (i64, i64) {
    let (i, j) = extent.cell_of(p.x, p.y);
    (i as i64, j as i64)
}

/// Rasterizes a trajectory into a 1-channel binary image.
///
/// Each point maps to its grid cell (upper-edge points clamp to `N - 1`);
/// consecutive points are joined with Bresenham lines so the drawn path is
/// 8-connected.
pub fn rasterize_trajectory(traj: &Trajectory, extent: &Extent) -> Result<RasterGrid> {
    if traj.is_empty() {
        return Err(Error::validation("cannot rasterize an empty trajectory"));
    }
    for p in &traj.points {
        if !extent.contains_point(p) {
            return Err(Error::validation(format!(
                "trajectory point ({}, {}) lies outside the extent",
                p.x, p.y
            )));
        }
    }
    let mut grid = RasterGrid::zeros(*extent, 1)?;
    let cells: Vec<(i64, i64)> = traj.points.iter().map(|p| clamped_cell(extent, p)).collect();
    grid.set(0, cells[0].0 as usize, cells[0].1 as usize, 1.0);
    for w in cells.windows(2) {
        for (i, j) in line_cells_8(w[0], w[1]) {
            grid.set(0, i as usize, j as usize, 1.0);
        }
    }
    Ok(grid)
}

/// Rasterizes a street map into a 2-channel binary image: channel 0 holds
/// Major roads, channel 1 Minor roads, both one cell wide.
///
/// Polylines are drawn 4-connected so that street-restricted models, which
/// move between edge-adjacent cells, can traverse diagonal roads.
pub fn rasterize_map(map: &StreetMap) -> Result<RasterGrid> {
    let mut grid = RasterGrid::zeros(map.extent, 2)?;
    for road in &map.roads {
        let c = match road.class {
            RoadClass::Major => 0,
            RoadClass::Minor => 1,
        };
        let cells: Vec<(i64, i64)> = road
            .points
            .iter()
            .map(|p| clamped_cell(&map.extent, p))
            .collect();
        grid.set(c, cells[0].0 as usize, cells[0].1 as usize, 1.0);
        for w in cells.windows(2) {
            for (i, j) in line_cells_4(w[0], w[1]) {
                grid.set(c, i as usize, j as usize, 1.0);
            }
        }
    }
    Ok(grid)
}

/// Collapses a 2-channel map raster into a single street/non-street mask
/// (elementwise OR).
pub fn street_mask(map_raster: &RasterGrid) -> Result<RasterGrid> {
    if map_raster.channels() != 2 {
        return Err(Error::validation(format!(
            "street mask needs a 2-channel map raster, got {} channels",
            map_raster.channels()
        )));
    }
    let n = map_raster.n();
    let mut mask = RasterGrid::zeros(map_raster.extent, 1)?;
    for j in 0..n {
        for i in 0..n {
            if map_raster.get(0, i, j) > 0.5 || map_raster.get(1, i, j) > 0.5 {
                mask.set(0, i, j, 1.0);
            }
        }
    }
    Ok(mask)
}

/// Applies one of the eight symmetries of the square to all channels.
///
/// Elements 0–3 rotate counterclockwise by `element`·90°; elements 4–7
/// first mirror horizontally (x → N−1−x), then rotate by `(element−4)`·90°.
pub fn dihedral_transform(grid: &RasterGrid, element: u8) -> Result<RasterGrid> {
    if element > 7 {
        return Err(Error::validation(format!(
            "dihedral element must be 0..=7, got {element}"
        )));
    }
    let n = grid.n();
    let rot = element % 4;
    let flip = element >= 4;
    let mut out = RasterGrid::zeros(grid.extent, grid.channels())?;
    for c in 0..grid.channels() {
        for j in 0..n {
            for i in 0..n {
                let (mut ti, mut tj) = (i, j);
                if flip {
                    ti = n - 1 - ti;
                }
                for _ in 0..rot {
                    let (pi, pj) = (ti, tj);
                    ti = n - 1 - pj;
                    tj = pi;
                }
                out.set(c, ti, tj, grid.get(c, i, j));
            }
        }
    }
    Ok(out)
}

/// Set cells of a 1-channel raster grouped into 8-connected components.
pub(crate) fn connected_components_8(cells: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    connected_components(cells, true)
}

/// Set cells of a 1-channel raster grouped into 4-connected components.
pub(crate) fn connected_components_4(cells: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    connected_components(cells, false)
}

fn connected_components(cells: &[(usize, usize)], diagonal: bool) -> Vec<Vec<(usize, usize)>> {
    use std::collections::{HashSet, VecDeque};
    let set: HashSet<(usize, usize)> = cells.iter().copied().collect();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut components = Vec::new();
    for &start in cells {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some((i, j)) = queue.pop_front() {
            comp.push((i, j));
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if (di == 0 && dj == 0) || (!diagonal && di != 0 && dj != 0) {
                        continue;
                    }
                    let ni = i as i64 + di;
                    let nj = j as i64 + dj;
                    if ni < 0 || nj < 0 {
                        continue;
                    }
                    let next = (ni as usize, nj as usize);
                    if set.contains(&next) && seen.insert(next) {
                        queue.push_back(next);
                    }
                }
            }
        }
        comp.sort_unstable_by_key(|&(i, j)| (j, i));
        components.push(comp);
    }
    components
}
