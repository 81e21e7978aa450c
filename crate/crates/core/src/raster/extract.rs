//! Turns a raster image back into an ordered trajectory.

use super::{connected_components_8, RasterGrid};
use crate::error::{Error, Result};
use crate::geodata::{Extent, Trajectory};

/// Extracts an ordered trajectory from a 1-channel raster.
///
/// Cells at or above `threshold` are kept; of those, only the largest
/// 8-connected component survives (ties broken toward the component
/// containing the lowest-then-leftmost cell). The walk starts at a cell
/// with exactly one 8-neighbor in the component — the natural end of a
/// drawn path — preferring the topmost then leftmost such cell; if every
/// cell has ≥ 2 neighbors (e.g. a loop) the topmost-leftmost component
/// cell starts instead. From there a greedy walk repeatedly visits the
/// nearest unvisited component cell until none remain, backtracking across
/// gaps when the path branches. Output points are cell centers.
pub fn image_to_trajectory(
    img: &RasterGrid,
    threshold: f64,
    extent: &Extent,
) -> Result<Trajectory> {
    if img.channels() != 1 {
        return Err(Error::validation(format!(
            "trajectory extraction needs a 1-channel raster, got {}",
            img.channels()
        )));
    }
    if img.n() != extent.grid_size() {
        return Err(Error::validation(format!(
            "raster grid {} does not match extent grid {}",
            img.n(),
            extent.grid_size()
        )));
    }
    let n = img.n();
    let mut cells: Vec<(usize, usize)> = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if img.get(0, i, j) >= threshold {
                cells.push((i, j));
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::validation(
            "no raster cells at or above the threshold",
        ));
    }

    let mut components = connected_components_8(&cells);
    // Largest component wins; equal sizes fall back to the component whose
    // first (lowest j, then lowest i) cell comes earliest.
    components.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
    let component = &components[0];
    let in_comp: std::collections::HashSet<(usize, usize)> = component.iter().copied().collect();

    let degree = |&(i, j): &(usize, usize)| -> usize {
        let mut d = 0;
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni >= 0 && nj >= 0 && in_comp.contains(&(ni as usize, nj as usize)) {
                    d += 1;
                }
            }
        }
        d
    };

    // "Topmost" is the largest y index; ties break on the smaller x index.
    let top_left_order = |&(i, j): &(usize, usize)| (std::cmp::Reverse(j), i);
    let start = component
        .iter()
        .filter(|c| degree(c) == 1)
        .min_by_key(|c| top_left_order(c))
        .or_else(|| component.iter().min_by_key(|c| top_left_order(c)))
        .copied()
        .expect("component is non-empty");

    let mut remaining = in_comp;
    remaining.remove(&start);
    let mut order = vec![start];
    let mut current = start;
    while !remaining.is_empty() {
        let next = remaining
            .iter()
            .min_by_key(|&&(i, j)| {
                let di = i as i64 - current.0 as i64;
                let dj = j as i64 - current.1 as i64;
                (di * di + dj * dj, j, i)
            })
            .copied()
            .expect("remaining is non-empty");
        remaining.remove(&next);
        order.push(next);
        current = next;
    }

    let points = order
        .into_iter()
        .map(|(i, j)| extent.cell_center(i, j))
        .collect();
    Ok(Trajectory {
        points,
        point_interval: None,
    })
}
