//! Street-grid routing support: shortest 4-connected paths through street
//! cells via breadth-first search.

use crate::error::{Error, Result};
use crate::raster::RasterGrid;
use std::collections::VecDeque;

/// An ordered walk over street cells in which consecutive cells share an
/// edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPath {
    pub cells: Vec<(usize, usize)>,
}

impl GridPath {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Checks the structural invariants against a street mask: every cell
    /// on-street, every consecutive pair 4-adjacent.
    pub fn validate(&self, mask: &RasterGrid) -> Result<()> {
        for &(i, j) in &self.cells {
            if mask.get(0, i, j) <= 0.5 {
                return Err(Error::validation(format!(
                    "path cell ({i}, {j}) is not a street cell"
                )));
            }
        }
        for w in self.cells.windows(2) {
            let di = w[0].0 as i64 - w[1].0 as i64;
            let dj = w[0].1 as i64 - w[1].1 as i64;
            if di.abs() + dj.abs() != 1 {
                return Err(Error::validation(format!(
                    "path cells {:?} and {:?} are not 4-neighbors",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

/// The 4-neighbors of a cell in fixed north, east, south, west order
/// (north is +y).
pub(crate) fn neighbors4(n: usize, (i, j): (usize, usize)) -> impl Iterator<Item = (usize, usize)> {
    let candidates = [
        (i as i64, j as i64 + 1),
        (i as i64 + 1, j as i64),
        (i as i64, j as i64 - 1),
        (i as i64 - 1, j as i64),
    ];
    candidates.into_iter().filter_map(move |(ni, nj)| {
        (ni >= 0 && nj >= 0 && ni < n as i64 && nj < n as i64).then(|| (ni as usize, nj as usize))
    })
}

/// Shortest street path from `start` to `goal` by breadth-first search
/// over 4-connected street cells.
///
/// Neighbors expand in fixed N, E, S, W order and the first discovery of a
/// cell fixes its parent, so the returned path is deterministic.
pub fn bfs_path(mask: &RasterGrid, start: (usize, usize), goal: (usize, usize)) -> Result<GridPath> {
    if mask.channels() != 1 {
        return Err(Error::validation("street mask must have exactly 1 channel"));
    }
    let n = mask.n();
    let on_street = |(i, j): (usize, usize)| mask.get(0, i, j) > 0.5;
    for (name, cell) in [("start", start), ("goal", goal)] {
        if cell.0 >= n || cell.1 >= n || !on_street(cell) {
            return Err(Error::validation(format!(
                "{name} cell {cell:?} is not a street cell"
            )));
        }
    }

    let idx = |(i, j): (usize, usize)| j * n + i;
    let mut parent: Vec<usize> = vec![usize::MAX; n * n];
    let mut queue = VecDeque::from([start]);
    parent[idx(start)] = idx(start);
    'search: while let Some(cell) = queue.pop_front() {
        for next in neighbors4(n, cell) {
            if !on_street(next) || parent[idx(next)] != usize::MAX {
                continue;
            }
            parent[idx(next)] = idx(cell);
            if next == goal {
                break 'search;
            }
            queue.push_back(next);
        }
    }
    if parent[idx(goal)] == usize::MAX {
        return Err(Error::validation(format!(
            "goal cell {goal:?} is unreachable from {start:?}"
        )));
    }

    let mut cells = vec![goal];
    let mut u = idx(goal);
    while u != idx(start) {
        u = parent[u];
        cells.push((u % n, u / n));
    }
    cells.reverse();
    Ok(GridPath { cells })
}

/// Largest 4-connected component of a street mask, in scan order.
/// Street-restricted generators confine themselves to this component so
/// every waypoint is mutually reachable.
pub fn largest_street_component(mask: &RasterGrid) -> Result<Vec<(usize, usize)>> {
    if mask.channels() != 1 {
        return Err(Error::validation("street mask must have exactly 1 channel"));
    }
    let cells = mask.set_cells(0);
    if cells.is_empty() {
        return Err(Error::validation("street mask has no street cells"));
    }
    let mut components = crate::raster::connected_components_4(&cells);
    components.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
    Ok(components.swap_remove(0))
}
