//! Portable map and trajectory data: domain types, file formats, synthetic
//! generation, and spatially disjoint train/test splits.
//!
//! All coordinates are extent-relative meters. Lengths persist at 0.01 m
//! resolution so that save/load round-trips reproduce values exactly.

mod io;
mod split;
mod synth;

pub use io::{load_map, load_trajectories, save_map, save_trajectories};
pub use split::spatial_split;
pub use synth::{synth_map, synth_trajectories};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A 2D position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Square working area on a fixed meter grid.
///
/// `side` must be a positive integer multiple of `cell_size`, and the grid
/// must have at least 8 cells per side (the smallest raster any consumer in
/// this crate accepts).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub origin_x: f64,
    pub origin_y: f64,
    pub side: f64,
    pub cell_size: f64,
}

impl Extent {
    pub fn new(origin_x: f64, origin_y: f64, side: f64, cell_size: f64) -> Result<Self> {
        if !(side > 0.0) || !(cell_size > 0.0) {
            return Err(Error::validation(format!(
                "extent side ({side}) and cell_size ({cell_size}) must be positive"
            )));
        }
        let ratio = side / cell_size;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "extent side {side} is not an integer multiple of cell_size {cell_size}"
            )));
        }
        if ratio.round() < 8.0 {
            return Err(Error::validation(format!(
                "extent grid must be at least 8 cells per side, got {}",
                ratio.round()
            )));
        }
        Ok(Extent {
            origin_x,
            origin_y,
            side,
            cell_size,
        })
    }

    /// Number of cells per side.
    pub fn grid_size(&self) -> usize {
        (self.side / self.cell_size).round() as usize
    }

    /// Whether `(x, y)` lies within the closed extent square.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.origin_x
            && x <= self.origin_x + self.side
            && y >= self.origin_y
            && y <= self.origin_y + self.side
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        self.contains(p.x, p.y)
    }

    /// Grid cell `(i, j)` of a point, with `i` the x index and `j` the y
    /// index. Points on the far edge clamp to index `N - 1`.
    pub fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let n = self.grid_size();
        let i = (((x - self.origin_x) / self.cell_size).floor() as i64).clamp(0, n as i64 - 1);
        let j = (((y - self.origin_y) / self.cell_size).floor() as i64).clamp(0, n as i64 - 1);
        (i as usize, j as usize)
    }

    /// Center of cell `(i, j)` in meters.
    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.origin_x + (i as f64 + 0.5) * self.cell_size,
            self.origin_y + (j as f64 + 0.5) * self.cell_size,
        )
    }

    /// True when two extents share any interior area.
    pub fn overlaps(&self, other: &Extent) -> bool {
        let ax1 = self.origin_x + self.side;
        let ay1 = self.origin_y + self.side;
        let bx1 = other.origin_x + other.side;
        let by1 = other.origin_y + other.side;
        self.origin_x < bx1 && other.origin_x < ax1 && self.origin_y < by1 && other.origin_y < ay1
    }
}

/// Road class after grouping: arterial roads versus everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoadClass {
    Major,
    Minor,
}

/// Maps a raw road-class tag onto the two-group scheme. OpenStreetMap-style
/// arterial tags (and the literal group names) become [`RoadClass::Major`];
/// every other tag is [`RoadClass::Minor`]. Matching is case-insensitive.
pub fn classify_road_tag(tag: &str) -> RoadClass {
    match tag.to_ascii_lowercase().as_str() {
        "major" | "motorway" | "trunk" | "primary" | "secondary" => RoadClass::Major,
        _ => RoadClass::Minor,
    }
}

/// One road segment chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub class: RoadClass,
    pub points: Vec<Point>,
}

/// A street map: class-tagged polylines within an extent.
#[derive(Debug, Clone, PartialEq)]
pub struct StreetMap {
    pub extent: Extent,
    pub roads: Vec<Road>,
}

impl StreetMap {
    /// Builds a map, checking that every polyline has at least two vertices
    /// and stays inside the extent.
    pub fn new(extent: Extent, roads: Vec<Road>) -> Result<Self> {
        for (ri, road) in roads.iter().enumerate() {
            if road.points.len() < 2 {
                return Err(Error::validation(format!(
                    "road {ri} has {} vertices, need at least 2",
                    road.points.len()
                )));
            }
            for (pi, p) in road.points.iter().enumerate() {
                if !extent.contains_point(p) {
                    return Err(Error::validation(format!(
                        "road {ri} vertex {pi} ({}, {}) lies outside the extent",
                        p.x, p.y
                    )));
                }
            }
        }
        Ok(StreetMap { extent, roads })
    }
}

/// Ordered sequence of positions, optionally with a uniform time step
/// between consecutive points.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<Point>,
    /// Seconds between consecutive points, when known. The default data
    /// convention is 1 s.
    pub point_interval: Option<f64>,
}

impl Trajectory {
    pub fn new(points: Vec<Point>) -> Self {
        Trajectory {
            points,
            point_interval: Some(1.0),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Which side of a spatial split a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitTag {
    Train,
    Test,
}

/// One map together with its trajectory set.
#[derive(Debug, Clone)]
pub struct DatasetEntry {
    pub map: StreetMap,
    pub trajectories: Vec<Trajectory>,
}

/// A collection of (map, trajectories) entries on one side of a split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub entries: Vec<DatasetEntry>,
    pub split_tag: SplitTag,
}
