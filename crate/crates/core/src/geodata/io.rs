//! File formats: street maps as JSON, trajectories as CSV.

use super::{classify_road_tag, Extent, Point, Road, RoadClass, StreetMap, Trajectory};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

/// Rounds a coordinate to the storage resolution (0.01 m).
fn round_cm(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    extent: Extent,
    roads: Vec<RoadFile>,
}

#[derive(Serialize, Deserialize)]
struct RoadFile {
    class: String,
    points: Vec<[f64; 2]>,
}

/// Reads a street map from a JSON file and validates it.
pub fn load_map(path: &Path) -> Result<StreetMap> {
    let file = File::open(path)?;
    let raw: MapFile = serde_json::from_reader(BufReader::new(file))?;
    let extent = Extent::new(
        raw.extent.origin_x,
        raw.extent.origin_y,
        raw.extent.side,
        raw.extent.cell_size,
    )?;
    let roads = raw
        .roads
        .into_iter()
        .map(|r| Road {
            class: classify_road_tag(&r.class),
            points: r.points.iter().map(|p| Point::new(p[0], p[1])).collect(),
        })
        .collect();
    StreetMap::new(extent, roads)
}

/// Writes a street map as JSON. Coordinates are stored at 0.01 m
/// resolution, so a load after save reproduces stored values exactly.
pub fn save_map(map: &StreetMap, path: &Path) -> Result<()> {
    let raw = MapFile {
        extent: map.extent,
        roads: map
            .roads
            .iter()
            .map(|r| RoadFile {
                class: match r.class {
                    RoadClass::Major => "major".to_string(),
                    RoadClass::Minor => "minor".to_string(),
                },
                points: r
                    .points
                    .iter()
                    .map(|p| [round_cm(p.x), round_cm(p.y)])
                    .collect(),
            })
            .collect(),
    };
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, &raw)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

/// Reads trajectories from a `traj_id,seq,x,y` CSV file.
///
/// Rows of one trajectory must be contiguous with `seq` counting up from 0;
/// anything else is a parse error. Points outside `extent` are a validation
/// error.
pub fn load_trajectories(path: &Path, extent: &Extent) -> Result<Vec<Trajectory>> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));

    let mut out: Vec<Trajectory> = Vec::new();
    let mut current_id: Option<u64> = None;
    let mut current: Vec<Point> = Vec::new();
    let mut seen: std::collections::HashSet<u64> = std::collections::HashSet::new();

    for record in reader.records() {
        let record = record?;
        if record.len() != 4 {
            return Err(Error::parse(format!(
                "trajectory row has {} fields, expected 4 (traj_id,seq,x,y)",
                record.len()
            )));
        }
        let parse_u64 = |s: &str, what: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::parse(format!("bad {what} value {s:?}")))
        };
        let parse_f64 = |s: &str, what: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(format!("bad {what} value {s:?}")))
        };
        let id = parse_u64(&record[0], "traj_id")?;
        let seq = parse_u64(&record[1], "seq")?;
        let x = parse_f64(&record[2], "x")?;
        let y = parse_f64(&record[3], "y")?;
        if !extent.contains(x, y) {
            return Err(Error::validation(format!(
                "trajectory {id} point ({x}, {y}) lies outside the extent"
            )));
        }

        if current_id != Some(id) {
            if let Some(_prev) = current_id.take() {
                out.push(Trajectory::new(std::mem::take(&mut current)));
            }
            if !seen.insert(id) {
                return Err(Error::parse(format!(
                    "trajectory {id} appears in non-contiguous row blocks"
                )));
            }
            current_id = Some(id);
        }
        if seq as usize != current.len() {
            return Err(Error::parse(format!(
                "trajectory {id} row {} has seq {seq}, expected {}",
                current.len(),
                current.len()
            )));
        }
        current.push(Point::new(x, y));
    }
    if current_id.is_some() {
        out.push(Trajectory::new(current));
    }
    Ok(out)
}

/// Writes trajectories as `traj_id,seq,x,y` CSV with coordinates at 0.01 m
/// resolution. Trajectory ids are assigned by position, starting at 0.
pub fn save_trajectories(trajectories: &[Trajectory], path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    writer.write_record(["traj_id", "seq", "x", "y"])?;
    for (id, traj) in trajectories.iter().enumerate() {
        for (seq, p) in traj.points.iter().enumerate() {
            writer.write_record([
                id.to_string(),
                seq.to_string(),
                format!("{:.2}", round_cm(p.x)),
                format!("{:.2}", round_cm(p.y)),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}
