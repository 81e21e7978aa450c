//! Self-describing binary checkpoints for trained denoisers.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! offset  size          field
//! 0       8             magic  b"TRAJDIFF"
//! 8       4             format version, u32 (currently 1)
//! 12      4             schedule length T, u32
//! 16      8·T           per-step α values, f64
//! ·       4×4           network config: depth, base_width,
//!                       time_dim, groups, each u32
//! ·       4             tensor count, u32
//! per tensor:
//! ·       2             name length, u16
//! ·       name length   tensor name, UTF-8
//! ·       1             rank, u8
//! ·       4·rank        dimensions, u32 each
//! payload:
//! ·       4·Σ len       all tensor values as f32, concatenated in
//!                       table order
//! ```
//!
//! Loading rebuilds the parameter layout from the stored config and
//! requires the tensor table to match it exactly, so incompatible or
//! truncated files are rejected rather than silently misread.

use super::unet::{DenoiserParams, NetConfig};
use super::NoiseSchedule;
use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"TRAJDIFF";
const VERSION: u32 = 1;

/// Writes parameters and their noise schedule to `path`.
pub fn save_checkpoint(
    path: &Path,
    params: &DenoiserParams,
    schedule: &NoiseSchedule,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let alphas = schedule.alphas();
    w.write_all(&(alphas.len() as u32).to_le_bytes())?;
    for &a in alphas {
        w.write_all(&a.to_le_bytes())?;
    }
    let cfg = params.config();
    for v in [cfg.depth, cfg.base_width, cfg.time_dim, cfg.groups] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    let layout = params.layout();
    w.write_all(&(layout.entries.len() as u32).to_le_bytes())?;
    for e in &layout.entries {
        let name = e.name.as_bytes();
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&[e.shape.len() as u8])?;
        for &d in &e.shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
    }
    for &v in params.data() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Reads a checkpoint back into parameters and the schedule it was
/// trained with.
pub fn load_checkpoint(path: &Path) -> Result<(DenoiserParams, NoiseSchedule)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::parse(format!(
            "{} is not a denoiser checkpoint (bad magic)",
            path.display()
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::parse(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let t = read_u32(&mut r)? as usize;
    if t > 1_000_000 {
        return Err(Error::parse(format!("implausible schedule length {t}")));
    }
    let mut alphas = Vec::with_capacity(t);
    for _ in 0..t {
        alphas.push(read_f64(&mut r)?);
    }
    let schedule = NoiseSchedule::from_alphas(alphas)?;
    let cfg = NetConfig {
        depth: read_u32(&mut r)? as usize,
        base_width: read_u32(&mut r)? as usize,
        time_dim: read_u32(&mut r)? as usize,
        groups: read_u32(&mut r)? as usize,
    };
    cfg.validate()?;

    // The stored tensor table must agree with the layout implied by the
    // config.
    let reference = DenoiserParams::init(cfg, 0)?;
    let layout = reference.layout();
    let n_tensors = read_u32(&mut r)? as usize;
    if n_tensors != layout.entries.len() {
        return Err(Error::parse(format!(
            "checkpoint lists {n_tensors} tensors, config implies {}",
            layout.entries.len()
        )));
    }
    for e in &layout.entries {
        let name_len = read_u16(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::parse("tensor name is not valid UTF-8"))?;
        if name != e.name {
            return Err(Error::parse(format!(
                "tensor order mismatch: found {name}, expected {}",
                e.name
            )));
        }
        let mut rank = [0u8; 1];
        r.read_exact(&mut rank)?;
        if rank[0] as usize != e.shape.len() {
            return Err(Error::parse(format!("tensor {name} has wrong rank")));
        }
        for &want in &e.shape {
            let got = read_u32(&mut r)? as usize;
            if got != want {
                return Err(Error::parse(format!(
                    "tensor {name} dimension {got} does not match layout ({want})"
                )));
            }
        }
    }
    let total = layout.total;
    let mut payload = vec![0u8; 4 * total];
    r.read_exact(&mut payload)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::parse("checkpoint has trailing bytes"));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("checkpoint contains non-finite parameters"));
    }
    let params = DenoiserParams::from_raw(cfg, data)?;
    Ok((params, schedule))
}
