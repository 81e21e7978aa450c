//! Image export: per-channel PGM for archival, composite PNG for viewing.
//!
//! Files are written north-up: the top image row is the highest y row of
//! the raster.

use super::RasterGrid;
use crate::error::{Error, Result};
use std::io::Write;
use std::path::{Path, PathBuf};

fn level(v: f64) -> u8 {
    (v * 255.0).round() as u8
}

/// Writes one binary PGM (`P5`, maxval 255) per channel, named
/// `<stem>.ch<k>.pgm`. Returns the written paths in channel order.
pub fn export_pgm(grid: &RasterGrid, stem: &Path) -> Result<Vec<PathBuf>> {
    let n = grid.n();
    let mut paths = Vec::with_capacity(grid.channels());
    for c in 0..grid.channels() {
        let path = stem.with_extension(format!("ch{c}.pgm"));
        let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        write!(file, "P5\n{n} {n}\n255\n")?;
        for j in (0..n).rev() {
            let row: Vec<u8> = (0..n).map(|i| level(grid.get(c, i, j))).collect();
            file.write_all(&row)?;
        }
        file.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes a composite PNG: 1 channel → grayscale; 2 channels → red/blue
/// overlay (channel 0 red, channel 1 blue); 3 channels → direct RGB.
pub fn export_png(grid: &RasterGrid, path: &Path) -> Result<()> {
    let n = grid.n() as u32;
    let img: image::DynamicImage = match grid.channels() {
        1 => {
            let buf = image::GrayImage::from_fn(n, n, |x, y| {
                let (i, j) = (x as usize, (n - 1 - y) as usize);
                image::Luma([level(grid.get(0, i, j))])
            });
            buf.into()
        }
        2 => {
            let buf = image::RgbImage::from_fn(n, n, |x, y| {
                let (i, j) = (x as usize, (n - 1 - y) as usize);
                image::Rgb([level(grid.get(0, i, j)), 0, level(grid.get(1, i, j))])
            });
            buf.into()
        }
        3 => {
            let buf = image::RgbImage::from_fn(n, n, |x, y| {
                let (i, j) = (x as usize, (n - 1 - y) as usize);
                image::Rgb([
                    level(grid.get(0, i, j)),
                    level(grid.get(1, i, j)),
                    level(grid.get(2, i, j)),
                ])
            });
            buf.into()
        }
        k => {
            return Err(Error::validation(format!(
                "PNG export supports 1–3 channels, got {k}"
            )))
        }
    };
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Io(std::io::Error::new(std::io::ErrorKind::Other, e)))?;
    Ok(())
}
