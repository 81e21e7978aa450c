//! Street-map-conditioned trajectory synthesis toolkit.
//!
//! The crate bundles everything needed to study map-piloted user mobility at
//! desk scale: portable map/trajectory formats with a synthetic generator
//! ([`geodata`]), raster conversion between vector trajectories and grid
//! images ([`raster`]), the classic random mobility baselines and their
//! street-restricted variants ([`mobility`]), a conditional denoising
//! diffusion model trained to paint trajectories onto street maps
//! ([`diffusion`]), trajectory- and distribution-similarity metrics
//! ([`metrics`]), and a multi-cell wireless network simulator used to measure
//! how much a mobility model matters downstream ([`netsim`]).
//!
//! All randomized components are deterministic functions of explicit seeds.

pub mod diffusion;
pub mod error;
pub mod geodata;
pub mod metrics;
pub mod mobility;
pub mod netsim;
pub mod raster;
pub mod rng;

pub use error::{Error, Result};
pub use geodata::{Dataset, Extent, Point, Road, RoadClass, SplitTag, StreetMap, Trajectory};
pub use raster::RasterGrid;
