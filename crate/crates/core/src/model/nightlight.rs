//! Nighttime-light grid sampling and the imagery-to-nightlight baseline.

use crate::error::{Error, Result};
use crate::raster::{AoiFootprint, LatLon, RasterGrid};

use super::network::{ConvRegressorConfig, ModelParams, Scalar};
use super::train::{train, Dataset, TrainOutcome, TrainSpec};

/// Grid spacing in degrees (30 arc-seconds).
pub const NIGHTLIGHT_CELL_DEG: f64 = 1.0 / 120.0;
pub const NIGHTLIGHT_MAX: f64 = 63.0;

/// Integer light intensities on a regular lat/lon grid; row 0 is the northern edge.
#[derive(Debug, Clone, PartialEq)]
pub struct NightlightGrid {
    pub north: f64,
    pub west: f64,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<u8>,
}

impl NightlightGrid {
    pub fn new(north: f64, west: f64, rows: usize, cols: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::schema(format!("{} values for a {rows}×{cols} grid", values.len())));
        }
        if let Some(v) = values.iter().find(|v| f64::from(**v) > NIGHTLIGHT_MAX) {
            return Err(Error::input(format!("nightlight value {v} above {NIGHTLIGHT_MAX}")));
        }
        Ok(NightlightGrid {
            north,
            west,
            rows,
            cols,
            values,
        })
    }

    pub fn south(&self) -> f64 {
        self.north - self.rows as f64 * NIGHTLIGHT_CELL_DEG
    }

    pub fn east(&self) -> f64 {
        self.west + self.cols as f64 * NIGHTLIGHT_CELL_DEG
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.values[row * self.cols + col]
    }

    pub fn contains(&self, p: LatLon) -> bool {
        p.lat <= self.north && p.lat >= self.south() && p.lon >= self.west && p.lon <= self.east()
    }

    pub fn to_raster(&self) -> RasterGrid {
        let pixels = self.values.iter().map(|v| f32::from(*v)).collect();
        RasterGrid::from_parts(
            self.cols,
            self.rows,
            vec!["nightlight".into()],
            pixels,
            vec![true; self.rows * self.cols],
            NIGHTLIGHT_CELL_DEG,
            (self.west, self.north),
        )
        .expect("grid dimensions are consistent")
    }

    pub fn from_raster(grid: &RasterGrid) -> Result<Self> {
        if grid.band_count() != 1 {
            return Err(Error::schema("nightlight raster must have exactly one band"));
        }
        if (grid.pixel_size() - NIGHTLIGHT_CELL_DEG).abs() > 1e-12 {
            return Err(Error::schema(format!(
                "nightlight cell size {} is not 30 arc-seconds",
                grid.pixel_size()
            )));
        }
        let mut values = Vec::with_capacity(grid.len());
        for v in grid.band(0) {
            if v.fract() != 0.0 || !(0.0..=NIGHTLIGHT_MAX as f32).contains(v) {
                return Err(Error::input(format!("nightlight value {v} is not an integer in [0, 63]")));
            }
            values.push(*v as u8);
        }
        let (west, north) = grid.origin();
        NightlightGrid::new(north, west, grid.height(), grid.width(), values)
    }
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Area-weighted mean intensity of the cells under the village footprint.
/// Parts of the footprint beyond the grid edge are ignored.
pub fn sample_nightlight(grid: &NightlightGrid, centroid: LatLon) -> Result<f64> {
    if !grid.contains(centroid) {
        return Err(Error::coverage(format!(
            "centroid ({}, {}) lies outside the nightlight grid",
            centroid.lat, centroid.lon
        )));
    }
    let (hlat, hlon) = AoiFootprint::new("", centroid).half_extent_deg();
    let (lat0, lat1) = ((centroid.lat - hlat).max(grid.south()), (centroid.lat + hlat).min(grid.north));
    let (lon0, lon1) = ((centroid.lon - hlon).max(grid.west), (centroid.lon + hlon).min(grid.east()));
    let c = NIGHTLIGHT_CELL_DEG;
    let r0 = (((grid.north - lat1) / c).floor().max(0.0) as usize).min(grid.rows - 1);
    let r1 = (((grid.north - lat0) / c).ceil() as usize).min(grid.rows);
    let c0 = (((lon0 - grid.west) / c).floor().max(0.0) as usize).min(grid.cols - 1);
    let c1 = (((lon1 - grid.west) / c).ceil() as usize).min(grid.cols);
    let base = (r0..r1)
        .flat_map(|r| (c0..c1).map(move |col| (r, col)))
        .map(|(r, col)| grid.get(r, col))
        .min()
        .unwrap_or(0);
    let (mut acc, mut area) = (0.0, 0.0);
    for r in r0..r1 {
        let top = grid.north - r as f64 * c;
        let dy = overlap(top - c, top, lat0, lat1);
        if dy == 0.0 {
            continue;
        }
        for col in c0..c1 {
            let left = grid.west + col as f64 * c;
            let a = dy * overlap(left, left + c, lon0, lon1);
            acc += a * f64::from(grid.get(r, col) - base);
            area += a;
        }
    }
    if area <= 0.0 {
        return Err(Error::coverage("footprint does not overlap the nightlight grid"));
    }
    Ok(f64::from(base) + acc / area)
}

/// Trains a single-output regressor from tiles to sampled nightlight.
pub fn train_nightlight_baseline<F: Scalar>(
    data: &Dataset<F>,
    spec: &TrainSpec,
    config: &ConvRegressorConfig,
) -> Result<TrainOutcome<F>> {
    if data.targets.iter().any(|t| t.len() != 1) {
        return Err(Error::schema("nightlight targets must be scalars"));
    }
    let mut config = config.clone();
    config.output_dim = 1;
    train(data, spec, ModelParams::init(&config)?)
}

/// Nightlight prediction clipped to the sensor range.
pub fn predict_nightlight<F: Scalar>(params: &ModelParams<F>, tile: &[F]) -> Result<f64> {
    let y = params.forward(tile)?;
    Ok(super::network::to64(y[0]).clamp(0.0, NIGHTLIGHT_MAX))
}
