//! Raster primitives: georeferenced multi-band grids, scenes, village
//! footprints, NDVI and dataset-wide band normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of a village footprint in meters.
pub const AOI_SIDE_M: f64 = 3360.0;
/// Output tile edge in pixels.
pub const TILE_PX: usize = 224;
/// Output (pansharpened) pixel size in meters.
pub const TILE_PIXEL_M: f64 = 15.0;
/// Multispectral pixel size in meters.
pub const MS_PIXEL_M: f64 = 30.0;

/// Sentinel returned by [`mean_ndvi`] when the footprint holds no usable pixel.
pub const NDVI_EMPTY_SENTINEL: f64 = -2.0;

/// Upper end of the reflectance range stored in scenes.
pub const REFLECTANCE_MAX: f32 = 1.0;

const METERS_PER_DEGREE: f64 = 111_320.0;

pub const MS_BANDS: [&str; 4] = ["blue", "green", "red", "nir"];
pub const RGB_BANDS: [&str; 3] = ["red", "green", "blue"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }
}

/// Local equirectangular projection centred on a point. Meters per degree
/// of longitude are fixed at the centre latitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalProjection {
    pub center: LatLon,
}

impl LocalProjection {
    pub fn new(center: LatLon) -> Self {
        LocalProjection { center }
    }

    pub fn meters_per_degree_lon(&self) -> f64 {
        METERS_PER_DEGREE * self.center.lat.to_radians().cos()
    }

    pub fn meters_per_degree_lat(&self) -> f64 {
        METERS_PER_DEGREE
    }

    /// Projected (east, north) meters of a geographic point.
    pub fn to_xy(&self, p: LatLon) -> (f64, f64) {
        (
            (p.lon - self.center.lon) * self.meters_per_degree_lon(),
            (p.lat - self.center.lat) * self.meters_per_degree_lat(),
        )
    }

    pub fn to_latlon(&self, x: f64, y: f64) -> LatLon {
        LatLon {
            lat: self.center.lat + y / self.meters_per_degree_lat(),
            lon: self.center.lon + x / self.meters_per_degree_lon(),
        }
    }
}

/// Axis-aligned rectangle in projected meters, half-open on the max side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x < self.max_x && y >= self.min_y && y < self.max_y
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min_x < other.max_x
            && other.min_x < self.max_x
            && self.min_y < other.max_y
            && other.min_y < self.max_y
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// Georeferenced multi-band raster. Pixels are stored band-major
/// (`band * width * height + row * width + col`); row 0 is the northern edge.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    width: usize,
    height: usize,
    bands: Vec<String>,
    pixels: Vec<f32>,
    valid_mask: Vec<bool>,
    pixel_size: f64,
    origin: (f64, f64),
}

impl RasterGrid {
    /// Zero-filled, fully valid grid.
    pub fn new(
        width: usize,
        height: usize,
        bands: &[&str],
        pixel_size: f64,
        origin: (f64, f64),
    ) -> Result<Self> {
        let bands: Vec<String> = bands.iter().map(|b| b.to_string()).collect();
        let n = width * height * bands.len();
        Self::from_parts(
            width,
            height,
            bands,
            vec![0.0; n],
            vec![true; width * height],
            pixel_size,
            origin,
        )
    }

    pub fn from_parts(
        width: usize,
        height: usize,
        bands: Vec<String>,
        pixels: Vec<f32>,
        valid_mask: Vec<bool>,
        pixel_size: f64,
        origin: (f64, f64),
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::schema(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        if bands.is_empty() {
            return Err(Error::schema("raster needs at least one band"));
        }
        if pixels.len() != width * height * bands.len() {
            return Err(Error::schema(format!(
                "pixel buffer holds {} values, expected {}",
                pixels.len(),
                width * height * bands.len()
            )));
        }
        if valid_mask.len() != width * height {
            return Err(Error::schema(format!(
                "mask holds {} entries, expected {}",
                valid_mask.len(),
                width * height
            )));
        }
        if !(pixel_size > 0.0) || !pixel_size.is_finite() {
            return Err(Error::schema(format!("pixel size must be positive, got {pixel_size}")));
        }
        Ok(RasterGrid {
            width,
            height,
            bands,
            pixels,
            valid_mask,
            pixel_size,
            origin,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn band_names(&self) -> &[String] {
        &self.bands
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn band_index(&self, name: &str) -> Option<usize> {
        self.bands.iter().position(|b| b == name)
    }

    pub fn require_band(&self, name: &str) -> Result<usize> {
        self.band_index(name)
            .ok_or_else(|| Error::schema(format!("raster has no '{name}' band")))
    }

    pub fn band(&self, index: usize) -> &[f32] {
        let n = self.len();
        &self.pixels[index * n..(index + 1) * n]
    }

    pub fn band_mut(&mut self, index: usize) -> &mut [f32] {
        let n = self.len();
        &mut self.pixels[index * n..(index + 1) * n]
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid_mask
    }

    pub fn valid_mask_mut(&mut self) -> &mut [bool] {
        &mut self.valid_mask
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    pub fn get(&self, band: usize, col: usize, row: usize) -> f32 {
        self.pixels[band * self.len() + row * self.width + col]
    }

    pub fn set(&mut self, band: usize, col: usize, row: usize, value: f32) {
        let n = self.len();
        self.pixels[band * n + row * self.width + col] = value;
    }

    pub fn is_valid(&self, col: usize, row: usize) -> bool {
        self.valid_mask[row * self.width + col]
    }

    pub fn valid_count(&self) -> usize {
        self.valid_mask.iter().filter(|v| **v).count()
    }

    /// Projected coordinates of a pixel centre.
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.origin.0 + (col as f64 + 0.5) * self.pixel_size,
            self.origin.1 - (row as f64 + 0.5) * self.pixel_size,
        )
    }

    pub fn extent(&self) -> Rect {
        Rect {
            min_x: self.origin.0,
            max_x: self.origin.0 + self.width as f64 * self.pixel_size,
            min_y: self.origin.1 - self.height as f64 * self.pixel_size,
            max_y: self.origin.1,
        }
    }

    /// Row-major indices of pixels whose centre lies inside `rect`.
    pub fn pixels_in(&self, rect: &Rect) -> Vec<usize> {
        let mut out = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                let (x, y) = self.pixel_center(col, row);
                if rect.contains(x, y) {
                    out.push(row * self.width + col);
                }
            }
        }
        out
    }

    pub fn same_geometry(&self, other: &RasterGrid) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.pixel_size == other.pixel_size
            && self.origin == other.origin
    }

    /// Copy of the `width x height` window starting at (`col0`, `row0`).
    pub fn window(&self, col0: usize, row0: usize, width: usize, height: usize) -> Result<Self> {
        if col0 + width > self.width || row0 + height > self.height {
            return Err(Error::coverage(format!(
                "window {width}x{height}+{col0}+{row0} exceeds {}x{} raster",
                self.width, self.height
            )));
        }
        let mut out = RasterGrid::from_parts(
            width,
            height,
            self.bands.clone(),
            vec![0.0; width * height * self.bands.len()],
            vec![false; width * height],
            self.pixel_size,
            (
                self.origin.0 + col0 as f64 * self.pixel_size,
                self.origin.1 - row0 as f64 * self.pixel_size,
            ),
        )?;
        for b in 0..self.bands.len() {
            for r in 0..height {
                let src = &self.band(b)[(row0 + r) * self.width + col0..][..width];
                out.band_mut(b)[r * width..(r + 1) * width].copy_from_slice(src);
            }
        }
        for r in 0..height {
            let src = &self.valid_mask[(row0 + r) * self.width + col0..][..width];
            out.valid_mask[r * width..(r + 1) * width].copy_from_slice(src);
        }
        Ok(out)
    }

    /// Subset of bands, in the requested order.
    pub fn select_bands(&self, names: &[&str]) -> Result<Self> {
        let n = self.len();
        let mut pixels = Vec::with_capacity(n * names.len());
        for name in names {
            let idx = self.require_band(name)?;
            pixels.extend_from_slice(self.band(idx));
        }
        RasterGrid::from_parts(
            self.width,
            self.height,
            names.iter().map(|s| s.to_string()).collect(),
            pixels,
            self.valid_mask.clone(),
            self.pixel_size,
            self.origin,
        )
    }
}

/// Acquisition date as calendar year and day of year. Orders chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AcquisitionDate {
    pub year: i32,
    pub day_of_year: u16,
}

/// One acquisition over a village: 30 m multispectral, 15 m panchromatic and
/// per-MS-pixel cloud flags. Coordinates are in the local projection of `frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub ms: RasterGrid,
    pub pan: RasterGrid,
    pub qa: Vec<bool>,
    pub acquired: AcquisitionDate,
    pub tier: u8,
    pub frame: LatLon,
}

impl Scene {
    pub fn new(
        ms: RasterGrid,
        pan: RasterGrid,
        qa: Vec<bool>,
        acquired: AcquisitionDate,
        tier: u8,
        frame: LatLon,
    ) -> Result<Self> {
        for band in MS_BANDS {
            ms.require_band(band)?;
        }
        if pan.band_count() != 1 {
            return Err(Error::schema("panchromatic raster must have exactly one band"));
        }
        if pan.width() != 2 * ms.width() || pan.height() != 2 * ms.height() {
            return Err(Error::schema(format!(
                "pan {}x{} is not twice ms {}x{}",
                pan.width(),
                pan.height(),
                ms.width(),
                ms.height()
            )));
        }
        if qa.len() != ms.len() {
            return Err(Error::schema(format!(
                "qa holds {} flags for {} ms pixels",
                qa.len(),
                ms.len()
            )));
        }
        if tier != 1 && tier != 2 {
            return Err(Error::schema(format!("tier must be 1 or 2, got {tier}")));
        }
        Ok(Scene {
            ms,
            pan,
            qa,
            acquired,
            tier,
            frame,
        })
    }

    pub fn projection(&self) -> LocalProjection {
        LocalProjection::new(self.frame)
    }

    /// An MS pixel is saturated when any band reaches 0.999 of the representable maximum.
    pub fn is_saturated(&self, index: usize) -> bool {
        let limit = 0.999 * REFLECTANCE_MAX;
        (0..self.ms.band_count()).any(|b| self.ms.band(b)[index] >= limit)
    }

    /// Valid, cloud-free and unsaturated.
    pub fn is_usable(&self, index: usize) -> bool {
        self.ms.valid_mask()[index] && !self.qa[index] && !self.is_saturated(index)
    }
}

/// Square village footprint centred on the village centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiFootprint {
    pub village_id: String,
    pub centroid: LatLon,
    pub side: f64,
}

impl AoiFootprint {
    pub fn new(village_id: impl Into<String>, centroid: LatLon) -> Self {
        AoiFootprint {
            village_id: village_id.into(),
            centroid,
            side: AOI_SIDE_M,
        }
    }

    /// Footprint area in square kilometres.
    pub fn area_km2(&self) -> f64 {
        self.side * self.side / 1e6
    }

    /// Footprint rectangle expressed in another projection frame.
    pub fn rect_in(&self, proj: &LocalProjection) -> Rect {
        let (cx, cy) = proj.to_xy(self.centroid);
        let h = self.side / 2.0;
        Rect {
            min_x: cx - h,
            max_x: cx + h,
            min_y: cy - h,
            max_y: cy + h,
        }
    }

    /// Half-extent in degrees (lat, lon), using the local scale at the centroid.
    pub fn half_extent_deg(&self) -> (f64, f64) {
        let proj = LocalProjection::new(self.centroid);
        let h = self.side / 2.0;
        (h / proj.meters_per_degree_lat(), h / proj.meters_per_degree_lon())
    }
}

/// Per-band NDVI of a scene's MS raster. Pixels with an invalid input or a
/// zero denominator are invalid with value 0.
pub fn ndvi(scene: &Scene) -> Result<RasterGrid> {
    ndvi_of(&scene.ms)
}

pub fn ndvi_of(ms: &RasterGrid) -> Result<RasterGrid> {
    let nir = ms.require_band("nir")?;
    let red = ms.require_band("red")?;
    let mut out = RasterGrid::new(ms.width(), ms.height(), &["ndvi"], ms.pixel_size(), ms.origin())?;
    let (nir_b, red_b) = (ms.band(nir), ms.band(red));
    let mut values = vec![0.0f32; ms.len()];
    let mut mask = vec![false; ms.len()];
    for i in 0..ms.len() {
        if !ms.valid_mask()[i] {
            continue;
        }
        let (n, r) = (nir_b[i] as f64, red_b[i] as f64);
        let denom = n + r;
        if denom.abs() <= f64::EPSILON {
            continue;
        }
        values[i] = ((n - r) / denom).clamp(-1.0, 1.0) as f32;
        mask[i] = true;
    }
    out.band_mut(0).copy_from_slice(&values);
    out.valid_mask_mut().copy_from_slice(&mask);
    Ok(out)
}

/// Mean NDVI over valid, cloud-free pixels of the scene inside the footprint.
/// Returns [`NDVI_EMPTY_SENTINEL`] when no such pixel exists.
pub fn mean_ndvi(scene: &Scene, aoi: &AoiFootprint) -> Result<f64> {
    let rect = aoi.rect_in(&scene.projection());
    if !rect.intersects(&scene.ms.extent()) {
        return Err(Error::coverage(format!(
            "footprint of {} does not intersect scene",
            aoi.village_id
        )));
    }
    let inside = scene.ms.pixels_in(&rect);
    if inside.is_empty() {
        return Err(Error::coverage(format!(
            "footprint of {} contains no scene pixel centre",
            aoi.village_id
        )));
    }
    let grid = ndvi(scene)?;
    let (mut sum, mut count) = (0.0f64, 0usize);
    for i in inside {
        if grid.valid_mask()[i] && !scene.qa[i] {
            sum += grid.band(0)[i] as f64;
            count += 1;
        }
    }
    Ok(if count == 0 {
        NDVI_EMPTY_SENTINEL
    } else {
        sum / count as f64
    })
}

/// Per-band mean and (population) standard deviation over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStats {
    pub bands: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if other.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n / n,
            m2: self.m2 + other.m2 + d * d * self.n * other.n / n,
        }
    }
}

/// Band statistics over all valid pixels of all tiles. Tiles are reduced in
/// input order so the result does not depend on thread count.
pub fn compute_band_stats(tiles: &[RasterGrid]) -> Result<BandStats> {
    use rayon::prelude::*;

    let first = tiles
        .first()
        .ok_or_else(|| Error::input("cannot compute band statistics of an empty collection"))?;
    let bands = first.band_names().to_vec();
    if let Some(bad) = tiles.iter().find(|t| t.band_names() != bands.as_slice()) {
        return Err(Error::schema(format!(
            "band schema {:?} differs from {:?}",
            bad.band_names(),
            bands
        )));
    }
    let per_tile: Vec<Vec<Moments>> = tiles
        .par_iter()
        .map(|t| {
            (0..bands.len())
                .map(|b| {
                    let mut m = Moments::default();
                    for (v, ok) in t.band(b).iter().zip(t.valid_mask()) {
                        if *ok {
                            m.push(*v as f64);
                        }
                    }
                    m
                })
                .collect()
        })
        .collect();
    let mut total = vec![Moments::default(); bands.len()];
    for tile in per_tile {
        for (acc, m) in total.iter_mut().zip(tile) {
            *acc = acc.merge(m);
        }
    }
    Ok(BandStats {
        mean: total.iter().map(|m| m.mean).collect(),
        std: total
            .iter()
            .map(|m| if m.n > 0.0 { (m.m2 / m.n).max(0.0).sqrt() } else { 0.0 })
            .collect(),
        bands,
    })
}

/// Standardizes each band with `stats`. Zero-std bands and invalid pixels map to 0.
pub fn normalize(tile: &RasterGrid, stats: &BandStats) -> Result<RasterGrid> {
    if tile.band_names() != stats.bands.as_slice() {
        return Err(Error::schema(format!(
            "tile bands {:?} do not match statistics bands {:?}",
            tile.band_names(),
            stats.bands
        )));
    }
    let mut out = tile.clone();
    let mask = tile.valid_mask().to_vec();
    for b in 0..tile.band_count() {
        let (mean, std) = (stats.mean[b], stats.std[b]);
        for (v, ok) in out.band_mut(b).iter_mut().zip(&mask) {
            *v = if *ok && std > 0.0 {
                ((*v as f64 - mean) / std) as f32
            } else {
                0.0
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene_with(nir: &[f32], red: &[f32], valid: &[bool], w: usize, h: usize) -> Scene {
        let mut ms = RasterGrid::new(w, h, &MS_BANDS, MS_PIXEL_M, (-(w as f64) * 15.0, h as f64 * 15.0)).unwrap();
        ms.band_mut(3).copy_from_slice(nir);
        ms.band_mut(2).copy_from_slice(red);
        ms.valid_mask_mut().copy_from_slice(valid);
        let pan = RasterGrid::new(2 * w, 2 * h, &["pan"], 15.0, ms.origin()).unwrap();
        Scene::new(
            ms,
            pan,
            vec![false; w * h],
            AcquisitionDate { year: 2011, day_of_year: 10 },
            1,
            LatLon::new(26.0, 80.0),
        )
        .unwrap()
    }

    #[test]
    fn ndvi_examples() {
        let s = scene_with(&[0.5, 0.6, 0.0], &[0.5, 0.2, 0.0], &[true; 3], 3, 1);
        let g = ndvi(&s).unwrap();
        assert_eq!(g.band(0)[0], 0.0);
        assert!((g.band(0)[1] - 0.5).abs() < 1e-7);
        assert_eq!(g.band(0)[2], 0.0);
        assert_eq!(g.valid_mask(), &[true, true, false]);
    }

    #[test]
    fn ndvi_invalid_input_propagates() {
        let s = scene_with(&[0.6, 0.6], &[0.2, 0.2], &[true, false], 2, 1);
        assert_eq!(ndvi(&s).unwrap().valid_mask(), &[true, false]);
    }

    #[test]
    fn ndvi_missing_band_is_schema_error() {
        let ms = RasterGrid::new(2, 2, &["red", "green"], 30.0, (0.0, 0.0)).unwrap();
        assert!(matches!(ndvi_of(&ms), Err(Error::Schema(_))));
    }

    fn covering_aoi() -> AoiFootprint {
        AoiFootprint::new("v", LatLon::new(26.0, 80.0))
    }

    #[test]
    fn mean_ndvi_constant_half_and_sentinel() {
        // 112x112 MS pixels at 30 m exactly cover a footprint centred on the frame.
        let w = 112;
        let n = w * w;
        let s = scene_with(&vec![0.65; n], &vec![0.35; n], &vec![true; n], w, w);
        assert!((mean_ndvi(&s, &covering_aoi()).unwrap() - 0.3).abs() < 1e-6);

        let nir: Vec<f32> = (0..n).map(|i| if i % 2 == 0 { 0.6 } else { 0.8 }).collect();
        let red: Vec<f32> = (0..n).map(|i| if i % 2 == 0 { 0.4 } else { 0.2 }).collect();
        let s = scene_with(&nir, &red, &vec![true; n], w, w);
        assert!((mean_ndvi(&s, &covering_aoi()).unwrap() - 0.4).abs() < 1e-6);

        let s = scene_with(&vec![0.6; n], &vec![0.2; n], &vec![false; n], w, w);
        assert_eq!(mean_ndvi(&s, &covering_aoi()).unwrap(), NDVI_EMPTY_SENTINEL);
    }

    #[test]
    fn mean_ndvi_outside_is_coverage_error() {
        let s = scene_with(&[0.6; 4], &[0.2; 4], &[true; 4], 2, 2);
        let far = AoiFootprint::new("far", LatLon::new(27.0, 81.0));
        assert!(matches!(mean_ndvi(&s, &far), Err(Error::Coverage(_))));
    }

    #[test]
    fn footprint_geometry() {
        let aoi = covering_aoi();
        assert!((AOI_SIDE_M / TILE_PIXEL_M - TILE_PX as f64).abs() < 1e-12);
        assert!((aoi.area_km2() - 11.29).abs() / 11.29 < 0.01);
        let r = aoi.rect_in(&LocalProjection::new(aoi.centroid));
        assert!((r.width() - 3360.0).abs() < 1e-9);
    }

    fn const_tile(v: f32) -> RasterGrid {
        let mut t = RasterGrid::new(4, 4, &RGB_BANDS, 15.0, (0.0, 0.0)).unwrap();
        for b in 0..3 {
            t.band_mut(b).fill(v);
        }
        t
    }

    #[test]
    fn band_stats_examples() {
        let s = compute_band_stats(&[const_tile(5.0)]).unwrap();
        assert_eq!(s.mean, vec![5.0; 3]);
        assert_eq!(s.std, vec![0.0; 3]);

        let s = compute_band_stats(&[const_tile(0.0), const_tile(2.0)]).unwrap();
        for b in 0..3 {
            assert!((s.mean[b] - 1.0).abs() < 1e-12);
            assert!((s.std[b] - 1.0).abs() < 1e-12);
        }
        assert!(matches!(compute_band_stats(&[]), Err(Error::Input(_))));
    }

    #[test]
    fn normalize_examples() {
        let tile = const_tile(7.0);
        let identity = BandStats {
            bands: tile.band_names().to_vec(),
            mean: vec![0.0; 3],
            std: vec![1.0; 3],
        };
        assert_eq!(normalize(&tile, &identity).unwrap().pixels(), tile.pixels());

        let stats = BandStats {
            bands: tile.band_names().to_vec(),
            mean: vec![5.0, 5.0, 5.0],
            std: vec![2.0, 0.0, 2.0],
        };
        let n = normalize(&tile, &stats).unwrap();
        assert_eq!(n.band(0)[0], 1.0);
        assert_eq!(n.band(1)[3], 0.0);

        let wrong = BandStats {
            bands: vec!["nir".into()],
            mean: vec![0.0],
            std: vec![1.0],
        };
        assert!(matches!(normalize(&tile, &wrong), Err(Error::Schema(_))));
    }
}
