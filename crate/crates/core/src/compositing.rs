//! Yearly village composites: cloud screening, NDVI ranking, recursive
//! gap-filling mosaic, topographic C-correction and MRA pansharpening.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{
    mean_ndvi, AcquisitionDate, AoiFootprint, LocalProjection, RasterGrid, Rect, Scene,
    NDVI_EMPTY_SENTINEL, RGB_BANDS, TILE_PX,
};

/// Scenes whose in-footprint cloud fraction exceeds this are dropped.
pub const DEFAULT_CLOUD_THRESHOLD: f64 = 0.05;

/// Extra MS pixels mosaicked around the footprint so pansharpening has
/// context at the tile border.
const MOSAIC_MARGIN_PX: isize = 4;

/// Per-MS-pixel cosine of the local solar incidence angle plus the solar zenith.
#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationGrid {
    width: usize,
    height: usize,
    cos_i: Vec<f32>,
    solar_zenith: f64,
}

impl IlluminationGrid {
    pub fn new(width: usize, height: usize, cos_i: Vec<f32>, solar_zenith: f64) -> Result<Self> {
        if cos_i.len() != width * height {
            return Err(Error::schema(format!(
                "illumination holds {} values for {width}x{height}",
                cos_i.len()
            )));
        }
        if cos_i.iter().any(|c| !(-1.0..=1.0).contains(c)) {
            return Err(Error::input("cos(i) values must lie in [-1, 1]"));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&solar_zenith) {
            return Err(Error::input(format!(
                "solar zenith {solar_zenith} outside [0, pi/2)"
            )));
        }
        Ok(IlluminationGrid {
            width,
            height,
            cos_i,
            solar_zenith,
        })
    }

    /// Flat terrain: every pixel sees the sun at the zenith angle.
    pub fn flat(width: usize, height: usize, solar_zenith: f64) -> Result<Self> {
        let c = solar_zenith.cos() as f32;
        Self::new(width, height, vec![c; width * height], solar_zenith)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cos_i(&self) -> &[f32] {
        &self.cos_i
    }

    pub fn solar_zenith(&self) -> f64 {
        self.solar_zenith
    }
}

/// A scene together with its illumination geometry.
#[derive(Debug, Clone)]
pub struct SceneInput {
    pub scene: Scene,
    pub illumination: IlluminationGrid,
}

fn union_pixels(scene: &Scene, aoi_union: &[AoiFootprint]) -> Vec<usize> {
    let proj = scene.projection();
    let rects: Vec<Rect> = aoi_union.iter().map(|a| a.rect_in(&proj)).collect();
    let ms = &scene.ms;
    let mut out = Vec::new();
    for row in 0..ms.height() {
        for col in 0..ms.width() {
            let (x, y) = ms.pixel_center(col, row);
            if rects.iter().any(|r| r.contains(x, y)) {
                out.push(row * ms.width() + col);
            }
        }
    }
    out
}

/// Share of cloud-flagged MS pixels among the pixels inside the union of footprints.
pub fn cloud_fraction(scene: &Scene, aoi_union: &[AoiFootprint]) -> Result<f64> {
    if aoi_union.is_empty() {
        return Err(Error::coverage("footprint union is empty"));
    }
    let inside = union_pixels(scene, aoi_union);
    if inside.is_empty() {
        return Err(Error::coverage("footprint union does not intersect scene"));
    }
    let cloudy = inside.iter().filter(|i| scene.qa[**i]).count();
    Ok(cloudy as f64 / inside.len() as f64)
}

/// Indices of scenes whose cloud fraction is at most `threshold`, in input
/// order. Scenes that miss the footprint union entirely are dropped.
pub fn filter_scenes(scenes: &[Scene], aoi_union: &[AoiFootprint], threshold: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::input(format!("cloud threshold {threshold} outside [0, 1]")));
    }
    let mut kept = Vec::new();
    for (i, s) in scenes.iter().enumerate() {
        match cloud_fraction(s, aoi_union) {
            Ok(f) if f <= threshold => kept.push(i),
            Ok(f) => log::debug!("scene {i} rejected, cloud fraction {f:.4}"),
            Err(Error::Coverage(msg)) => log::debug!("scene {i} rejected: {msg}"),
            Err(e) => return Err(e),
        }
    }
    Ok(kept)
}

/// Orders scenes by descending mean NDVI inside the footprint; ties go to the
/// earlier acquisition, then to input order. Returns indices into `scenes`.
pub fn rank_scenes(scenes: &[Scene], aoi: &AoiFootprint) -> Result<Vec<usize>> {
    let mut keyed = Vec::with_capacity(scenes.len());
    for (i, s) in scenes.iter().enumerate() {
        let v = match mean_ndvi(s, aoi) {
            Ok(v) => v,
            Err(Error::Coverage(_)) => NDVI_EMPTY_SENTINEL,
            Err(e) => return Err(e),
        };
        keyed.push((v, s.acquired, i));
    }
    keyed.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    Ok(keyed.into_iter().map(|k| k.2).collect())
}

/// Pixel-aligned window of `grid` that covers `rect`, grown by `margin` pixels.
fn window_for(grid: &RasterGrid, rect: &Rect, margin: isize) -> (isize, isize, usize, usize) {
    let ps = grid.pixel_size();
    let (ox, oy) = grid.origin();
    let col0 = ((rect.min_x - ox) / ps).round() as isize - margin;
    let row0 = ((oy - rect.max_y) / ps).round() as isize - margin;
    let w = (rect.width() / ps).round() as isize + 2 * margin;
    let h = (rect.height() / ps).round() as isize + 2 * margin;
    (col0, row0, w.max(1) as usize, h.max(1) as usize)
}

/// Copies a window that may extend past the raster; outside pixels are invalid.
fn extract(grid: &RasterGrid, col0: isize, row0: isize, w: usize, h: usize) -> RasterGrid {
    let ps = grid.pixel_size();
    let (ox, oy) = grid.origin();
    let mut out = RasterGrid::from_parts(
        w,
        h,
        grid.band_names().to_vec(),
        vec![0.0; w * h * grid.band_count()],
        vec![false; w * h],
        ps,
        (ox + col0 as f64 * ps, oy - row0 as f64 * ps),
    )
    .expect("window dimensions are positive");
    for r in 0..h {
        let sr = row0 + r as isize;
        if sr < 0 || sr >= grid.height() as isize {
            continue;
        }
        for c in 0..w {
            let sc = col0 + c as isize;
            if sc < 0 || sc >= grid.width() as isize {
                continue;
            }
            let (sc, sr) = (sc as usize, sr as usize);
            for b in 0..grid.band_count() {
                out.set(b, c, r, grid.get(b, sc, sr));
            }
            out.valid_mask_mut()[r * w + c] = grid.is_valid(sc, sr);
        }
    }
    out
}

/// Result of the recursive mosaic: MS and pan composites over the same
/// window plus, per MS pixel, the rank of the scene that filled it.
#[derive(Debug, Clone, PartialEq)]
pub struct Mosaic {
    pub ms: RasterGrid,
    pub pan: RasterGrid,
    pub fill: Vec<Option<u16>>,
}

fn mosaic_window(ranked: &[&Scene], col0: isize, row0: isize, w: usize, h: usize) -> Result<Mosaic> {
    let first = ranked
        .first()
        .ok_or_else(|| Error::input("mosaic needs at least one scene"))?;
    for s in ranked.iter().skip(1) {
        if !s.ms.same_geometry(&first.ms) || !s.pan.same_geometry(&first.pan) {
            return Err(Error::schema("scenes of one village-year must share grid geometry"));
        }
    }
    let template = extract(&first.ms, col0, row0, w, h);
    let mut ms = RasterGrid::from_parts(
        w,
        h,
        first.ms.band_names().to_vec(),
        vec![0.0; w * h * first.ms.band_count()],
        vec![false; w * h],
        template.pixel_size(),
        template.origin(),
    )?;
    let pan_template = extract(&first.pan, 2 * col0, 2 * row0, 2 * w, 2 * h);
    let mut pan = RasterGrid::from_parts(
        2 * w,
        2 * h,
        first.pan.band_names().to_vec(),
        vec![0.0; 4 * w * h],
        vec![false; 4 * w * h],
        pan_template.pixel_size(),
        pan_template.origin(),
    )?;
    let mut fill = vec![None; w * h];
    let (sw, sh) = (first.ms.width() as isize, first.ms.height() as isize);
    for r in 0..h {
        let sr = row0 + r as isize;
        if sr < 0 || sr >= sh {
            continue;
        }
        for c in 0..w {
            let sc = col0 + c as isize;
            if sc < 0 || sc >= sw {
                continue;
            }
            let src = sr as usize * first.ms.width() + sc as usize;
            let Some(rank) = ranked.iter().position(|s| s.is_usable(src)) else {
                continue;
            };
            let s = ranked[rank];
            fill[r * w + c] = Some(rank as u16);
            for b in 0..ms.band_count() {
                ms.set(b, c, r, s.ms.get(b, sc as usize, sr as usize));
            }
            ms.valid_mask_mut()[r * w + c] = true;
            for dy in 0..2 {
                for dx in 0..2 {
                    let (pc, pr) = (2 * sc as usize + dx, 2 * sr as usize + dy);
                    let (oc, or) = (2 * c + dx, 2 * r + dy);
                    pan.set(0, oc, or, s.pan.get(0, pc, pr));
                    pan.valid_mask_mut()[or * 2 * w + oc] = s.pan.is_valid(pc, pr);
                }
            }
        }
    }
    Ok(Mosaic { ms, pan, fill })
}

/// Fills each footprint pixel from the first scene, in rank order, where the
/// pixel is valid, cloud-free and unsaturated. Unfilled pixels stay invalid.
pub fn recursive_mosaic(ranked: &[&Scene], aoi: &AoiFootprint) -> Result<Mosaic> {
    let first = ranked
        .first()
        .ok_or_else(|| Error::input("mosaic needs at least one scene"))?;
    let rect = aoi.rect_in(&first.projection());
    let (c0, r0, w, h) = window_for(&first.ms, &rect, 0);
    mosaic_window(ranked, c0, r0, w, h)
}

/// Least-squares fit `y = slope * x + intercept`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn c_correct_band(values: &mut [f32], cos_i: &[f64], fit_mask: &[bool], valid: &[bool], cos_z: f64) {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..values.len() {
        if fit_mask[i] {
            xs.push(cos_i[i]);
            ys.push(values[i] as f64);
        }
    }
    let Some((slope, intercept)) = linear_fit(&xs, &ys) else {
        return;
    };
    if slope.abs() < 1e-9 {
        return;
    }
    let c = intercept / slope;
    for i in 0..values.len() {
        if !valid[i] {
            continue;
        }
        let denom = cos_i[i] + c;
        if denom.abs() < 1e-9 {
            continue;
        }
        values[i] = (values[i] as f64 * (cos_z + c) / denom) as f32;
    }
}

/// Teillet C-correction with a per-band regression-derived `c`. The pan band
/// is corrected with the illumination of its parent MS pixel.
pub fn c_correct(scene: &Scene, illum: &IlluminationGrid) -> Result<Scene> {
    let ms = &scene.ms;
    if illum.width() != ms.width() || illum.height() != ms.height() {
        return Err(Error::schema(format!(
            "illumination {}x{} does not match ms {}x{}",
            illum.width(),
            illum.height(),
            ms.width(),
            ms.height()
        )));
    }
    let cos_z = illum.solar_zenith().cos();
    let cos_i: Vec<f64> = illum.cos_i().iter().map(|c| *c as f64).collect();
    let fit_mask: Vec<bool> = (0..ms.len()).map(|i| scene.is_usable(i)).collect();
    let mut out = scene.clone();
    let valid = ms.valid_mask().to_vec();
    for b in 0..ms.band_count() {
        c_correct_band(out.ms.band_mut(b), &cos_i, &fit_mask, &valid, cos_z);
    }

    let (pw, ph) = (scene.pan.width(), scene.pan.height());
    let mut pan_cos = Vec::with_capacity(pw * ph);
    let mut pan_fit = Vec::with_capacity(pw * ph);
    for r in 0..ph {
        for c in 0..pw {
            let parent = (r / 2) * ms.width() + c / 2;
            pan_cos.push(cos_i[parent]);
            pan_fit.push(fit_mask[parent] && scene.pan.is_valid(c, r));
        }
    }
    let pan_valid = scene.pan.valid_mask().to_vec();
    c_correct_band(out.pan.band_mut(0), &pan_cos, &pan_fit, &pan_valid, cos_z);
    Ok(out)
}

/// Bilinear x2 upsampling with half-pixel alignment. Only valid neighbours
/// contribute; a pixel is valid when its parent MS pixel is.
fn upsample_bilinear(band: &[f32], mask: &[bool], w: usize, h: usize) -> Vec<f64> {
    let (ow, oh) = (2 * w, 2 * h);
    let mut out = vec![0.0; ow * oh];
    let coord = |o: usize, n: usize| -> (usize, usize, f64) {
        let s = (o as f64 + 0.5) / 2.0 - 0.5;
        let f = s.floor();
        let frac = s - f;
        let i0 = (f as isize).clamp(0, n as isize - 1) as usize;
        let i1 = (f as isize + 1).clamp(0, n as isize - 1) as usize;
        (i0, i1, frac)
    };
    for y in 0..oh {
        let (y0, y1, fy) = coord(y, h);
        for x in 0..ow {
            let (x0, x1, fx) = coord(x, w);
            let taps = [
                (y0 * w + x0, (1.0 - fx) * (1.0 - fy)),
                (y0 * w + x1, fx * (1.0 - fy)),
                (y1 * w + x0, (1.0 - fx) * fy),
                (y1 * w + x1, fx * fy),
            ];
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (i, wt) in taps {
                if mask[i] {
                    acc += wt * band[i] as f64;
                    wsum += wt;
                }
            }
            if wsum > 0.0 {
                out[y * ow + x] = acc / wsum;
            }
        }
    }
    out
}

const BINOMIAL5: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Separable 5x5 binomial low-pass with replicated borders, normalized over
/// valid pixels.
pub fn binomial_lowpass(values: &[f64], mask: &[bool], w: usize, h: usize) -> Vec<f64> {
    let idx = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp_v = vec![0.0; w * h];
    let mut tmp_w = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut acc, mut ws) = (0.0, 0.0);
            for (k, wt) in BINOMIAL5.iter().enumerate() {
                let sx = idx(x as isize + k as isize - 2, w);
                if mask[y * w + sx] {
                    acc += wt * values[y * w + sx];
                    ws += wt;
                }
            }
            tmp_v[y * w + x] = acc;
            tmp_w[y * w + x] = ws;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut acc, mut ws) = (0.0, 0.0);
            for (k, wt) in BINOMIAL5.iter().enumerate() {
                let sy = idx(y as isize + k as isize - 2, h);
                acc += wt * tmp_v[sy * w + x];
                ws += wt * tmp_w[sy * w + x];
            }
            out[y * w + x] = if ws > 0.0 { acc / ws } else { 0.0 };
        }
    }
    out
}

/// Injection gain `cov(ms_up, p_low) / var(p_low)` over masked pixels.
fn injection_gain(ms_up: &[f64], p_low: &[f64], mask: &[bool]) -> f64 {
    let n = mask.iter().filter(|m| **m).count() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let (mut sm, mut sp) = (0.0, 0.0);
    for i in 0..mask.len() {
        if mask[i] {
            sm += ms_up[i];
            sp += p_low[i];
        }
    }
    let (mm, mp) = (sm / n, sp / n);
    let (mut cov, mut var) = (0.0, 0.0);
    for i in 0..mask.len() {
        if mask[i] {
            cov += (ms_up[i] - mm) * (p_low[i] - mp);
            var += (p_low[i] - mp) * (p_low[i] - mp);
        }
    }
    if var / n < 1e-12 {
        0.0
    } else {
        cov / var
    }
}

/// Detail injection `ms_up + g * (pan - p_low)` for one band; returns the gain used.
pub(crate) fn inject_detail(
    ms_up: &[f64],
    pan: &[f64],
    p_low: &[f64],
    mask: &[bool],
    out: &mut [f32],
) -> f64 {
    let g = injection_gain(ms_up, p_low, mask);
    for i in 0..out.len() {
        out[i] = if mask[i] {
            (ms_up[i] + g * (pan[i] - p_low[i])) as f32
        } else {
            0.0
        };
    }
    g
}

/// MRA pansharpening of a 30 m colour raster with a 15 m panchromatic band.
pub fn pansharpen(ms: &RasterGrid, pan: &RasterGrid) -> Result<RasterGrid> {
    if pan.band_count() != 1 {
        return Err(Error::schema("panchromatic raster must have one band"));
    }
    if pan.width() != 2 * ms.width() || pan.height() != 2 * ms.height() {
        return Err(Error::schema(format!(
            "pan {}x{} must be exactly twice ms {}x{}",
            pan.width(),
            pan.height(),
            ms.width(),
            ms.height()
        )));
    }
    let (w, h) = (pan.width(), pan.height());
    let pan_values: Vec<f64> = pan.band(0).iter().map(|v| *v as f64).collect();
    let p_low = binomial_lowpass(&pan_values, pan.valid_mask(), w, h);

    let mut mask = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            mask[y * w + x] = pan.is_valid(x, y) && ms.is_valid(x / 2, y / 2);
        }
    }
    let mut out = RasterGrid::from_parts(
        w,
        h,
        ms.band_names().to_vec(),
        vec![0.0; w * h * ms.band_count()],
        mask.clone(),
        pan.pixel_size(),
        pan.origin(),
    )?;
    for b in 0..ms.band_count() {
        let up = upsample_bilinear(ms.band(b), ms.valid_mask(), ms.width(), ms.height());
        inject_detail(&up, &pan_values, &p_low, &mask, out.band_mut(b));
    }
    Ok(out)
}

/// Marks saturated MS pixels invalid so no later stage reads them.
fn mask_saturated(scene: &Scene) -> Scene {
    let mut out = scene.clone();
    for i in 0..scene.ms.len() {
        if scene.is_saturated(i) {
            out.ms.valid_mask_mut()[i] = false;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeConfig {
    pub cloud_threshold: f64,
}

impl Default for CompositeConfig {
    fn default() -> Self {
        CompositeConfig {
            cloud_threshold: DEFAULT_CLOUD_THRESHOLD,
        }
    }
}

/// One 224x224 RGB tile at 15 m for a village-year.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeTile {
    pub village_id: String,
    pub year: i32,
    pub grid: RasterGrid,
    /// Rank of the source scene per output pixel; `None` where unfilled.
    pub fill_report: Vec<Option<u16>>,
    /// Acquisition dates of the usable scenes in rank order.
    pub sources: Vec<AcquisitionDate>,
    pub gap_fraction: f64,
}

impl CompositeTile {
    pub fn is_total_gap(&self) -> bool {
        self.gap_fraction >= 1.0
    }

    fn empty(village: &AoiFootprint, year: i32) -> Self {
        let proj = LocalProjection::new(village.centroid);
        let rect = village.rect_in(&proj);
        let grid = RasterGrid::from_parts(
            TILE_PX,
            TILE_PX,
            RGB_BANDS.iter().map(|s| s.to_string()).collect(),
            vec![0.0; TILE_PX * TILE_PX * 3],
            vec![false; TILE_PX * TILE_PX],
            crate::raster::TILE_PIXEL_M,
            (rect.min_x, rect.max_y),
        )
        .expect("fixed tile geometry");
        CompositeTile {
            village_id: village.village_id.clone(),
            year,
            grid,
            fill_report: vec![None; TILE_PX * TILE_PX],
            sources: Vec::new(),
            gap_fraction: 1.0,
        }
    }

    /// Writes the `(pixel_index, source_rank)` sidecar for filled pixels.
    pub fn write_fill_report(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "pixel_index,source_rank").map_err(|e| Error::io(path, e))?;
        for (i, r) in self.fill_report.iter().enumerate() {
            if let Some(r) = r {
                writeln!(w, "{i},{r}").map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Full compositing chain for one village-year: screen clouds, correct
/// topography, rank by NDVI, mosaic MS and pan with one fill order,
/// pansharpen and crop to the 224x224 footprint.
pub fn build_composite(
    village: &AoiFootprint,
    year: i32,
    scenes: &[SceneInput],
    aoi_union: &[AoiFootprint],
    config: &CompositeConfig,
) -> Result<CompositeTile> {
    let masked: Vec<Scene> = scenes.iter().map(|s| mask_saturated(&s.scene)).collect();
    let union: Vec<AoiFootprint> = if aoi_union.is_empty() {
        vec![village.clone()]
    } else {
        aoi_union.to_vec()
    };
    let kept = filter_scenes(&masked, &union, config.cloud_threshold)?;
    if kept.is_empty() {
        log::warn!("{} {year}: no usable scene, tile is a total gap", village.village_id);
        return Ok(CompositeTile::empty(village, year));
    }
    let corrected = kept
        .iter()
        .map(|i| c_correct(&masked[*i], &scenes[*i].illumination))
        .collect::<Result<Vec<_>>>()?;
    let order = rank_scenes(&corrected, village)?;
    let ranked: Vec<&Scene> = order.iter().map(|i| &corrected[*i]).collect();

    let first = ranked[0];
    let rect = village.rect_in(&first.projection());
    let (c0, r0, w, h) = window_for(&first.ms, &rect, MOSAIC_MARGIN_PX);
    let mosaic = mosaic_window(&ranked, c0, r0, w, h)?;
    let rgb = mosaic.ms.select_bands(&RGB_BANDS)?;
    let sharp = pansharpen(&rgb, &mosaic.pan)?;

    let m = 2 * MOSAIC_MARGIN_PX as usize;
    if sharp.width() < m + TILE_PX || sharp.height() < m + TILE_PX {
        return Err(Error::coverage(format!(
            "{}: footprint window {}x{} smaller than a tile",
            village.village_id,
            sharp.width(),
            sharp.height()
        )));
    }
    let grid = sharp.window(m, m, TILE_PX, TILE_PX)?;
    let mut fill_report = vec![None; TILE_PX * TILE_PX];
    for r in 0..TILE_PX {
        for c in 0..TILE_PX {
            if grid.is_valid(c, r) {
                let (mc, mr) = ((c + m) / 2, (r + m) / 2);
                fill_report[r * TILE_PX + c] = mosaic.fill[mr * w + mc];
            }
        }
    }
    let gaps = grid.valid_mask().iter().filter(|v| !**v).count();
    Ok(CompositeTile {
        village_id: village.village_id.clone(),
        year,
        gap_fraction: gaps as f64 / grid.len() as f64,
        grid,
        fill_report,
        sources: ranked.iter().map(|s| s.acquired).collect(),
    })
}
