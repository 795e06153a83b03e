//! Browser demo over the core crate. Three operations: render and
//! composite one synthetic village, align two point clouds, score
//! predictions with R². Each has a plain Rust function used by the tests
//! and a thin `wasm_bindgen` wrapper used by `www/index.html`.

use geoproxy::compositing::{build_composite, CompositeConfig};
use geoproxy::evaluation::r_squared;
use geoproxy::raster::RasterGrid;
use geoproxy::synth::{render_scene, render_surface, LatentVillage, World, WorldSpec};
use geoproxy::temporal::{fit_histogram, fit_linear_ot, AlignmentTransform, HISTOGRAM_BINS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use wasm_bindgen::prelude::*;

/// Reflectance shown as full white.
const DISPLAY_MAX: f32 = 0.3;

fn to_rgba(grid: &RasterGrid) -> Result<Vec<u8>, String> {
    let bands = ["red", "green", "blue"]
        .iter()
        .map(|b| grid.require_band(b))
        .collect::<geoproxy::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(grid.len() * 4);
    for (i, ok) in grid.valid_mask().iter().enumerate() {
        if *ok {
            for &band in &bands {
                out.push((grid.band(band)[i] / DISPLAY_MAX * 255.0).clamp(0.0, 255.0) as u8);
            }
        } else {
            out.extend_from_slice(&[40, 0, 40]);
        }
        out.push(255);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VillageRender {
    pub scene_side: usize,
    /// First raw acquisition, RGBA, clouds and gaps included.
    pub scene_rgba: Vec<u8>,
    pub tile_side: usize,
    pub tile_rgba: Vec<u8>,
    pub gap_fraction: f64,
    pub scenes: usize,
    pub used_scenes: usize,
}

/// Renders the acquisitions of one village with scores `z` and `u` and
/// composites them into a 224×224 tile.
pub fn render_village(z: f64, u: f64, seed: u64, year: i32, cloud_rate: f64) -> Result<VillageRender, String> {
    if !(0.0..=1.0).contains(&z) || !(0.0..=1.0).contains(&u) {
        return Err("scores must lie in [0, 1]".into());
    }
    let spec = WorldSpec {
        seed,
        n_states: 1,
        n_districts: 1,
        n_tehsils: 1,
        n_villages: 1,
        cloud_rate,
        ..WorldSpec::default()
    };
    let mut world = World::generate(&spec).map_err(|e| e.to_string())?;
    let village = world.villages[0].clone();
    let latent = LatentVillage::new(village.village_id.clone(), z, u, village.population);
    let surface = render_surface(&latent, seed, 0);
    world.latents[0] = latent;
    let scenes = (0..spec.scenes_per_year)
        .map(|k| render_scene(&world, &surface, 0, year, k))
        .collect::<geoproxy::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let tile = build_composite(&village.footprint(), year, &scenes, &[], &CompositeConfig::default())
        .map_err(|e| e.to_string())?;
    let first = &scenes[0].scene.ms;
    Ok(VillageRender {
        scene_side: first.width(),
        scene_rgba: to_rgba(first)?,
        tile_side: tile.grid.width(),
        tile_rgba: to_rgba(&tile.grid)?,
        gap_fraction: tile.gap_fraction,
        scenes: scenes.len(),
        used_scenes: tile.sources.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Interleaved x, y coordinates.
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    pub linear_ot: Vec<f64>,
    pub histogram: Vec<f64>,
    /// Largest gap between the mapped and the target mean or covariance entries.
    pub linear_ot_moment_error: f64,
    pub histogram_moment_error: f64,
}

fn gaussian_cloud(rng: &mut ChaCha8Rng, n: usize, mean: [f64; 2], l: [[f64; 2]; 2]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
            vec![mean[0] + l[0][0] * a, mean[1] + l[1][0] * a + l[1][1] * b]
        })
        .collect()
}

fn moments(points: &[Vec<f64>]) -> [f64; 5] {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let c = |f: &dyn Fn(&Vec<f64>) -> f64| points.iter().map(f).sum::<f64>() / (n - 1.0);
    [
        mx,
        my,
        c(&|p| (p[0] - mx) * (p[0] - mx)),
        c(&|p| (p[0] - mx) * (p[1] - my)),
        c(&|p| (p[1] - my) * (p[1] - my)),
    ]
}

fn moment_error(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    moments(a).iter().zip(moments(b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn flat(points: &[Vec<f64>]) -> Vec<f64> {
    points.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Maps a correlated source cloud onto a shifted, stretched target cloud
/// with linear optimal transport and with per-axis histogram matching.
pub fn align_clouds(shift: f64, stretch: f64, n: usize, seed: u64) -> Result<Alignment, String> {
    if n < 10 || !(stretch > 0.0) || !shift.is_finite() {
        return Err("need at least 10 points, a positive stretch and a finite shift".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source = gaussian_cloud(&mut rng, n, [0.0, 0.0], [[1.0, 0.0], [0.6, 0.8]]);
    let target = gaussian_cloud(&mut rng, n, [shift, -0.5 * shift], [[stretch, 0.0], [-0.3, 1.0 / stretch]]);
    let apply = |t: AlignmentTransform| t.apply_all(&source).map_err(|e| e.to_string());
    let ot = apply(fit_linear_ot(&source, &target).map_err(|e| e.to_string())?)?;
    let hist = apply(fit_histogram(&source, &target, HISTOGRAM_BINS).map_err(|e| e.to_string())?)?;
    Ok(Alignment {
        linear_ot_moment_error: moment_error(&ot, &target),
        histogram_moment_error: moment_error(&hist, &target),
        source: flat(&source),
        target: flat(&target),
        linear_ot: flat(&ot),
        histogram: flat(&hist),
    })
}

fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("'{s}' is not a number")))
        .collect()
}

/// R² of predictions against truth, both given as comma or space separated numbers.
pub fn score_text(pred: &str, truth: &str) -> Result<String, String> {
    let (p, t) = (parse_numbers(pred)?, parse_numbers(truth)?);
    match r_squared(&p, &t).map_err(|e| e.to_string())? {
        Some(r2) => Ok(format!("R² = {r2:.4} over {} observations", t.len())),
        None => Ok("not evaluated: truth is constant".into()),
    }
}

#[wasm_bindgen]
pub struct VillageView(VillageRender);

#[wasm_bindgen]
impl VillageView {
    #[wasm_bindgen(getter)]
    pub fn scene_side(&self) -> usize {
        self.0.scene_side
    }

    pub fn scene_rgba(&self) -> Vec<u8> {
        self.0.scene_rgba.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn tile_side(&self) -> usize {
        self.0.tile_side
    }

    pub fn tile_rgba(&self) -> Vec<u8> {
        self.0.tile_rgba.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn gap_fraction(&self) -> f64 {
        self.0.gap_fraction
    }

    #[wasm_bindgen(getter)]
    pub fn scenes(&self) -> usize {
        self.0.scenes
    }

    #[wasm_bindgen(getter)]
    pub fn used_scenes(&self) -> usize {
        self.0.used_scenes
    }
}

#[wasm_bindgen]
pub fn village(z: f64, u: f64, seed: u32, year: i32, cloud_rate: f64) -> Result<VillageView, JsError> {
    render_village(z, u, seed as u64, year, cloud_rate)
        .map(VillageView)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct AlignmentView(Alignment);

#[wasm_bindgen]
impl AlignmentView {
    pub fn source(&self) -> Vec<f64> {
        self.0.source.clone()
    }

    pub fn target(&self) -> Vec<f64> {
        self.0.target.clone()
    }

    pub fn linear_ot(&self) -> Vec<f64> {
        self.0.linear_ot.clone()
    }

    pub fn histogram(&self) -> Vec<f64> {
        self.0.histogram.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn linear_ot_moment_error(&self) -> f64 {
        self.0.linear_ot_moment_error
    }

    #[wasm_bindgen(getter)]
    pub fn histogram_moment_error(&self) -> f64 {
        self.0.histogram_moment_error
    }
}

#[wasm_bindgen]
pub fn align(shift: f64, stretch: f64, n: usize, seed: u32) -> Result<AlignmentView, JsError> {
    align_clouds(shift, stretch, n, seed as u64)
        .map(AlignmentView)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn score(pred: &str, truth: &str) -> Result<String, JsError> {
    score_text(pred, truth).map_err(|e| JsError::new(&e))
}
