//! Scene rendering. Each village owns a fixed surface at 15 m; every
//! acquisition re-lights it with its own sun geometry, season, noise,
//! clouds and scan-line gaps.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::compositing::{IlluminationGrid, SceneInput};
use crate::error::Result;
use crate::raster::{AcquisitionDate, RasterGrid, Scene, MS_BANDS, MS_PIXEL_M, TILE_PIXEL_M};

use super::world::{stream, LatentVillage, World};

/// Side of a rendered scene in 30 m pixels; covers the footprint plus a margin.
pub const SCENE_MS_PX: usize = 120;
const PAN_PX: usize = 2 * SCENE_MS_PX;

/// The year scan-line gaps start to appear.
pub const SLC_FAILURE_YEAR: i32 = 2003;

const VEG: [f32; 4] = [0.03, 0.07, 0.04, 0.45];
const ROAD: [f32; 4] = [0.18, 0.19, 0.20, 0.22];
const WATER: [f32; 4] = [0.05, 0.06, 0.04, 0.02];
const CLOUD: f32 = 0.8;

/// Static land cover of one village at 15 m: the non-vegetated reflectance
/// and the vegetation cover of every pixel, plus terrain height at 30 m.
#[derive(Debug, Clone)]
pub struct Surface {
    pub base: Vec<[f32; 4]>,
    pub vegetation: Vec<f32>,
    pub elevation: Vec<f64>,
}

pub fn render_surface(lv: &LatentVillage, seed: u64, index: u64) -> Surface {
    let mut rng = stream(seed, 0x5355_5246, index);
    let n = PAN_PX * PAN_PX;
    let mut base = vec![[0.0f32; 4]; n];
    let mut vegetation = vec![0.0f32; n];

    let cell = 10;
    let cells = PAN_PX.div_ceil(cell);
    let parcels: Vec<(f32, f32)> = (0..cells * cells)
        .map(|_| {
            let cover = if rng.random_bool(0.65) { rng.random_range(0.4..1.0) } else { rng.random_range(0.0..0.15) };
            (cover, rng.random_range(0.8..1.2))
        })
        .collect();
    for r in 0..PAN_PX {
        for c in 0..PAN_PX {
            let (cover, bright) = parcels[(r / cell) * cells + c / cell];
            let soil = [0.09, 0.12, 0.16, 0.26].map(|v: f32| v * bright);
            base[r * PAN_PX + c] = soil;
            vegetation[r * PAN_PX + c] = cover;
        }
    }

    let center = (
        PAN_PX as f64 / 2.0 + rng.random_range(-10.0..10.0),
        PAN_PX as f64 / 2.0 + rng.random_range(-10.0..10.0),
    );
    let radius = 15.0 + 75.0 * lv.z;
    let roof = lv.roof_brightness as f32;
    let roof_refl = [roof * 0.9, roof * 0.95, roof * 1.05, roof * 1.1];
    let block = 4;
    let blocks = PAN_PX / block;
    for br in 0..blocks {
        for bc in 0..blocks {
            let (y, x) = ((br * block) as f64 + 2.0, (bc * block) as f64 + 2.0);
            let d = ((y - center.0).powi(2) + (x - center.1).powi(2)).sqrt() / radius;
            let p = if d < 1.0 { lv.built_density * (1.0 - 0.6 * d) } else { 0.0 };
            if rng.random_bool(p.clamp(0.0, 1.0)) {
                let shade: f32 = rng.random_range(0.85..1.15);
                for r in br * block..(br + 1) * block {
                    for c in bc * block..(bc + 1) * block {
                        base[r * PAN_PX + c] = roof_refl.map(|v| v * shade);
                        vegetation[r * PAN_PX + c] = 0.0;
                    }
                }
            }
        }
    }

    let spacing = (1.0 / lv.road_fraction).round().max(2.0) as usize;
    let phase = rng.random_range(0..spacing);
    let reach = 1.3 * radius;
    for r in 0..PAN_PX {
        for c in 0..PAN_PX {
            let d = ((r as f64 - center.0).powi(2) + (c as f64 - center.1).powi(2)).sqrt();
            let lattice = d < reach && ((r + phase) % spacing == 0 || (c + phase) % spacing == 0);
            let trunk = r == center.0 as usize || r == center.0 as usize + 1;
            if lattice || trunk {
                base[r * PAN_PX + c] = ROAD;
                vegetation[r * PAN_PX + c] = 0.0;
            }
        }
    }

    if rng.random_bool(0.4) {
        let (py, px) = (rng.random_range(20.0..220.0), rng.random_range(20.0..220.0));
        let pr: f64 = rng.random_range(4.0..8.0);
        for r in 0..PAN_PX {
            for c in 0..PAN_PX {
                if (r as f64 - py).powi(2) + (c as f64 - px).powi(2) < pr * pr {
                    base[r * PAN_PX + c] = WATER;
                    vegetation[r * PAN_PX + c] = 0.0;
                }
            }
        }
    }

    let relief = rng.random_range(15.0..60.0);
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.02..0.08),
                rng.random_range(0.02..0.08),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let mut elevation = vec![0.0; SCENE_MS_PX * SCENE_MS_PX];
    for r in 0..SCENE_MS_PX {
        for c in 0..SCENE_MS_PX {
            elevation[r * SCENE_MS_PX + c] = waves
                .iter()
                .map(|(kx, ky, px, py)| relief / 3.0 * (kx * c as f64 + px).sin() * (ky * r as f64 + py).sin())
                .sum();
        }
    }
    Surface {
        base,
        vegetation,
        elevation,
    }
}

/// Cosine of the local incidence angle for every 30 m pixel.
pub fn incidence(elevation: &[f64], w: usize, h: usize, zenith: f64, azimuth: f64) -> Vec<f32> {
    let at = |r: isize, c: isize| elevation[(r.clamp(0, h as isize - 1) as usize) * w + c.clamp(0, w as isize - 1) as usize];
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h as isize {
        for c in 0..w as isize {
            let dzdx = (at(r, c + 1) - at(r, c - 1)) / (2.0 * MS_PIXEL_M);
            let dzdy = (at(r - 1, c) - at(r + 1, c)) / (2.0 * MS_PIXEL_M);
            let slope = (dzdx * dzdx + dzdy * dzdy).sqrt().atan();
            let aspect = (-dzdx).atan2(-dzdy);
            let cos_i = zenith.cos() * slope.cos() + zenith.sin() * slope.sin() * (azimuth - aspect).cos();
            out.push(cos_i.clamp(0.05, 1.0) as f32);
        }
    }
    out
}

/// Renders acquisition `k` of `year` over village `index`.
pub fn render_scene(world: &World, surface: &Surface, index: usize, year: i32, k: usize) -> Result<SceneInput> {
    let spec = &world.spec;
    let village = &world.villages[index];
    let mut rng = stream(spec.seed, 0x5343_454e ^ ((year as u64) << 32) ^ k as u64, index as u64);
    let zenith = rng.random_range(25.0f64..45.0).to_radians();
    let azimuth = rng.random_range(100.0f64..160.0).to_radians();
    let season: f32 = rng.random_range(0.5..1.2);
    let noise = Normal::new(0.0f32, 0.004).expect("valid normal");
    let cos_i = incidence(&surface.elevation, SCENE_MS_PX, SCENE_MS_PX, zenith, azimuth);
    let light: Vec<f32> = cos_i.iter().map(|c| c / zenith.cos() as f32).collect();

    let mut clouds: Vec<(f64, f64, f64)> = Vec::new();
    let mid = SCENE_MS_PX as f64 / 2.0;
    if rng.random_bool(spec.cloud_rate) {
        for _ in 0..rng.random_range(1..=3) {
            clouds.push((
                rng.random_range(mid - 40.0..mid + 40.0),
                rng.random_range(mid - 40.0..mid + 40.0),
                rng.random_range(20.0..45.0),
            ));
        }
    } else if rng.random_bool(0.3) {
        clouds.push((rng.random_range(10.0..110.0), rng.random_range(10.0..110.0), rng.random_range(2.0..3.0)));
    }
    let opacity = |r: f64, c: f64| -> f32 {
        clouds
            .iter()
            .map(|(cy, cx, cr)| {
                let d = ((r - cy).powi(2) + (c - cx).powi(2)).sqrt() / cr;
                ((1.3 - d) / 0.3).clamp(0.0, 1.0)
            })
            .fold(0.0f64, f64::max) as f32
    };

    let slc = year >= SLC_FAILURE_YEAR && rng.random_bool(spec.slc_rate);
    let slc_phase = rng.random_range(0..12usize);
    let gap = |r: usize, c: usize| -> bool {
        if !slc {
            return false;
        }
        let width = 1 + (3.0 * (c as f64 - mid).abs() / mid) as usize;
        (r + slc_phase) % 12 < width
    };

    let pixel = |i: usize, season: f32| -> [f32; 4] {
        let f = (surface.vegetation[i] * season).clamp(0.0, 1.0);
        std::array::from_fn(|b| (1.0 - f) * surface.base[i][b] + f * VEG[b])
    };

    let n = SCENE_MS_PX * SCENE_MS_PX;
    let mut ms_px = vec![0.0f32; 4 * n];
    let mut ms_valid = vec![true; n];
    let mut qa = vec![false; n];
    let mut alpha_ms = vec![0.0f32; n];
    for r in 0..SCENE_MS_PX {
        for c in 0..SCENE_MS_PX {
            let i = r * SCENE_MS_PX + c;
            let mut acc = [0.0f32; 4];
            for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let p = pixel((2 * r + dr) * PAN_PX + 2 * c + dc, season);
                for b in 0..4 {
                    acc[b] += p[b] / 4.0;
                }
            }
            let a = opacity(r as f64 + 0.5, c as f64 + 0.5);
            alpha_ms[i] = a;
            qa[i] = a > 0.2;
            if gap(r, c) {
                ms_valid[i] = false;
                continue;
            }
            for b in 0..4 {
                let lit = acc[b] * light[i] + noise.sample(&mut rng);
                ms_px[b * n + i] = ((1.0 - a) * lit + a * CLOUD).clamp(0.0, 0.98);
            }
        }
    }

    let pn = PAN_PX * PAN_PX;
    let mut pan_px = vec![0.0f32; pn];
    let mut pan_valid = vec![true; pn];
    for r in 0..PAN_PX {
        for c in 0..PAN_PX {
            let parent = (r / 2) * SCENE_MS_PX + c / 2;
            if !ms_valid[parent] {
                pan_valid[r * PAN_PX + c] = false;
                continue;
            }
            let p = pixel(r * PAN_PX + c, season);
            let lit = (p[1] + p[2] + p[3]) / 3.0 * light[parent] + noise.sample(&mut rng);
            let a = alpha_ms[parent];
            pan_px[r * PAN_PX + c] = ((1.0 - a) * lit + a * CLOUD).clamp(0.0, 0.98);
        }
    }

    let half = SCENE_MS_PX as f64 * MS_PIXEL_M / 2.0;
    let ms = RasterGrid::from_parts(
        SCENE_MS_PX,
        SCENE_MS_PX,
        MS_BANDS.iter().map(|s| s.to_string()).collect(),
        ms_px,
        ms_valid,
        MS_PIXEL_M,
        (-half, half),
    )?;
    let pan = RasterGrid::from_parts(PAN_PX, PAN_PX, vec!["pan".into()], pan_px, pan_valid, TILE_PIXEL_M, (-half, half))?;
    let spacing = 300 / spec.scenes_per_year.max(1);
    let day = (20 + k * spacing + rng.random_range(0..spacing.max(1))).min(365) as u16;
    let tier = if clouds.len() > 1 || rng.random_bool(0.1) { 2 } else { 1 };
    let scene = Scene::new(
        ms,
        pan,
        qa,
        AcquisitionDate { year, day_of_year: day },
        tier,
        village.centroid(),
    )?;
    Ok(SceneInput {
        scene,
        illumination: IlluminationGrid::new(SCENE_MS_PX, SCENE_MS_PX, cos_i, zenith)?,
    })
}

/// All acquisitions of one village-year, in acquisition order.
pub fn render_scenes(world: &World, index: usize, year: i32) -> Result<Vec<SceneInput>> {
    let surface = render_surface(&world.latents[index], world.spec.seed, index as u64);
    (0..world.spec.scenes_per_year)
        .map(|k| render_scene(world, &surface, index, year, k))
        .collect()
}
