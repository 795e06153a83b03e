use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NightlightGrid, NIGHTLIGHT_CELL_DEG, NIGHTLIGHT_MAX};
use crate::tabular::{
    build_asset_vector, AssetVector16, CensusRow, CensusYear, DemographicVector, HealthVector93, SurveyRound,
    TehsilTables, VillageRecord, ASSET_FORMULAS, HEALTH_FACTORS, NON_PERCENT_FACTORS, TEHSIL_TO_ASSET,
};

use super::spec::{Drift, WorldSpec};

/// Census years of the two rounds.
pub const ROUND_YEARS: [i32; 2] = [2001, 2011];

const GRID_SPACING_DEG: f64 = 0.05;
const NORTH: f64 = 26.0;
const WEST: f64 = 80.0;

/// splitmix64 finalizer, used to derive independent stream seeds.
pub(crate) fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub(crate) fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(seed ^ tag).wrapping_add(index)))
}

/// Nondecreasing logistic response of one asset to its driver
/// `s = weight_z * z + (1 - weight_z) * u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssetCurve {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub gain: f64,
    pub weight_z: f64,
    pub noise: f64,
}

const fn curve(lo: f64, hi: f64, center: f64, gain: f64, weight_z: f64, noise: f64) -> AssetCurve {
    AssetCurve {
        lo,
        hi,
        center,
        gain,
        weight_z,
        noise,
    }
}

pub const ASSET_CURVES: [AssetCurve; 16] = [
    curve(0.30, 0.55, 0.50, 6.0, 0.8, 0.05),
    curve(0.30, 0.50, 0.50, 5.0, 0.6, 0.06),
    curve(0.05, 0.60, 0.55, 8.0, 1.0, 0.04),
    curve(0.10, 0.35, 0.45, 6.0, 0.7, 0.05),
    curve(0.05, 0.30, 0.50, 6.0, 0.3, 0.05),
    curve(0.10, 0.80, 0.45, 9.0, 1.0, 0.04),
    curve(0.10, 0.40, 0.50, 6.0, 0.5, 0.05),
    curve(0.02, 0.65, 0.55, 8.0, 0.9, 0.04),
    curve(0.02, 0.30, 0.60, 8.0, 1.0, 0.03),
    curve(0.20, 0.60, 0.40, 6.0, 0.6, 0.06),
    curve(0.02, 0.45, 0.60, 8.0, 0.9, 0.04),
    curve(0.15, 0.35, 0.50, 5.0, 0.5, 0.06),
    curve(0.10, 0.70, 0.50, 7.0, 0.8, 0.04),
    curve(0.02, 0.60, 0.55, 8.0, 0.4, 0.04),
    curve(0.05, 0.75, 0.50, 8.0, 0.9, 0.04),
    curve(0.10, 0.85, 0.50, 7.0, 0.3, 0.04),
];

impl AssetCurve {
    pub fn value(&self, z: f64, u: f64) -> f64 {
        let s = self.weight_z * z + (1.0 - self.weight_z) * u;
        self.lo + (self.hi - self.lo) / (1.0 + (-self.gain * (s - self.center)).exp())
    }

    /// Level around which the spread of the second round is scaled.
    pub fn pivot(&self) -> f64 {
        self.value(0.5, 0.5)
    }
}

pub fn apply_drift(value: f64, drift: &Drift, pivot: f64) -> f64 {
    (value + drift.mean_shift + drift.variance_shift * (value - pivot)).clamp(0.0, 1.0)
}

/// Hidden state of one village and the scene properties derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentVillage {
    pub village_id: String,
    /// Development score driving settlement size, roads and night light.
    pub z: f64,
    /// Second score, visible only through roof material.
    pub u: f64,
    pub built_density: f64,
    pub road_fraction: f64,
    pub roof_brightness: f64,
    pub population: f64,
}

impl LatentVillage {
    /// Derives the rendered settlement traits from the two scores.
    pub fn new(village_id: String, z: f64, u: f64, population: f64) -> Self {
        LatentVillage {
            village_id,
            z,
            u,
            built_density: 0.1 + 0.8 * z,
            road_fraction: 1.0 / (40.0 - 30.0 * z).round(),
            roof_brightness: 0.15 + 0.3 * u,
            population,
        }
    }
}

/// Generated world held in memory. Tables hold exactly what is written to disk.
#[derive(Debug, Clone)]
pub struct World {
    pub spec: WorldSpec,
    pub villages: Vec<VillageRecord>,
    pub latents: Vec<LatentVillage>,
    /// Noisy asset fractions per round before census rounding.
    pub asset_values: [Vec<[f64; 16]>; 2],
    /// Village census rows of the second round, keyed by village id.
    pub village_census: BTreeMap<String, CensusRow>,
    pub tehsil_tables: [BTreeMap<String, TehsilTables>; 2],
    pub demographics: BTreeMap<String, DemographicVector>,
    pub surveys: [BTreeMap<String, HealthVector93>; 2],
    pub nightlight: NightlightGrid,
    /// District means of z and u, population-weighted, ordered by district id.
    pub district_latents: BTreeMap<String, (f64, f64)>,
}

fn pct(v: f64) -> f64 {
    (v * 10_000.0).round() / 100.0
}

fn village_row(values: &[f64; 16]) -> CensusRow {
    let mut row = CensusRow::new();
    for (f, v) in ASSET_FORMULAS.iter().zip(values) {
        let total = v * f.divisor;
        let share = total / f.columns.len() as f64;
        for c in f.columns {
            row.insert(*c, pct(share));
        }
    }
    row
}

fn split_count(total: f64, parts: usize) -> Vec<f64> {
    let base = (total / parts as f64).floor();
    let mut out = vec![base; parts];
    out[0] += total - base * parts as f64;
    out
}

/// Household counts for one tehsil and round, built so that every formula of
/// that round reproduces the household-weighted village fractions.
fn tehsil_tables(year: CensusYear, households: f64, frac: &[f64; 10]) -> TehsilTables {
    let count = |k: usize| (frac[k] * households).round();
    let mut t = TehsilTables::new();
    let mut table = |name: &str, cols: &[(u32, f64)]| {
        t.insert(name.to_string(), cols.iter().copied().collect::<CensusRow>());
    };
    match year {
        CensusYear::Y2011 => {
            let e = split_count(count(0), 2);
            let o = split_count(count(1), 2);
            table("HH-7", &[(8, households), (9, e[0]), (10, o[0]), (11, e[1]), (12, o[1])]);
            let bath = count(9).max(1.0);
            let cook = split_count((frac[8] * bath).round(), 2);
            table("HH-10", &[(8, households), (9, bath), (14, cook[0]), (15, cook[1])]);
            let phone = split_count(count(3), 3);
            let motor = split_count(count(5), 2);
            table(
                "HH-12",
                &[
                    (8, households),
                    (9, count(7)),
                    (10, 0.0),
                    (11, 0.0),
                    (12, 0.0),
                    (13, 0.0),
                    (14, phone[0]),
                    (15, phone[1]),
                    (16, phone[2]),
                    (17, count(4)),
                    (18, motor[0]),
                    (19, motor[1]),
                    (20, count(2)),
                    (21, count(6)),
                ],
            );
        }
        CensusYear::Y2001 => {
            let e = split_count(count(0), 2);
            let o = split_count(count(1), 2);
            table("H-9", &[(2, households), (3, e[0]), (4, o[0]), (5, e[1]), (6, o[1])]);
            let cook = split_count(count(8), 2);
            table("H-10", &[(2, households), (3, households), (8, cook[0]), (9, cook[1])]);
            table("H-11", &[(2, households), (3, count(9))]);
            let elec = split_count(count(2), 2);
            let motor = split_count(count(5), 2);
            table(
                "H-13",
                &[
                    (2, households),
                    (3, count(7)),
                    (4, elec[0]),
                    (5, elec[1]),
                    (6, count(3)),
                    (7, count(4)),
                    (8, motor[0]),
                    (9, motor[1]),
                    (10, count(6)),
                ],
            );
        }
    }
    t
}

/// Unit-variance, zero-mean version of `v` with the span of `basis` removed.
fn orthonormal_residual(v: &[f64], basis: &[&[f64]]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mut r: Vec<f64> = v.iter().map(|x| x - mean).collect();
    for b in basis {
        let dot: f64 = r.iter().zip(b.iter()).map(|(a, c)| a * c).sum();
        let nb: f64 = b.iter().map(|c| c * c).sum();
        if nb > 0.0 {
            for (a, c) in r.iter_mut().zip(b.iter()) {
                *a -= dot / nb * c;
            }
        }
    }
    let sd = (r.iter().map(|a| a * a).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        r.iter_mut().for_each(|a| *a /= sd);
    }
    r
}

fn standardized(v: &[f64]) -> Vec<f64> {
    orthonormal_residual(v, &[])
}

/// Factor scale: center and spread in the factor's native unit.
fn factor_scale(factor: usize, rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    match factor {
        3 | 4 => (rng.random_range(20.0..60.0), 5.0, f64::INFINITY),
        37 => (rng.random_range(3000.0..8000.0), 600.0, f64::INFINITY),
        _ => (rng.random_range(30.0..70.0), 6.0, 100.0),
    }
}

impl World {
    pub fn generate(spec: &WorldSpec) -> Result<Self> {
        spec.validate()?;
        let (ns, nd, nt, nv) = (spec.n_states, spec.n_districts, spec.n_tehsils, spec.n_villages);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut rng = stream(spec.seed, 0x4849_4552, 0);
        let dz: Vec<f64> = (0..nd).map(|_| normal.sample(&mut rng)).collect();
        let du: Vec<f64> = (0..nd).map(|_| normal.sample(&mut rng)).collect();
        let tz: Vec<f64> = (0..nt).map(|_| normal.sample(&mut rng)).collect();

        let cols = (nv as f64).sqrt().ceil() as usize;
        let pop_dist = LogNormal::new(1500f64.ln(), 0.6).expect("valid lognormal");
        let mut villages = Vec::with_capacity(nv);
        let mut latents = Vec::with_capacity(nv);
        let mut rng = stream(spec.seed, 0x5649_4c4c, 0);
        for i in 0..nv {
            let t = i * nt / nv;
            let d = t * nd / nt;
            let s = d * ns / nd;
            let z = (0.5 + 0.15 * dz[d] + 0.07 * tz[t] + 0.13 * normal.sample(&mut rng)).clamp(0.0, 1.0);
            let u = (0.5 + 0.15 * du[d] + 0.15 * normal.sample(&mut rng)).clamp(0.0, 1.0);
            let population = pop_dist.sample(&mut rng).round().max(50.0);
            let (row, col) = (i / cols, i % cols);
            let lat = NORTH - GRID_SPACING_DEG * (row as f64 + 0.5) + rng.random_range(-0.008..0.008);
            let lon = WEST + GRID_SPACING_DEG * (col as f64 + 0.5) + rng.random_range(-0.008..0.008);
            let id = format!("V{i:05}");
            villages.push(VillageRecord {
                village_id: id.clone(),
                lat,
                lon,
                population,
                tehsil_id: format!("T{t:04}"),
                district_id: format!("D{d:03}"),
                state_id: format!("S{s:02}"),
            });
            latents.push(LatentVillage::new(id, z, u, population));
        }

        let mut rng = stream(spec.seed, 0x4153_5345, 0);
        let mut round1 = Vec::with_capacity(nv);
        let mut round2 = Vec::with_capacity(nv);
        for lv in &latents {
            let mut a = [0.0; 16];
            let mut b = [0.0; 16];
            for k in 0..16 {
                let c = &ASSET_CURVES[k];
                a[k] = (c.value(lv.z, lv.u) + c.noise * normal.sample(&mut rng)).clamp(0.0, 1.0);
                b[k] = apply_drift(a[k], &spec.drift[k], c.pivot());
            }
            round1.push(a);
            round2.push(b);
        }
        let village_census: BTreeMap<String, CensusRow> = villages
            .iter()
            .zip(&round2)
            .map(|(v, a)| (v.village_id.clone(), village_row(a)))
            .collect();

        let mut tehsil = [BTreeMap::new(), BTreeMap::new()];
        let mut by_tehsil: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, v) in villages.iter().enumerate() {
            by_tehsil.entry(v.tehsil_id.as_str()).or_default().push(i);
        }
        for (r, values) in [&round1, &round2].into_iter().enumerate() {
            let year = CensusYear::from_year(ROUND_YEARS[r])?;
            for (t, members) in &by_tehsil {
                let hh: Vec<f64> = members.iter().map(|&i| (villages[i].population / 5.0).round().max(1.0)).collect();
                let total: f64 = hh.iter().sum();
                let mut frac = [0.0; 10];
                for (k, a) in TEHSIL_TO_ASSET.iter().enumerate() {
                    frac[k] = members.iter().zip(&hh).map(|(&i, h)| values[i][*a] * h).sum::<f64>() / total;
                }
                tehsil[r].insert(t.to_string(), tehsil_tables(year, total, &frac));
            }
        }

        let mut rng = stream(spec.seed, 0x4445_4d4f, 0);
        let mut demographics = BTreeMap::new();
        for lv in &latents {
            let mut noisy = |base: f64, sd: f64| pct((base + sd * normal.sample(&mut rng)).clamp(0.0, 1.0)) / 100.0;
            let d = DemographicVector::from_array([
                noisy(0.30 + 0.45 * lv.z + 0.10 * lv.u, 0.05),
                noisy(0.30 + 0.10 * lv.z + 0.15 * lv.u, 0.06),
                noisy(0.22 - 0.10 * lv.u, 0.06),
                noisy(0.05 + 0.55 * (1.0 - lv.u).powi(2), 0.05),
            ])?;
            demographics.insert(lv.village_id.clone(), d);
        }

        let mut district_latents = BTreeMap::new();
        {
            let mut acc: BTreeMap<&str, (f64, f64, f64)> = BTreeMap::new();
            for (v, lv) in villages.iter().zip(&latents) {
                let e = acc.entry(v.district_id.as_str()).or_default();
                e.0 += lv.population * lv.z;
                e.1 += lv.population * lv.u;
                e.2 += lv.population;
            }
            for (d, (z, u, p)) in acc {
                district_latents.insert(d.to_string(), (z / p, u / p));
            }
        }
        let surveys = Self::surveys(spec, &district_latents)?;
        let nightlight = Self::nightlight(spec, &villages, &latents)?;

        Ok(World {
            spec: spec.clone(),
            villages,
            latents,
            asset_values: [round1, round2],
            village_census,
            tehsil_tables: tehsil,
            demographics,
            surveys,
            nightlight,
            district_latents,
        })
    }

    fn surveys(
        spec: &WorldSpec,
        district_latents: &BTreeMap<String, (f64, f64)>,
    ) -> Result<[BTreeMap<String, HealthVector93>; 2]> {
        let ids: Vec<&String> = district_latents.keys().collect();
        let zs: Vec<f64> = district_latents.values().map(|v| v.0).collect();
        let us: Vec<f64> = district_latents.values().map(|v| v.1).collect();
        let n = ids.len();
        let zhat = standardized(&zs);
        let uhat = if n > 2 { orthonormal_residual(&us, &[&zhat]) } else { vec![0.0; n] };
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut rng = stream(spec.seed, 0x5355_5256, 0);
        let mut values = [vec![vec![None; HEALTH_FACTORS]; n], vec![vec![None; HEALTH_FACTORS]; n]];
        for f in 1..=HEALTH_FACTORS {
            let (center, scale, upper) = factor_scale(f, &mut rng);
            let raw: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            let missing: [Vec<bool>; 2] =
                std::array::from_fn(|_| (0..n).map(|_| rng.random_bool(spec.survey_missing_rate)).collect());
            let linked = spec.is_linked(f);
            let (sign, cu) = if linked {
                (if rng.random_bool(0.5) { 1.0 } else { -1.0 }, rng.random_range(-0.45..0.45))
            } else {
                (0.0, 0.0)
            };
            // Scores of first-round reporters are orthogonalized among themselves.
            let present: Vec<usize> = (0..n).filter(|&i| !missing[0][i]).collect();
            let pick = |v: &[f64]| present.iter().map(|&i| v[i]).collect::<Vec<f64>>();
            let z_p = standardized(&pick(&zs));
            let u_p = orthonormal_residual(&pick(&us), &[&z_p]);
            let eps_p = if linked {
                orthonormal_residual(&pick(&raw), &[&z_p, &u_p])
            } else {
                orthonormal_residual(&pick(&raw), &[&z_p])
            };
            let mut score: Vec<f64> = (0..n).map(|i| sign * 0.8 * zhat[i] + cu * uhat[i] + 0.3 * raw[i]).collect();
            for (k, &i) in present.iter().enumerate() {
                score[i] = if linked { sign * 0.8 * z_p[k] + cu * u_p[k] + 0.3 * eps_p[k] } else { eps_p[k] };
            }
            let shift = rng.random_range(-1.0..1.0) * scale * 0.3;
            for i in 0..n {
                let v1 = (center + scale * score[i]).clamp(0.0, upper);
                let v2 = (v1 + shift + 0.2 * scale * normal.sample(&mut rng)).clamp(0.0, upper);
                for (r, v) in [v1, v2].into_iter().enumerate() {
                    if !missing[r][i] {
                        values[r][i][f - 1] = Some(if NON_PERCENT_FACTORS.contains(&f) { v.round() } else { pct(v / 100.0) });
                    }
                }
            }
        }
        let mut out = [BTreeMap::new(), BTreeMap::new()];
        for (r, round) in [SurveyRound::Nfhs4, SurveyRound::Nfhs5].into_iter().enumerate() {
            for (i, id) in ids.iter().enumerate() {
                out[r].insert((*id).clone(), HealthVector93::new(round, values[r][i].clone())?);
            }
        }
        Ok(out)
    }

    fn nightlight(spec: &WorldSpec, villages: &[VillageRecord], latents: &[LatentVillage]) -> Result<NightlightGrid> {
        let cols_v = (villages.len() as f64).sqrt().ceil() as usize;
        let rows_v = villages.len().div_ceil(cols_v);
        let margin = 0.05;
        let north = NORTH + margin;
        let west = WEST - margin;
        let rows = ((rows_v as f64 * GRID_SPACING_DEG + 2.0 * margin) / NIGHTLIGHT_CELL_DEG).ceil() as usize;
        let cols = ((cols_v as f64 * GRID_SPACING_DEG + 2.0 * margin) / NIGHTLIGHT_CELL_DEG).ceil() as usize;
        let normal = Normal::new(0.0, spec.nightlight_noise.max(0.0)).map_err(|e| Error::Spec(e.to_string()))?;
        let mut rng = stream(spec.seed, 0x4e49_4748, 0);
        let mut level = vec![0.0f64; rows * cols];
        for (v, lv) in villages.iter().zip(latents) {
            let (hlat, hlon) = v.footprint().half_extent_deg();
            let r0 = ((north - (v.lat + hlat)) / NIGHTLIGHT_CELL_DEG).floor().max(0.0) as usize;
            let r1 = (((north - (v.lat - hlat)) / NIGHTLIGHT_CELL_DEG).ceil() as usize).min(rows);
            let c0 = (((v.lon - hlon) - west) / NIGHTLIGHT_CELL_DEG).floor().max(0.0) as usize;
            let c1 = ((((v.lon + hlon) - west) / NIGHTLIGHT_CELL_DEG).ceil() as usize).min(cols);
            for r in r0..r1 {
                for c in c0..c1 {
                    level[r * cols + c] = level[r * cols + c].max(lv.z);
                }
            }
        }
        let values = level
            .iter()
            .map(|z| (NIGHTLIGHT_MAX * (z + normal.sample(&mut rng)).clamp(0.0, 1.0)).round() as u8)
            .collect();
        NightlightGrid::new(north, west, rows, cols, values)
    }

    pub fn index_of(&self, village_id: &str) -> Option<usize> {
        self.villages.binary_search_by(|v| v.village_id.as_str().cmp(village_id)).ok()
    }

    /// Asset vectors as re-derived from the exported census rows.
    pub fn asset_vectors(&self) -> Result<BTreeMap<String, AssetVector16>> {
        self.village_census
            .iter()
            .map(|(id, row)| Ok((id.clone(), build_asset_vector(row)?)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVillage {
    pub village_id: String,
    pub z: f64,
    pub u: f64,
    /// Noiseless first-round asset fractions.
    pub assets: [f64; 16],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleFactor {
    pub factor: usize,
    pub linked: bool,
    /// Correlation of the first-round district values with the district mean of z.
    pub corr_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleAnswers {
    pub villages: Vec<OracleVillage>,
    pub factors: Vec<OracleFactor>,
}

pub(crate) fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    if a.len() < 2 {
        return None;
    }
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        None
    } else {
        Some(sab / (saa * sbb).sqrt())
    }
}

/// Ground truth for assertions: latents, noiseless asset curves and which
/// health factors carry the latent signal.
pub fn oracle_answers(world: &World) -> OracleAnswers {
    let villages = world
        .latents
        .iter()
        .map(|lv| OracleVillage {
            village_id: lv.village_id.clone(),
            z: lv.z,
            u: lv.u,
            assets: std::array::from_fn(|k| ASSET_CURVES[k].value(lv.z, lv.u)),
        })
        .collect();
    let survey = &world.surveys[0];
    let factors = (1..=HEALTH_FACTORS)
        .map(|f| {
            let (zs, vs): (Vec<f64>, Vec<f64>) = survey
                .iter()
                .filter_map(|(d, hv)| hv.values[f - 1].map(|v| (world.district_latents[d].0, v)))
                .unzip();
            OracleFactor {
                factor: f,
                linked: world.spec.is_linked(f),
                corr_z: pearson(&zs, &vs),
            }
        })
        .collect();
    OracleAnswers { villages, factors }
}
