//! On-disk layout of a dataset directory and the scene archive inside it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compositing::{IlluminationGrid, SceneInput};
use crate::container::{read_raster, write_raster};
use crate::error::{Error, Result};
use crate::raster::{AcquisitionDate, LatLon, RasterGrid, Scene};
use crate::tabular::{CensusYear, SurveyRound};

/// Paths of every file in a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataLayout {
    pub root: PathBuf,
}

impl DataLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DataLayout { root: root.into() }
    }

    pub fn world_spec(&self) -> PathBuf {
        self.root.join("world.cfg")
    }

    pub fn villages(&self) -> PathBuf {
        self.root.join("villages.jsonl")
    }

    pub fn village_census(&self) -> PathBuf {
        self.root.join("census").join("village_2011.csv")
    }

    pub fn tehsil_dir(&self, year: CensusYear) -> PathBuf {
        self.root.join("census").join(format!("tehsil_{}", year.year()))
    }

    pub fn demographics(&self) -> PathBuf {
        self.root.join("census").join("demographics.csv")
    }

    pub fn survey(&self, round: SurveyRound) -> PathBuf {
        let name = match round {
            SurveyRound::Nfhs4 => "nfhs4.csv",
            SurveyRound::Nfhs5 => "nfhs5.csv",
        };
        self.root.join("survey").join(name)
    }

    pub fn nightlight(&self) -> PathBuf {
        self.root.join("nightlight.eorc")
    }

    pub fn scenes(&self) -> PathBuf {
        self.root.join("scenes")
    }

    pub fn scene_dir(&self, year: i32, village_id: &str) -> PathBuf {
        self.scenes().join(year.to_string()).join(village_id)
    }

    pub fn oracle_dir(&self) -> PathBuf {
        self.root.join("oracle")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SceneMeta {
    acquired: AcquisitionDate,
    tier: u8,
    frame: LatLon,
    solar_zenith: f64,
}

/// Writes one acquisition as `<k>.ms.eorc`, `<k>.pan.eorc`, `<k>.aux.eorc`
/// (cloud flag and incidence cosine on the MS grid) and `<k>.json`.
pub fn write_scene(dir: &Path, k: usize, input: &SceneInput) -> Result<()> {
    let s = &input.scene;
    write_raster(&dir.join(format!("{k}.ms.eorc")), &s.ms, None)?;
    write_raster(&dir.join(format!("{k}.pan.eorc")), &s.pan, None)?;
    let n = s.ms.len();
    let mut aux = Vec::with_capacity(2 * n);
    aux.extend(s.qa.iter().map(|q| if *q { 1.0f32 } else { 0.0 }));
    aux.extend_from_slice(input.illumination.cos_i());
    let aux = RasterGrid::from_parts(
        s.ms.width(),
        s.ms.height(),
        vec!["qa".into(), "cos_i".into()],
        aux,
        vec![true; n],
        s.ms.pixel_size(),
        s.ms.origin(),
    )?;
    write_raster(&dir.join(format!("{k}.aux.eorc")), &aux, None)?;
    let meta = SceneMeta {
        acquired: s.acquired,
        tier: s.tier,
        frame: s.frame,
        solar_zenith: input.illumination.solar_zenith(),
    };
    let path = dir.join(format!("{k}.json"));
    fs::write(&path, serde_json::to_vec_pretty(&meta)?).map_err(|e| Error::io(&path, e))
}

pub fn read_scene(dir: &Path, k: usize) -> Result<SceneInput> {
    let path = dir.join(format!("{k}.json"));
    let meta: SceneMeta = serde_json::from_slice(&fs::read(&path).map_err(|e| Error::io(&path, e))?)?;
    let ms = read_raster(&dir.join(format!("{k}.ms.eorc")))?;
    let pan = read_raster(&dir.join(format!("{k}.pan.eorc")))?;
    let aux_path = dir.join(format!("{k}.aux.eorc"));
    let aux = read_raster(&aux_path)?;
    if aux.width() != ms.width() || aux.height() != ms.height() || aux.band_count() != 2 {
        return Err(Error::format(&aux_path, "auxiliary raster does not match the MS grid"));
    }
    let qa = aux.band(0).iter().map(|v| *v != 0.0).collect();
    let illumination = IlluminationGrid::new(ms.width(), ms.height(), aux.band(1).to_vec(), meta.solar_zenith)?;
    let scene = Scene::new(ms, pan, qa, meta.acquired, meta.tier, meta.frame)?;
    Ok(SceneInput { scene, illumination })
}

/// Reads every acquisition stored in a village-year directory, ordered by index.
/// A missing directory holds no scenes.
pub fn read_scenes(dir: &Path) -> Result<Vec<SceneInput>> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(dir, e)),
    };
    let mut ks = Vec::new();
    for entry in entries {
        let name = entry.map_err(|e| Error::io(dir, e))?.file_name();
        if let Some(k) = name.to_str().and_then(|n| n.strip_suffix(".json")).and_then(|n| n.parse::<usize>().ok()) {
            ks.push(k);
        }
    }
    ks.sort_unstable();
    ks.into_iter().map(|k| read_scene(dir, k)).collect()
}
