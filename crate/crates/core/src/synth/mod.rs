//! Deterministic synthetic world: villages with hidden development scores
//! that drive rendered scenes, night light, census tables and survey factors.

mod render;
mod spec;
mod world;

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::container::write_raster;
use crate::error::{Error, Result};
use crate::store::{write_scene, DataLayout};
use crate::tabular::{
    write_census_rows, write_demographics, write_health_vectors, write_tehsil_tables, write_village_manifest,
    CensusYear, SurveyRound, ASSET_NAMES,
};

pub use render::{incidence, render_scene, render_scenes, render_surface, Surface, SCENE_MS_PX, SLC_FAILURE_YEAR};
pub use spec::{Drift, WorldSpec};
pub(crate) use world::mix;
pub use world::{
    apply_drift, oracle_answers, AssetCurve, LatentVillage, OracleAnswers, OracleFactor, OracleVillage, World,
    ASSET_CURVES, ROUND_YEARS,
};

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes the tables, night light, oracle exports and, when the spec asks
/// for it, the full scene archive.
pub fn write_dataset(world: &World, out: &Path) -> Result<()> {
    let layout = DataLayout::new(out);
    for dir in [out.join("census"), out.join("survey"), layout.oracle_dir()] {
        create_dir(&dir)?;
    }
    let spec_path = layout.world_spec();
    fs::write(&spec_path, world.spec.to_text()).map_err(|e| Error::io(&spec_path, e))?;
    write_village_manifest(&layout.villages(), &world.villages)?;
    write_census_rows(&layout.village_census(), "village_id", &world.village_census)?;
    for (r, year) in ROUND_YEARS.iter().enumerate() {
        let y = CensusYear::from_year(*year)?;
        write_tehsil_tables(&layout.tehsil_dir(y), y, &world.tehsil_tables[r])?;
    }
    write_demographics(&layout.demographics(), &world.demographics)?;
    for (r, round) in [SurveyRound::Nfhs4, SurveyRound::Nfhs5].into_iter().enumerate() {
        write_health_vectors(&layout.survey(round), &world.surveys[r])?;
    }
    write_raster(&layout.nightlight(), &world.nightlight.to_raster(), Some("EPSG:4326"))?;
    write_oracle(world, &layout.oracle_dir())?;
    if world.spec.persist_scenes {
        write_scene_archive(world, &layout)?;
    }
    log::info!(
        "stage=synth-gen villages={} districts={} scenes_persisted={}",
        world.villages.len(),
        world.district_latents.len(),
        world.spec.persist_scenes
    );
    Ok(())
}

fn write_scene_archive(world: &World, layout: &DataLayout) -> Result<()> {
    (0..world.villages.len()).into_par_iter().try_for_each(|i| {
        let surface = render_surface(&world.latents[i], world.spec.seed, i as u64);
        for year in ROUND_YEARS {
            let dir = layout.scene_dir(year, &world.villages[i].village_id);
            create_dir(&dir)?;
            for k in 0..world.spec.scenes_per_year {
                write_scene(&dir, k, &render_scene(world, &surface, i, year, k)?)?;
            }
        }
        Ok(())
    })
}

fn write_oracle(world: &World, dir: &Path) -> Result<()> {
    let oracle = oracle_answers(world);
    let path = dir.join("villages.csv");
    let mut w = crate::tabular::csv_writer(&path)?;
    let mut header = vec!["village_id".to_string(), "z".into(), "u".into()];
    header.extend(ASSET_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for v in &oracle.villages {
        let mut rec = vec![v.village_id.clone(), v.z.to_string(), v.u.to_string()];
        rec.extend(v.assets.iter().map(|a| a.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("factors.csv");
    let mut w = crate::tabular::csv_writer(&path)?;
    w.write_record(["factor_id", "linked", "corr_z"])?;
    for f in &oracle.factors {
        w.write_record([
            format!("factor-{}", f.factor),
            f.linked.to_string(),
            f.corr_z.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("drift.csv");
    let mut w = crate::tabular::csv_writer(&path)?;
    w.write_record(["asset", "mean_shift", "variance_shift"])?;
    for (name, d) in ASSET_NAMES.iter().zip(&world.spec.drift) {
        w.write_record([name.to_string(), d.mean_shift.to_string(), d.variance_shift.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Generates a world from its spec and writes it to `out`.
pub fn generate_world(spec: &WorldSpec, out: &Path) -> Result<World> {
    let world = World::generate(spec)?;
    write_dataset(&world, out)?;
    Ok(world)
}
