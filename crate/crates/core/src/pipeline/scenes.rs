use crate::compositing::SceneInput;
use crate::error::{Error, Result};
use crate::store::{read_scenes, DataLayout};
use crate::synth::{render_scenes, World, WorldSpec};
use crate::tabular::VillageRecord;

/// Where the raw acquisitions of a village-year come from.
pub trait SceneSource: Sync {
    fn scenes(&self, index: usize, year: i32) -> Result<Vec<SceneInput>>;
    fn describe(&self) -> &'static str;
}

/// Scenes read from the archive under `scenes/`.
pub struct ArchiveScenes {
    layout: DataLayout,
    ids: Vec<String>,
}

impl SceneSource for ArchiveScenes {
    fn scenes(&self, index: usize, year: i32) -> Result<Vec<SceneInput>> {
        read_scenes(&self.layout.scene_dir(year, &self.ids[index]))
    }

    fn describe(&self) -> &'static str {
        "archive"
    }
}

/// Scenes re-rendered from the world spec stored with a synthetic dataset.
pub struct RenderedScenes {
    world: World,
}

impl SceneSource for RenderedScenes {
    fn scenes(&self, index: usize, year: i32) -> Result<Vec<SceneInput>> {
        render_scenes(&self.world, index, year)
    }

    fn describe(&self) -> &'static str {
        "rendered"
    }
}

/// Uses the scene archive when the dataset has one. Otherwise the world is
/// regenerated from `world.cfg`, which must reproduce the village manifest.
pub fn open_scene_source(layout: &DataLayout, villages: &[VillageRecord]) -> Result<Box<dyn SceneSource>> {
    if layout.scenes().is_dir() {
        return Ok(Box::new(ArchiveScenes {
            layout: layout.clone(),
            ids: villages.iter().map(|v| v.village_id.clone()).collect(),
        }));
    }
    let spec_path = layout.world_spec();
    if !spec_path.is_file() {
        return Err(Error::input(format!(
            "{} has neither a scene archive nor a world spec",
            layout.root.display()
        )));
    }
    let world = World::generate(&WorldSpec::read(&spec_path)?)?;
    if world.villages != villages {
        return Err(Error::input(format!(
            "{} does not reproduce the village manifest",
            spec_path.display()
        )));
    }
    Ok(Box::new(RenderedScenes { world }))
}
