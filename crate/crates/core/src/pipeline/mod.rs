//! Stage functions behind the `geoproxy` subcommands. Each stage reads a
//! dataset directory and the artifacts of earlier stages under one output
//! directory, and writes only its own artifacts there.
//!
//! ```text
//! out/
//!   composites/<year>/<village>.eorc, <village>.fill.csv, summary.csv
//!   assets/assets.csv, tehsil_2001.csv, tehsil_2011.csv
//!   models/asset.eock, nightlight.eock, *_history.csv, *_r2.csv
//!   transfer/<path>/demographics_r2.csv, assets_r2.csv, nfhs4.csv, nfhs5.csv, heads/
//!   temporal/<path>/temporal.csv, tehsil_predictions.csv, transforms/
//!   report/report.md, *.svg
//! ```

mod config;
mod report;
mod scenes;
mod stages;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{generate_world, WorldSpec, ROUND_YEARS};

pub use config::{NetworkShape, Optimizer, PipelineConfig, SeedTag};
pub use report::{report, read_factor_report};
pub use scenes::{open_scene_source, ArchiveScenes, RenderedScenes, SceneSource};
pub use stages::{
    build_assets, composite, evaluate_tables, read_tehsil_vectors, temporal, train_asset_model, train_nightlight_model,
    transfer, AssetSummary, CompositeSummary, ModelMeta, TrainSummary, TransferSummary,
};

/// The two feature extractors whose representations are transferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Asset,
    Nightlight,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Asset, ModelKind::Nightlight];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Asset => "asset",
            ModelKind::Nightlight => "nightlight",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::input(format!("unknown path '{s}', expected asset or nightlight")))
    }
}

/// Accepts a census year or the round number 1 or 2.
pub fn parse_round_year(s: &str) -> Result<i32> {
    let y: i32 = s.trim().parse().map_err(|_| Error::input(format!("bad year '{s}'")))?;
    let y = match y {
        1 | 2 => ROUND_YEARS[y as usize - 1],
        y => y,
    };
    if !ROUND_YEARS.contains(&y) {
        return Err(Error::input(format!("year {y} is not a census round {ROUND_YEARS:?}")));
    }
    Ok(y)
}

/// Paths of every artifact under the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutputLayout { root: root.into() }
    }

    pub fn composite_dir(&self, year: i32) -> PathBuf {
        self.root.join("composites").join(year.to_string())
    }

    pub fn composite_tile(&self, year: i32, village_id: &str) -> PathBuf {
        self.composite_dir(year).join(format!("{village_id}.eorc"))
    }

    pub fn fill_report(&self, year: i32, village_id: &str) -> PathBuf {
        self.composite_dir(year).join(format!("{village_id}.fill.csv"))
    }

    pub fn composite_summary(&self, year: i32) -> PathBuf {
        self.composite_dir(year).join("summary.csv")
    }

    pub fn assets_dir(&self) -> PathBuf {
        self.root.join("assets")
    }

    pub fn assets(&self) -> PathBuf {
        self.assets_dir().join("assets.csv")
    }

    pub fn tehsil_vectors(&self, year: i32) -> PathBuf {
        self.assets_dir().join(format!("tehsil_{year}.csv"))
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn model(&self, kind: ModelKind) -> PathBuf {
        self.models_dir().join(format!("{}.eock", kind.name()))
    }

    pub fn model_history(&self, kind: ModelKind) -> PathBuf {
        self.models_dir().join(format!("{}_history.csv", kind.name()))
    }

    pub fn model_r2(&self, kind: ModelKind) -> PathBuf {
        self.models_dir().join(format!("{}_r2.csv", kind.name()))
    }

    pub fn transfer_dir(&self, path: ModelKind) -> PathBuf {
        self.root.join("transfer").join(path.name())
    }

    pub fn head(&self, path: ModelKind, name: &str) -> PathBuf {
        self.transfer_dir(path).join("heads").join(format!("{name}.eock"))
    }

    pub fn temporal_dir(&self, path: ModelKind) -> PathBuf {
        self.root.join("temporal").join(path.name())
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Every stage in order on a freshly generated world: the scripted run
/// behind the acceptance report.
pub fn run_end_to_end(spec: &WorldSpec, cfg: &PipelineConfig) -> Result<PathBuf> {
    cfg.validate()?;
    generate_world(spec, &cfg.data)?;
    for year in ROUND_YEARS {
        composite(cfg, year)?;
    }
    build_assets(cfg)?;
    train_asset_model(cfg)?;
    train_nightlight_model(cfg)?;
    for path in ModelKind::ALL {
        transfer(cfg, path)?;
        temporal(cfg, path)?;
    }
    report(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_years_parse() {
        assert_eq!(parse_round_year("1").unwrap(), 2001);
        assert_eq!(parse_round_year("2011").unwrap(), 2011);
        assert!(parse_round_year("2005").is_err());
        assert!(parse_round_year("x").is_err());
        assert_eq!(ModelKind::parse("nightlight").unwrap(), ModelKind::Nightlight);
        assert!(ModelKind::parse("night").is_err());
    }
}
