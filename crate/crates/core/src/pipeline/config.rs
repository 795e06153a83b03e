use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConvRegressorConfig, TrainSpec};
use crate::raster::TILE_PX;
use crate::synth::mix;
use crate::temporal::TransformKind;

/// Architecture knobs of the tile regressor. Input geometry is fixed by the
/// composite tiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkShape {
    pub stem_kernel: usize,
    pub block_widths: Vec<usize>,
    pub blocks_per_stage: usize,
    pub embedding_dim: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        let c = ConvRegressorConfig::standard(1, 0);
        NetworkShape {
            stem_kernel: c.stem_kernel,
            block_widths: c.block_widths,
            blocks_per_stage: c.blocks_per_stage,
            embedding_dim: c.embedding_dim,
        }
    }
}

impl NetworkShape {
    pub fn config(&self, output_dim: usize, seed: u64) -> ConvRegressorConfig {
        ConvRegressorConfig {
            input_size: TILE_PX,
            input_channels: 3,
            stem_kernel: self.stem_kernel,
            block_widths: self.block_widths.clone(),
            blocks_per_stage: self.blocks_per_stage,
            embedding_dim: self.embedding_dim,
            output_dim,
            seed,
        }
    }
}

/// Optimizer settings of one training stage. The seed comes from the
/// pipeline seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Optimizer {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub train_fraction: f64,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for Optimizer {
    fn default() -> Self {
        let t = TrainSpec::default();
        Optimizer {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            train_fraction: t.train_fraction,
            max_epochs: t.max_epochs,
            patience: t.patience,
        }
    }
}

impl Optimizer {
    pub fn spec(&self, seed: u64) -> TrainSpec {
        TrainSpec {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            train_fraction: self.train_fraction,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed,
            ..TrainSpec::default()
        }
    }

    fn heads() -> Self {
        Optimizer {
            max_epochs: 300,
            patience: 20,
            ..Optimizer::default()
        }
    }

    fn survey() -> Self {
        Optimizer {
            learning_rate: 3e-3,
            batch_size: 16,
            max_epochs: 400,
            patience: 40,
            ..Optimizer::default()
        }
    }
}

/// Settings shared by every subcommand, read from a JSON file. Missing keys
/// take their defaults; command-line flags override both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Dataset directory as written by `synth-gen`.
    pub data: PathBuf,
    /// Working directory for every derived artifact.
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    /// World spec used by `synth-gen`.
    pub world_spec: Option<PathBuf>,
    pub cloud_threshold: f64,
    pub network: NetworkShape,
    pub train: Optimizer,
    pub nightlight: Optimizer,
    pub heads: Optimizer,
    pub survey: Optimizer,
    pub transforms: Vec<TransformKind>,
    pub temporal_train_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data: PathBuf::from("data"),
            out: PathBuf::from("out"),
            seed: None,
            threads: None,
            world_spec: None,
            cloud_threshold: crate::compositing::DEFAULT_CLOUD_THRESHOLD,
            network: NetworkShape::default(),
            train: Optimizer::default(),
            nightlight: Optimizer::default(),
            heads: Optimizer::heads(),
            survey: Optimizer::survey(),
            transforms: TransformKind::ALL.to_vec(),
            temporal_train_fraction: 0.5,
        }
    }
}

/// Purposes that receive their own seed derived from the pipeline seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedTag {
    AssetInit = 1,
    AssetTrain,
    NightlightInit,
    NightlightTrain,
    AssetHead,
    DemographicHead,
    SurveyHead,
    Temporal,
}

impl PipelineConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::input(format!("{}: {e}", path.display())))
    }

    pub fn master_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::input("a seed is required: set \"seed\" in the config or pass --seed"))
    }

    pub fn seed_for(&self, tag: SeedTag) -> Result<u64> {
        Ok(mix(self.master_seed()? ^ mix(tag as u64)))
    }

    pub fn validate(&self) -> Result<()> {
        self.master_seed()?;
        if self.threads == Some(0) {
            return Err(Error::input("--threads must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.cloud_threshold) {
            return Err(Error::input(format!("cloud_threshold {} outside [0, 1]", self.cloud_threshold)));
        }
        for opt in [&self.train, &self.nightlight, &self.heads, &self.survey] {
            opt.spec(0).validate()?;
        }
        self.network.config(1, 0).validate()?;
        if self.transforms.is_empty() {
            return Err(Error::input("at least one transform must be evaluated"));
        }
        if !(self.temporal_train_fraction > 0.0 && self.temporal_train_fraction < 1.0) {
            return Err(Error::input("temporal_train_fraction must lie strictly between 0 and 1"));
        }
        Ok(())
    }
}
