use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, SeedTag};
use super::scenes::open_scene_source;
use super::{create_dir, parse_round_year, ModelKind, OutputLayout};
use crate::compositing::{build_composite, CompositeConfig};
use crate::container::{read_raster, write_raster, Checkpoint};
use crate::error::{Error, Result};
use crate::evaluation::{write_reports, Level, OutcomeReport};
use crate::model::{
    embed_batch, predict_batch, sample_nightlight, train, write_history, Dataset, ModelParams, NightlightGrid,
};
use crate::raster::{compute_band_stats, normalize, BandStats, RasterGrid};
use crate::store::DataLayout;
use crate::synth::ROUND_YEARS;
use crate::tabular::{
    build_asset_vector, build_tehsil_vectors, load_health_vectors, read_asset_vectors, read_census_rows,
    read_demographics, read_tehsil_tables, read_village_manifest, write_asset_vectors, CensusYear,
    SurveyRound, TehsilVector10, VillageRecord, ASSET_NAMES, DEMOGRAPHIC_NAMES, HEALTH_FACTORS,
    HEALTH_FACTOR_DESCRIPTIONS, TEHSIL_NAMES, TEHSIL_TO_ASSET,
};
use crate::temporal::{tehsil_aggregate, temporal_eval, TemporalInputs, TemporalReport};
use crate::transfer::{
    district_embeddings, double_transfer, factor_rows, fit_single_layer_head, fit_survey_head, write_factor_report,
    FactorRow, HeadFit, HeadModel,
};

/// Tiles are streamed through the network in groups of this many.
const EMBED_CHUNK: usize = 128;

/// The census round whose tables train the models.
const TRAIN_YEAR: i32 = 2011;

fn villages(cfg: &PipelineConfig) -> Result<Vec<VillageRecord>> {
    read_village_manifest(&DataLayout::new(&cfg.data).villages())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeSummary {
    pub year: i32,
    pub villages: usize,
    pub total_gaps: usize,
    pub mean_gap_fraction: f64,
    pub scene_source: String,
}

/// Composites every village of the manifest for one census round.
pub fn composite(cfg: &PipelineConfig, year: i32) -> Result<CompositeSummary> {
    cfg.validate()?;
    let year = parse_round_year(&year.to_string())?;
    let layout = DataLayout::new(&cfg.data);
    let out = OutputLayout::new(&cfg.out);
    let villages = villages(cfg)?;
    let source = open_scene_source(&layout, &villages)?;
    create_dir(&out.composite_dir(year))?;
    let config = CompositeConfig {
        cloud_threshold: cfg.cloud_threshold,
    };
    let rows: Vec<(f64, usize)> = (0..villages.len())
        .into_par_iter()
        .map(|i| {
            let v = &villages[i];
            let tile = build_composite(&v.footprint(), year, &source.scenes(i, year)?, &[], &config)?;
            write_raster(&out.composite_tile(year, &v.village_id), &tile.grid, None)?;
            tile.write_fill_report(&out.fill_report(year, &v.village_id))?;
            Ok((tile.gap_fraction, tile.sources.len()))
        })
        .collect::<Result<_>>()?;

    let path = out.composite_summary(year);
    let mut w = crate::tabular::csv_writer(&path)?;
    w.write_record(["village_id", "gap_fraction", "n_sources"])?;
    for (v, (gap, n)) in villages.iter().zip(&rows) {
        w.write_record([v.village_id.clone(), gap.to_string(), n.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let summary = CompositeSummary {
        year,
        villages: villages.len(),
        total_gaps: rows.iter().filter(|r| r.0 >= 1.0).count(),
        mean_gap_fraction: rows.iter().map(|r| r.0).sum::<f64>() / rows.len().max(1) as f64,
        scene_source: source.describe().to_string(),
    };
    log::info!(
        "stage=composite year={year} villages={} total_gaps={} mean_gap={:.4} scenes={}",
        summary.villages,
        summary.total_gaps,
        summary.mean_gap_fraction,
        summary.scene_source
    );
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSummary {
    pub villages: usize,
    pub rejected_villages: Vec<String>,
    pub tehsils: BTreeMap<i32, usize>,
}

fn write_tehsil_vectors(path: &Path, rows: &BTreeMap<String, TehsilVector10>) -> Result<()> {
    let mut w = crate::tabular::csv_writer(path)?;
    let mut header = vec!["tehsil_id".to_string()];
    header.extend(TEHSIL_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for (id, v) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(v.values.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_tehsil_vectors(path: &Path, year: i32) -> Result<BTreeMap<String, TehsilVector10>> {
    let year = CensusYear::from_year(year)?;
    let mut rdr = crate::tabular::csv_reader(path)?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 11 {
            return Err(Error::format(path, format!("tehsil rows need 11 columns, got {}", rec.len())));
        }
        let mut values = [0.0; 10];
        for (k, slot) in values.iter_mut().enumerate() {
            *slot = rec[k + 1]
                .parse()
                .map_err(|_| Error::format(path, format!("bad value '{}'", &rec[k + 1])))?;
        }
        out.insert(rec[0].to_string(), TehsilVector10 { year, values });
    }
    Ok(out)
}

/// Village asset vectors from the 2011 village census and tehsil vectors
/// for both rounds.
pub fn build_assets(cfg: &PipelineConfig) -> Result<AssetSummary> {
    let layout = DataLayout::new(&cfg.data);
    let out = OutputLayout::new(&cfg.out);
    create_dir(&out.assets_dir())?;
    let mut assets = BTreeMap::new();
    let mut rejected = Vec::new();
    for (id, row) in read_census_rows(&layout.village_census())? {
        match build_asset_vector(&row) {
            Ok(v) => {
                assets.insert(id, v);
            }
            Err(Error::Input(msg)) | Err(Error::Schema(msg)) => {
                log::warn!("village {id} excluded: {msg}");
                rejected.push(id);
            }
            Err(e) => return Err(e),
        }
    }
    write_asset_vectors(&out.assets(), &assets)?;
    let mut tehsils = BTreeMap::new();
    for year in ROUND_YEARS {
        let y = CensusYear::from_year(year)?;
        let vectors = build_tehsil_vectors(&read_tehsil_tables(&layout.tehsil_dir(y), y)?, y)?;
        write_tehsil_vectors(&out.tehsil_vectors(year), &vectors)?;
        tehsils.insert(year, vectors.len());
    }
    log::info!(
        "stage=build-assets villages={} rejected={} tehsils_2001={} tehsils_2011={}",
        assets.len(),
        rejected.len(),
        tehsils[&2001],
        tehsils[&2011]
    );
    Ok(AssetSummary {
        villages: assets.len(),
        rejected_villages: rejected,
        tehsils,
    })
}

/// Header metadata stored with a trained tile model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub kind: ModelKind,
    pub year: i32,
    pub outcomes: Vec<String>,
    pub band_stats: BandStats,
    pub best_epoch: usize,
    pub n_train: usize,
    pub n_val: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub kind: ModelKind,
    pub n_train: usize,
    pub n_val: usize,
    pub best_epoch: usize,
    pub epochs: usize,
    pub best_val_mse: f64,
    pub mean_predictor_mse: f64,
    pub reports: Vec<OutcomeReport>,
}

/// Reads composites of `ids` for a year, dropping total-gap tiles.
fn read_tiles(out: &OutputLayout, year: i32, ids: &[String]) -> Result<(Vec<String>, Vec<RasterGrid>)> {
    let grids: Vec<RasterGrid> = ids
        .par_iter()
        .map(|id| read_raster(&out.composite_tile(year, id)))
        .collect::<Result<_>>()?;
    let (mut kept_ids, mut kept) = (Vec::new(), Vec::new());
    for (id, g) in ids.iter().zip(grids) {
        if g.valid_count() == 0 {
            log::warn!("{id} {year}: total-gap tile skipped");
        } else {
            kept_ids.push(id.clone());
            kept.push(g);
        }
    }
    Ok((kept_ids, kept))
}

fn normalized(grids: Vec<RasterGrid>, stats: &BandStats) -> Result<Vec<Vec<f32>>> {
    grids
        .into_par_iter()
        .map(|g| Ok(normalize(&g, stats)?.into_pixels()))
        .collect()
}

fn fit_tile_model(
    cfg: &PipelineConfig,
    kind: ModelKind,
    targets: &BTreeMap<String, Vec<f64>>,
    outcomes: &[&str],
    villages: &[VillageRecord],
) -> Result<TrainSummary> {
    let out = OutputLayout::new(&cfg.out);
    let ids: Vec<String> = villages
        .iter()
        .filter(|v| targets.contains_key(&v.village_id))
        .map(|v| v.village_id.clone())
        .collect();
    let (ids, grids) = read_tiles(&out, TRAIN_YEAR, &ids)?;
    if ids.len() < 2 {
        return Err(Error::input(format!("only {} usable tiles for the {} model", ids.len(), kind.name())));
    }
    let stats = compute_band_stats(&grids)?;
    let inputs = normalized(grids, &stats)?;
    let district: BTreeMap<&str, &str> =
        villages.iter().map(|v| (v.village_id.as_str(), v.district_id.as_str())).collect();
    let data = Dataset {
        inputs: inputs.iter().map(Vec::as_slice).collect(),
        targets: ids.iter().map(|id| targets[id].clone()).collect(),
        strata: ids.iter().map(|id| district[id.as_str()].to_string()).collect(),
    };
    let (init_tag, train_tag, optimizer) = match kind {
        ModelKind::Asset => (SeedTag::AssetInit, SeedTag::AssetTrain, &cfg.train),
        ModelKind::Nightlight => (SeedTag::NightlightInit, SeedTag::NightlightTrain, &cfg.nightlight),
    };
    let config = cfg.network.config(outcomes.len(), cfg.seed_for(init_tag)?);
    let spec = optimizer.spec(cfg.seed_for(train_tag)?);
    log::info!(
        "stage=train model={} villages={} districts={} epochs<={}",
        kind.name(),
        ids.len(),
        district.values().collect::<std::collections::BTreeSet<_>>().len(),
        spec.max_epochs
    );
    let outcome = train(&data, &spec, ModelParams::<f32>::init(&config)?)?;

    let val_inputs: Vec<&[f32]> = outcome.val_indices.iter().map(|&i| data.inputs[i]).collect();
    let preds = predict_batch(&outcome.params, &val_inputs)?;
    let reports = outcomes
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let p: Vec<f64> = preds.iter().map(|p| p[k]).collect();
            let t: Vec<f64> = outcome.val_indices.iter().map(|&i| data.targets[i][k]).collect();
            OutcomeReport::evaluate(*name, *name, &p, &t, Level::Village, kind.name())
        })
        .collect::<Result<Vec<_>>>()?;

    let meta = ModelMeta {
        kind,
        year: TRAIN_YEAR,
        outcomes: outcomes.iter().map(|s| s.to_string()).collect(),
        band_stats: stats,
        best_epoch: outcome.best_epoch,
        n_train: outcome.train_indices.len(),
        n_val: outcome.val_indices.len(),
    };
    create_dir(&out.models_dir())?;
    outcome
        .params
        .to_checkpoint(serde_json::to_value(&meta)?)
        .write(&out.model(kind))?;
    write_history(&out.model_history(kind), &outcome.history)?;
    write_reports(&out.model_r2(kind), &reports)?;

    let summary = TrainSummary {
        kind,
        n_train: meta.n_train,
        n_val: meta.n_val,
        best_epoch: outcome.best_epoch,
        epochs: outcome.history.len(),
        best_val_mse: outcome.best_val_mse(),
        mean_predictor_mse: outcome.mean_predictor_mse,
        reports,
    };
    log::info!(
        "stage=train model={} best_epoch={} val_mse={:.6} mean_predictor_mse={:.6} mean_r2={}",
        kind.name(),
        summary.best_epoch,
        summary.best_val_mse,
        summary.mean_predictor_mse,
        crate::evaluation::format_r2(crate::evaluation::mean_r2(&summary.reports))
    );
    Ok(summary)
}

/// Trains the direct asset model on 2011 composites and asset vectors.
pub fn train_asset_model(cfg: &PipelineConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let out = OutputLayout::new(&cfg.out);
    let targets: BTreeMap<String, Vec<f64>> = read_asset_vectors(&out.assets())?
        .into_iter()
        .map(|(id, v)| (id, v.0.to_vec()))
        .collect();
    fit_tile_model(cfg, ModelKind::Asset, &targets, &ASSET_NAMES, &villages(cfg)?)
}

/// Trains the nightlight baseline on 2011 composites and sampled nightlight.
pub fn train_nightlight_model(cfg: &PipelineConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let layout = DataLayout::new(&cfg.data);
    let grid = NightlightGrid::from_raster(&read_raster(&layout.nightlight())?)?;
    let villages = villages(cfg)?;
    let mut targets = BTreeMap::new();
    for v in &villages {
        match sample_nightlight(&grid, v.centroid()) {
            Ok(nl) => {
                targets.insert(v.village_id.clone(), vec![nl]);
            }
            Err(Error::Coverage(msg)) => log::warn!("village {} excluded: {msg}", v.village_id),
            Err(e) => return Err(e),
        }
    }
    fit_tile_model(cfg, ModelKind::Nightlight, &targets, &["nightlight"], &villages)
}

fn load_model(out: &OutputLayout, kind: ModelKind) -> Result<(ModelParams<f32>, ModelMeta)> {
    let path = out.model(kind);
    let (params, extra) = ModelParams::<f32>::from_checkpoint(&Checkpoint::read(&path)?)?;
    let meta: ModelMeta =
        serde_json::from_value(extra).map_err(|e| Error::format(&path, format!("model metadata: {e}")))?;
    if meta.kind != kind {
        return Err(Error::format(&path, format!("holds a {} model", meta.kind.name())));
    }
    Ok((params, meta))
}

/// Runs `f` over normalized tiles of `ids` in chunks and collects one row per usable tile.
fn map_tiles<T: Send>(
    out: &OutputLayout,
    year: i32,
    ids: &[String],
    stats: &BandStats,
    f: impl Fn(&[&[f32]]) -> Result<Vec<T>>,
) -> Result<BTreeMap<String, T>> {
    let mut result = BTreeMap::new();
    for chunk in ids.chunks(EMBED_CHUNK) {
        let (kept, grids) = read_tiles(out, year, chunk)?;
        let inputs = normalized(grids, stats)?;
        let refs: Vec<&[f32]> = inputs.iter().map(Vec::as_slice).collect();
        result.extend(kept.into_iter().zip(f(&refs)?));
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSummary {
    pub path: ModelKind,
    pub villages: usize,
    pub districts: usize,
    /// Assets regressed on nightlight features; empty on the asset path.
    pub assets: Vec<OutcomeReport>,
    pub demographics: Vec<OutcomeReport>,
    pub nfhs4: Vec<FactorRow>,
    pub nfhs5: Vec<FactorRow>,
}

fn head_reports(
    fit: &HeadFit,
    features: &[Vec<f64>],
    targets: &[Vec<f64>],
    names: &[&str],
    path: ModelKind,
) -> Result<Vec<OutcomeReport>> {
    let preds = fit
        .val_indices
        .iter()
        .map(|&i| fit.head.predict(&features[i]))
        .collect::<Result<Vec<_>>>()?;
    names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let p: Vec<f64> = preds.iter().map(|p| p[k]).collect();
            let t: Vec<f64> = fit.val_indices.iter().map(|&i| targets[i][k]).collect();
            OutcomeReport::evaluate(*name, *name, &p, &t, Level::Village, path.name())
        })
        .collect()
}

/// Village rows with both an embedding and a target, in manifest order.
fn joined<'a, T>(
    villages: &'a [VillageRecord],
    embeddings: &BTreeMap<String, Vec<f64>>,
    targets: &BTreeMap<String, T>,
) -> Vec<&'a VillageRecord> {
    villages
        .iter()
        .filter(|v| embeddings.contains_key(&v.village_id) && targets.contains_key(&v.village_id))
        .collect()
}

/// Transfers one model's 2011 tile embeddings to village demographics and
/// to district survey factors (NFHS-4, then NFHS-5 by double transfer). On
/// the nightlight path it also regresses the asset vectors.
pub fn transfer(cfg: &PipelineConfig, path: ModelKind) -> Result<TransferSummary> {
    cfg.validate()?;
    let layout = DataLayout::new(&cfg.data);
    let out = OutputLayout::new(&cfg.out);
    let villages = villages(cfg)?;
    let (params, meta) = load_model(&out, path)?;
    let ids: Vec<String> = villages.iter().map(|v| v.village_id.clone()).collect();
    let embeddings: BTreeMap<String, Vec<f64>> =
        map_tiles(&out, TRAIN_YEAR, &ids, &meta.band_stats, |tiles| embed_batch(&params, tiles))?;
    let dir = out.transfer_dir(path);
    create_dir(&dir.join("heads"))?;

    let mut assets_reports = Vec::new();
    if path == ModelKind::Nightlight {
        let assets = read_asset_vectors(&out.assets())?;
        let rows = joined(&villages, &embeddings, &assets);
        let features: Vec<Vec<f64>> = rows.iter().map(|v| embeddings[&v.village_id].clone()).collect();
        let targets: Vec<Vec<f64>> = rows.iter().map(|v| assets[&v.village_id].0.to_vec()).collect();
        let strata: Vec<String> = rows.iter().map(|v| v.district_id.clone()).collect();
        let fit = fit_single_layer_head(&features, &targets, &strata, &cfg.heads.spec(cfg.seed_for(SeedTag::AssetHead)?))?;
        assets_reports = head_reports(&fit, &features, &targets, &ASSET_NAMES, path)?;
        write_reports(&dir.join("assets_r2.csv"), &assets_reports)?;
        fit.head.to_checkpoint().write(&out.head(path, "assets"))?;
    }

    let demographics = read_demographics(&layout.demographics())?;
    let rows = joined(&villages, &embeddings, &demographics);
    let features: Vec<Vec<f64>> = rows.iter().map(|v| embeddings[&v.village_id].clone()).collect();
    let targets: Vec<Vec<f64>> = rows.iter().map(|v| demographics[&v.village_id].to_array().to_vec()).collect();
    let strata: Vec<String> = rows.iter().map(|v| v.district_id.clone()).collect();
    let fit = fit_single_layer_head(
        &features,
        &targets,
        &strata,
        &cfg.heads.spec(cfg.seed_for(SeedTag::DemographicHead)?),
    )?;
    let demographic_reports = head_reports(&fit, &features, &targets, &DEMOGRAPHIC_NAMES, path)?;
    write_reports(&dir.join("demographics_r2.csv"), &demographic_reports)?;
    fit.head.to_checkpoint().write(&out.head(path, "demographics"))?;

    let districts = district_embeddings(&embeddings, &villages)?;
    let features: Vec<Vec<f64>> = districts.iter().map(|d| d.embedding.clone()).collect();
    let factor_ids: Vec<String> = (1..=HEALTH_FACTORS).map(|f| format!("factor-{f}")).collect();
    let descriptions: Vec<String> = HEALTH_FACTOR_DESCRIPTIONS.iter().map(|s| s.to_string()).collect();
    let survey_targets = |round: SurveyRound| -> Result<Vec<Vec<Option<f64>>>> {
        let load = load_health_vectors(&layout.survey(round), round)?;
        if !load.rejected_rows.is_empty() {
            log::warn!("{}: {} rows rejected", round.label(), load.rejected_rows.len());
        }
        Ok(districts
            .iter()
            .map(|d| {
                load.vectors
                    .get(&d.district_id)
                    .map(|h| h.values.clone())
                    .unwrap_or_else(|| vec![None; HEALTH_FACTORS])
            })
            .collect())
    };
    let survey_spec = cfg.survey.spec(cfg.seed_for(SeedTag::SurveyHead)?);
    let first = fit_survey_head(&features, &survey_targets(SurveyRound::Nfhs4)?, &survey_spec)?;
    let nfhs4 = factor_rows(&first, &factor_ids, &descriptions, path.name());
    write_factor_report(&dir.join("nfhs4.csv"), &nfhs4)?;
    first.head.to_checkpoint().write(&out.head(path, "nfhs4"))?;
    let second = double_transfer(&first.head, &features, &survey_targets(SurveyRound::Nfhs5)?, &survey_spec)?;
    let nfhs5 = factor_rows(&second, &factor_ids, &descriptions, path.name());
    write_factor_report(&dir.join("nfhs5.csv"), &nfhs5)?;
    second.head.to_checkpoint().write(&out.head(path, "nfhs5"))?;

    let summary = TransferSummary {
        path,
        villages: embeddings.len(),
        districts: districts.len(),
        assets: assets_reports,
        demographics: demographic_reports,
        nfhs4,
        nfhs5,
    };
    let positive = |rows: &[FactorRow]| rows.iter().filter(|r| r.r2.is_some_and(|v| v > 0.0)).count();
    log::info!(
        "stage=transfer path={} villages={} districts={} demographics_mean_r2={} nfhs4_positive={} nfhs5_positive={}",
        path.name(),
        summary.villages,
        summary.districts,
        crate::evaluation::format_r2(crate::evaluation::mean_r2(&summary.demographics)),
        positive(&summary.nfhs4),
        positive(&summary.nfhs5)
    );
    Ok(summary)
}

/// Predicts the 2001 tiles with a 2011 model, aggregates to tehsils and
/// scores every configured alignment transform.
pub fn temporal(cfg: &PipelineConfig, path: ModelKind) -> Result<TemporalReport> {
    cfg.validate()?;
    let out = OutputLayout::new(&cfg.out);
    let villages = villages(cfg)?;
    let ids: Vec<String> = villages.iter().map(|v| v.village_id.clone()).collect();
    let early = ROUND_YEARS[0];
    let (params, meta) = load_model(&out, path)?;
    let assets: BTreeMap<String, Vec<f64>> = match path {
        ModelKind::Asset => map_tiles(&out, early, &ids, &meta.band_stats, |t| predict_batch(&params, t))?,
        ModelKind::Nightlight => {
            let head = HeadModel::from_checkpoint(&Checkpoint::read(&out.head(path, "assets"))?)?;
            map_tiles(&out, early, &ids, &meta.band_stats, |t| {
                embed_batch(&params, t)?.iter().map(|e| head.predict(e)).collect()
            })?
        }
    };
    if assets.values().any(|v| v.len() != ASSET_NAMES.len()) {
        return Err(Error::schema("asset predictions must have 16 outcomes"));
    }
    let village_preds: BTreeMap<String, Vec<f64>> = assets
        .into_iter()
        .map(|(id, v)| (id, TEHSIL_TO_ASSET.iter().map(|&k| v[k]).collect()))
        .collect();
    let tehsils = tehsil_aggregate(&village_preds, &villages)?;
    let predictions: BTreeMap<String, Vec<f64>> =
        tehsils.iter().map(|t| (t.tehsil_id.clone(), t.prediction.clone())).collect();
    let truth_early = read_tehsil_vectors(&out.tehsil_vectors(early), early)?;
    let truth_late = read_tehsil_vectors(&out.tehsil_vectors(TRAIN_YEAR), TRAIN_YEAR)?;
    let report = temporal_eval(
        &TemporalInputs {
            predictions: &predictions,
            truth_early: &truth_early,
            truth_late: &truth_late,
        },
        &cfg.transforms,
        cfg.temporal_train_fraction,
        cfg.seed_for(SeedTag::Temporal)?,
    )?;

    let dir = out.temporal_dir(path);
    create_dir(&dir.join("transforms"))?;
    report.write_csv(&dir.join("temporal.csv"))?;
    for t in &report.transforms {
        t.to_checkpoint().write(&dir.join("transforms").join(format!("{}.eock", t.kind().name())))?;
    }
    let tp = dir.join("tehsil_predictions.csv");
    let mut w = crate::tabular::csv_writer(&tp)?;
    let mut header = vec!["tehsil_id".to_string(), "n_villages".into(), "population".into()];
    header.extend(TEHSIL_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for t in &tehsils {
        let mut rec = vec![t.tehsil_id.clone(), t.n_villages.to_string(), t.population.to_string()];
        rec.extend(t.prediction.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&tp, e))?;

    log::info!(
        "stage=temporal-eval path={} tehsils={} train={} test={}",
        path.name(),
        tehsils.len(),
        report.train_tehsils.len(),
        report.test_tehsils.len()
    );
    Ok(report)
}

fn read_wide(path: &Path) -> Result<(Vec<String>, BTreeMap<String, Vec<Option<f64>>>)> {
    let mut rdr = crate::tabular::csv_reader(path)?;
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::format(path, "expected an id column and at least one outcome column"));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let values = rec
            .iter()
            .skip(1)
            .map(|s| match s.trim() {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| Error::format(path, format!("bad value '{s}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.insert(rec[0].to_string(), values).is_some() {
            return Err(Error::format(path, format!("duplicate id '{}'", &rec[0])));
        }
    }
    Ok((names, rows))
}

/// Scores every outcome column of `truth` against the same column of `pred`,
/// joined on the first (id) column. Empty cells are skipped pairwise.
pub fn evaluate_tables(pred: &Path, truth: &Path, level: Level, path: &str) -> Result<Vec<OutcomeReport>> {
    let (pred_names, pred_rows) = read_wide(pred)?;
    let (truth_names, truth_rows) = read_wide(truth)?;
    let mut reports = Vec::with_capacity(truth_names.len());
    for (k, name) in truth_names.iter().enumerate() {
        let j = pred_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::schema(format!("prediction table has no column '{name}'")))?;
        let (p, t): (Vec<f64>, Vec<f64>) = truth_rows
            .iter()
            .filter_map(|(id, tv)| Some((pred_rows.get(id)?[j]?, tv[k]?)))
            .unzip();
        if t.len() < 2 {
            reports.push(OutcomeReport {
                outcome: name.clone(),
                description: name.clone(),
                r2: None,
                n: t.len(),
                level,
                path: path.to_string(),
            });
            continue;
        }
        reports.push(OutcomeReport::evaluate(name, name, &p, &t, level, path)?);
    }
    log::info!(
        "stage=evaluate outcomes={} rows={}",
        reports.len(),
        truth_rows.keys().filter(|id| pred_rows.contains_key(*id)).count()
    );
    Ok(reports)
}
