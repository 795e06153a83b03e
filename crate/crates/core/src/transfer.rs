//! Transfer heads on frozen embeddings: district aggregation, the asset
//! head, the two-layer survey head and double transfer between survey rounds.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::container::{Checkpoint, NamedArray};
use crate::error::{Error, Result};
use crate::evaluation::{format_r2, r_squared};
use crate::model::train::Adam;
use crate::model::{stratified_split, EpochRecord, TrainSpec};
use crate::tabular::VillageRecord;
use crate::temporal::weighted_group_mean;

pub const SURVEY_HIDDEN: usize = 64;
pub const MIN_SURVEY_DISTRICTS: usize = 20;
pub const SURVEY_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistrictEmbedding {
    pub district_id: String,
    pub embedding: Vec<f64>,
    pub total_population: f64,
}

/// Population-weighted mean of village embeddings.
pub fn district_embed(district_id: &str, villages: &[(&[f64], f64)]) -> Result<DistrictEmbedding> {
    if villages.is_empty() {
        return Err(Error::input(format!("district {district_id} has no villages")));
    }
    let items: Vec<(String, f64, &[f64])> = villages.iter().map(|(e, p)| (String::new(), *p, *e)).collect();
    let (embedding, _, total_population) = weighted_group_mean(&items)?.remove("").expect("one group");
    Ok(DistrictEmbedding {
        district_id: district_id.to_string(),
        embedding,
        total_population,
    })
}

/// District embeddings for every district with at least one embedded village, ordered by id.
pub fn district_embeddings(
    embeddings: &BTreeMap<String, Vec<f64>>,
    records: &[VillageRecord],
) -> Result<Vec<DistrictEmbedding>> {
    let items: Vec<(String, f64, &[f64])> = records
        .iter()
        .filter_map(|r| embeddings.get(&r.village_id).map(|e| (r.district_id.clone(), r.population, e.as_slice())))
        .collect();
    Ok(weighted_group_mean(&items)?
        .into_iter()
        .map(|(district_id, (embedding, _, total_population))| DistrictEmbedding {
            district_id,
            embedding,
            total_population,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    SingleLayer,
    TwoLayer,
}

/// Dense head over standardized features. The single-layer head is
/// `ReLU(W x + b)` in target units; the two-layer head is
/// `W2 ReLU(W1 x + b1) + b2` in standardized target units, rescaled on output.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadModel {
    pub kind: HeadKind,
    pub input_dim: usize,
    pub hidden: usize,
    pub output_dim: usize,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_std: Vec<f64>,
    /// Flat parameters: W1 (input × first), b1, then W2 (hidden × output), b2 for two layers.
    pub params: Vec<f64>,
}

impl HeadModel {
    fn first_width(&self) -> usize {
        match self.kind {
            HeadKind::SingleLayer => self.output_dim,
            HeadKind::TwoLayer => self.hidden,
        }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.input_dim * self.first_width();
        let w2 = b1 + self.first_width();
        (b1, w2, w2 + self.hidden * self.output_dim)
    }

    pub fn layer1(&self) -> (&[f64], &[f64]) {
        let (b1, w2, _) = self.offsets();
        (&self.params[..b1], &self.params[b1..w2])
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// Output in training units together with the intermediate activations.
    fn forward_std(&self, xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (b1, w2, b2) = self.offsets();
        let width = self.first_width();
        let mut a = self.params[b1..w2].to_vec();
        for (x, row) in xs.iter().zip(self.params[..b1].chunks_exact(width)) {
            for (acc, w) in a.iter_mut().zip(row) {
                *acc += w * x;
            }
        }
        match self.kind {
            HeadKind::SingleLayer => {
                let y = a.iter().map(|v| v.max(0.0)).collect();
                (a, y)
            }
            HeadKind::TwoLayer => {
                let h: Vec<f64> = a.iter().map(|v| v.max(0.0)).collect();
                let mut y = self.params[b2..].to_vec();
                for (hv, row) in h.iter().zip(self.params[w2..b2].chunks_exact(self.output_dim)) {
                    for (acc, w) in y.iter_mut().zip(row) {
                        *acc += w * hv;
                    }
                }
                (a, y)
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::schema(format!("feature vector of length {}, head expects {}", x.len(), self.input_dim)));
        }
        let (_, y) = self.forward_std(&self.standardize(x));
        Ok(y.iter()
            .zip(&self.target_mean)
            .zip(&self.target_std)
            .map(|((v, m), s)| v * s + m)
            .collect())
    }

    /// Adds the gradient of a masked squared error (divided by `norm`) and returns the loss contribution.
    fn accumulate(&self, xs: &[f64], target: &[Option<f64>], norm: f64, grad: &mut [f64]) -> f64 {
        let (b1, w2, b2) = self.offsets();
        let width = self.first_width();
        let (a, y) = self.forward_std(xs);
        let mut loss = 0.0;
        let dy: Vec<f64> = y
            .iter()
            .zip(target)
            .map(|(p, t)| match t {
                Some(t) => {
                    loss += (p - t) * (p - t) / norm;
                    2.0 * (p - t) / norm
                }
                None => 0.0,
            })
            .collect();
        let da: Vec<f64> = match self.kind {
            HeadKind::SingleLayer => dy.iter().zip(&a).map(|(d, z)| if *z > 0.0 { *d } else { 0.0 }).collect(),
            HeadKind::TwoLayer => {
                let o = self.output_dim;
                let mut dh = vec![0.0; self.hidden];
                for (k, av) in a.iter().enumerate() {
                    let h = av.max(0.0);
                    for j in 0..o {
                        grad[w2 + k * o + j] += h * dy[j];
                        dh[k] += self.params[w2 + k * o + j] * dy[j];
                    }
                }
                for j in 0..o {
                    grad[b2 + j] += dy[j];
                }
                dh.iter().zip(&a).map(|(d, z)| if *z > 0.0 { *d } else { 0.0 }).collect()
            }
        };
        for (i, x) in xs.iter().enumerate() {
            for (k, d) in da.iter().enumerate() {
                grad[i * width + k] += x * d;
            }
        }
        for (k, d) in da.iter().enumerate() {
            grad[b1 + k] += d;
        }
        loss
    }

    fn loss(&self, xs: &[Vec<f64>], ys: &[Vec<Option<f64>>], idx: &[usize]) -> f64 {
        let (mut total, mut count) = (0.0, 0usize);
        for &i in idx {
            let (_, y) = self.forward_std(&xs[i]);
            for (p, t) in y.iter().zip(&ys[i]) {
                if let Some(t) = t {
                    total += (p - t) * (p - t);
                    count += 1;
                }
            }
        }
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let f = |v: &[f64]| v.iter().map(|x| *x as f32).collect::<Vec<f32>>();
        let header = serde_json::json!({
            "kind": self.kind,
            "input_dim": self.input_dim,
            "hidden": self.hidden,
            "output_dim": self.output_dim,
        });
        Checkpoint {
            header: header.to_string(),
            arrays: vec![
                NamedArray::new("feature_mean", vec![self.input_dim], f(&self.feature_mean)),
                NamedArray::new("feature_std", vec![self.input_dim], f(&self.feature_std)),
                NamedArray::new("target_mean", vec![self.output_dim], f(&self.target_mean)),
                NamedArray::new("target_std", vec![self.output_dim], f(&self.target_std)),
                NamedArray::new("params", vec![self.params.len()], f(&self.params)),
            ],
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let h: serde_json::Value = serde_json::from_str(&ck.header)?;
        let dim = |k: &str| h[k].as_u64().map(|v| v as usize).ok_or_else(|| Error::schema(format!("head header lacks {k}")));
        let get = |n: &str| -> Result<Vec<f64>> { Ok(ck.require(n)?.data.iter().map(|v| f64::from(*v)).collect()) };
        let head = HeadModel {
            kind: serde_json::from_value(h["kind"].clone())?,
            input_dim: dim("input_dim")?,
            hidden: dim("hidden")?,
            output_dim: dim("output_dim")?,
            feature_mean: get("feature_mean")?,
            feature_std: get("feature_std")?,
            target_mean: get("target_mean")?,
            target_std: get("target_std")?,
            params: get("params")?,
        };
        if head.params.len() != head.offsets().2 + if head.kind == HeadKind::TwoLayer { head.output_dim } else { 0 } {
            return Err(Error::schema("head parameter count does not match its shape"));
        }
        Ok(head)
    }
}

fn column_scaling(rows: &[&[f64]], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len().max(1) as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    let std = var.into_iter().map(|v| if v.sqrt() < 1e-12 { 1.0 } else { v.sqrt() }).collect();
    (mean, std)
}

fn masked_scaling(targets: &[Vec<Option<f64>>], idx: &[usize], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; dim];
    let mut std = vec![1.0; dim];
    for d in 0..dim {
        let v: Vec<f64> = idx.iter().filter_map(|&i| targets[i][d]).collect();
        if v.is_empty() {
            continue;
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let s = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt();
        mean[d] = m;
        std[d] = if s < 1e-12 { 1.0 } else { s };
    }
    (mean, std)
}

fn new_head(kind: HeadKind, input_dim: usize, output_dim: usize, seed: u64) -> HeadModel {
    let hidden = if kind == HeadKind::TwoLayer { SURVEY_HIDDEN } else { 0 };
    let mut head = HeadModel {
        kind,
        input_dim,
        hidden,
        output_dim,
        feature_mean: vec![0.0; input_dim],
        feature_std: vec![1.0; input_dim],
        target_mean: vec![0.0; output_dim],
        target_std: vec![1.0; output_dim],
        params: Vec::new(),
    };
    let (b1, w2, b2) = head.offsets();
    let total = if kind == HeadKind::TwoLayer { b2 + output_dim } else { w2 };
    head.params = vec![0.0; total];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound1 = match kind {
        HeadKind::SingleLayer => 1.0 / (input_dim as f64).sqrt(),
        HeadKind::TwoLayer => (6.0 / input_dim as f64).sqrt(),
    };
    for v in &mut head.params[..b1] {
        *v = rng.random_range(-bound1..bound1);
    }
    if kind == HeadKind::TwoLayer {
        reinit_output(&mut head, output_dim, &mut rng);
    }
    head
}

fn reinit_output(head: &mut HeadModel, output_dim: usize, rng: &mut ChaCha8Rng) {
    head.output_dim = output_dim;
    head.target_mean = vec![0.0; output_dim];
    head.target_std = vec![1.0; output_dim];
    let (_, w2, b2) = head.offsets();
    head.params.truncate(w2);
    let bound = 1.0 / (head.hidden as f64).sqrt();
    head.params.extend((0..b2 - w2).map(|_| rng.random_range(-bound..bound)));
    head.params.extend(std::iter::repeat_n(0.0, output_dim));
}

#[derive(Debug, Clone)]
pub struct HeadFit {
    pub head: HeadModel,
    pub history: Vec<EpochRecord>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Mini-batch Adam on the masked squared error with early stopping on the
/// validation rows. `ys` are in the head's training units.
fn optimize(
    mut head: HeadModel,
    xs: &[Vec<f64>],
    ys: &[Vec<Option<f64>>],
    train_idx: &[usize],
    val_idx: &[usize],
    spec: &TrainSpec,
) -> Result<(HeadModel, Vec<EpochRecord>)> {
    let eval_idx = if val_idx.is_empty() { train_idx } else { val_idx };
    let mut adam = Adam::<f64>::new(head.params.len());
    let mut best = head.clone();
    let mut best_val = head.loss(xs, ys, eval_idx);
    let (mut since_best, mut history) = (0, Vec::new());
    for epoch in 1..=spec.max_epochs {
        let mut order = train_idx.to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add((epoch as u64).wrapping_mul(0x2545_f491_4f6c_dd1d))));
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(spec.batch_size).enumerate() {
            let present = batch.iter().map(|&i| ys[i].iter().flatten().count()).sum::<usize>().max(1) as f64;
            let mut grad = vec![0.0; head.params.len()];
            for &i in batch {
                epoch_loss += head.accumulate(&xs[i], &ys[i], present, &mut grad) * present;
            }
            if !grad.iter().all(|g| g.is_finite()) {
                return Err(Error::numerical(format!("non-finite head gradient in epoch {epoch}, batch {b}")));
            }
            adam.update(&mut head.params, &grad, spec);
        }
        let present_total = train_idx.iter().map(|&i| ys[i].iter().flatten().count()).sum::<usize>().max(1);
        let val = head.loss(xs, ys, eval_idx);
        history.push(EpochRecord {
            epoch,
            train_mse: epoch_loss / present_total as f64,
            val_mse: val,
        });
        if val < best_val {
            best_val = val;
            best = head.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= spec.patience {
                break;
            }
        }
    }
    Ok((best, history))
}

fn check_rows<T>(features: &[Vec<f64>], targets: &[T]) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::input("no feature rows"));
    }
    if features.len() != targets.len() {
        return Err(Error::schema(format!("{} feature rows for {} target rows", features.len(), targets.len())));
    }
    let dim = features[0].len();
    if dim == 0 || features.iter().any(|f| f.len() != dim || f.iter().any(|v| !v.is_finite())) {
        return Err(Error::schema("feature rows must share a nonzero length and be finite"));
    }
    Ok(dim)
}

/// Single dense layer with rectified output regressing asset vectors from
/// frozen features. Uses an 8:2 split stratified by `strata`.
pub fn fit_single_layer_head(
    features: &[Vec<f64>],
    targets: &[Vec<f64>],
    strata: &[String],
    spec: &TrainSpec,
) -> Result<HeadFit> {
    spec.validate()?;
    let dim = check_rows(features, targets)?;
    let o = targets[0].len();
    let (train_idx, val_idx) = stratified_split(strata, spec.train_fraction, spec.seed);
    let rows: Vec<&[f64]> = train_idx.iter().map(|&i| features[i].as_slice()).collect();
    let mut head = new_head(HeadKind::SingleLayer, dim, o, spec.seed);
    (head.feature_mean, head.feature_std) = column_scaling(&rows, dim);
    let n = train_idx.len() as f64;
    let (_, w2, _) = head.offsets();
    let b1 = dim * o;
    for (k, b) in head.params[b1..w2].iter_mut().enumerate() {
        *b = train_idx.iter().map(|&i| targets[i][k]).sum::<f64>() / n;
    }
    let xs: Vec<Vec<f64>> = features.iter().map(|f| head.standardize(f)).collect();
    let ys: Vec<Vec<Option<f64>>> = targets.iter().map(|t| t.iter().map(|v| Some(*v)).collect()).collect();
    let (head, history) = optimize(head, &xs, &ys, &train_idx, &val_idx, spec)?;
    Ok(HeadFit {
        head,
        history,
        train_indices: train_idx,
        val_indices: val_idx,
    })
}

/// Survey head fitted on `rows` with an inner split for early stopping.
fn fit_two_layer(
    init: HeadModel,
    features: &[Vec<f64>],
    targets: &[Vec<Option<f64>>],
    rows: &[usize],
    spec: &TrainSpec,
) -> Result<HeadModel> {
    let mut head = init;
    let dim = head.input_dim;
    let refs: Vec<&[f64]> = rows.iter().map(|&i| features[i].as_slice()).collect();
    (head.feature_mean, head.feature_std) = column_scaling(&refs, dim);
    (head.target_mean, head.target_std) = masked_scaling(targets, rows, head.output_dim);
    let xs: Vec<Vec<f64>> = features.iter().map(|f| head.standardize(f)).collect();
    let ys: Vec<Vec<Option<f64>>> = targets
        .iter()
        .map(|t| {
            t.iter()
                .zip(head.target_mean.iter().zip(&head.target_std))
                .map(|(v, (m, s))| v.map(|v| (v - m) / s))
                .collect()
        })
        .collect();
    let strata = vec![String::new(); rows.len()];
    let (inner_train, inner_val) = stratified_split(&strata, spec.train_fraction, spec.seed);
    let tr: Vec<usize> = inner_train.iter().map(|&k| rows[k]).collect();
    let va: Vec<usize> = inner_val.iter().map(|&k| rows[k]).collect();
    Ok(optimize(head, &xs, &ys, &tr, &va, spec)?.0)
}

#[derive(Debug, Clone)]
pub struct SurveyFit {
    /// Head fitted on all districts.
    pub head: HeadModel,
    /// Out-of-fold predictions per district, in input order.
    pub oof_predictions: Vec<Vec<f64>>,
    /// Pooled out-of-fold R² per factor; `None` where not evaluated.
    pub factor_r2: Vec<Option<f64>>,
    pub factor_n: Vec<usize>,
    pub folds: Vec<usize>,
}

fn survey_cv(
    features: &[Vec<f64>],
    targets: &[Vec<Option<f64>>],
    spec: &TrainSpec,
    init: impl Fn(u64) -> HeadModel,
) -> Result<SurveyFit> {
    spec.validate()?;
    check_rows(features, targets)?;
    let with_targets = targets.iter().filter(|t| t.iter().any(|v| v.is_some())).count();
    if with_targets < MIN_SURVEY_DISTRICTS {
        return Err(Error::protocol(format!(
            "survey head needs at least {MIN_SURVEY_DISTRICTS} districts with targets, got {with_targets}"
        )));
    }
    let n = features.len();
    let o = targets[0].len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed ^ 0x464f_4c44));
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % SURVEY_FOLDS;
    }
    let mut oof = vec![vec![0.0; o]; n];
    for k in 0..SURVEY_FOLDS {
        let fit_rows: Vec<usize> = (0..n).filter(|&i| folds[i] != k).collect();
        let fold_spec = TrainSpec {
            seed: spec.seed.wrapping_add(k as u64 + 1),
            ..spec.clone()
        };
        let head = fit_two_layer(init(fold_spec.seed), features, targets, &fit_rows, &fold_spec)?;
        for i in (0..n).filter(|&i| folds[i] == k) {
            oof[i] = head.predict(&features[i])?;
        }
    }
    let mut factor_r2 = Vec::with_capacity(o);
    let mut factor_n = Vec::with_capacity(o);
    for d in 0..o {
        let (p, t): (Vec<f64>, Vec<f64>) = (0..n).filter_map(|i| targets[i][d].map(|t| (oof[i][d], t))).unzip();
        factor_n.push(t.len());
        factor_r2.push(if t.len() < 2 { None } else { r_squared(&p, &t)? });
    }
    let all: Vec<usize> = (0..n).collect();
    let head = fit_two_layer(init(spec.seed), features, targets, &all, spec)?;
    Ok(SurveyFit {
        head,
        oof_predictions: oof,
        factor_r2,
        factor_n,
        folds,
    })
}

/// Two-layer head on district embeddings, scored by 5-fold cross-validation
/// over districts. Absent factors are masked out of the loss and the scores.
pub fn fit_survey_head(features: &[Vec<f64>], targets: &[Vec<Option<f64>>], spec: &TrainSpec) -> Result<SurveyFit> {
    let dim = check_rows(features, targets)?;
    let o = targets[0].len();
    survey_cv(features, targets, spec, |seed| new_head(HeadKind::TwoLayer, dim, o, seed))
}

/// Re-uses the hidden layer of a fitted survey head, re-initializes the
/// output layer for the new factor set and fine-tunes.
pub fn double_transfer(
    previous: &HeadModel,
    features: &[Vec<f64>],
    targets: &[Vec<Option<f64>>],
    spec: &TrainSpec,
) -> Result<SurveyFit> {
    if previous.kind != HeadKind::TwoLayer {
        return Err(Error::input("double transfer starts from a two-layer survey head"));
    }
    let dim = check_rows(features, targets)?;
    if dim != previous.input_dim {
        return Err(Error::schema(format!("features have {dim} dims, head expects {}", previous.input_dim)));
    }
    let o = targets[0].len();
    survey_cv(features, targets, spec, |seed| {
        let mut head = previous.clone();
        reinit_output(&mut head, o, &mut ChaCha8Rng::seed_from_u64(seed));
        head
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRow {
    pub factor_id: String,
    pub description: String,
    pub r2: Option<f64>,
    pub n_districts: usize,
    pub path: String,
}

pub fn factor_rows(fit: &SurveyFit, ids: &[String], descriptions: &[String], path: &str) -> Vec<FactorRow> {
    ids.iter()
        .enumerate()
        .map(|(d, id)| FactorRow {
            factor_id: id.clone(),
            description: descriptions.get(d).cloned().unwrap_or_default(),
            r2: fit.factor_r2[d],
            n_districts: fit.factor_n[d],
            path: path.to_string(),
        })
        .collect()
}

pub fn write_factor_report(path: &Path, rows: &[FactorRow]) -> Result<()> {
    let mut w = crate::tabular::csv_writer(path)?;
    w.write_record(["factor_id", "description", "r2", "n_districts", "path"])?;
    for r in rows {
        w.write_record([
            r.factor_id.clone(),
            r.description.clone(),
            format_r2(r.r2),
            r.n_districts.to_string(),
            r.path.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn spec(seed: u64, epochs: usize) -> TrainSpec {
        TrainSpec {
            learning_rate: 1e-2,
            batch_size: 32,
            max_epochs: epochs,
            patience: 20,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn district_embed_examples() {
        let (a, b) = (vec![0.2; 4], vec![0.6; 4]);
        let d = district_embed("D", &[(&a, 100.0), (&b, 300.0)]).unwrap();
        assert!(d.embedding.iter().all(|v| (v - 0.5).abs() < 1e-15));
        let rev = district_embed("D", &[(&b, 300.0), (&a, 100.0)]).unwrap();
        assert_eq!(rev.embedding, d.embedding);
        let one = district_embed("D", &[(&a, 7.0)]).unwrap();
        assert_eq!(one.embedding, a);
        let zero = district_embed("D", &[(&a, 0.0), (&b, 0.0)]).unwrap();
        assert!(zero.embedding.iter().all(|v| (v - 0.4).abs() < 1e-15));
        let scaled = district_embed("D", &[(&a, 1000.0), (&b, 3000.0)]).unwrap();
        assert_eq!(scaled.embedding, d.embedding);
    }

    fn identity_data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n {
            let y: Vec<f64> = (0..16).map(|_| rng.random_range(0.05..0.95)).collect();
            let mut x = y.clone();
            x.extend((0..8).map(|_| rng.random_range(-1.0..1.0)));
            xs.push(x);
            ys.push(y);
        }
        let strata = (0..n).map(|i| format!("S{}", i % 2)).collect();
        (xs, ys, strata)
    }

    #[test]
    fn single_layer_head_realizable_map() {
        let (xs, ys, strata) = identity_data(400, 1);
        let fit = fit_single_layer_head(&xs, &ys, &strata, &spec(1, 400)).unwrap();
        let val = fit.head.loss(
            &xs.iter().map(|x| fit.head.standardize(x)).collect::<Vec<_>>(),
            &ys.iter().map(|y| y.iter().map(|v| Some(*v)).collect()).collect::<Vec<_>>(),
            &fit.val_indices,
        );
        assert!(val < 1e-5, "{val}");
    }

    #[test]
    fn single_layer_head_no_signal() {
        let (xs, ys, strata) = identity_data(400, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let fit = fit_single_layer_head(&noise, &ys, &strata, &TrainSpec { patience: 5, ..spec(2, 200) }).unwrap();
        for d in 0..16 {
            let p: Vec<f64> = fit.val_indices.iter().map(|&i| fit.head.predict(&noise[i]).unwrap()[d]).collect();
            let t: Vec<f64> = fit.val_indices.iter().map(|&i| ys[i][d]).collect();
            let r2 = r_squared(&p, &t).unwrap().unwrap();
            assert!(r2 < 0.1, "factor {d}: {r2}");
        }
    }

    fn survey_data(n: usize, o: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<Option<f64>>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let w: Vec<f64> = (0..12 * o).map(|_| normal.sample(&mut rng)).collect();
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..12).map(|_| normal.sample(&mut rng)).collect()).collect();
        let ys = xs
            .iter()
            .map(|x| (0..o).map(|j| Some(50.0 + 5.0 * (0..12).map(|i| w[i * o + j] * x[i]).sum::<f64>())).collect())
            .collect();
        (xs, ys)
    }

    #[test]
    fn survey_head_linear_targets_and_absent_factor() {
        let (xs, mut ys) = survey_data(150, 4, 3);
        for y in &mut ys {
            y[3] = None;
        }
        let fit = fit_survey_head(&xs, &ys, &spec(3, 300)).unwrap();
        for d in 0..3 {
            assert!(fit.factor_r2[d].unwrap() > 0.9, "{:?}", fit.factor_r2);
        }
        assert_eq!(fit.factor_r2[3], None);
        assert_eq!(fit.factor_n[3], 0);
        let rows = factor_rows(&fit, &["a".into(), "b".into(), "c".into(), "d".into()], &[], "asset");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_factor_report(&path, &rows).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().contains("d,,not evaluated,0,asset"));
    }

    #[test]
    fn survey_head_refuses_small_samples() {
        let (xs, ys) = survey_data(19, 2, 4);
        assert!(matches!(fit_survey_head(&xs, &ys, &spec(0, 5)), Err(Error::Protocol(_))));
    }

    #[test]
    fn double_transfer_shapes_and_no_op() {
        let (xs, ys) = survey_data(60, 3, 5);
        let first = fit_survey_head(&xs, &ys, &spec(5, 100)).unwrap();
        let ys5: Vec<Vec<Option<f64>>> = ys.iter().map(|y| vec![y[0], y[1], y[2], y[0]]).collect();
        let zero = double_transfer(&first.head, &xs, &ys5, &spec(6, 0)).unwrap();
        assert_eq!(zero.head.output_dim, 4);
        assert_eq!(zero.head.layer1(), first.head.layer1());

        let same = double_transfer(&first.head, &xs, &ys, &spec(7, 100)).unwrap();
        let fresh = fit_survey_head(&xs, &ys, &spec(7, 100)).unwrap();
        let mse = |f: &SurveyFit| {
            f.oof_predictions
                .iter()
                .zip(&ys)
                .map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b.unwrap()).powi(2)).sum::<f64>())
                .sum::<f64>()
        };
        assert!(mse(&same) <= mse(&fresh) * 1.05, "{} vs {}", mse(&same), mse(&fresh));
    }

    #[test]
    fn head_checkpoint_roundtrip() {
        let (xs, ys) = survey_data(40, 2, 8);
        let fit = fit_survey_head(&xs, &ys, &spec(1, 5)).unwrap();
        let back = HeadModel::from_checkpoint(&Checkpoint::decode(&fit.head.to_checkpoint().encode()).unwrap()).unwrap();
        let (a, b) = (fit.head.predict(&xs[0]).unwrap(), back.predict(&xs[0]).unwrap());
        assert!((a[0] - b[0]).abs() < 1e-3);
    }
}
