//! Mini-batch Adam training with a stratified split and early stopping.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{lit, to64, ModelParams, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub train_fraction: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            learning_rate: 1e-3,
            batch_size: 64,
            train_fraction: 0.8,
            max_epochs: 30,
            patience: 5,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(Error::input("learning rate and batch size must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::input(format!(
                "train fraction {} must lie strictly between 0 and 1",
                self.train_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::input("Adam moments must be in [0, 1) with positive epsilon"));
        }
        Ok(())
    }
}

/// Borrowed training data: one input tile, target vector and stratum label per sample.
pub struct Dataset<'a, F> {
    pub inputs: Vec<&'a [F]>,
    pub targets: Vec<Vec<f64>>,
    pub strata: Vec<String>,
}

impl<F> Dataset<'_, F> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Per-stratum seeded shuffle, then the first `fraction` of each stratum to
/// training. Strata with two or more samples keep at least one for validation.
pub fn stratified_split(strata: &[String], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in strata.iter().enumerate() {
        groups.entry(s.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5350_4c49_5400_0000);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for idx in groups.values_mut() {
        idx.shuffle(&mut rng);
        let n = idx.len();
        let mut n_train = (fraction * n as f64).round() as usize;
        if n >= 2 {
            n_train = n_train.clamp(1, n - 1);
        } else {
            n_train = n;
        }
        train.extend_from_slice(&idx[..n_train]);
        val.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = crate::tabular::csv_writer(path)?;
    for rec in history {
        w.serialize(rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F: Scalar> {
    pub params: ModelParams<F>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    /// Validation MSE of predicting the training-split target mean.
    pub mean_predictor_mse: f64,
}

impl<F: Scalar> TrainOutcome<F> {
    pub fn best_val_mse(&self) -> f64 {
        self.history
            .iter()
            .find(|r| r.epoch == self.best_epoch)
            .map(|r| r.val_mse)
            .unwrap_or(self.mean_predictor_mse)
    }

    pub fn beats_mean_predictor(&self) -> bool {
        self.best_val_mse() <= self.mean_predictor_mse
    }
}

pub(crate) struct Adam<F> {
    m: Vec<F>,
    v: Vec<F>,
    step: i32,
}

impl<F: Scalar> Adam<F> {
    pub(crate) fn new(n: usize) -> Self {
        Adam {
            m: vec![F::zero(); n],
            v: vec![F::zero(); n],
            step: 0,
        }
    }

    pub(crate) fn update(&mut self, params: &mut [F], grad: &[F], spec: &TrainSpec) {
        self.step += 1;
        let (b1, b2) = (lit::<F>(spec.beta1), lit::<F>(spec.beta2));
        let c1 = lit::<F>(1.0 - spec.beta1.powi(self.step));
        let c2 = lit::<F>(1.0 - spec.beta2.powi(self.step));
        let (lr, eps, one) = (lit::<F>(spec.learning_rate), lit::<F>(spec.epsilon), F::one());
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (one - b1) * *g;
            *v = b2 * *v + (one - b2) * *g * *g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *p = *p - lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

/// Samples per work unit; gradients inside a unit and across units are summed
/// in index order so results do not depend on the thread count.
const CHUNK: usize = 4;

struct TargetScaling {
    mean: Vec<f64>,
    std: Vec<f64>,
    constant: Vec<bool>,
}

impl TargetScaling {
    fn fit(targets: &[Vec<f64>], idx: &[usize], dim: usize) -> Self {
        let n = idx.len() as f64;
        let mut mean = vec![0.0; dim];
        for &i in idx {
            for (m, t) in mean.iter_mut().zip(&targets[i]) {
                *m += t / n;
            }
        }
        let mut std = vec![0.0; dim];
        for &i in idx {
            for ((s, t), m) in std.iter_mut().zip(&targets[i]).zip(&mean) {
                *s += (t - m) * (t - m) / n;
            }
        }
        let constant: Vec<bool> = std.iter().map(|v| v.sqrt() < 1e-12).collect();
        let std = std
            .into_iter()
            .zip(&constant)
            .map(|(v, c)| if *c { 1.0 } else { v.sqrt() })
            .collect();
        TargetScaling { mean, std, constant }
    }

    fn apply<F: Scalar>(&self, t: &[f64]) -> Vec<F> {
        t.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| lit((v - m) / s))
            .collect()
    }

    /// Squared error in original units from a standardized prediction.
    fn raw_sq_error<F: Scalar>(&self, pred: &[F], target: &[f64]) -> f64 {
        pred.iter()
            .zip(target)
            .zip(self.mean.iter().zip(&self.std))
            .map(|((p, t), (m, s))| {
                let r = to64(*p) * s + m - t;
                r * r
            })
            .sum()
    }

    /// Outputs with a constant training target are pinned to that constant.
    fn pin_constant_outputs<F: Scalar>(&self, head_w: &mut [F], head_b: &mut [F]) {
        let o = self.mean.len();
        for (k, _) in self.constant.iter().enumerate().filter(|(_, c)| **c) {
            for row in head_w.chunks_exact_mut(o) {
                row[k] = F::zero();
            }
            head_b[k] = F::zero();
        }
    }

    fn fold_into_head<F: Scalar>(&self, params: &mut ModelParams<F>) {
        let o = self.mean.len();
        let (w, b) = params.head_mut();
        for row in w.chunks_exact_mut(o) {
            for (x, s) in row.iter_mut().zip(&self.std) {
                *x = lit(to64(*x) * s);
            }
        }
        for ((x, s), m) in b.iter_mut().zip(&self.std).zip(&self.mean) {
            *x = lit(to64(*x) * s + m);
        }
    }
}

fn check_dataset<F: Scalar>(data: &Dataset<F>, params: &ModelParams<F>) -> Result<()> {
    if data.is_empty() {
        return Err(Error::input("training set is empty"));
    }
    if data.targets.len() != data.len() || data.strata.len() != data.len() {
        return Err(Error::schema("inputs, targets and strata differ in length"));
    }
    let (n_in, n_out) = (params.config.input_len(), params.config.output_dim);
    for (i, (x, t)) in data.inputs.iter().zip(&data.targets).enumerate() {
        if x.len() != n_in {
            return Err(Error::schema(format!("sample {i} has {} inputs, expected {n_in}", x.len())));
        }
        if t.len() != n_out {
            return Err(Error::schema(format!("sample {i} has {} targets, expected {n_out}", t.len())));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(format!("sample {i} has a non-finite target")));
        }
    }
    Ok(())
}

/// Trains all parameters on MSE with Adam and returns the best-validation
/// parameters. Targets are standardized on the training split for the
/// optimization and the scaling is folded back into the head, so the
/// returned model predicts in original units. The initial head is read in
/// standardized units.
pub fn train<F: Scalar>(data: &Dataset<F>, spec: &TrainSpec, init: ModelParams<F>) -> Result<TrainOutcome<F>> {
    spec.validate()?;
    check_dataset(data, &init)?;
    let o = init.config.output_dim;
    let (train_idx, val_idx) = stratified_split(&data.strata, spec.train_fraction, spec.seed);
    let scaling = TargetScaling::fit(&data.targets, &train_idx, o);
    let std_targets: Vec<Vec<F>> = data.targets.iter().map(|t| scaling.apply(t)).collect();
    let eval_idx = if val_idx.is_empty() { &train_idx } else { &val_idx };
    let mean_predictor_mse = eval_idx
        .iter()
        .map(|&i| {
            data.targets[i]
                .iter()
                .zip(&scaling.mean)
                .map(|(t, m)| (t - m) * (t - m))
                .sum::<f64>()
        })
        .sum::<f64>()
        / (eval_idx.len() * o) as f64;

    let mut params = init;
    {
        let (w, b) = params.head_mut();
        scaling.pin_constant_outputs(w, b);
    }
    let head_offset = params.arch.extractor_len();
    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut history = Vec::new();
    let mut adam = Adam::new(params.data.len());
    let n_params = params.data.len();

    for epoch in 1..=spec.max_epochs {
        let mut order = train_idx.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(epoch as u64)));
        order.shuffle(&mut rng);
        let mut epoch_sq = 0.0;
        for (b, batch) in order.chunks(spec.batch_size).enumerate() {
            let partials: Vec<(Vec<F>, f64, f64)> = batch
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut grad = vec![F::zero(); n_params];
                    let (mut loss, mut sq) = (0.0, 0.0);
                    for &i in chunk {
                        let t = params.trace(data.inputs[i]);
                        let scale = lit::<F>(1.0 / o as f64);
                        let dout: Vec<F> = t
                            .out
                            .iter()
                            .zip(&std_targets[i])
                            .map(|(y, y0)| (*y - *y0) * lit(2.0) * scale)
                            .collect();
                        loss += t
                            .out
                            .iter()
                            .zip(&std_targets[i])
                            .map(|(y, y0)| to64((*y - *y0) * (*y - *y0)))
                            .sum::<f64>()
                            / o as f64;
                        sq += scaling.raw_sq_error(&t.out, &data.targets[i]);
                        params.backward(data.inputs[i], &t, &dout, &mut grad);
                    }
                    (grad, loss, sq)
                })
                .collect();
            let mut grad = vec![F::zero(); n_params];
            let mut loss = 0.0;
            for (g, l, sq) in partials {
                for (a, v) in grad.iter_mut().zip(&g) {
                    *a += *v;
                }
                loss += l;
                epoch_sq += sq;
            }
            let inv = lit::<F>(1.0 / batch.len() as f64);
            for g in &mut grad {
                *g *= inv;
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::numerical(format!(
                    "non-finite loss in epoch {epoch}, batch {b} (first sample index {})",
                    batch[0]
                )));
            }
            let (gw, gb) = grad[head_offset..].split_at_mut(params.head_weight().len());
            scaling.pin_constant_outputs(gw, gb);
            adam.update(&mut params.data, &grad, spec);
        }
        let train_mse = epoch_sq / (train_idx.len() * o) as f64;
        let val_mse = eval_mse(&params, data, eval_idx, &scaling);
        if !val_mse.is_finite() {
            return Err(Error::numerical(format!("non-finite validation loss after epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: train mse {train_mse:.6}, val mse {val_mse:.6}");
        history.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
        });
        if val_mse < best_val {
            best_val = val_mse;
            best = params.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= spec.patience {
                log::info!("early stop after epoch {epoch}; best epoch {best_epoch}");
                break;
            }
        }
    }
    scaling.fold_into_head(&mut best);
    Ok(TrainOutcome {
        params: best,
        history,
        best_epoch,
        train_indices: train_idx,
        val_indices: val_idx,
        mean_predictor_mse,
    })
}

fn eval_mse<F: Scalar>(params: &ModelParams<F>, data: &Dataset<F>, idx: &[usize], scaling: &TargetScaling) -> f64 {
    let errs: Vec<f64> = idx
        .par_iter()
        .map(|&i| scaling.raw_sq_error(&params.trace(data.inputs[i]).out, &data.targets[i]))
        .collect();
    errs.iter().sum::<f64>() / (idx.len() * params.config.output_dim) as f64
}

/// Forward pass over many tiles, in input order.
pub fn predict_batch<F: Scalar>(params: &ModelParams<F>, inputs: &[&[F]]) -> Result<Vec<Vec<f64>>> {
    inputs
        .par_iter()
        .map(|x| Ok(params.forward(x)?.into_iter().map(to64).collect()))
        .collect()
}

/// Embeddings for many tiles, in input order.
pub fn embed_batch<F: Scalar>(params: &ModelParams<F>, inputs: &[&[F]]) -> Result<Vec<Vec<f64>>> {
    inputs
        .par_iter()
        .map(|x| Ok(params.embed(x)?.into_iter().map(to64).collect()))
        .collect()
}
