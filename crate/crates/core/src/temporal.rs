//! Distribution alignment between census rounds and the tehsil-level
//! temporal evaluation: train on the later round, predict the earlier one.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::container::{Checkpoint, NamedArray};
use crate::error::{Error, Result};
use crate::evaluation::{format_r2, r_squared};
use crate::model::stratified_split;
use crate::tabular::{TehsilVector10, VillageRecord, TEHSIL_NAMES};

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    None,
    Simple,
    Histogram,
    LinearOt,
}

impl TransformKind {
    pub const ALL: [TransformKind; 4] = [
        TransformKind::None,
        TransformKind::Simple,
        TransformKind::Histogram,
        TransformKind::LinearOt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::None => "none",
            TransformKind::Simple => "simple",
            TransformKind::Histogram => "histogram",
            TransformKind::LinearOt => "linear-ot",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        TransformKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::input(format!("unknown transform '{s}'")))
    }
}

/// One variable's histogram-matching map.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramMap {
    /// Distinct sorted source values and their mid-rank CDF levels.
    pub source_values: Vec<f64>,
    pub source_levels: Vec<f64>,
    /// Equal-width edges over the pooled range and the target CDF at each edge.
    pub edges: Vec<f64>,
    pub target_cdf: Vec<f64>,
    pub target_median: f64,
}

impl HistogramMap {
    fn fit(source: &[f64], target: &[f64], bins: usize) -> Self {
        let mut sorted = source.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let (mut source_values, mut source_levels) = (Vec::new(), Vec::new());
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            source_values.push(sorted[i]);
            source_levels.push(((i + j) as f64 / 2.0 + 0.5) / n);
            i = j + 1;
        }
        let lo = source.iter().chain(target).copied().fold(f64::INFINITY, f64::min);
        let hi = source.iter().chain(target).copied().fold(f64::NEG_INFINITY, f64::max);
        let edges: Vec<f64> = (0..=bins)
            .map(|k| if k == bins { hi } else { lo + (hi - lo) * k as f64 / bins as f64 })
            .collect();
        let counts = bin_counts(target, &edges);
        let mut target_cdf = vec![0.0; bins + 1];
        let mut acc = 0usize;
        for k in 0..bins {
            acc += counts[k];
            target_cdf[k + 1] = acc as f64 / target.len() as f64;
        }
        let mut t = target.to_vec();
        t.sort_by(f64::total_cmp);
        let m = t.len();
        let target_median = if m % 2 == 1 { t[m / 2] } else { 0.5 * (t[m / 2 - 1] + t[m / 2]) };
        HistogramMap {
            source_values,
            source_levels,
            edges,
            target_cdf,
            target_median,
        }
    }

    fn source_level(&self, y: f64) -> f64 {
        let (v, l) = (&self.source_values, &self.source_levels);
        if y <= v[0] {
            return l[0];
        }
        if y >= v[v.len() - 1] {
            return l[l.len() - 1];
        }
        let k = v.partition_point(|x| *x <= y);
        let (x0, x1) = (v[k - 1], v[k]);
        l[k - 1] + (l[k] - l[k - 1]) * (y - x0) / (x1 - x0)
    }

    fn target_quantile(&self, q: f64) -> f64 {
        let c = &self.target_cdf;
        let bins = c.len() - 1;
        let k = (0..bins)
            .rev()
            .find(|&k| c[k] <= q && c[k + 1] > c[k])
            .unwrap_or(0);
        let frac = ((q - c[k]) / (c[k + 1] - c[k])).clamp(0.0, 1.0);
        self.edges[k] + frac * (self.edges[k + 1] - self.edges[k])
    }

    pub fn apply(&self, y: f64) -> f64 {
        if self.source_values.len() < 2 {
            return self.target_median;
        }
        self.target_quantile(self.source_level(y))
    }
}

/// Counts per bin `[e_k, e_{k+1})`, with the last bin closed on the right.
pub fn bin_counts(values: &[f64], edges: &[f64]) -> Vec<usize> {
    let bins = edges.len() - 1;
    let mut counts = vec![0; bins];
    for v in values {
        let k = edges.partition_point(|e| e <= v).saturating_sub(1).min(bins - 1);
        counts[k] += 1;
    }
    counts
}

/// A fitted alignment map `g` from the source round's distribution to the target round's.
#[derive(Debug, Clone, PartialEq)]
pub enum AlignmentTransform {
    None { dim: usize },
    Simple {
        source_mean: Vec<f64>,
        source_std: Vec<f64>,
        target_mean: Vec<f64>,
        target_std: Vec<f64>,
    },
    Histogram { maps: Vec<HistogramMap> },
    LinearOt { a: DMatrix<f64>, b: DVector<f64> },
}

fn columns(samples: &[Vec<f64>], what: &str) -> Result<Vec<Vec<f64>>> {
    let dim = samples.first().map(|s| s.len()).ok_or_else(|| Error::input(format!("{what} sample is empty")))?;
    if samples.iter().any(|s| s.len() != dim) {
        return Err(Error::schema(format!("{what} samples differ in dimension")));
    }
    Ok((0..dim).map(|d| samples.iter().map(|s| s[d]).collect()).collect())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn check_pair(source: &[Vec<f64>], target: &[Vec<f64>], min: usize) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let (s, t) = (columns(source, "source")?, columns(target, "target")?);
    if s.len() != t.len() {
        return Err(Error::schema("source and target dimensions differ"));
    }
    if source.len() < min || target.len() < min {
        return Err(Error::input(format!("at least {min} samples are needed on each side")));
    }
    Ok((s, t))
}

fn covariance(cols: &[Vec<f64>], mean: &DVector<f64>) -> DMatrix<f64> {
    let (d, n) = (cols.len(), cols[0].len());
    DMatrix::from_fn(d, d, |i, j| {
        cols[i]
            .iter()
            .zip(&cols[j])
            .map(|(a, b)| (a - mean[i]) * (b - mean[j]))
            .sum::<f64>()
            / (n as f64 - 1.0)
    })
}

fn sym_sqrt(m: &DMatrix<f64>, inverse: bool) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let scale = eig.eigenvalues.amax().max(1.0);
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -1e-9 * scale {
            return Err(Error::numerical(format!("covariance is not positive semidefinite (eigenvalue {v})")));
        }
        let s = v.max(0.0).sqrt();
        *v = if inverse {
            if s == 0.0 {
                return Err(Error::numerical("singular covariance"));
            }
            1.0 / s
        } else {
            s
        };
    }
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    Ok((&out + out.transpose()) * 0.5)
}

impl AlignmentTransform {
    pub fn kind(&self) -> TransformKind {
        match self {
            AlignmentTransform::None { .. } => TransformKind::None,
            AlignmentTransform::Simple { .. } => TransformKind::Simple,
            AlignmentTransform::Histogram { .. } => TransformKind::Histogram,
            AlignmentTransform::LinearOt { .. } => TransformKind::LinearOt,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AlignmentTransform::None { dim } => *dim,
            AlignmentTransform::Simple { source_mean, .. } => source_mean.len(),
            AlignmentTransform::Histogram { maps } => maps.len(),
            AlignmentTransform::LinearOt { b, .. } => b.len(),
        }
    }

    pub fn fit(kind: TransformKind, source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<Self> {
        match kind {
            TransformKind::None => Ok(AlignmentTransform::None {
                dim: columns(source, "source")?.len(),
            }),
            TransformKind::Simple => fit_simple(source, target),
            TransformKind::Histogram => fit_histogram(source, target, HISTOGRAM_BINS),
            TransformKind::LinearOt => fit_linear_ot(source, target),
        }
    }

    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(Error::schema(format!("vector of length {} for a {}-dim transform", y.len(), self.dim())));
        }
        Ok(match self {
            AlignmentTransform::None { .. } => y.to_vec(),
            AlignmentTransform::Simple {
                source_mean,
                source_std,
                target_mean,
                target_std,
            } => (0..y.len())
                .map(|d| {
                    if source_std[d] == 0.0 {
                        target_mean[d]
                    } else {
                        target_mean[d] + target_std[d] * (y[d] - source_mean[d]) / source_std[d]
                    }
                })
                .collect(),
            AlignmentTransform::Histogram { maps } => maps.iter().zip(y).map(|(m, v)| m.apply(*v)).collect(),
            AlignmentTransform::LinearOt { a, b } => (a * DVector::from_column_slice(y) + b).iter().copied().collect(),
        })
    }

    pub fn apply_all(&self, ys: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        ys.iter().map(|y| self.apply(y)).collect()
    }

    /// Serializes into the checkpoint container with the kind in the header.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let d = self.dim();
        let f = |v: &[f64]| v.iter().map(|x| *x as f32).collect::<Vec<f32>>();
        let mut arrays = Vec::new();
        match self {
            AlignmentTransform::None { .. } => {}
            AlignmentTransform::Simple {
                source_mean,
                source_std,
                target_mean,
                target_std,
            } => {
                for (name, v) in [
                    ("source_mean", source_mean),
                    ("source_std", source_std),
                    ("target_mean", target_mean),
                    ("target_std", target_std),
                ] {
                    arrays.push(NamedArray::new(name, vec![d], f(v)));
                }
            }
            AlignmentTransform::Histogram { maps } => {
                for (i, m) in maps.iter().enumerate() {
                    let n = m.source_values.len();
                    arrays.push(NamedArray::new(format!("{i}.source_values"), vec![n], f(&m.source_values)));
                    arrays.push(NamedArray::new(format!("{i}.source_levels"), vec![n], f(&m.source_levels)));
                    arrays.push(NamedArray::new(format!("{i}.edges"), vec![m.edges.len()], f(&m.edges)));
                    arrays.push(NamedArray::new(format!("{i}.target_cdf"), vec![m.target_cdf.len()], f(&m.target_cdf)));
                    arrays.push(NamedArray::new(format!("{i}.target_median"), vec![1], vec![m.target_median as f32]));
                }
            }
            AlignmentTransform::LinearOt { a, b } => {
                let rows: Vec<f64> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]).collect();
                arrays.push(NamedArray::new("A", vec![d, d], f(&rows)));
                arrays.push(NamedArray::new("b", vec![d], f(b.as_slice())));
            }
        }
        Checkpoint {
            header: serde_json::json!({ "kind": self.kind(), "dim": d }).to_string(),
            arrays,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let header: serde_json::Value = serde_json::from_str(&ck.header)?;
        let kind: TransformKind = serde_json::from_value(header["kind"].clone())?;
        let d = header["dim"].as_u64().ok_or_else(|| Error::schema("transform header lacks dim"))? as usize;
        let get = |name: &str| -> Result<Vec<f64>> { Ok(ck.require(name)?.data.iter().map(|v| f64::from(*v)).collect()) };
        Ok(match kind {
            TransformKind::None => AlignmentTransform::None { dim: d },
            TransformKind::Simple => AlignmentTransform::Simple {
                source_mean: get("source_mean")?,
                source_std: get("source_std")?,
                target_mean: get("target_mean")?,
                target_std: get("target_std")?,
            },
            TransformKind::Histogram => AlignmentTransform::Histogram {
                maps: (0..d)
                    .map(|i| {
                        Ok(HistogramMap {
                            source_values: get(&format!("{i}.source_values"))?,
                            source_levels: get(&format!("{i}.source_levels"))?,
                            edges: get(&format!("{i}.edges"))?,
                            target_cdf: get(&format!("{i}.target_cdf"))?,
                            target_median: get(&format!("{i}.target_median"))?[0],
                        })
                    })
                    .collect::<Result<_>>()?,
            },
            TransformKind::LinearOt => AlignmentTransform::LinearOt {
                a: DMatrix::from_row_slice(d, d, &get("A")?),
                b: DVector::from_vec(get("b")?),
            },
        })
    }
}

/// Per-variable mean and variance matching (sample standard deviations).
pub fn fit_simple(source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<AlignmentTransform> {
    let (s, t) = check_pair(source, target, 2)?;
    let (source_mean, source_std): (Vec<f64>, Vec<f64>) = s.iter().map(|c| mean_std(c)).unzip();
    let (target_mean, target_std): (Vec<f64>, Vec<f64>) = t.iter().map(|c| mean_std(c)).unzip();
    Ok(AlignmentTransform::Simple {
        source_mean,
        source_std,
        target_mean,
        target_std,
    })
}

/// Per-variable histogram matching. Source values map through the mid-rank
/// empirical CDF of the source sample, then through the inverse of the
/// target's piecewise-linear `bins`-bin CDF over pooled equal-width edges.
pub fn fit_histogram(source: &[Vec<f64>], target: &[Vec<f64>], bins: usize) -> Result<AlignmentTransform> {
    if bins == 0 {
        return Err(Error::input("histogram matching needs at least one bin"));
    }
    let (s, t) = check_pair(source, target, bins)?;
    Ok(AlignmentTransform::Histogram {
        maps: s.iter().zip(&t).map(|(a, b)| HistogramMap::fit(a, b, bins)).collect(),
    })
}

/// Gaussian Monge map between the two samples' first and second moments.
pub fn fit_linear_ot(source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<AlignmentTransform> {
    let (s, t) = check_pair(source, target, 2)?;
    let d = s.len();
    if source.len() < d + 1 || target.len() < d + 1 {
        return Err(Error::input(format!("linear OT in {d} dimensions needs at least {} samples", d + 1)));
    }
    let mu_s = DVector::from_iterator(d, s.iter().map(|c| c.iter().sum::<f64>() / c.len() as f64));
    let mu_t = DVector::from_iterator(d, t.iter().map(|c| c.iter().sum::<f64>() / c.len() as f64));
    let mut cov_s = covariance(&s, &mu_s);
    let cov_t = covariance(&t, &mu_t);
    let min_eig = SymmetricEigen::new(cov_s.clone()).eigenvalues.min();
    if min_eig <= 1e-12 {
        log::warn!("source covariance is singular (min eigenvalue {min_eig:e}); adding a 1e-8 ridge");
        cov_s += DMatrix::identity(d, d) * 1e-8;
    }
    let s_half = sym_sqrt(&cov_s, false)?;
    let s_inv_half = sym_sqrt(&cov_s, true)?;
    let middle = sym_sqrt(&(&s_half * &cov_t * &s_half), false)?;
    let a = &s_inv_half * middle * &s_inv_half;
    let a = (&a + a.transpose()) * 0.5;
    let b = &mu_t - &a * &mu_s;
    Ok(AlignmentTransform::LinearOt { a, b })
}

/// Population-weighted tehsil prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TehsilPrediction {
    pub tehsil_id: String,
    pub prediction: Vec<f64>,
    pub n_villages: usize,
    pub population: f64,
}

/// Population-weighted mean of village predictions per group. Villages
/// without a prediction are skipped; a group with zero population uses
/// uniform weights.
pub fn weighted_group_mean(
    items: &[(String, f64, &[f64])],
) -> Result<BTreeMap<String, (Vec<f64>, usize, f64)>> {
    let mut groups: BTreeMap<&str, Vec<(f64, &[f64])>> = BTreeMap::new();
    for (g, pop, v) in items {
        if !(*pop >= 0.0) {
            return Err(Error::input(format!("negative or missing population in group {g}")));
        }
        groups.entry(g.as_str()).or_default().push((*pop, v));
    }
    let mut out = BTreeMap::new();
    for (g, members) in groups {
        let dim = members[0].1.len();
        if members.iter().any(|m| m.1.len() != dim) {
            return Err(Error::schema(format!("group {g} mixes vector lengths")));
        }
        let total: f64 = members.iter().map(|m| m.0).sum();
        let uniform = total <= 0.0;
        if uniform {
            log::warn!("group {g} has zero total population; using uniform weights");
        }
        let mut acc = vec![0.0; dim];
        for (pop, v) in &members {
            let w = if uniform { 1.0 / members.len() as f64 } else { pop / total };
            for (a, x) in acc.iter_mut().zip(v.iter()) {
                *a += w * x;
            }
        }
        out.insert(g.to_string(), (acc, members.len(), total));
    }
    Ok(out)
}

pub fn tehsil_aggregate(
    predictions: &BTreeMap<String, Vec<f64>>,
    records: &[VillageRecord],
) -> Result<Vec<TehsilPrediction>> {
    let items: Vec<(String, f64, &[f64])> = records
        .iter()
        .filter_map(|r| predictions.get(&r.village_id).map(|p| (r.tehsil_id.clone(), r.population, p.as_slice())))
        .collect();
    Ok(weighted_group_mean(&items)?
        .into_iter()
        .map(|(tehsil_id, (prediction, n_villages, population))| TehsilPrediction {
            tehsil_id,
            prediction,
            n_villages,
            population,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalRow {
    pub outcome: String,
    pub transform: TransformKind,
    pub r2: Option<f64>,
    pub n_tehsils: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalReport {
    pub rows: Vec<TemporalRow>,
    pub train_tehsils: Vec<String>,
    pub test_tehsils: Vec<String>,
    pub transforms: Vec<AlignmentTransform>,
}

impl TemporalReport {
    pub fn r2(&self, outcome: &str, kind: TransformKind) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.outcome == outcome && r.transform == kind)
            .and_then(|r| r.r2)
    }

    /// Mean R² of a transform over evaluated outcomes; the untransformed
    /// scores are deliberately not selectable here.
    pub fn selection_score(&self, kind: TransformKind) -> Result<f64> {
        if kind == TransformKind::None {
            return Err(Error::protocol("untransformed R² may not be used for model selection"));
        }
        let v: Vec<f64> = self.rows.iter().filter(|r| r.transform == kind).filter_map(|r| r.r2).collect();
        if v.is_empty() {
            return Err(Error::protocol(format!("no evaluated outcomes for {}", kind.name())));
        }
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = crate::tabular::csv_writer(path)?;
        w.write_record(["outcome", "transform", "r2", "n_tehsils"])?;
        for r in &self.rows {
            w.write_record([r.outcome.clone(), r.transform.name().to_string(), format_r2(r.r2), r.n_tehsils.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub struct TemporalInputs<'a> {
    /// Earlier-round predictions of the later-round model, per tehsil, in [`TEHSIL_NAMES`] order.
    pub predictions: &'a BTreeMap<String, Vec<f64>>,
    pub truth_early: &'a BTreeMap<String, TehsilVector10>,
    pub truth_late: &'a BTreeMap<String, TehsilVector10>,
}

/// Fits each transform on the training tehsils (early truth → late truth),
/// applies it to the test tehsils' early truth and scores the predictions
/// against the transformed truth.
pub fn temporal_eval(
    inputs: &TemporalInputs,
    kinds: &[TransformKind],
    train_fraction: f64,
    seed: u64,
) -> Result<TemporalReport> {
    if inputs.truth_early.is_empty() || inputs.truth_late.is_empty() || inputs.predictions.is_empty() {
        return Err(Error::protocol("temporal evaluation needs predictions and truth for both rounds"));
    }
    let ids: Vec<String> = inputs
        .predictions
        .keys()
        .filter(|id| inputs.truth_early.contains_key(*id) && inputs.truth_late.contains_key(*id))
        .cloned()
        .collect();
    if ids.len() < 4 {
        return Err(Error::protocol(format!("only {} tehsils have data for both rounds", ids.len())));
    }
    let strata = vec![String::new(); ids.len()];
    let (train_idx, test_idx) = stratified_split(&strata, train_fraction, seed);
    let early = |i: &usize| inputs.truth_early[&ids[*i]].values.to_vec();
    let late = |i: &usize| inputs.truth_late[&ids[*i]].values.to_vec();
    let source: Vec<Vec<f64>> = train_idx.iter().map(early).collect();
    let target: Vec<Vec<f64>> = train_idx.iter().map(late).collect();
    let test_truth: Vec<Vec<f64>> = test_idx.iter().map(early).collect();
    let preds: Vec<&Vec<f64>> = test_idx.iter().map(|i| &inputs.predictions[&ids[*i]]).collect();
    let mut rows = Vec::new();
    let mut transforms = Vec::new();
    for &kind in kinds {
        let g = AlignmentTransform::fit(kind, &source, &target)?;
        let aligned = g.apply_all(&test_truth)?;
        for (d, name) in TEHSIL_NAMES.iter().enumerate() {
            let p: Vec<f64> = preds.iter().map(|v| v[d]).collect();
            let t: Vec<f64> = aligned.iter().map(|v| v[d]).collect();
            rows.push(TemporalRow {
                outcome: name.to_string(),
                transform: kind,
                r2: r_squared(&p, &t)?,
                n_tehsils: t.len(),
            });
        }
        transforms.push(g);
    }
    Ok(TemporalReport {
        rows,
        train_tehsils: train_idx.iter().map(|i| ids[*i].clone()).collect(),
        test_tehsils: test_idx.iter().map(|i| ids[*i].clone()).collect(),
        transforms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    #[test]
    fn simple_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s: Vec<f64> = (0..500).map(|_| rng.random_range(-3.0..3.0)).collect();
        let t: Vec<f64> = (0..400).map(|_| rng.random_range(0.0..9.0)).collect();
        let g = fit_simple(&col(&s), &col(&t)).unwrap();
        let out: Vec<f64> = g.apply_all(&col(&s)).unwrap().into_iter().map(|v| v[0]).collect();
        let ((m1, s1), (m2, s2)) = (mean_std(&out), mean_std(&t));
        assert!((m1 - m2).abs() < 1e-9 && (s1 - s2).abs() < 1e-9);

        let g = AlignmentTransform::Simple {
            source_mean: vec![0.0],
            source_std: vec![1.0],
            target_mean: vec![2.0],
            target_std: vec![2.0],
        };
        assert_eq!(g.apply(&[1.0]).unwrap(), vec![4.0]);
        let same = fit_simple(&col(&s), &col(&s)).unwrap();
        assert!((same.apply(&[0.7]).unwrap()[0] - 0.7).abs() < 1e-12);
        let flat = fit_simple(&col(&[1.0, 1.0, 1.0]), &col(&[2.0, 4.0])).unwrap();
        assert_eq!(flat.apply(&[5.0]).unwrap(), vec![3.0]);
        assert!(fit_simple(&[], &col(&[1.0])).is_err());
    }

    #[test]
    fn histogram_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s: Vec<f64> = (0..2000).map(|_| rng.random_range(0.0..1.0)).collect();
        let t: Vec<f64> = (0..2000).map(|_| rng.random_range(0.0..2.0)).collect();
        let g = fit_histogram(&col(&s), &col(&t), 10).unwrap();
        assert!((g.apply(&[0.5]).unwrap()[0] - 1.0).abs() < 0.2);

        let same = fit_histogram(&col(&s), &col(&s), 10).unwrap();
        let AlignmentTransform::Histogram { maps } = &same else { unreachable!() };
        let width = maps[0].edges[1] - maps[0].edges[0];
        for x in &s {
            assert!((same.apply(&[*x]).unwrap()[0] - x).abs() <= width);
        }

        let constant = fit_histogram(&col(&[0.3; 12]), &col(&(0..11).map(f64::from).collect::<Vec<_>>()), 10).unwrap();
        assert_eq!(constant.apply(&[0.3]).unwrap(), vec![5.0]);
        assert!(fit_histogram(&col(&[1.0; 5]), &col(&[1.0; 20]), 10).is_err());
    }

    proptest! {
        #[test]
        fn histogram_matches_target_frequencies(seed in 0u64..10_000, n in 20usize..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0f64).powi(3)).collect();
            let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0f64).ln()).collect();
            let g = fit_histogram(&col(&s), &col(&t), 10).unwrap();
            let AlignmentTransform::Histogram { maps } = &g else { unreachable!() };
            let out: Vec<f64> = s.iter().map(|x| g.apply(&[*x]).unwrap()[0]).collect();
            prop_assert_eq!(bin_counts(&out, &maps[0].edges), bin_counts(&t, &maps[0].edges));
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|a, b| s[*a].total_cmp(&s[*b]));
            for w in order.windows(2) {
                prop_assert!(out[w[0]] <= out[w[1]]);
            }
        }

        #[test]
        fn simple_preserves_rank(v in proptest::collection::vec(-10.0f64..10.0, 3..50)) {
            let t: Vec<f64> = v.iter().map(|x| 3.0 * x + 1.0).collect();
            let g = fit_simple(&col(&v), &col(&t)).unwrap();
            for a in &v {
                for b in &v {
                    if a < b {
                        prop_assert!(g.apply(&[*a]).unwrap()[0] <= g.apply(&[*b]).unwrap()[0]);
                    }
                }
            }
        }
    }

    fn gaussian(n: usize, d: usize, seed: u64, shift: f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mix: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        (0..n)
            .map(|_| {
                let z: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
                (0..d).map(|i| shift + (0..d).map(|j| mix[i * d + j] * z[j]).sum::<f64>()).collect()
            })
            .collect()
    }

    #[test]
    fn linear_ot_examples() {
        let s = gaussian(3000, 4, 1, 0.0);
        let t = gaussian(2500, 4, 2, 1.5);
        let g = fit_linear_ot(&s, &t).unwrap();
        let out = g.apply_all(&s).unwrap();
        let (cs, ct) = (columns(&out, "o").unwrap(), columns(&t, "t").unwrap());
        let (mo, mt): (DVector<f64>, DVector<f64>) = (
            DVector::from_iterator(4, cs.iter().map(|c| c.iter().sum::<f64>() / c.len() as f64)),
            DVector::from_iterator(4, ct.iter().map(|c| c.iter().sum::<f64>() / c.len() as f64)),
        );
        assert!((&mo - &mt).amax() < 1e-6);
        assert!((covariance(&cs, &mo) - covariance(&ct, &mt)).amax() < 1e-6);
        let AlignmentTransform::LinearOt { a, .. } = &g else { unreachable!() };
        assert!((a - a.transpose()).amax() < 1e-12);
        assert!(SymmetricEigen::new(a.clone()).eigenvalues.min() >= 0.0);

        let id = fit_linear_ot(&s, &s).unwrap();
        let AlignmentTransform::LinearOt { a, b } = &id else { unreachable!() };
        assert!((a - DMatrix::identity(4, 4)).amax() < 1e-8 && b.amax() < 1e-8);

        let s1: Vec<Vec<f64>> = s.iter().map(|v| vec![v[0]]).collect();
        let t1: Vec<Vec<f64>> = t.iter().map(|v| vec![v[1]]).collect();
        let (ot, simple) = (fit_linear_ot(&s1, &t1).unwrap(), fit_simple(&s1, &t1).unwrap());
        for x in [-2.0, 0.0, 3.0] {
            assert!((ot.apply(&[x]).unwrap()[0] - simple.apply(&[x]).unwrap()[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_ot_singular_source_gets_ridge() {
        let s: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let t = gaussian(50, 2, 3, 0.0);
        let g = fit_linear_ot(&s, &t).unwrap();
        assert!(g.apply(&[1.0, 2.0]).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn checkpoint_roundtrip_all_kinds() {
        let s = gaussian(40, 3, 4, 0.0);
        let t = gaussian(40, 3, 5, 1.0);
        for kind in TransformKind::ALL {
            let g = AlignmentTransform::fit(kind, &s, &t).unwrap();
            let back = AlignmentTransform::from_checkpoint(&Checkpoint::decode(&g.to_checkpoint().encode()).unwrap()).unwrap();
            assert_eq!(back.kind(), kind);
            let (a, b) = (g.apply(&s[0]).unwrap(), back.apply(&s[0]).unwrap());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-4);
            }
        }
    }

    fn rec(id: &str, tehsil: &str, pop: f64) -> VillageRecord {
        VillageRecord {
            village_id: id.into(),
            lat: 0.0,
            lon: 0.0,
            population: pop,
            tehsil_id: tehsil.into(),
            district_id: "D".into(),
            state_id: "S".into(),
        }
    }

    #[test]
    fn tehsil_aggregation_examples() {
        let recs = vec![rec("a", "T1", 1.0), rec("b", "T1", 1.0), rec("c", "T2", 0.0), rec("d", "T2", 0.0)];
        let preds: BTreeMap<String, Vec<f64>> = [("a", 0.2), ("b", 0.4), ("c", 1.0), ("d", 3.0)]
            .iter()
            .map(|(k, v)| (k.to_string(), vec![*v]))
            .collect();
        let out = tehsil_aggregate(&preds, &recs).unwrap();
        assert!((out[0].prediction[0] - 0.3).abs() < 1e-15);
        assert_eq!(out[1].prediction[0], 2.0);
        let mut rev = recs.clone();
        rev.reverse();
        assert_eq!(tehsil_aggregate(&preds, &rev).unwrap(), out);
        let single = tehsil_aggregate(&preds, &recs[..1]).unwrap();
        assert_eq!(single[0].prediction, vec![0.2]);
    }

    #[test]
    fn temporal_eval_protocol() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut preds, mut early, mut late) = (BTreeMap::new(), BTreeMap::new(), BTreeMap::new());
        for i in 0..60 {
            let z: f64 = rng.random_range(0.0..1.0);
            let v1: [f64; 10] = std::array::from_fn(|d| (0.2 * z + 0.02 * d as f64 + 0.02 * rng.random_range(-1.0..1.0)).clamp(0.0, 1.0));
            let mut v2 = v1;
            v2[3] = (v1[3] + 0.6).min(1.0);
            let id = format!("T{i:02}");
            preds.insert(id.clone(), v2.to_vec());
            early.insert(id.clone(), TehsilVector10 { year: crate::tabular::CensusYear::Y2001, values: v1 });
            late.insert(id, TehsilVector10 { year: crate::tabular::CensusYear::Y2011, values: v2 });
        }
        let inputs = TemporalInputs {
            predictions: &preds,
            truth_early: &early,
            truth_late: &late,
        };
        let rep = temporal_eval(&inputs, &TransformKind::ALL, 0.8, 1).unwrap();
        assert_eq!(rep.rows.len(), 40);
        assert!(rep.r2("has-phone", TransformKind::None).unwrap() < 0.0);
        assert!(rep.r2("has-phone", TransformKind::LinearOt).unwrap() > 0.5);
        assert!(rep.selection_score(TransformKind::None).is_err());
        assert!(rep.selection_score(TransformKind::Histogram).is_ok());
        let empty = BTreeMap::new();
        let missing = TemporalInputs {
            predictions: &preds,
            truth_early: &empty,
            truth_late: &late,
        };
        assert!(matches!(temporal_eval(&missing, &TransformKind::ALL, 0.8, 1), Err(Error::Protocol(_))));
    }
}
