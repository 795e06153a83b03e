//! Finite-difference verification of the analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::ModelParams;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct GradCheckSpec {
    pub epsilon: f64,
    /// Parameters probed per named array (all of them when the array is smaller).
    pub per_entry: usize,
    /// Restrict probing to the linear head.
    pub head_only: bool,
    pub seed: u64,
}

impl Default for GradCheckSpec {
    fn default() -> Self {
        GradCheckSpec {
            epsilon: 1e-4,
            per_entry: 6,
            head_only: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub per_entry: Vec<(String, f64)>,
}

pub fn grad_check(params: &ModelParams<f64>, input: &[f64], target: &[f64], spec: &GradCheckSpec) -> Result<GradCheckReport> {
    grad_check_with(params, input, target, spec, |_| {})
}

/// Like [`grad_check`] but lets the caller tamper with the analytic gradient
/// before comparison, to confirm the check notices.
pub fn grad_check_with(
    params: &ModelParams<f64>,
    input: &[f64],
    target: &[f64],
    spec: &GradCheckSpec,
    corrupt: impl Fn(&mut [f64]),
) -> Result<GradCheckReport> {
    let mut analytic = vec![0.0; params.data.len()];
    params.loss_and_grad(input, target, &mut analytic)?;
    corrupt(&mut analytic);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        per_entry: Vec::new(),
    };
    for entry in &params.arch.entries {
        if spec.head_only && entry.offset < params.arch.extractor_len() {
            continue;
        }
        let n = entry.len();
        let picks = sample(&mut rng, n, spec.per_entry.min(n));
        let mut worst: f64 = 0.0;
        for k in picks {
            let i = entry.offset + k;
            let orig = probe.data[i];
            probe.data[i] = orig + spec.epsilon;
            let up = probe.loss(input, target)?;
            probe.data[i] = orig - spec.epsilon;
            let down = probe.loss(input, target)?;
            probe.data[i] = orig;
            let numeric = (up - down) / (2.0 * spec.epsilon);
            let a = analytic[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        report.max_rel_error = report.max_rel_error.max(worst);
        report.per_entry.push((entry.name.clone(), worst));
    }
    Ok(report)
}
