use std::collections::BTreeMap;

use geoproxy::tabular::{CensusYear, TehsilVector10, VillageRecord};
use geoproxy::temporal::{
    fit_histogram, fit_linear_ot, tehsil_aggregate, temporal_eval, AlignmentTransform, TemporalInputs, TransformKind,
    HISTOGRAM_BINS,
};
use geoproxy::transfer::district_embeddings;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize, shift: f64, mix: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            (0..dim).map(|d| shift + z[d] + mix * z[(d + 1) % dim]).collect()
        })
        .collect()
}

fn mean_cov(xs: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let (n, d) = (xs.len() as f64, xs[0].len());
    let m: Vec<f64> = (0..d).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n).collect();
    let c = DMatrix::from_fn(d, d, |i, j| xs.iter().map(|x| (x[i] - m[i]) * (x[j] - m[j])).sum::<f64>() / (n - 1.0));
    (m, c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn linear_ot_transports_moments(seed in 0u64..10_000, dim in 1usize..6, shift in -2.0f64..2.0, mix in 0.0f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let source = cloud(&mut rng, 200, dim, 0.0, 0.3);
        let target = cloud(&mut rng, 150, dim, shift, mix);
        let g = fit_linear_ot(&source, &target).unwrap();
        let mapped = g.apply_all(&source).unwrap();
        let ((m1, c1), (m2, c2)) = (mean_cov(&mapped), mean_cov(&target));
        for (a, b) in m1.iter().zip(&m2) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert!((c1 - c2).amax() < 1e-8);
        let AlignmentTransform::LinearOt { a, .. } = g else { unreachable!() };
        prop_assert!(a.symmetric_eigen().eigenvalues.min() >= 0.0);
    }

    #[test]
    fn histogram_map_is_monotone(seed in 0u64..10_000, n in 20usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let source = cloud(&mut rng, n, 2, 0.0, 0.0);
        let target = cloud(&mut rng, n + 7, 2, 0.6, 0.5);
        let g = fit_histogram(&source, &target, HISTOGRAM_BINS).unwrap();
        for d in 0..2 {
            let mut xs: Vec<f64> = source.iter().map(|x| x[d]).collect();
            xs.sort_by(f64::total_cmp);
            let ys: Vec<f64> = xs.iter().map(|x| {
                let mut p = vec![0.0; 2];
                p[d] = *x;
                g.apply(&p).unwrap()[d]
            }).collect();
            prop_assert!(ys.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        }
    }

    #[test]
    fn aggregation_ignores_record_order(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut records = Vec::new();
        let mut values = BTreeMap::new();
        for i in 0..rng.random_range(1..40) {
            let id = format!("V{i}");
            records.push(VillageRecord {
                village_id: id.clone(),
                lat: 0.0,
                lon: 0.0,
                population: rng.random_range(0.0..1000.0),
                tehsil_id: format!("T{}", i % 3),
                district_id: format!("D{}", i % 2),
                state_id: "S".into(),
            });
            values.insert(id, vec![rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0)]);
        }
        let forward = tehsil_aggregate(&values, &records).unwrap();
        let districts = district_embeddings(&values, &records).unwrap();
        records.reverse();
        let backward = tehsil_aggregate(&values, &records).unwrap();
        for (a, b) in forward.iter().zip(&backward) {
            prop_assert_eq!(&a.tehsil_id, &b.tehsil_id);
            prop_assert!(a.prediction.iter().zip(&b.prediction).all(|(x, y)| (x - y).abs() < 1e-12));
        }
        let total: f64 = forward.iter().map(|t| t.population).sum();
        let total_d: f64 = districts.iter().map(|d| d.total_population).sum();
        prop_assert!((total - total_d).abs() < 1e-6);
    }
}

#[test]
fn villages_without_predictions_are_left_out() {
    let rec = |id: &str, tehsil: &str, pop: f64| VillageRecord {
        village_id: id.into(),
        lat: 0.0,
        lon: 0.0,
        population: pop,
        tehsil_id: tehsil.into(),
        district_id: "D".into(),
        state_id: "S".into(),
    };
    let records = vec![rec("a", "T1", 100.0), rec("b", "T1", 300.0), rec("c", "T2", 50.0)];
    let preds = BTreeMap::from([("a".to_string(), vec![1.0]), ("b".to_string(), vec![0.0])]);
    let out = tehsil_aggregate(&preds, &records).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].prediction, vec![0.25]);
    assert_eq!((out[0].n_villages, out[0].population), (2, 400.0));
}

#[test]
fn no_drift_means_transforms_change_little() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut preds, mut early, mut late) = (BTreeMap::new(), BTreeMap::new(), BTreeMap::new());
    for i in 0..80 {
        let z: f64 = rng.random_range(0.0..1.0);
        let v: [f64; 10] = std::array::from_fn(|d| 0.1 + 0.6 * z + 0.01 * d as f64 + 0.05 * rng.random_range(-1.0..1.0));
        let id = format!("T{i:02}");
        let noisy: Vec<f64> = v.iter().map(|x| x + 0.02 * rng.random_range(-1.0..1.0)).collect();
        preds.insert(id.clone(), noisy);
        early.insert(id.clone(), TehsilVector10 { year: CensusYear::Y2001, values: v });
        late.insert(id, TehsilVector10 { year: CensusYear::Y2011, values: v });
    }
    let inputs = TemporalInputs {
        predictions: &preds,
        truth_early: &early,
        truth_late: &late,
    };
    let rep = temporal_eval(&inputs, &TransformKind::ALL, 0.5, 9).unwrap();
    for kind in TransformKind::ALL {
        let score = rep.rows.iter().filter(|r| r.transform == kind).filter_map(|r| r.r2).fold(f64::INFINITY, f64::min);
        assert!(score > 0.8, "{} {score}", kind.name());
    }
    assert_eq!(rep.train_tehsils.len() + rep.test_tehsils.len(), 80);
}
