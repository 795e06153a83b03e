use geoproxy::model::*;
use geoproxy::raster::LatLon;
use geoproxy::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Direct evaluation of the tiny network from its named arrays, written
/// without the production layout helpers.
fn naive_forward(p: &ModelParams<f64>, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let cfg = &p.config;
    let get = |n: &str| p.entry(n).unwrap().to_vec();
    let conv = |x: &[f64], c_in: usize, hw: usize, name: &str, k: usize, s: usize, pad: i64| -> (Vec<f64>, usize, usize) {
        let w = get(&format!("{name}.weight"));
        let b = get(&format!("{name}.bias"));
        let c_out = b.len();
        let ohw = (hw + 2 * pad as usize - k) / s + 1;
        let mut out = vec![0.0; c_out * ohw * ohw];
        for oc in 0..c_out {
            for oy in 0..ohw {
                for ox in 0..ohw {
                    let mut acc = b[oc];
                    for ic in 0..c_in {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * s + ky) as i64 - pad;
                                let ix = (ox * s + kx) as i64 - pad;
                                if iy < 0 || ix < 0 || iy >= hw as i64 || ix >= hw as i64 {
                                    continue;
                                }
                                acc += w[((oc * c_in + ic) * k + ky) * k + kx]
                                    * x[(ic * hw + iy as usize) * hw + ix as usize];
                            }
                        }
                    }
                    out[(oc * ohw + oy) * ohw + ox] = acc;
                }
            }
        }
        (out, c_out, ohw)
    };
    let relu = |v: Vec<f64>| v.into_iter().map(|a| a.max(0.0)).collect::<Vec<_>>();
    let (a, mut c, mut hw) = conv(x, cfg.input_channels, cfg.input_size, "stem", cfg.stem_kernel, cfg.stem_kernel, 0);
    let mut a = relu(a);
    for (s, _) in cfg.block_widths.iter().enumerate() {
        let name = format!("stage{s}.block0");
        let stride = if s == 0 { 1 } else { 2 };
        let (h, c1, hw1) = conv(&a, c, hw, &format!("{name}.conv1"), 3, stride, 1);
        let (z, _, _) = conv(&relu(h), c1, hw1, &format!("{name}.conv2"), 3, 1, 1);
        let sc = if p.entry(&format!("{name}.proj.weight")).is_some() {
            conv(&a, c, hw, &format!("{name}.proj"), 1, stride, 0).0
        } else {
            a.clone()
        };
        a = relu(z.iter().zip(&sc).map(|(u, v)| u + v).collect());
        c = c1;
        hw = hw1;
    }
    let pooled: Vec<f64> = (0..c)
        .map(|ch| a[ch * hw * hw..(ch + 1) * hw * hw].iter().sum::<f64>() / (hw * hw) as f64)
        .collect();
    let (ew, eb) = (get("embed.weight"), get("embed.bias"));
    let e = cfg.embedding_dim;
    let emb: Vec<f64> = (0..e)
        .map(|j| (eb[j] + (0..c).map(|i| ew[i * e + j] * pooled[i]).sum::<f64>()).max(0.0))
        .collect();
    let (hw_, hb) = (get("head.weight"), get("head.bias"));
    let o = cfg.output_dim;
    let out = (0..o)
        .map(|j| hb[j] + (0..e).map(|i| hw_[i * o + j] * emb[i]).sum::<f64>())
        .collect();
    (emb, out)
}

fn randomized_tiny(seed: u64, outputs: usize) -> ModelParams<f64> {
    let mut p = ModelParams::<f64>::init(&ConvRegressorConfig::tiny(outputs, seed)).unwrap();
    let noise = random_vec(p.data.len(), seed + 100);
    for (v, n) in p.data.iter_mut().zip(noise) {
        *v += 0.3 * n;
    }
    p
}

#[test]
fn zero_head_outputs_bias() {
    let mut p = ModelParams::<f64>::init(&ConvRegressorConfig::tiny(3, 1)).unwrap();
    let (w, b) = (p.arch.entries.len() - 2, p.arch.entries.len() - 1);
    let (wo, bo) = (p.arch.entries[w].offset, p.arch.entries[b].offset);
    p.data[wo..bo].fill(0.0);
    p.data[bo..].copy_from_slice(&[0.5, -1.25, 3.0]);
    let y = p.forward(&random_vec(192, 2)).unwrap();
    assert_eq!(y, vec![0.5, -1.25, 3.0]);
}

#[test]
fn forward_matches_direct_convolution_oracle() {
    for seed in 0..5 {
        let p = randomized_tiny(seed, 4);
        let x = random_vec(p.config.input_len(), seed + 7);
        let (emb, out) = naive_forward(&p, &x);
        let got = p.forward(&x).unwrap();
        let got_emb = p.embed(&x).unwrap();
        for (a, b) in got.iter().zip(&out) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        for (a, b) in got_emb.iter().zip(&emb) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(p.forward(&x).unwrap(), got);
    }
}

#[test]
fn forward_is_head_of_embedding() {
    let p = randomized_tiny(3, 2);
    let x = random_vec(192, 9);
    assert_eq!(p.forward(&x).unwrap(), p.apply_head(&p.embed(&x).unwrap()));
    assert_eq!(p.embed(&x).unwrap().len(), 5);
}

#[test]
fn shape_mismatch_is_schema_error() {
    let p = ModelParams::<f32>::init(&ConvRegressorConfig::tiny(1, 0)).unwrap();
    assert!(matches!(p.forward(&[0.0; 10]), Err(Error::Schema(_))));
}

#[test]
fn config_validation() {
    let mut c = ConvRegressorConfig::tiny(1, 0);
    c.block_widths.clear();
    assert!(Architecture::new(&c).is_err());
    let mut c = ConvRegressorConfig::tiny(1, 0);
    c.embedding_dim = 0;
    assert!(Architecture::new(&c).is_err());
    let mut c = ConvRegressorConfig::tiny(1, 0);
    c.input_size = 9;
    assert!(Architecture::new(&c).is_err());
}

#[test]
fn gradient_checks() {
    let p = randomized_tiny(11, 3);
    let x = random_vec(192, 12);
    let t = [0.3, -0.2, 1.0];
    let head = GradCheckSpec {
        head_only: true,
        per_entry: 20,
        ..Default::default()
    };
    assert!(grad_check(&p, &x, &t, &head).unwrap().max_rel_error < 1e-7);

    let full = GradCheckSpec {
        per_entry: 8,
        seed: 4,
        ..Default::default()
    };
    let report = grad_check(&p, &x, &t, &full).unwrap();
    assert!(report.max_rel_error < 1e-4, "{:?}", report.per_entry);
    assert!(report.per_entry.iter().any(|(n, _)| n.contains("proj")));

    let corrupted = grad_check_with(&p, &x, &t, &full, |g| {
        for v in g.iter_mut() {
            *v *= 1.1;
        }
    })
    .unwrap();
    assert!(corrupted.max_rel_error > 1e-2);
}

#[test]
fn replace_head_keeps_extractor() {
    let std = ModelParams::<f32>::init(&ConvRegressorConfig::standard(1, 0)).unwrap();
    let swapped = std.replace_head(16, 5).unwrap();
    let head = swapped.arch.entries.iter().find(|e| e.name == "head.weight").unwrap();
    assert_eq!(head.shape, vec![512, 16]);
    assert_eq!(swapped.extractor(), std.extractor());

    let p = randomized_tiny(2, 3);
    let a = p.replace_head(4, 77).unwrap();
    let b = p.replace_head(4, 77).unwrap();
    assert_eq!(a.data, b.data);
    let x = random_vec(192, 1);
    assert_eq!(a.embed(&x).unwrap(), p.embed(&x).unwrap());
    let bound = 1.0 / 5f64.sqrt();
    assert!(a.head_weight().iter().all(|w| w.abs() <= bound));
}

#[test]
fn checkpoint_roundtrip_preserves_f32_params() {
    let p = ModelParams::<f32>::init(&ConvRegressorConfig::tiny(2, 9)).unwrap();
    let ck = p.to_checkpoint(serde_json::json!({"note": "x"}));
    let bytes = ck.encode();
    let back = geoproxy::container::Checkpoint::decode(&bytes).unwrap();
    let (q, extra) = ModelParams::<f32>::from_checkpoint(&back).unwrap();
    assert_eq!(q.data, p.data);
    assert_eq!(q.config, p.config);
    assert_eq!(extra["note"], "x");
}

struct Toy {
    inputs: Vec<Vec<f32>>,
    targets: Vec<Vec<f64>>,
    strata: Vec<String>,
}

fn toy(n: usize, seed: u64, constant: Option<f64>) -> Toy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Toy {
        inputs: vec![],
        targets: vec![],
        strata: vec![],
    };
    for i in 0..n {
        let level: f64 = rng.random_range(0.0..1.0);
        let x: Vec<f32> = (0..192)
            .map(|k| {
                let band = k / 64;
                (level * (band as f64 + 1.0) + 0.1 * rng.random_range(-1.0..1.0)) as f32
            })
            .collect();
        t.inputs.push(x);
        t.targets.push(vec![constant.unwrap_or(2.0 * level + 1.0), constant.unwrap_or(-level)]);
        t.strata.push(format!("S{}", i % 2));
    }
    t
}

fn dataset(t: &Toy) -> Dataset<'_, f32> {
    Dataset {
        inputs: t.inputs.iter().map(|v| v.as_slice()).collect(),
        targets: t.targets.clone(),
        strata: t.strata.clone(),
    }
}

fn small_spec(seed: u64, epochs: usize) -> TrainSpec {
    TrainSpec {
        batch_size: 16,
        max_epochs: epochs,
        seed,
        learning_rate: 5e-3,
        ..Default::default()
    }
}

#[test]
fn constant_targets_are_learned() {
    let t = toy(40, 1, Some(3.5));
    let init = ModelParams::init(&ConvRegressorConfig::tiny(2, 0)).unwrap();
    let out = train(&dataset(&t), &small_spec(0, 5), init).unwrap();
    assert!(out.best_val_mse() < 1e-4, "{:?}", out.history);
    let y = out.params.forward(&t.inputs[0]).unwrap();
    assert!((y[0] - 3.5).abs() < 1e-2 && (y[1] - 3.5).abs() < 1e-2);
}

#[test]
fn training_beats_mean_predictor_and_is_reproducible() {
    let t = toy(120, 2, None);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let init = ModelParams::init(&ConvRegressorConfig::tiny(2, 3)).unwrap();
            train(&dataset(&t), &small_spec(7, 15), init).unwrap()
        })
    };
    let a = run(1);
    assert!(a.best_val_mse() < 0.5 * a.mean_predictor_mse, "{} vs {}", a.best_val_mse(), a.mean_predictor_mse);
    assert!(a.beats_mean_predictor());
    let b = run(1);
    assert_eq!(a.params.data, b.params.data);
    let c = run(3);
    assert_eq!(a.params.data, c.params.data);
    assert_eq!(a.params.data.len(), ModelParams::<f32>::init(&ConvRegressorConfig::tiny(2, 3)).unwrap().data.len());
}

#[test]
fn split_is_stratified_and_disjoint() {
    let strata: Vec<String> = (0..50).map(|i| if i < 40 { "A".into() } else { "B".into() }).collect();
    let (tr, va) = stratified_split(&strata, 0.8, 3);
    assert_eq!(tr.len() + va.len(), 50);
    assert_eq!(va.iter().filter(|&&i| i < 40).count(), 8);
    assert_eq!(va.iter().filter(|&&i| i >= 40).count(), 2);
    assert!(tr.iter().all(|i| !va.contains(i)));
}

#[test]
fn nan_loss_names_the_batch() {
    let mut t = toy(20, 3, None);
    t.inputs[5][0] = f32::NAN;
    let init = ModelParams::init(&ConvRegressorConfig::tiny(2, 0)).unwrap();
    let err = train(&dataset(&t), &small_spec(0, 2), init).unwrap_err();
    assert!(matches!(err, Error::Numerical(ref m) if m.contains("batch")), "{err}");
}

#[test]
fn history_csv() {
    let t = toy(20, 4, None);
    let init = ModelParams::init(&ConvRegressorConfig::tiny(2, 0)).unwrap();
    let out = train(&dataset(&t), &small_spec(0, 3), init).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    write_history(&path, &out.history).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("epoch,train_mse,val_mse\n1,"));
    assert_eq!(text.lines().count(), 4);
}

fn uniform_grid(rows: usize, cols: usize, f: impl Fn(usize, usize) -> u8) -> NightlightGrid {
    let values = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
    NightlightGrid::new(20.0, 75.0, rows, cols, values).unwrap()
}

#[test]
fn nightlight_single_cell_and_straddle() {
    // A 3.36 km footprint spans about 0.03 degrees, so use 100 cells of 12.
    let g = uniform_grid(100, 100, |_, _| 12);
    assert_eq!(sample_nightlight(&g, LatLon::new(19.8, 75.2)).unwrap(), 12.0);
    let g = uniform_grid(100, 100, |_, c| if c < 50 { 10 } else { 20 });
    let boundary = 75.0 + 50.0 * NIGHTLIGHT_CELL_DEG;
    let v = sample_nightlight(&g, LatLon::new(19.8, boundary)).unwrap();
    assert!((v - 15.0).abs() < 1e-9, "{v}");
    assert!(matches!(
        sample_nightlight(&g, LatLon::new(25.0, 75.2)),
        Err(Error::Coverage(_))
    ));
}

/// Exact area integral of the piecewise-constant grid via a 2D prefix sum
/// over cell boundaries.
fn integral_oracle(g: &NightlightGrid, lat0: f64, lat1: f64, lon0: f64, lon1: f64) -> f64 {
    let c = NIGHTLIGHT_CELL_DEG;
    let mut prefix = vec![vec![0.0f64; g.cols + 1]; g.rows + 1];
    for r in 0..g.rows {
        for k in 0..g.cols {
            prefix[r + 1][k + 1] = prefix[r][k + 1] + prefix[r + 1][k] - prefix[r][k] + g.get(r, k) as f64 * c * c;
        }
    }
    // F(y, x): integral over rows [north - y, north] and cols [west, west + x].
    let big_f = |y: f64, x: f64| {
        let (ry, rx) = ((y / c).floor() as usize, (x / c).floor() as usize);
        let (ry, rx) = (ry.min(g.rows), rx.min(g.cols));
        let (fy, fx) = (y - ry as f64 * c, x - rx as f64 * c);
        let mut v = prefix[ry][rx];
        if ry < g.rows {
            for k in 0..rx {
                v += g.get(ry, k) as f64 * c * fy;
            }
        }
        if rx < g.cols {
            for r in 0..ry {
                v += g.get(r, rx) as f64 * c * fx;
            }
        }
        if ry < g.rows && rx < g.cols {
            v += g.get(ry, rx) as f64 * fy * fx;
        }
        v
    };
    let (ya, yb) = (g.north - lat1, g.north - lat0);
    let (xa, xb) = (lon0 - g.west, lon1 - g.west);
    (big_f(yb, xb) - big_f(ya, xb) - big_f(yb, xa) + big_f(ya, xa)) / ((lat1 - lat0) * (lon1 - lon0))
}

#[test]
fn nightlight_matches_area_integral_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let values: Vec<u8> = (0..60 * 60).map(|_| rng.random_range(0..=63)).collect();
    let g = NightlightGrid::new(20.0, 75.0, 60, 60, values).unwrap();
    for _ in 0..200 {
        let lat = rng.random_range(19.55..19.95);
        let lon = rng.random_range(75.05..75.45);
        let fp = geoproxy::raster::AoiFootprint::new("v", LatLon::new(lat, lon));
        let (hl, hn) = fp.half_extent_deg();
        let want = integral_oracle(&g, lat - hl, lat + hl, lon - hn, lon + hn);
        let got = sample_nightlight(&g, LatLon::new(lat, lon)).unwrap();
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn nightlight_grid_validation_and_raster_roundtrip() {
    assert!(NightlightGrid::new(0.0, 0.0, 1, 1, vec![64]).is_err());
    let g = uniform_grid(4, 5, |r, c| (r * 5 + c) as u8);
    assert_eq!(NightlightGrid::from_raster(&g.to_raster()).unwrap(), g);
}

#[test]
fn nightlight_baseline_predictions_are_clipped_and_constant_world_degenerates() {
    let mut t = toy(30, 6, Some(40.0));
    for tg in &mut t.targets {
        tg.truncate(1);
    }
    let out = train_nightlight_baseline(&dataset(&t), &small_spec(1, 4), &ConvRegressorConfig::tiny(1, 0)).unwrap();
    let preds: Vec<f64> = t.inputs.iter().map(|x| predict_nightlight(&out.params, x).unwrap()).collect();
    assert!(preds.iter().all(|p| (p - 40.0).abs() < 0.1));

    let mut p = out.params.clone();
    let last = p.data.len() - 1;
    p.data[last] = 500.0;
    assert_eq!(predict_nightlight(&p, &t.inputs[0]).unwrap(), 63.0);
    p.data[last] = -500.0;
    assert_eq!(predict_nightlight(&p, &t.inputs[0]).unwrap(), 0.0);
}
