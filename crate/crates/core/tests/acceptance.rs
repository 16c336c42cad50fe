//! Acceptance gate. Each test prints one `PASS`/`FAIL` line and then
//! asserts. Tests take a shared lock so wall-clock limits measure only the
//! test's own work.

use std::io::Write;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lrmm::data::{DataConfig, Dataset, Document, RawData, Sample, SplitName, SyntheticConfig};
use lrmm::encoders::Mode;
use lrmm::eval::{evaluate, mae, reports_csv, rmse, ItemOffsetBaseline, OffsetBaseline, Regime};
use lrmm::experiments::sparsify_experiment;
use lrmm::fusion::{kl_sparsity, reconstruction_loss, regression_loss};
use lrmm::gradcheck::{check_gradients, GradCheckConfig};
use lrmm::graph::Graph;
use lrmm::imputation::{sample_mask, MDropConfig};
use lrmm::train::{train, train_model};
use lrmm::{Modality, ModalityMask, Model, ModelConfig, Objective, ParameterStore, TrainConfig};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(name: &str, pass: bool, detail: &str, elapsed: Duration, limit: Option<Duration>) {
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let ok = pass && in_time;
    let budget = limit.map_or(String::new(), |l| format!(", limit {}s", l.as_secs()));
    // written past the test harness capture so the line shows on success too
    let line = format!(
        "[acceptance] {} {name}: {detail} ({:.1}s{budget})\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes()).and_then(|_| out.flush());
    assert!(pass, "{name} failed: {detail}");
    assert!(in_time, "{name} exceeded its time limit");
}

/// Small-model training settings shared by the ordering checks.
fn desk_train_cfg(p_m: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        lr: 1.0,
        max_epochs: 200,
        patience: 30,
        seed,
        embed_dim: 16,
        lstm_hidden: 16,
        ae_hidden: 32,
        mdrop: MDropConfig::with_rate(p_m),
        mix_lr_scale: 0.01,
        ..Default::default()
    }
}

fn desk_data_cfg(l_max: usize, seed: u64) -> DataConfig {
    DataConfig {
        min_freq: 1,
        l_max,
        seed,
        ..Default::default()
    }
}

fn corpus(n_reviews: usize, n_users: usize, n_items: usize, seed: u64) -> RawData {
    correlated_corpus(n_reviews, n_users, n_items, 0.0, seed)
}

fn correlated_corpus(n_reviews: usize, n_users: usize, n_items: usize, correlation: f64, seed: u64) -> RawData {
    SyntheticConfig {
        n_reviews,
        n_users,
        n_items,
        feature_dim: 16,
        user_item_correlation: correlation,
        seed,
        ..Default::default()
    }
    .generate()
    .0
}

// ---------------------------------------------------------------- gradients

fn random_doc(rng: &mut ChaCha8Rng, vocab: u32, l_max: usize) -> Document {
    let n = rng.random_range(1..=l_max);
    Document {
        token_ids: (0..n).map(|_| rng.random_range(2..vocab)).collect(),
        original_length: n,
    }
}

#[test]
fn gradient_suite() {
    let _g = serial();
    let start = Instant::now();
    let (vocab, visual) = (20, 12);
    let model = Model::new(
        &ModelConfig {
            vocab_size: vocab,
            embed_dim: 8,
            lstm_hidden: 8,
            ae_hidden: 16,
            visual_in_dim: visual,
        },
        3,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let samples: Vec<Sample> = (0..4)
        .map(|i| Sample {
            key: format!("s{i}"),
            review_index: i,
            user_id: format!("u{i}"),
            item_id: format!("o{i}"),
            user_doc: random_doc(&mut rng, vocab as u32, 5),
            item_doc: random_doc(&mut rng, vocab as u32, 5),
            meta_doc: random_doc(&mut rng, vocab as u32, 5),
            image_feat: (i != 2).then(|| Arc::new((0..visual).map(|_| rng.random_range(-1.0..1.0)).collect())),
            rating: rng.random_range(1.0..5.0),
            mask: ModalityMask::ALL.with(Modality::Visual, i != 2),
        })
        .collect();
    let mut store = model.store.clone();
    // mixing weights off their initial values; bias at the mean rating as in training
    store.value_mut(model.fusion.alpha_raw).fill(0.3);
    store.value_mut(model.fusion.beta_raw).fill(-0.2);
    store
        .value_mut(model.fusion.b)
        .fill(samples.iter().map(|s| s.rating).sum::<f64>() / 4.0);
    let masks = [
        ModalityMask::ALL,
        ModalityMask::ALL.with(Modality::User, false),
        ModalityMask::ALL,
        ModalityMask::ALL.with(Modality::Meta, false),
    ];
    let handles = model.clone();
    let check = |detach_target: bool| {
        let objective = Objective {
            lambda: 0.01,
            detach_target,
            ..Default::default()
        };
        let loss = |st: &ParameterStore| {
            let m = Model { store: st.clone(), ..handles.clone() };
            let refs: Vec<&Sample> = samples.iter().collect();
            let mut g = Graph::new(&m.store);
            let mut drng = ChaCha8Rng::seed_from_u64(5);
            let out = m.forward_batch(&mut g, &refs, &masks, Mode::Train, 0.5, Some(&objective), &mut drng)?;
            let total = out.total.expect("objective");
            let grads = g.backward(total)?;
            Ok((g.scalar(total), Some(grads)))
        };
        check_gradients(&store, loss, &GradCheckConfig::default()).unwrap()
    };
    // the full loss, gradients flowing through the reconstruction targets
    let full = check(false);
    // training detaches the targets; finite differences still see them move,
    // so only tensors downstream of the encoders are comparable
    let detached = check(true);
    let downstream: Vec<_> = detached
        .tensors
        .iter()
        .filter(|t| t.name.starts_with("ae.") || t.name.starts_with("fusion."))
        .collect();
    let downstream_err = downstream.iter().map(|t| t.max_rel_err).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let n_tensors = store.len();
    let checked: usize = full.tensors.iter().map(|t| t.checked).sum();
    let pass = full.passed()
        && full.tensors.len() == n_tensors
        && checked == store.num_scalars()
        && downstream.len() == 4 * 4 + 4
        && downstream_err < 1e-4;
    if !full.passed() {
        eprintln!("{full}");
    }
    verdict(
        "gradient_suite",
        pass,
        &format!(
            "full loss: {} tensors, {checked} entries, max rel err {:.2e} < 1e-4; \
             detached-target loss: {} autoencoder/fusion tensors, max rel err {downstream_err:.2e} < 1e-4",
            full.tensors.len(),
            full.max_rel_err(),
            downstream.len(),
        ),
        elapsed,
        Some(Duration::from_secs(60)),
    );
}

// ------------------------------------------------------------ loss oracles

fn ref_kl(hidden: &[Vec<f64>], rho: f64) -> f64 {
    let n = hidden.len() as f64;
    let mut h = 0.0;
    for i in 0..hidden[0].len() {
        let mut mean = 0.0;
        for row in hidden {
            mean += row[i];
        }
        let r = (mean / n).clamp(1e-7, 1.0 - 1e-7);
        h += rho * (rho / r).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - r)).ln();
    }
    h
}

fn ref_regression(p: &[f64], t: &[f64], lambda: f64, theta: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - t[i]) * (p[i] - t[i]);
    }
    let mut n = 0.0;
    for x in theta {
        n += x * x;
    }
    s / p.len() as f64 + lambda * n.sqrt()
}

fn ref_recon(r: &[Vec<f64>], t: &[Vec<f64>], h: &[Vec<f64>], rho: f64, lambda_rho: f64) -> f64 {
    let mut s = 0.0;
    for b in 0..r.len() {
        for k in 0..r[b].len() {
            s += (r[b][k] - t[b][k]).powi(2);
        }
    }
    s / r.len() as f64 + lambda_rho * ref_kl(h, rho)
}

#[allow(clippy::manual_clamp, clippy::needless_range_loop)]
fn ref_rmse_mae(p: &[f64], t: &[f64]) -> (f64, f64) {
    let (mut se, mut ae) = (0.0, 0.0);
    for i in 0..p.len() {
        let c = if p[i] < 1.0 {
            1.0
        } else if p[i] > 5.0 {
            5.0
        } else {
            p[i]
        };
        se += (c - t[i]) * (c - t[i]);
        ae += (c - t[i]).abs();
    }
    ((se / p.len() as f64).sqrt(), ae / p.len() as f64)
}

fn matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..cols).map(|_| rng.random_range(lo..hi)).collect()).collect()
}

#[test]
fn loss_component_oracles() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let tol = 1e-12;
    let mut worst = [0.0f64; 5];
    for _ in 0..100 {
        let b = rng.random_range(1..12);
        let dh = rng.random_range(1..20);
        let d = rng.random_range(1..10);
        let rho = rng.random_range(0.01..0.99);

        let hidden = matrix(&mut rng, b, dh, 1e-4, 1.0 - 1e-4);
        worst[0] = worst[0].max((kl_sparsity(&hidden, rho).unwrap() - ref_kl(&hidden, rho)).abs());

        let preds: Vec<f64> = (0..b).map(|_| rng.random_range(-1.0..7.0)).collect();
        let truths: Vec<f64> = (0..b).map(|_| rng.random_range(1.0..5.0)).collect();
        let theta = matrix(&mut rng, 1, 4 * d + 1, -1.0, 1.0).remove(0);
        let lambda = rng.random_range(0.0..0.1);
        let got = regression_loss(&preds, &truths, lambda, &[&theta[..4 * d], &theta[4 * d..]], false).unwrap();
        worst[1] = worst[1].max((got - ref_regression(&preds, &truths, lambda, &theta)).abs());

        let r = matrix(&mut rng, b, d, 0.0, 1.0);
        let t = matrix(&mut rng, b, d, -1.0, 1.0);
        let lambda_rho = rng.random_range(0.0..0.1);
        let got = reconstruction_loss(&r, &t, &hidden, rho, lambda_rho).unwrap();
        worst[2] = worst[2].max((got - ref_recon(&r, &t, &hidden, rho, lambda_rho)).abs());

        let (er, em) = ref_rmse_mae(&preds, &truths);
        worst[3] = worst[3].max((rmse(&preds, &truths).unwrap() - er).abs());
        worst[4] = worst[4].max((mae(&preds, &truths).unwrap() - em).abs());
    }
    let pass = worst.iter().all(|&w| w <= tol);
    verdict(
        "loss_component_oracles",
        pass,
        &format!(
            "max abs diff kl {:.1e}, regression {:.1e}, reconstruction {:.1e}, rmse {:.1e}, mae {:.1e} (tol 1e-12)",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
        start.elapsed(),
        Some(Duration::from_secs(5)),
    );
}

// ---------------------------------------------------------- mask statistics

/// Exact per-modality drop probability under the redraw rule, by
/// enumerating how many modalities survive.
fn drop_frequency_oracle(p_m: f64, n_m: usize, min_kept: usize) -> f64 {
    let q = 1.0 / n_m as f64;
    let binom = |n: usize, k: usize| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    let (mut z, mut dropped) = (0.0, 0.0);
    for kept in min_kept..=n_m {
        let p = binom(n_m, kept) * (1.0 - q).powi(kept as i32) * q.powi((n_m - kept) as i32);
        z += p;
        dropped += p * (n_m - kept) as f64 / n_m as f64;
    }
    p_m * dropped / z
}

#[test]
fn mask_statistics() {
    let _g = serial();
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    assert!((drop_frequency_oracle(1.0, 4, 1) - 63.0 / 255.0).abs() < 1e-15);
    for p_m in [0.25, 0.5, 1.0] {
        let cfg = MDropConfig::with_rate(p_m);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut drops = [0usize; 4];
        for _ in 0..n {
            let m = sample_mask(&cfg, &mut rng);
            for (k, f) in m.flags().iter().enumerate() {
                if !f {
                    drops[k] += 1;
                }
            }
        }
        let oracle = drop_frequency_oracle(p_m, 4, 1);
        let worst = drops
            .iter()
            .map(|&c| (c as f64 / n as f64 - oracle).abs())
            .fold(0.0, f64::max);
        pass &= worst <= 0.01;
        details.push(format!("p_m={p_m}: oracle {oracle:.5}, max dev {worst:.4}"));
    }
    verdict(
        "mask_statistics",
        pass,
        &format!("{} (tol 0.01)", details.join("; ")),
        start.elapsed(),
        Some(Duration::from_secs(5)),
    );
}

// ------------------------------------------------------------------ overfit

#[test]
fn overfit_check() {
    let _g = serial();
    let start = Instant::now();
    let raw = SyntheticConfig {
        n_reviews: 50,
        n_users: 10,
        n_items: 8,
        rating_noise: 0.0,
        feature_dim: 16,
        seed: 11,
        ..Default::default()
    }
    .generate()
    .0;
    let ds = Dataset::build(
        raw,
        &DataConfig {
            ratios: lrmm::data::SplitRatios {
                train: 1.0 - 2.0 / 50.0,
                valid: 1.0 / 50.0,
                test: 1.0 / 50.0,
            },
            ..desk_data_cfg(20, 1)
        },
    )
    .unwrap();
    // capacity check: no dropout regularization
    let cfg = TrainConfig {
        batch_size: 2,
        dropout: 0.0,
        max_epochs: 200,
        patience: 200,
        embed_dim: 8,
        lstm_hidden: 8,
        ae_hidden: 16,
        ..desk_train_cfg(0.0, 5)
    };
    let train_samples = ds.samples(SplitName::Train).unwrap();
    let mut model = Model::new(&cfg.model_config(ds.vocab().len(), ds.feature_dim()), cfg.seed).unwrap();
    let mean = train_samples.iter().map(|s| s.rating).sum::<f64>() / train_samples.len() as f64;
    model.store.value_mut(model.fusion.b).fill(mean);
    // selection on the training set itself: this measures capacity
    let out = train_model(model, &train_samples, &train_samples, &cfg).unwrap();
    let r = out.best_valid_rmse;
    verdict(
        "overfit_check",
        r < 0.1,
        &format!("{} training samples, training RMSE {r:.4} < 0.1 by epoch {}", train_samples.len(), out.best_epoch),
        start.elapsed(),
        Some(Duration::from_secs(120)),
    );
}

// --------------------------------------------------------------- robustness

#[test]
fn robustness_ordering() {
    let _g = serial();
    let start = Instant::now();
    // users favour items at their own level, so item-side modalities carry some user signal
    let ds = Dataset::build(correlated_corpus(2000, 200, 100, 0.7, 21), &desk_data_cfg(20, 2)).unwrap();
    let plain = train(&ds, &desk_train_cfg(0.0, 4)).unwrap().model;
    let dropped = train(&ds, &desk_train_cfg(0.5, 4)).unwrap().model;
    let eval = |m: &Model, r: Regime| evaluate(m, &ds, SplitName::Test, r, "").unwrap().rmse;
    let (plain_u, drop_u) = (eval(&plain, Regime::Without(Modality::User)), eval(&dropped, Regime::Without(Modality::User)));
    let (plain_f, drop_f) = (eval(&plain, Regime::Full), eval(&dropped, Regime::Full));
    let margin = plain_u - drop_u;
    let degradation = drop_f - plain_f;
    verdict(
        "robustness_ordering",
        margin >= 0.02 && degradation < 0.05,
        &format!(
            "-U: p_m=0.5 {drop_u:.4} vs p_m=0 {plain_u:.4} (margin {margin:.4} >= 0.02); \
             +F: p_m=0.5 {drop_f:.4} vs p_m=0 {plain_f:.4} (degradation {degradation:.4} < 0.05)"
        ),
        start.elapsed(),
        Some(Duration::from_secs(600)),
    );
}

// ----------------------------------------------------------------- baseline

/// Reviews from `LRMM_REVIEWS` (optionally `LRMM_META`, `LRMM_FEATURES`),
/// else a synthetic corpus; the first 5000 reviews either way.
fn baseline_corpus() -> (RawData, &'static str) {
    match std::env::var("LRMM_REVIEWS") {
        Ok(path) => {
            let reviews = lrmm::data::load_reviews(&path).expect("LRMM_REVIEWS readable").records;
            let meta = std::env::var("LRMM_META")
                .map(|p| lrmm::data::load_metadata(p).expect("LRMM_META readable"))
                .unwrap_or_default();
            let features = std::env::var("LRMM_FEATURES")
                .map(|p| lrmm::data::load_image_features(p).expect("LRMM_FEATURES readable"))
                .unwrap_or_default();
            (RawData { reviews, meta, features }.truncated(5000), "supplied reviews")
        }
        Err(_) => (corpus(5000, 400, 200, 31), "synthetic corpus"),
    }
}

#[test]
fn baseline_ordering() {
    let _g = serial();
    let start = Instant::now();
    let (raw, source) = baseline_corpus();
    let ds = Dataset::build(raw, &desk_data_cfg(20, 4)).unwrap();
    let model = train(&ds, &desk_train_cfg(0.0, 6)).unwrap().model;
    let test = ds.samples(SplitName::Test).unwrap();
    let lrmm = evaluate(&model, &ds, SplitName::Test, Regime::Full, "").unwrap();
    let offset = OffsetBaseline::fit(&ds.train_ratings()).unwrap().report(&test, "").unwrap();
    let (dr, dm) = (offset.rmse - lrmm.rmse, offset.mae - lrmm.mae);
    verdict(
        "baseline_ordering",
        dr >= 0.01 && dm >= 0.01,
        &format!(
            "{source}, {} test samples: LRMM rmse {:.4} mae {:.4}; Offset rmse {:.4} mae {:.4} (gaps {dr:.4}, {dm:.4} >= 0.01)",
            lrmm.n_samples, lrmm.rmse, lrmm.mae, offset.rmse, offset.mae
        ),
        start.elapsed(),
        Some(Duration::from_secs(1800)),
    );
}

// --------------------------------------------------------------- cold start

#[test]
fn cold_start_degradation() {
    let _g = serial();
    let start = Instant::now();
    let ds = Dataset::build(corpus(2000, 200, 100, 41), &desk_data_cfg(20, 5)).unwrap();
    let ks = [None, Some(5), Some(1), Some(0)];
    let rows = sparsify_experiment(&ds, &ks, &desk_train_cfg(0.0, 7), 9).unwrap();
    let find = |k: Option<usize>, model: &str| rows.iter().find(|r| r.k == k && r.model == model).unwrap().rmse;
    let lrmm_inc = find(Some(0), "lrmm") - find(None, "lrmm");
    let item_inc = find(Some(0), "offset_item") - find(None, "offset_item");
    let curve: Vec<String> = ks
        .iter()
        .map(|&k| {
            let label = k.map_or("all".to_string(), |k| k.to_string());
            format!("k={label}: {:.4}/{:.4}", find(k, "lrmm"), find(k, "offset_item"))
        })
        .collect();
    // k=0 leaves no retained item reviews, so the per-item baseline is the global mean
    debug_assert!(ItemOffsetBaseline::fit(&ds.sparsify_items(Some(0), 9)).unwrap().per_item.is_empty());
    verdict(
        "cold_start_degradation",
        lrmm_inc < item_inc,
        &format!("rmse lrmm/offset_item {}; increase {lrmm_inc:.4} < {item_inc:.4}", curve.join(", ")),
        start.elapsed(),
        None,
    );
}

// -------------------------------------------------------------- determinism

#[test]
fn determinism() {
    let _g = serial();
    let start = Instant::now();
    let run = || {
        let ds = Dataset::build(corpus(400, 60, 30, 51), &desk_data_cfg(20, 6)).unwrap();
        let cfg = TrainConfig {
            max_epochs: 5,
            ..desk_train_cfg(0.5, 8)
        };
        let out = train(&ds, &cfg).unwrap();
        let reports: Vec<_> = Regime::ALL
            .iter()
            .map(|&r| evaluate(&out.model, &ds, SplitName::Test, r, "fixed").unwrap())
            .collect();
        reports_csv(&reports)
    };
    let (a, b) = (run(), run());
    verdict(
        "determinism",
        a == b,
        &format!("two seeded train+evaluate runs, {} report bytes identical: {}", a.len(), a == b),
        start.elapsed(),
        None,
    );
}
