//! Browser bindings for three small demonstrations: modality-dropout
//! statistics, the sparsity penalty curve, and a miniature training run.

use wasm_bindgen::prelude::*;

use lrmm::data::{DataConfig, Dataset, SplitName, SyntheticConfig};
use lrmm::eval::{evaluate, OffsetBaseline};
use lrmm::fusion::kl_sparsity;
use lrmm::imputation::{sample_mask, MDropConfig};
use lrmm::train::{stream_rng, train};
use lrmm::{Modality, Regime, TrainConfig};

/// Observed drop frequency of each modality (u, o, m, v) over `draws`
/// masks, followed by the analytic rate.
pub fn drop_frequencies(p_m: f64, draws: u32, seed: u64) -> Result<Vec<f64>, String> {
    let cfg = MDropConfig::with_rate(p_m);
    cfg.validate().map_err(|e| e.to_string())?;
    if draws == 0 {
        return Err("draws must be positive".into());
    }
    let mut rng = stream_rng(seed, 2);
    let mut dropped = [0u32; 4];
    for _ in 0..draws {
        let mask = sample_mask(&cfg, &mut rng);
        for m in Modality::ALL {
            if !mask.get(m) {
                dropped[m.index()] += 1;
            }
        }
    }
    let mut out: Vec<f64> = dropped.iter().map(|&d| d as f64 / draws as f64).collect();
    out.push(cfg.expected_drop_rate());
    Ok(out)
}

/// Sparsity penalty of one hidden unit whose mean activation sweeps
/// `points` evenly spaced values in (0, 1).
pub fn sparsity_curve(rho: f64, points: u32) -> Result<Vec<f64>, String> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err("rho must lie in (0, 1)".into());
    }
    (0..points)
        .map(|i| {
            let mean = (i as f64 + 0.5) / points as f64;
            kl_sparsity(&[vec![mean]], rho).map_err(|e| e.to_string())
        })
        .collect()
}

/// Trains a small model on a synthetic corpus and returns
/// `regime,rmse` CSV rows for every regime plus the mean-rating baseline.
pub fn tiny_run(p_m: f64, epochs: u32, seed: u64) -> Result<String, String> {
    if epochs == 0 || epochs > 200 {
        return Err("epochs must lie in [1, 200]".into());
    }
    let (raw, _) = SyntheticConfig {
        n_reviews: 400,
        n_users: 40,
        n_items: 20,
        feature_dim: 8,
        user_item_correlation: 0.7,
        seed,
        ..Default::default()
    }
    .generate();
    let ds = Dataset::build(
        raw,
        &DataConfig {
            min_freq: 1,
            l_max: 10,
            seed,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        batch_size: 8,
        lr: 1.0,
        max_epochs: epochs as usize,
        patience: epochs as usize,
        seed,
        embed_dim: 8,
        lstm_hidden: 8,
        ae_hidden: 16,
        mix_lr_scale: 0.01,
        mdrop: MDropConfig::with_rate(p_m),
        ..Default::default()
    };
    let out = train(&ds, &cfg).map_err(|e| e.to_string())?;
    let mut csv = String::from("regime,rmse\n");
    for r in Regime::ALL {
        let rep = evaluate(&out.model, &ds, SplitName::Test, r, "").map_err(|e| e.to_string())?;
        csv.push_str(&format!("{},{:.4}\n", rep.regime, rep.rmse));
    }
    let test = ds.samples(SplitName::Test).map_err(|e| e.to_string())?;
    let base = OffsetBaseline::fit(&ds.train_ratings())
        .and_then(|b| b.report(&test, ""))
        .map_err(|e| e.to_string())?;
    csv.push_str(&format!("offset,{:.4}\n", base.rmse));
    Ok(csv)
}

#[wasm_bindgen(js_name = dropFrequencies)]
pub fn drop_frequencies_js(p_m: f64, draws: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    drop_frequencies(p_m, draws, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sparsityCurve)]
pub fn sparsity_curve_js(rho: f64, points: u32) -> Result<Vec<f64>, JsError> {
    sparsity_curve(rho, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = tinyRun)]
pub fn tiny_run_js(p_m: f64, epochs: u32, seed: u32) -> Result<String, JsError> {
    tiny_run(p_m, epochs, seed as u64).map_err(|e| JsError::new(&e))
}
