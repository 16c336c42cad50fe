//! File formats and experiment protocols, end to end.

use lrmm::data::{
    load_image_features, load_metadata, load_reviews, metadata_to_jsonl, reviews_to_jsonl, DataConfig, Dataset, FeatureTable,
    RawData, SplitName, SyntheticConfig,
};
use lrmm::eval::{evaluate, Regime};
use lrmm::experiments::{cross_domain, length_sweep};
use lrmm::imputation::MDropConfig;
use lrmm::{train, Model, ModalityMask, TrainConfig};

fn small_raw(seed: u64) -> RawData {
    SyntheticConfig {
        n_reviews: 240,
        n_users: 30,
        n_items: 15,
        feature_dim: 6,
        seed,
        ..Default::default()
    }
    .generate()
    .0
}

fn data_cfg() -> DataConfig {
    DataConfig {
        min_freq: 1,
        l_max: 10,
        seed: 3,
        ..Default::default()
    }
}

fn quick_cfg() -> TrainConfig {
    TrainConfig {
        batch_size: 16,
        lr: 1.0,
        max_epochs: 3,
        patience: 3,
        seed: 9,
        embed_dim: 4,
        lstm_hidden: 4,
        ae_hidden: 8,
        mix_lr_scale: 0.01,
        mdrop: MDropConfig::with_rate(0.5),
        ..Default::default()
    }
}

#[test]
fn files_roundtrip_into_the_same_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let raw = small_raw(1);
    let (rp, mp, fp) = (
        dir.path().join("r.jsonl"),
        dir.path().join("m.jsonl"),
        dir.path().join("f.lrmmfeat"),
    );
    std::fs::write(&rp, reviews_to_jsonl(&raw.reviews)).unwrap();
    std::fs::write(&mp, metadata_to_jsonl(&raw.meta)).unwrap();
    raw.features.save(&fp).unwrap();

    let loaded = RawData {
        reviews: load_reviews(&rp).unwrap().records,
        meta: load_metadata(&mp).unwrap(),
        features: load_image_features(&fp).unwrap(),
    };
    assert_eq!(loaded.reviews, raw.reviews);
    assert_eq!(loaded.meta, raw.meta);
    // generated features are already f32-representable, so the trip is exact
    assert_eq!(loaded.features, raw.features);

    let a = Dataset::build(raw, &data_cfg()).unwrap();
    let b = Dataset::build(loaded, &data_cfg()).unwrap();
    assert_eq!(a.split_manifest(), b.split_manifest());
    assert_eq!(a.vocab(), b.vocab());
}

#[test]
fn feature_file_rewrite_is_byte_identical() {
    let mut t = FeatureTable::new(3);
    t.insert("b", vec![0.5, -1.25, 3.0]).unwrap();
    t.insert("a", vec![1e-3f32 as f64, 0.0, -0.0]).unwrap();
    let mut first = Vec::new();
    t.write(&mut first).unwrap();
    let back = FeatureTable::parse(&first).unwrap();
    let mut second = Vec::new();
    back.write(&mut second).unwrap();
    assert_eq!(first, second);
    assert_eq!(back.get("a").unwrap()[0], 1e-3f32 as f64);
}

#[test]
fn checkpoint_reload_predicts_identically() {
    let dir = tempfile::tempdir().unwrap();
    let ds = Dataset::build(small_raw(2), &data_cfg()).unwrap();
    let out = train(&ds, &quick_cfg()).unwrap();
    let path = dir.path().join("m.ckpt");
    out.model.save(&path).unwrap();
    let back = Model::load(&path).unwrap();
    let test = ds.samples(SplitName::Test).unwrap();
    for mask in [ModalityMask::ALL, Regime::Without(lrmm::Modality::Item).mask()] {
        assert_eq!(out.model.predict(&test, mask).unwrap(), back.predict(&test, mask).unwrap());
    }
}

#[test]
fn cross_domain_on_the_source_matches_plain_evaluation() {
    let raw = small_raw(4);
    let ds = Dataset::build(raw.clone(), &data_cfg()).unwrap();
    let model = train(&ds, &quick_cfg()).unwrap().model;
    let cross = cross_domain(&model, ds.vocab(), raw, &data_cfg(), "h").unwrap();
    for (rep, regime) in cross.iter().zip(Regime::ALL) {
        let direct = evaluate(&model, &ds, SplitName::Test, regime, "h").unwrap();
        assert_eq!(rep, &direct);
    }
}

#[test]
fn disjoint_vocabulary_target_still_predicts() {
    let ds = Dataset::build(small_raw(5), &data_cfg()).unwrap();
    let model = train(&ds, &quick_cfg()).unwrap().model;
    let mut target = small_raw(6);
    for r in &mut target.reviews {
        r.text = r.text.split(' ').map(|w| format!("zz{w}")).collect::<Vec<_>>().join(" ");
    }
    let reports = cross_domain(&model, ds.vocab(), target, &data_cfg(), "").unwrap();
    assert_eq!(reports.len(), 5);
    assert!(reports.iter().all(|r| r.rmse.is_finite() && r.n_samples > 0));
}

#[test]
fn cross_domain_rejects_mismatched_feature_dim() {
    let ds = Dataset::build(small_raw(5), &data_cfg()).unwrap();
    let model = train(&ds, &quick_cfg()).unwrap().model;
    let target = SyntheticConfig {
        n_reviews: 60,
        feature_dim: 9,
        ..Default::default()
    }
    .generate()
    .0;
    assert!(cross_domain(&model, ds.vocab(), target, &data_cfg(), "").is_err());
}

#[test]
fn single_length_sweep_reproduces_default_training() {
    let ds = Dataset::build(small_raw(7), &data_cfg()).unwrap();
    let cfg = quick_cfg();
    let rows = length_sweep(&ds, &[10], &cfg).unwrap();
    let direct = evaluate(&train(&ds, &cfg).unwrap().model, &ds, SplitName::Test, Regime::Full, "").unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].rmse, rows[0].mae), (direct.rmse, direct.mae));

    let rows = length_sweep(&ds, &[4, 8, 12], &cfg).unwrap();
    assert_eq!(rows.iter().map(|r| r.length).collect::<Vec<_>>(), vec![4, 8, 12]);
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["desk.cfg", "full.cfg"] {
        let cfg = lrmm::ExperimentConfig::load(dir.join(name)).unwrap();
        assert_eq!(lrmm::ExperimentConfig::parse(&cfg.to_canonical()).unwrap(), cfg);
    }
}
