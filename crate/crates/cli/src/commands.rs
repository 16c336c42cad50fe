use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use lrmm::data::{
    load_image_features, load_metadata, load_reviews, metadata_to_jsonl, reviews_to_jsonl, Dataset, FeatureTable, RawData,
    SplitName, SyntheticConfig, Vocabulary,
};
use lrmm::eval::{evaluate, reports_csv, ItemOffsetBaseline, OffsetBaseline};
use lrmm::experiments::{cross_domain, dump_embeddings, length_csv, length_sweep, parse_k, sparsify_csv, sparsify_experiment};
use lrmm::{Error, ExperimentConfig, Model, Regime};

use crate::args::{CommonArgs, DataArgs};

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Diverged(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Diverged(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Diverged(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            Error::TrainingDiverged(_) => Failure::Diverged(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

pub type Outcome = Result<(), Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

/// Writes to `out` when given, else to standard output.
fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => write_file(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Data(format!("stdout: {e}"))),
    }
}

/// `<path>.<ext>` next to a checkpoint.
pub fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.data.seed = seed;
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

fn load_raw(data: &DataArgs, visual_dim: Option<usize>) -> Result<RawData, Failure> {
    let reviews_path = data
        .reviews
        .as_ref()
        .ok_or_else(|| Failure::Usage("--reviews is required".into()))?;
    let loaded = load_reviews(reviews_path)?;
    if loaded.skipped > 0 {
        log::warn!("skipped {} malformed review lines", loaded.skipped);
    }
    let meta = match &data.meta {
        Some(p) => load_metadata(p)?,
        None => Default::default(),
    };
    let features = match &data.features {
        Some(p) => load_image_features(p)?,
        // an empty table: every image slot is missing and imputed
        None => FeatureTable::new(visual_dim.unwrap_or(1)),
    };
    Ok(RawData {
        reviews: loaded.records,
        meta,
        features,
    })
}

/// A checkpoint plus what is needed to rebuild its dataset.
struct Bundle {
    model: Model,
    cfg: ExperimentConfig,
    vocab: Vocabulary,
    data: DataArgs,
}

fn absolute(p: &Option<PathBuf>) -> Option<PathBuf> {
    p.as_ref().map(|p| fs::canonicalize(p).unwrap_or_else(|_| p.clone()))
}

fn write_bundle(path: &Path, model: &Model, cfg: &ExperimentConfig, vocab: &Vocabulary, data: &DataArgs) -> Outcome {
    model.save(path)?;
    write_file(&sidecar(path, "cfg"), &cfg.to_canonical())?;
    write_file(&sidecar(path, "vocab"), &vocab.to_text())?;
    let mut paths = String::new();
    for (key, p) in [("reviews", &data.reviews), ("meta", &data.meta), ("features", &data.features)] {
        if let Some(p) = absolute(p) {
            let _ = writeln!(paths, "{key}={}", p.display());
        }
    }
    write_file(&sidecar(path, "data"), &paths)
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn read_bundle(path: &Path) -> Result<Bundle, Failure> {
    let model = Model::load(path)?;
    let cfg = ExperimentConfig::parse(&read_text(&sidecar(path, "cfg"))?)?;
    let vocab = Vocabulary::from_text(&read_text(&sidecar(path, "vocab"))?, cfg.data.min_freq);
    if vocab.len() != model.config().vocab_size {
        return Err(Failure::Data(format!(
            "vocabulary sidecar has {} entries, checkpoint expects {}",
            vocab.len(),
            model.config().vocab_size
        )));
    }
    let mut data = DataArgs::default();
    let data_path = sidecar(path, "data");
    if data_path.exists() {
        for line in read_text(&data_path)?.lines() {
            match line.split_once('=') {
                Some(("reviews", p)) => data.reviews = Some(p.into()),
                Some(("meta", p)) => data.meta = Some(p.into()),
                Some(("features", p)) => data.features = Some(p.into()),
                _ => {}
            }
        }
    }
    Ok(Bundle { model, cfg, vocab, data })
}

impl Bundle {
    /// Rebuilds the training-time dataset; explicit data flags win over the
    /// paths recorded at training time.
    fn dataset(&self, overrides: &DataArgs) -> Result<Dataset, Failure> {
        let data = if overrides.reviews.is_some() {
            overrides.clone()
        } else {
            self.data.clone()
        };
        let raw = load_raw(&data, Some(self.model.config().visual_in_dim))?;
        Ok(Dataset::with_vocabulary(raw, self.vocab.clone(), &self.cfg.data)?)
    }
}

fn parse_regimes(s: &str) -> Result<Vec<Regime>, Failure> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Regime::ALL.to_vec());
    }
    s.split(',').map(|r| r.parse::<Regime>().map_err(Failure::from)).collect()
}

fn parse_list<T>(s: &str, parse: impl Fn(&str) -> Result<T, Failure>) -> Result<Vec<T>, Failure> {
    let items: Vec<T> = s.split(',').filter(|t| !t.trim().is_empty()).map(parse).collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(Failure::Usage(format!("empty list `{s}`")));
    }
    Ok(items)
}

pub fn ingest(data: &DataArgs, common: &CommonArgs, out: &Path) -> Outcome {
    let cfg = load_config(common)?;
    let raw = load_raw(data, None)?;
    let ds = Dataset::build(raw, &cfg.data)?;
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    write_file(&out.join("vocab.txt"), &ds.vocab().to_text())?;
    write_file(&out.join("split.csv"), &ds.split_manifest())?;
    let raw = ds.raw();
    let users: std::collections::BTreeSet<&str> = raw.reviews.iter().map(|r| r.user_id.as_str()).collect();
    let items: std::collections::BTreeSet<&str> = raw.reviews.iter().map(|r| r.item_id.as_str()).collect();
    let mut s = String::from("key,value\n");
    for (k, v) in [
        ("reviews", raw.reviews.len()),
        ("users", users.len()),
        ("items", items.len()),
        ("items_with_meta", items.iter().filter(|i| raw.meta.contains_key(**i)).count()),
        ("items_with_image", items.iter().filter(|i| raw.features.get(i).is_some()).count()),
        ("feature_dim", raw.features.dim),
        ("vocab", ds.vocab().len()),
        ("train", ds.indices(SplitName::Train).len()),
        ("valid", ds.indices(SplitName::Valid).len()),
        ("test", ds.indices(SplitName::Test).len()),
    ] {
        let _ = writeln!(s, "{k},{v}");
    }
    emit(None, &s)
}

pub fn train(data: &DataArgs, common: &CommonArgs, out: &Path) -> Outcome {
    let cfg = load_config(common)?;
    let raw = load_raw(data, None)?;
    let ds = Dataset::build(raw, &cfg.data)?;
    let outcome = lrmm::train(&ds, &cfg.train)?;
    write_bundle(out, &outcome.model, &cfg, ds.vocab(), data)?;
    write_file(&sidecar(out, "log.csv"), &outcome.log)?;
    write_file(&sidecar(out, "split.csv"), &ds.split_manifest())?;
    emit(
        None,
        &format!(
            "best_epoch,best_valid_rmse,epochs,config_hash\n{},{:.6},{},{}\n",
            outcome.best_epoch,
            outcome.best_valid_rmse,
            outcome.history.len(),
            cfg.config_hash()
        ),
    )?;
    match outcome.diverged {
        Some(what) => Err(Failure::Diverged(format!(
            "training diverged ({what}); best checkpoint so far written to {}",
            out.display()
        ))),
        None => Ok(()),
    }
}

pub fn evaluate_cmd(ckpt: &Path, regime: &str, data: &DataArgs, out: Option<&Path>) -> Outcome {
    let regimes = parse_regimes(regime)?;
    let b = read_bundle(ckpt)?;
    let ds = b.dataset(data)?;
    let hash = b.cfg.config_hash();
    let reports = regimes
        .iter()
        .map(|&r| evaluate(&b.model, &ds, SplitName::Test, r, &hash))
        .collect::<Result<Vec<_>, _>>()?;
    emit(out, &reports_csv(&reports))
}

pub fn sparsify(data: &DataArgs, common: &CommonArgs, k: &str, out: Option<&Path>) -> Outcome {
    let ks = parse_list(k, |t| parse_k(t).map_err(Failure::from))?;
    let cfg = load_config(common)?;
    let ds = Dataset::build(load_raw(data, None)?, &cfg.data)?;
    let rows = sparsify_experiment(&ds, &ks, &cfg.train, cfg.data.seed)?;
    emit(out, &sparsify_csv(&rows, &cfg.config_hash()))
}

pub fn lengths(data: &DataArgs, common: &CommonArgs, lengths: &str, out: Option<&Path>) -> Outcome {
    let ls = parse_list(lengths, |t| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| Failure::Usage(format!("invalid length `{t}`")))
    })?;
    let cfg = load_config(common)?;
    let ds = Dataset::build(load_raw(data, None)?, &cfg.data)?;
    let rows = length_sweep(&ds, &ls, &cfg.train)?;
    emit(out, &length_csv(&rows, &cfg.config_hash()))
}

pub fn cross(
    source_ckpt: &Path,
    target: &Path,
    meta: Option<&Path>,
    features: Option<&Path>,
    out: Option<&Path>,
) -> Outcome {
    let b = read_bundle(source_ckpt)?;
    let data = if target.is_dir() {
        let existing = |name: &str| Some(target.join(name)).filter(|p| p.exists());
        DataArgs {
            reviews: Some(target.join("reviews.jsonl")),
            meta: existing("meta.jsonl"),
            features: existing("features.lrmmfeat"),
        }
    } else {
        DataArgs {
            reviews: Some(target.to_path_buf()),
            meta: meta.map(Path::to_path_buf),
            features: features.map(Path::to_path_buf),
        }
    };
    let raw = load_raw(&data, Some(b.model.config().visual_in_dim))?;
    let reports = cross_domain(&b.model, &b.vocab, raw, &b.cfg.data, &b.cfg.config_hash())?;
    emit(out, &reports_csv(&reports))
}

pub fn dump(ckpt: &Path, split: &str, data: &DataArgs, out: Option<&Path>) -> Outcome {
    let split: SplitName = split.parse()?;
    let b = read_bundle(ckpt)?;
    let ds = b.dataset(data)?;
    emit(out, &dump_embeddings(&b.model, &ds.samples(split)?)?)
}

pub fn offset(data: &DataArgs, common: &CommonArgs, out: Option<&Path>) -> Outcome {
    let cfg = load_config(common)?;
    let ds = Dataset::build(load_raw(data, None)?, &cfg.data)?;
    let test = ds.samples(SplitName::Test)?;
    let hash = cfg.config_hash();
    let reports = vec![
        OffsetBaseline::fit(&ds.train_ratings())?.report(&test, &hash)?,
        ItemOffsetBaseline::fit(&ds)?.report(&test, &hash)?,
    ];
    emit(out, &reports_csv(&reports))
}

pub fn synth(out: &Path, cfg: &SyntheticConfig) -> Outcome {
    let (raw, _) = cfg.generate();
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    write_file(&out.join("reviews.jsonl"), &reviews_to_jsonl(&raw.reviews))?;
    write_file(&out.join("meta.jsonl"), &metadata_to_jsonl(&raw.meta))?;
    raw.features.save(out.join("features.lrmmfeat"))?;
    Ok(())
}
