//! Experiment protocols built on [`train`](crate::train::train) and
//! [`evaluate`](crate::eval::evaluate).

use std::fmt::Write as _;

use crate::data::{DataConfig, Dataset, RawData, Sample, SplitName, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{evaluate, ItemOffsetBaseline, OffsetBaseline, Regime};
use crate::model::Model;
use crate::modality::{Modality, ModalityMask};
use crate::train::{train, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct LengthRow {
    pub length: usize,
    pub rmse: f64,
    pub mae: f64,
    pub n_samples: usize,
}

/// Retrains with each maximum document length and reports test metrics.
pub fn length_sweep(dataset: &Dataset, lengths: &[usize], cfg: &TrainConfig) -> Result<Vec<LengthRow>> {
    if lengths.contains(&0) {
        return Err(Error::invalid("sequence lengths must be positive"));
    }
    let mut rows = Vec::with_capacity(lengths.len());
    for &length in lengths {
        let ds = dataset.with_l_max(length);
        let out = train(&ds, cfg)?;
        let r = evaluate(&out.model, &ds, SplitName::Test, Regime::Full, "")?;
        rows.push(LengthRow {
            length,
            rmse: r.rmse,
            mae: r.mae,
            n_samples: r.n_samples,
        });
    }
    Ok(rows)
}

pub fn length_csv(rows: &[LengthRow], config_hash: &str) -> String {
    let mut s = String::from("length,rmse,mae,n,config_hash\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.6},{:.6},{},{config_hash}", r.length, r.rmse, r.mae, r.n_samples);
    }
    s
}

/// Evaluates a source-domain model on a target domain whose text is mapped
/// through the source vocabulary. No target training takes place.
pub fn cross_domain(
    model: &Model,
    source_vocab: &Vocabulary,
    target: RawData,
    data_cfg: &DataConfig,
    config_hash: &str,
) -> Result<Vec<crate::eval::ExperimentReport>> {
    let visual_dim = model.config().visual_in_dim;
    if !target.features.is_empty() && target.features.dim != visual_dim {
        return Err(Error::invalid(format!(
            "target image features have dim {}, model expects {visual_dim}",
            target.features.dim
        )));
    }
    let ds = Dataset::with_vocabulary(target, source_vocab.clone(), data_cfg)?;
    Regime::ALL
        .iter()
        .map(|&r| evaluate(model, &ds, SplitName::Test, r, config_hash))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyRow {
    /// `None` keeps every review.
    pub k: Option<usize>,
    pub model: &'static str,
    pub rmse: f64,
    pub mae: f64,
    pub n_samples: usize,
}

impl SparsifyRow {
    pub fn k_label(&self) -> String {
        self.k.map_or_else(|| "all".to_string(), |k| k.to_string())
    }
}

/// For each `k`, keeps at most `k` training reviews per item, retrains, and
/// reports test metrics for the model and both offset baselines.
pub fn sparsify_experiment(
    dataset: &Dataset,
    ks: &[Option<usize>],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<SparsifyRow>> {
    let mut rows = Vec::new();
    for &k in ks {
        let ds = dataset.sparsify_items(k, seed);
        let test = ds.samples(SplitName::Test)?;
        let out = train(&ds, cfg)?;
        let lrmm = crate::eval::evaluate_samples(&out.model, &test, Regime::Full, "")?;
        let item = ItemOffsetBaseline::fit(&ds)?.report(&test, "")?;
        let global = OffsetBaseline::fit(&ds.train_ratings())?.report(&test, "")?;
        for (name, r) in [("lrmm", lrmm), ("offset_item", item), ("offset", global)] {
            rows.push(SparsifyRow {
                k,
                model: name,
                rmse: r.rmse,
                mae: r.mae,
                n_samples: r.n_samples,
            });
        }
    }
    Ok(rows)
}

pub fn sparsify_csv(rows: &[SparsifyRow], config_hash: &str) -> String {
    let mut s = String::from("k,model,rmse,mae,n,config_hash\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{},{config_hash}",
            r.k_label(),
            r.model,
            r.rmse,
            r.mae,
            r.n_samples
        );
    }
    s
}

/// Parses `all`, `inf` or a count.
pub fn parse_k(s: &str) -> Result<Option<usize>> {
    match s.trim() {
        "all" | "inf" | "∞" => Ok(None),
        t => t
            .parse()
            .map(Some)
            .map_err(|_| Error::invalid(format!("invalid k `{s}`"))),
    }
}

/// CSV rows `sample_key,modality,is_reconstruction,v_0..v_{d-1}`: the encoder
/// output (when present) and the reconstruction of every modality.
pub fn dump_embeddings(model: &Model, samples: &[Sample]) -> Result<String> {
    let d = model.dim();
    let mut s = String::from("sample_key,modality,is_reconstruction");
    for k in 0..d {
        let _ = write!(s, ",v_{k}");
    }
    s.push('\n');
    for sample in samples {
        let e = model.embed_sample(sample, ModalityMask::ALL)?;
        for m in Modality::ALL {
            let rows = e.inputs[m.index()]
                .iter()
                .map(|v| (0, v))
                .chain(std::iter::once((1, &e.recons[m.index()])));
            for (flag, v) in rows {
                let _ = write!(s, "{},{},{flag}", sample.key, m.short());
                for x in v {
                    let _ = write!(s, ",{x:.6}");
                }
                s.push('\n');
            }
        }
    }
    Ok(s)
}
