//! Metrics, inference regimes, reports and the mean-rating baselines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::data::{Dataset, Sample, SplitName};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::modality::{Modality, ModalityMask};

pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 5.0;

/// Inference configuration: all modalities, or one of them zeroed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    Full,
    Without(Modality),
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::Full,
        Regime::Without(Modality::User),
        Regime::Without(Modality::Item),
        Regime::Without(Modality::Meta),
        Regime::Without(Modality::Visual),
    ];

    pub fn mask(self) -> ModalityMask {
        match self {
            Regime::Full => ModalityMask::ALL,
            Regime::Without(m) => ModalityMask::ALL.with(m, false),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::Full => "+F",
            Regime::Without(Modality::User) => "-U",
            Regime::Without(Modality::Item) => "-O",
            Regime::Without(Modality::Meta) => "-M",
            Regime::Without(Modality::Visual) => "-V",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "+F" | "F" | "FULL" => Ok(Regime::Full),
            "-U" | "U" => Ok(Regime::Without(Modality::User)),
            "-O" | "O" => Ok(Regime::Without(Modality::Item)),
            "-M" | "M" => Ok(Regime::Without(Modality::Meta)),
            "-V" | "V" => Ok(Regime::Without(Modality::Visual)),
            _ => Err(Error::invalid(format!("unknown regime `{s}` (expected +F, -U, -O, -M or -V)"))),
        }
    }
}

fn check_lengths(preds: &[f64], truths: &[f64]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::invalid("metrics of an empty prediction set"));
    }
    if preds.len() != truths.len() {
        return Err(Error::invalid(format!("{} predictions for {} truths", preds.len(), truths.len())));
    }
    Ok(())
}

fn clamp_rating(p: f64) -> f64 {
    p.clamp(RATING_MIN, RATING_MAX)
}

/// Root mean squared error after clamping predictions to the rating range.
pub fn rmse(preds: &[f64], truths: &[f64]) -> Result<f64> {
    check_lengths(preds, truths)?;
    let ss: f64 = preds.iter().zip(truths).map(|(&p, &t)| (clamp_rating(p) - t).powi(2)).sum();
    Ok((ss / preds.len() as f64).sqrt())
}

/// Mean absolute error after clamping predictions to the rating range.
pub fn mae(preds: &[f64], truths: &[f64]) -> Result<f64> {
    check_lengths(preds, truths)?;
    let s: f64 = preds.iter().zip(truths).map(|(&p, &t)| (clamp_rating(p) - t).abs()).sum();
    Ok(s / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub regime: String,
    pub rmse: f64,
    pub mae: f64,
    pub n_samples: usize,
    pub config_hash: String,
}

impl ExperimentReport {
    pub const CSV_HEADER: &'static str = "regime,rmse,mae,n,config_hash";

    pub fn from_predictions(regime: impl Into<String>, preds: &[f64], truths: &[f64], config_hash: &str) -> Result<Self> {
        Ok(ExperimentReport {
            regime: regime.into(),
            rmse: rmse(preds, truths)?,
            mae: mae(preds, truths)?,
            n_samples: preds.len(),
            config_hash: config_hash.to_string(),
        })
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{},{}",
            self.regime, self.rmse, self.mae, self.n_samples, self.config_hash
        )
    }
}

/// Header plus one row per report.
pub fn reports_csv(reports: &[ExperimentReport]) -> String {
    let mut s = format!("{}\n", ExperimentReport::CSV_HEADER);
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Evaluates `model` on prepared samples under `regime`.
pub fn evaluate_samples(model: &Model, samples: &[Sample], regime: Regime, config_hash: &str) -> Result<ExperimentReport> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty split"));
    }
    let (preds, degenerate) = model.predict(samples, regime.mask())?;
    if degenerate > 0 {
        log::warn!("{degenerate} samples had no modality under {regime}; scored from imputed priors");
    }
    let truths: Vec<f64> = samples.iter().map(|s| s.rating).collect();
    ExperimentReport::from_predictions(regime.label(), &preds, &truths, config_hash)
}

pub fn evaluate(model: &Model, dataset: &Dataset, split: SplitName, regime: Regime, config_hash: &str) -> Result<ExperimentReport> {
    evaluate_samples(model, &dataset.samples(split)?, regime, config_hash)
}

/// Constant predictor equal to the mean training rating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetBaseline {
    pub mean: f64,
}

impl OffsetBaseline {
    pub fn fit(train_ratings: &[f64]) -> Result<Self> {
        if train_ratings.is_empty() {
            return Err(Error::invalid("offset baseline needs at least one training rating"));
        }
        Ok(OffsetBaseline {
            mean: train_ratings.iter().sum::<f64>() / train_ratings.len() as f64,
        })
    }

    pub fn predict(&self) -> f64 {
        self.mean
    }

    pub fn report(&self, samples: &[Sample], config_hash: &str) -> Result<ExperimentReport> {
        let preds = vec![self.mean; samples.len()];
        let truths: Vec<f64> = samples.iter().map(|s| s.rating).collect();
        ExperimentReport::from_predictions("offset", &preds, &truths, config_hash)
    }
}

/// Mean training rating of each item, falling back to the global mean for
/// items without retained ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemOffsetBaseline {
    pub global: f64,
    pub per_item: BTreeMap<String, f64>,
}

impl ItemOffsetBaseline {
    pub fn fit(dataset: &Dataset) -> Result<Self> {
        let global = OffsetBaseline::fit(&dataset.train_ratings())?.mean;
        let per_item = dataset
            .item_train_ratings()
            .into_iter()
            .filter(|(_, r)| !r.is_empty())
            .map(|(k, r)| (k.to_string(), r.iter().sum::<f64>() / r.len() as f64))
            .collect();
        Ok(ItemOffsetBaseline { global, per_item })
    }

    pub fn predict(&self, item: &str) -> f64 {
        self.per_item.get(item).copied().unwrap_or(self.global)
    }

    pub fn report(&self, samples: &[Sample], config_hash: &str) -> Result<ExperimentReport> {
        let preds: Vec<f64> = samples.iter().map(|s| self.predict(&s.item_id)).collect();
        let truths: Vec<f64> = samples.iter().map(|s| s.rating).collect();
        ExperimentReport::from_predictions("offset_item", &preds, &truths, config_hash)
    }
}
