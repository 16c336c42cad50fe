//! Flat `key=value` configuration files.
//!
//! ```text
//! # comments run to end of line
//! train.batch_size = 64
//! mdrop.p_m = 0.5
//! ```

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::data::DataConfig;
use crate::error::{Error, Result};
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub train: TrainConfig,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: invalid value `{value}` for `{key}`")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            cfg.set(key.trim(), value.trim(), n + 1)?;
        }
        cfg.validate().map_err(|e| match e {
            Error::InvalidArgument(m) => Error::Config(m),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.l_max == 0 {
            return Err(Error::Config("data.l_max must be at least 1".into()));
        }
        self.train.validate()
    }

    /// Sets one key; `line` is only used in error messages.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let (d, t) = (&mut self.data, &mut self.train);
        macro_rules! put {
            ($field:expr) => {
                $field = parse_value(key, value, line)?
            };
        }
        match key {
            "data.min_freq" => put!(d.min_freq),
            "data.l_max" | "train.l_max" => put!(d.l_max),
            "data.seed" => put!(d.seed),
            "data.train_ratio" => put!(d.ratios.train),
            "data.valid_ratio" => put!(d.ratios.valid),
            "data.test_ratio" => put!(d.ratios.test),
            "train.batch_size" => put!(t.batch_size),
            "train.lr" => put!(t.lr),
            "train.lambda" => put!(t.lambda),
            "train.rho" => put!(t.rho),
            "train.lambda_rho" => put!(t.lambda_rho),
            "train.squared_norm" => put!(t.squared_norm),
            "train.max_epochs" => put!(t.max_epochs),
            "train.patience" => put!(t.patience),
            "train.seed" => put!(t.seed),
            "train.dropout" => put!(t.dropout),
            "train.adadelta_rho" => put!(t.adadelta_rho),
            "train.adadelta_eps" => put!(t.adadelta_eps),
            "train.embed_dim" => put!(t.embed_dim),
            "train.lstm_hidden" => put!(t.lstm_hidden),
            "train.init_bias_to_mean" => put!(t.init_bias_to_mean),
            "train.mix_lr_scale" => put!(t.mix_lr_scale),
            "train.detach_recon_target" => put!(t.detach_recon_target),
            "mdrop.p_m" => put!(t.mdrop.p_m),
            "mdrop.min_kept" => put!(t.mdrop.min_kept),
            "mauto.hidden" => put!(t.ae_hidden),
            _ => return Err(Error::Config(format!("line {line}: unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Every key in sorted order, one `key=value` per line.
    pub fn to_canonical(&self) -> String {
        let (d, t) = (&self.data, &self.train);
        let mut pairs: Vec<(&str, String)> = vec![
            ("data.l_max", d.l_max.to_string()),
            ("data.min_freq", d.min_freq.to_string()),
            ("data.seed", d.seed.to_string()),
            ("data.test_ratio", d.ratios.test.to_string()),
            ("data.train_ratio", d.ratios.train.to_string()),
            ("data.valid_ratio", d.ratios.valid.to_string()),
            ("mauto.hidden", t.ae_hidden.to_string()),
            ("mdrop.min_kept", t.mdrop.min_kept.to_string()),
            ("mdrop.p_m", t.mdrop.p_m.to_string()),
            ("train.adadelta_eps", t.adadelta_eps.to_string()),
            ("train.adadelta_rho", t.adadelta_rho.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.detach_recon_target", t.detach_recon_target.to_string()),
            ("train.dropout", t.dropout.to_string()),
            ("train.embed_dim", t.embed_dim.to_string()),
            ("train.init_bias_to_mean", t.init_bias_to_mean.to_string()),
            ("train.lambda", t.lambda.to_string()),
            ("train.lambda_rho", t.lambda_rho.to_string()),
            ("train.lr", t.lr.to_string()),
            ("train.lstm_hidden", t.lstm_hidden.to_string()),
            ("train.max_epochs", t.max_epochs.to_string()),
            ("train.mix_lr_scale", t.mix_lr_scale.to_string()),
            ("train.patience", t.patience.to_string()),
            ("train.rho", t.rho.to_string()),
            ("train.seed", t.seed.to_string()),
            ("train.squared_norm", t.squared_norm.to_string()),
        ];
        pairs.sort();
        let mut s = String::new();
        for (k, v) in pairs {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of the canonical form.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.to_canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
