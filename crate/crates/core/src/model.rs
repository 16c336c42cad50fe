//! The full rating model: encoders, autoencoders and the scoring layer over
//! one parameter store.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Sample;
use crate::encoders::{encode_text, encode_visual, EncoderConfig, EncoderParams, Mode};
use crate::error::{Error, Result};
use crate::fusion::{reconstruction_term, FusionParams, LossBreakdown};
use crate::graph::{Graph, NodeId};
use crate::imputation::AutoencoderParams;
use crate::modality::{Modality, ModalityMask};
use crate::params::ParameterStore;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub lstm_hidden: usize,
    pub ae_hidden: usize,
    pub visual_in_dim: usize,
}

impl ModelConfig {
    pub fn encoder(&self, dropout: f64) -> EncoderConfig {
        EncoderConfig {
            embed_dim: self.embed_dim,
            lstm_hidden: self.lstm_hidden,
            visual_in_dim: self.visual_in_dim,
            post_recurrent_dropout: dropout,
        }
    }
}

/// Loss hyperparameters for one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub lambda: f64,
    pub rho: f64,
    pub lambda_rho: f64,
    pub squared_norm: bool,
    /// Treat reconstruction targets as constants.
    pub detach_target: bool,
}

impl Default for Objective {
    fn default() -> Self {
        Objective {
            lambda: 1e-4,
            rho: 0.05,
            lambda_rho: 0.01,
            squared_norm: false,
            detach_target: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub preds: Vec<NodeId>,
    pub total: Option<NodeId>,
    pub breakdown: LossBreakdown,
    /// Autoencoder slots that received a zero input.
    pub zero_inputs: usize,
    /// Samples left with no modality at all after masking.
    pub degenerate: usize,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub store: ParameterStore,
    pub encoders: EncoderParams,
    pub aes: AutoencoderParams,
    pub fusion: FusionParams,
}

/// Per-sample embeddings for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEmbeddings {
    /// Encoder outputs fed to the autoencoders; `None` where zeroed.
    pub inputs: [Option<Vec<f64>>; 4],
    pub recons: [Vec<f64>; 4],
}

impl Model {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        if cfg.vocab_size == 0 || cfg.ae_hidden == 0 {
            return Err(Error::invalid("vocabulary and autoencoder sizes must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new(seed);
        let encoders = EncoderParams::register(&mut store, &cfg.encoder(0.0), cfg.vocab_size, &mut rng)?;
        let aes = AutoencoderParams::register(&mut store, cfg.lstm_hidden, cfg.ae_hidden, &mut rng)?;
        let fusion = FusionParams::register(&mut store, cfg.lstm_hidden, &mut rng)?;
        Ok(Model {
            store,
            encoders,
            aes,
            fusion,
        })
    }

    pub fn from_store(store: ParameterStore) -> Result<Self> {
        let encoders = EncoderParams::from_store(&store)?;
        let aes = AutoencoderParams::from_store(&store)?;
        let fusion = FusionParams::from_store(&store)?;
        let d = encoders.text[0].hidden;
        let consistent = encoders.text.iter().all(|l| l.hidden == d && l.input == encoders.text[0].input)
            && store.value(encoders.visual_w).rows() == d
            && aes.0.iter().all(|a| a.dim == d)
            && fusion.dim == d
            && store.value(encoders.embed).cols() == encoders.text[0].input;
        if !consistent {
            return Err(Error::Format("checkpoint tensors have inconsistent sizes".into()));
        }
        Ok(Model {
            store,
            encoders,
            aes,
            fusion,
        })
    }

    pub fn config(&self) -> ModelConfig {
        let embed = self.store.value(self.encoders.embed);
        ModelConfig {
            vocab_size: embed.rows(),
            embed_dim: embed.cols(),
            lstm_hidden: self.dim(),
            ae_hidden: self.aes.0[0].hidden,
            visual_in_dim: self.store.value(self.encoders.visual_w).cols(),
        }
    }

    /// Modality embedding size.
    pub fn dim(&self) -> usize {
        self.fusion.dim
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.store.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_store(ParameterStore::load(path, 0)?)
    }

    /// Records the forward pass for a batch. `masks[i]` is combined with the
    /// sample's own availability; a slot that ends up masked receives a zero
    /// input. With an objective, every available modality contributes a
    /// reconstruction target (its undropped embedding).
    #[allow(clippy::too_many_arguments)]
    pub fn forward_batch<R: Rng + ?Sized>(
        &self,
        g: &mut Graph<'_>,
        samples: &[&Sample],
        masks: &[ModalityMask],
        mode: Mode,
        dropout: f64,
        objective: Option<&Objective>,
        rng: &mut R,
    ) -> Result<BatchOutput> {
        if samples.len() != masks.len() {
            return Err(Error::invalid("one mask per sample is required"));
        }
        let d = self.dim();
        let zero = g.zeros(d);
        let mut preds = Vec::with_capacity(samples.len());
        let mut recons: [Vec<NodeId>; 4] = Default::default();
        let mut targets: [Vec<NodeId>; 4] = Default::default();
        let mut hiddens: [Vec<NodeId>; 4] = Default::default();
        let mut zero_inputs = 0;
        let mut degenerate = 0;

        for (s, mask) in samples.iter().zip(masks) {
            let eff = s.mask.and(mask);
            if !eff.any() {
                degenerate += 1;
            }
            let mut slots = [zero; 4];
            for m in Modality::ALL {
                let keep = eff.get(m);
                let encoded = if s.mask.get(m) && (keep || objective.is_some()) {
                    self.encode(g, s, m, mode, dropout, rng)?
                } else {
                    None
                };
                let input = match (&encoded, keep) {
                    (Some((_, x)), true) => *x,
                    _ => {
                        zero_inputs += 1;
                        zero
                    }
                };
                let (recon, hid) = self.aes.get(m).forward(g, input)?;
                if let (Some((clean, _)), Some(obj)) = (encoded, objective) {
                    // a constant target keeps the encoders from shrinking it to fit the decoder
                    let target = if obj.detach_target {
                        g.input(g.value(clean).to_vec())
                    } else {
                        clean
                    };
                    recons[m.index()].push(recon);
                    targets[m.index()].push(target);
                    hiddens[m.index()].push(hid);
                }
                slots[m.index()] = recon;
            }
            preds.push(self.fusion.score_node(g, &slots)?);
        }

        let mut breakdown = LossBreakdown::default();
        let total = match objective {
            None => None,
            Some(obj) => {
                let truths: Vec<f64> = samples.iter().map(|s| s.rating).collect();
                let (l_reg, mse) = self.fusion.regression_loss_node(g, &preds, &truths, obj.lambda, obj.squared_norm)?;
                breakdown.l_reg = g.scalar(mse);
                let mut terms = Vec::new();
                for m in Modality::ALL {
                    let k = m.index();
                    if let Some(t) = reconstruction_term(g, &recons[k], &targets[k], &hiddens[k], obj.rho, obj.lambda_rho)? {
                        breakdown.l_recon[k] = g.scalar(t.loss);
                        breakdown.kl[k] = g.scalar(t.kl);
                        terms.push(t.loss);
                    }
                }
                let recon_sum = if terms.is_empty() { None } else { Some(g.add_n(&terms)?) };
                let total = self.fusion.total_loss_node(g, l_reg, recon_sum)?;
                breakdown.alpha = self.fusion.alpha(&self.store);
                breakdown.beta = self.fusion.beta(&self.store);
                breakdown.total = g.scalar(total);
                Some(total)
            }
        };
        Ok(BatchOutput {
            preds,
            total,
            breakdown,
            zero_inputs,
            degenerate,
        })
    }

    /// `(clean, input)` for an available modality; `None` when the document
    /// turns out to be empty.
    fn encode<R: Rng + ?Sized>(
        &self,
        g: &mut Graph<'_>,
        s: &Sample,
        m: Modality,
        mode: Mode,
        dropout: f64,
        rng: &mut R,
    ) -> Result<Option<(NodeId, NodeId)>> {
        match s.document(m) {
            Some(doc) => Ok(encode_text(g, &self.encoders, doc, m, mode, dropout, rng)?.map(|e| (e.clean, e.pooled))),
            None => match &s.image_feat {
                Some(f) => {
                    let e = encode_visual(g, &self.encoders, f)?;
                    Ok(Some((e, e)))
                }
                None => Ok(None),
            },
        }
    }

    /// Raw (unclamped) predictions with `mask` applied on top of each
    /// sample's availability. Also returns the number of samples that had no
    /// modality left.
    pub fn predict(&self, samples: &[Sample], mask: ModalityMask) -> Result<(Vec<f64>, usize)> {
        let mut out = Vec::with_capacity(samples.len());
        let mut degenerate = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for chunk in samples.chunks(32) {
            let refs: Vec<&Sample> = chunk.iter().collect();
            let masks = vec![mask; chunk.len()];
            let mut g = Graph::new(&self.store);
            let b = self.forward_batch(&mut g, &refs, &masks, Mode::Infer, 0.0, None, &mut rng)?;
            out.extend(b.preds.iter().map(|&p| g.scalar(p)));
            degenerate += b.degenerate;
        }
        Ok((out, degenerate))
    }

    pub fn embed_sample(&self, s: &Sample, mask: ModalityMask) -> Result<SampleEmbeddings> {
        let mut g = Graph::new(&self.store);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let eff = s.mask.and(&mask);
        let zero = g.zeros(self.dim());
        let mut inputs: [Option<Vec<f64>>; 4] = Default::default();
        let mut recons: [Vec<f64>; 4] = Default::default();
        for m in Modality::ALL {
            let x = if eff.get(m) {
                self.encode(&mut g, s, m, Mode::Infer, 0.0, &mut rng)?.map(|(c, _)| c)
            } else {
                None
            };
            if let Some(x) = x {
                inputs[m.index()] = Some(g.value(x).to_vec());
            }
            let (r, _) = self.aes.get(m).forward(&mut g, x.unwrap_or(zero))?;
            recons[m.index()] = g.value(r).to_vec();
        }
        Ok(SampleEmbeddings { inputs, recons })
    }
}
