//! Modality encoders: word embeddings feeding one LSTM per text modality with
//! mean pooling over time, and a tanh projection of image features.

use rand::Rng;

use crate::data::{Document, PAD};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::lstm::LstmParams;
use crate::modality::Modality;
use crate::params::{ParamId, ParameterStore};
use crate::tensor::{init_uniform_fan, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    /// Word-embedding size.
    pub embed_dim: usize,
    /// LSTM hidden size; also the size of every modality embedding.
    pub lstm_hidden: usize,
    pub visual_in_dim: usize,
    pub post_recurrent_dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            embed_dim: 256,
            lstm_hidden: 256,
            visual_in_dim: 4096,
            post_recurrent_dropout: 0.5,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.lstm_hidden == 0 || self.visual_in_dim == 0 {
            return Err(Error::invalid("encoder dimensions must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.post_recurrent_dropout) {
            return Err(Error::invalid(format!(
                "dropout rate {} must lie in [0,1)",
                self.post_recurrent_dropout
            )));
        }
        Ok(())
    }

    pub fn modality_dim(&self) -> usize {
        self.lstm_hidden
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderParams {
    /// Shared word-embedding table, `[vocab, embed_dim]`.
    pub embed: ParamId,
    /// One LSTM per text modality, indexed like [`Modality::TEXT`].
    pub text: [LstmParams; 3],
    pub visual_w: ParamId,
    pub visual_b: ParamId,
}

fn lstm_prefix(m: Modality) -> String {
    format!("lstm.{}", m.short())
}

impl EncoderParams {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParameterStore,
        cfg: &EncoderConfig,
        vocab_size: usize,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let embed = store.insert("embed.words", init_uniform_fan(cfg.embed_dim, vocab_size, rng)?)?;
        let mut text = Vec::with_capacity(3);
        for m in Modality::TEXT {
            text.push(LstmParams::register(store, &lstm_prefix(m), cfg.embed_dim, cfg.lstm_hidden, rng)?);
        }
        let visual_w = store.insert(
            "visual.w",
            init_uniform_fan(cfg.visual_in_dim, cfg.modality_dim(), rng)?,
        )?;
        let visual_b = store.insert("visual.b", Tensor::zeros(&[cfg.modality_dim()]))?;
        Ok(EncoderParams {
            embed,
            text: [text[0], text[1], text[2]],
            visual_w,
            visual_b,
        })
    }

    pub fn from_store(store: &ParameterStore) -> Result<Self> {
        let text = [
            LstmParams::from_store(store, &lstm_prefix(Modality::User))?,
            LstmParams::from_store(store, &lstm_prefix(Modality::Item))?,
            LstmParams::from_store(store, &lstm_prefix(Modality::Meta))?,
        ];
        Ok(EncoderParams {
            embed: store.id("embed.words")?,
            text,
            visual_w: store.id("visual.w")?,
            visual_b: store.id("visual.b")?,
        })
    }

    pub fn lstm(&self, m: Modality) -> Result<&LstmParams> {
        if !m.is_text() {
            return Err(Error::invalid("the visual modality has no LSTM"));
        }
        Ok(&self.text[m.index()])
    }
}

/// Graph handles for one encoded text document.
#[derive(Debug, Clone)]
pub struct TextEncoding {
    /// Mean of the hidden outputs, before dropout.
    pub clean: NodeId,
    /// `clean` after train-mode dropout (identical to `clean` at inference).
    pub pooled: NodeId,
    pub word_level: Vec<NodeId>,
}

/// Inverted-dropout keep mask: each entry is `0` or `1/(1-rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..n)
        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

/// Encodes `doc` with the LSTM of `modality`. `PAD` tokens are skipped, so
/// pooling covers only real tokens. Returns `None` for an empty document,
/// which the caller treats as a missing modality.
pub fn encode_text<R: Rng + ?Sized>(
    g: &mut Graph<'_>,
    params: &EncoderParams,
    doc: &Document,
    modality: Modality,
    mode: Mode,
    dropout: f64,
    rng: &mut R,
) -> Result<Option<TextEncoding>> {
    let lstm = params.lstm(modality)?;
    let tokens: Vec<u32> = doc.token_ids.iter().copied().filter(|&t| t != PAD).collect();
    if tokens.is_empty() {
        return Ok(None);
    }
    let mut state = lstm.initial_state(g);
    let mut word_level = Vec::with_capacity(tokens.len());
    for t in tokens {
        let x = g.row(params.embed, t as usize)?;
        state = lstm.step(g, x, state)?;
        word_level.push(state.h);
    }
    let clean = g.mean(&word_level)?;
    let pooled = match mode {
        Mode::Train if dropout > 0.0 => {
            let mask = g.input(dropout_mask(lstm.hidden, dropout, rng));
            g.mul(clean, mask)?
        }
        _ => clean,
    };
    Ok(Some(TextEncoding {
        clean,
        pooled,
        word_level,
    }))
}

/// `tanh(W_f · feat + b_f)`.
pub fn encode_visual(g: &mut Graph<'_>, params: &EncoderParams, feat: &[f64]) -> Result<NodeId> {
    let expected = g.store().value(params.visual_w).cols();
    if feat.len() != expected {
        return Err(Error::invalid(format!(
            "image feature has dim {}, encoder expects {expected}",
            feat.len()
        )));
    }
    let x = g.input(feat.to_vec());
    let a = g.affine(params.visual_w, &[x], Some(params.visual_b))?;
    Ok(g.tanh(a))
}

/// A modality embedding evaluated outside training.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityEmbedding {
    pub modality: Modality,
    pub vector: Tensor,
    pub word_level: Option<Vec<Tensor>>,
}

/// Inference-mode text embedding, `None` for an empty document.
pub fn embed_text(
    store: &ParameterStore,
    params: &EncoderParams,
    doc: &Document,
    modality: Modality,
) -> Result<Option<ModalityEmbedding>> {
    let mut g = Graph::new(store);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let Some(enc) = encode_text(&mut g, params, doc, modality, Mode::Infer, 0.0, &mut rng)? else {
        return Ok(None);
    };
    Ok(Some(ModalityEmbedding {
        modality,
        vector: Tensor::vector(g.value(enc.clean).to_vec()),
        word_level: Some(enc.word_level.iter().map(|&n| Tensor::vector(g.value(n).to_vec())).collect()),
    }))
}

pub fn embed_visual(store: &ParameterStore, params: &EncoderParams, feat: &[f64]) -> Result<ModalityEmbedding> {
    let mut g = Graph::new(store);
    let e = encode_visual(&mut g, params, feat)?;
    Ok(ModalityEmbedding {
        modality: Modality::Visual,
        vector: Tensor::vector(g.value(e).to_vec()),
        word_level: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{check_gradients, GradCheckConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(vocab: usize) -> (ParameterStore, EncoderParams) {
        let cfg = EncoderConfig {
            embed_dim: 4,
            lstm_hidden: 4,
            visual_in_dim: 6,
            post_recurrent_dropout: 0.5,
        };
        let mut s = ParameterStore::new(0);
        let p = EncoderParams::register(&mut s, &cfg, vocab, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        (s, p)
    }

    fn doc(ids: &[u32]) -> Document {
        Document {
            token_ids: ids.to_vec(),
            original_length: ids.len(),
        }
    }

    #[test]
    fn zero_lstm_single_token_pools_to_zero() {
        let (mut s, p) = small(5);
        for l in p.text {
            s.value_mut(l.w).fill(0.0);
        }
        let e = embed_text(&s, &p, &doc(&[3]), Modality::User).unwrap().unwrap();
        assert!(e.vector.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pooled_vector_is_mean_of_word_level() {
        let (s, p) = small(6);
        let e = embed_text(&s, &p, &doc(&[2, 5, 3, 4]), Modality::Item).unwrap().unwrap();
        let wl = e.word_level.as_ref().unwrap();
        for k in 0..4 {
            let mean = wl.iter().map(|t| t.values()[k]).sum::<f64>() / wl.len() as f64;
            assert!((mean - e.vector.values()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn padding_does_not_change_embedding() {
        let (s, p) = small(6);
        let a = embed_text(&s, &p, &doc(&[2, 5, 3]), Modality::Meta).unwrap().unwrap();
        let b = embed_text(&s, &p, &doc(&[2, 5, 3, PAD, PAD]), Modality::Meta).unwrap().unwrap();
        assert_eq!(a.vector, b.vector);
    }

    #[test]
    fn empty_document_signals_missing() {
        let (s, p) = small(6);
        assert!(embed_text(&s, &p, &doc(&[]), Modality::User).unwrap().is_none());
        assert!(embed_text(&s, &p, &doc(&[PAD, PAD]), Modality::User).unwrap().is_none());
    }

    #[test]
    fn inference_is_deterministic() {
        let (s, p) = small(6);
        let a = embed_text(&s, &p, &doc(&[2, 3, 4]), Modality::User).unwrap();
        let b = embed_text(&s, &p, &doc(&[2, 3, 4]), Modality::User).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn text_encoders_are_independent() {
        let (mut s, p) = small(6);
        let d = doc(&[2, 3, 4]);
        let before: Vec<_> = [Modality::Item, Modality::Meta]
            .iter()
            .map(|&m| embed_text(&s, &p, &d, m).unwrap().unwrap().vector)
            .collect();
        s.value_mut(p.text[0].w).values_mut().iter_mut().for_each(|v| *v += 0.3);
        let after: Vec<_> = [Modality::Item, Modality::Meta]
            .iter()
            .map(|&m| embed_text(&s, &p, &d, m).unwrap().unwrap().vector)
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn visual_projection_cases() {
        let (mut s, p) = small(4);
        s.value_mut(p.visual_w).fill(0.0);
        let e = embed_visual(&s, &p, &[0.5; 6]).unwrap();
        assert!(e.vector.values().iter().all(|&v| v == 0.0));

        let w = s.value_mut(p.visual_w);
        for r in 0..4 {
            w.values_mut()[r * 6 + r] = 1.0;
        }
        let e = embed_visual(&s, &p, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((e.vector.values()[0] - 0.761_594_155_955_764_9).abs() < 1e-12);
        assert!(e.vector.values()[1..].iter().all(|&v| v == 0.0));

        assert!(matches!(embed_visual(&s, &p, &[1.0; 5]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn visual_gradient_matches_finite_differences() {
        let (s, p) = small(4);
        let feat: Vec<f64> = (0..6).map(|k| (k as f64 * 0.9).cos()).collect();
        let loss = |st: &ParameterStore| {
            let mut g = Graph::new(st);
            let e = encode_visual(&mut g, &p, &feat)?;
            let l = g.sum_squares(&[e]);
            let grads = g.backward(l)?;
            Ok((g.scalar(l), Some(grads)))
        };
        let report = check_gradients(&s, loss, &GradCheckConfig::default()).unwrap();
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn dropout_keep_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let m = dropout_mask(100_000, 0.5, &mut rng);
        let kept = m.iter().filter(|&&v| v > 0.0).count() as f64 / 1e5;
        assert!((kept - 0.5).abs() < 0.02);
        assert!(m.iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn embedding_gradient_is_sparse() {
        let (s, p) = small(8);
        let d = doc(&[2, 5]);
        let mut g = Graph::new(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = encode_text(&mut g, &p, &d, Modality::User, Mode::Infer, 0.0, &mut rng).unwrap().unwrap();
        let l = g.sum(enc.clean);
        let grads = g.backward(l).unwrap();
        let eg = grads.get(p.embed).unwrap();
        for row in 0..8 {
            let nz = eg[row * 4..row * 4 + 4].iter().any(|&v| v != 0.0);
            assert_eq!(nz, row == 2 || row == 5, "row {row}");
        }
    }
}
