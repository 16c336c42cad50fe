//! Modality dropout masks and the per-modality autoencoders that reconstruct
//! embeddings and impute missing ones.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::modality::{Modality, ModalityMask};
use crate::params::{ParamId, ParameterStore};
use crate::tensor::{init_uniform_fan, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MDropConfig {
    /// Probability that a sample undergoes modality dropout at all.
    pub p_m: f64,
    pub n_m: usize,
    pub min_kept: usize,
}

impl Default for MDropConfig {
    fn default() -> Self {
        MDropConfig {
            p_m: 0.0,
            n_m: 4,
            min_kept: 1,
        }
    }
}

impl MDropConfig {
    pub fn with_rate(p_m: f64) -> Self {
        MDropConfig {
            p_m,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_m) {
            return Err(Error::invalid(format!("p_m={} must lie in [0,1]", self.p_m)));
        }
        if self.n_m < 2 {
            return Err(Error::invalid("n_m must be at least 2"));
        }
        if self.min_kept < 1 || self.min_kept >= self.n_m {
            return Err(Error::invalid(format!(
                "min_kept={} must lie in [1, n_m)",
                self.min_kept
            )));
        }
        Ok(())
    }

    /// Probability that a given modality is dropped from one sample, by
    /// enumerating the number of survivors under the redraw rule.
    pub fn expected_drop_rate(&self) -> f64 {
        let n = self.n_m;
        let q = 1.0 / n as f64;
        let mut choose = 1.0;
        let (mut accepted, mut dropped) = (0.0, 0.0);
        for kept in 0..=n {
            if kept > 0 {
                choose *= (n - kept + 1) as f64 / kept as f64;
            }
            if kept < self.min_kept {
                continue;
            }
            let p = choose * (1.0 - q).powi(kept as i32) * q.powi((n - kept) as i32);
            accepted += p;
            dropped += p * (n - kept) as f64 / n as f64;
        }
        self.p_m * dropped / accepted
    }
}

/// Keep flags for `cfg.n_m` modalities. When the sample is selected for
/// dropout, each modality survives with probability `1 - 1/n_m`; draws that
/// keep fewer than `min_kept` are redrawn.
pub fn sample_keep<R: Rng + ?Sized>(cfg: &MDropConfig, rng: &mut R) -> Vec<bool> {
    if rng.random::<f64>() >= cfg.p_m {
        return vec![true; cfg.n_m];
    }
    let keep_p = 1.0 - 1.0 / cfg.n_m as f64;
    loop {
        let k: Vec<bool> = (0..cfg.n_m).map(|_| rng.random::<f64>() < keep_p).collect();
        if k.iter().filter(|&&b| b).count() >= cfg.min_kept {
            return k;
        }
    }
}

pub fn sample_mask<R: Rng + ?Sized>(cfg: &MDropConfig, rng: &mut R) -> ModalityMask {
    debug_assert_eq!(cfg.n_m, 4);
    let k = sample_keep(cfg, rng);
    ModalityMask::from_flags([k[0], k[1], k[2], k[3]])
}

/// Replaces masked slots with zero vectors of length `dim`. Slots that are
/// `None` are missing from the data and are treated the same way.
pub fn apply_mask(embeddings: &[Option<Vec<f64>>; 4], mask: ModalityMask, dim: usize) -> Result<[Vec<f64>; 4]> {
    let mut any = false;
    let out = std::array::from_fn(|k| match (&embeddings[k], mask.flags()[k]) {
        (Some(e), true) => {
            any = true;
            e.clone()
        }
        _ => vec![0.0; dim],
    });
    if !any {
        return Err(Error::DegenerateSample);
    }
    Ok(out)
}

/// One modality's autoencoder: `hid = sigmoid(W_enc x + b_enc)`,
/// `recon = sigmoid(W_dec hid + b_dec)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AeParams {
    pub w_enc: ParamId,
    pub b_enc: ParamId,
    pub w_dec: ParamId,
    pub b_dec: ParamId,
    pub dim: usize,
    pub hidden: usize,
}

impl AeParams {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParameterStore,
        m: Modality,
        dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let p = format!("ae.{}", m.short());
        Ok(AeParams {
            w_enc: store.insert(&format!("{p}.w_enc"), init_uniform_fan(dim, hidden, rng)?)?,
            b_enc: store.insert(&format!("{p}.b_enc"), Tensor::zeros(&[hidden]))?,
            w_dec: store.insert(&format!("{p}.w_dec"), init_uniform_fan(hidden, dim, rng)?)?,
            b_dec: store.insert(&format!("{p}.b_dec"), Tensor::zeros(&[dim]))?,
            dim,
            hidden,
        })
    }

    pub fn from_store(store: &ParameterStore, m: Modality) -> Result<Self> {
        let p = format!("ae.{}", m.short());
        let w_enc = store.id(&format!("{p}.w_enc"))?;
        let (hidden, dim) = (store.value(w_enc).rows(), store.value(w_enc).cols());
        let ae = AeParams {
            w_enc,
            b_enc: store.id(&format!("{p}.b_enc"))?,
            w_dec: store.id(&format!("{p}.w_dec"))?,
            b_dec: store.id(&format!("{p}.b_dec"))?,
            dim,
            hidden,
        };
        if store.value(ae.w_dec).shape() != [dim, hidden]
            || store.value(ae.b_enc).len() != hidden
            || store.value(ae.b_dec).len() != dim
        {
            return Err(Error::Format(format!("`{p}` parameter shapes disagree")));
        }
        Ok(ae)
    }

    /// Records the autoencoder on the tape; returns `(recon, hid)`.
    pub fn forward(&self, g: &mut Graph<'_>, input: NodeId) -> Result<(NodeId, NodeId)> {
        let a = g.affine(self.w_enc, &[input], Some(self.b_enc))?;
        let hid = g.sigmoid(a);
        let r = g.affine(self.w_dec, &[hid], Some(self.b_dec))?;
        Ok((g.sigmoid(r), hid))
    }
}

/// The four autoencoders, indexed by [`Modality::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AutoencoderParams(pub [AeParams; 4]);

impl AutoencoderParams {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParameterStore,
        dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if dim == 0 || hidden == 0 {
            return Err(Error::invalid("autoencoder sizes must be at least 1"));
        }
        let mut v = Vec::with_capacity(4);
        for m in Modality::ALL {
            v.push(AeParams::register(store, m, dim, hidden, rng)?);
        }
        Ok(AutoencoderParams([v[0], v[1], v[2], v[3]]))
    }

    pub fn from_store(store: &ParameterStore) -> Result<Self> {
        Ok(AutoencoderParams([
            AeParams::from_store(store, Modality::User)?,
            AeParams::from_store(store, Modality::Item)?,
            AeParams::from_store(store, Modality::Meta)?,
            AeParams::from_store(store, Modality::Visual)?,
        ]))
    }

    pub fn get(&self, m: Modality) -> &AeParams {
        &self.0[m.index()]
    }
}

/// Evaluates one autoencoder; returns `(recon, hid)`.
pub fn reconstruct(store: &ParameterStore, ae: &AeParams, input: &[f64]) -> Result<(Tensor, Tensor)> {
    let mut g = Graph::new(store);
    let x = g.input(input.to_vec());
    let (r, h) = ae.forward(&mut g, x)?;
    Ok((Tensor::vector(g.value(r).to_vec()), Tensor::vector(g.value(h).to_vec())))
}

/// Word-level variant: each step is encoded and decoded on its own and the
/// decodes are averaged. Returns the mean decode and the mean hidden code.
pub fn reconstruct_sequence(store: &ParameterStore, ae: &AeParams, steps: &[Vec<f64>]) -> Result<(Tensor, Tensor)> {
    if steps.is_empty() {
        return Err(Error::invalid("reconstruct_sequence needs at least one step"));
    }
    let mut g = Graph::new(store);
    let mut recons = Vec::with_capacity(steps.len());
    let mut hids = Vec::with_capacity(steps.len());
    for s in steps {
        let x = g.input(s.clone());
        let (r, h) = ae.forward(&mut g, x)?;
        recons.push(r);
        hids.push(h);
    }
    let r = g.mean(&recons)?;
    let h = g.mean(&hids)?;
    Ok((Tensor::vector(g.value(r).to_vec()), Tensor::vector(g.value(h).to_vec())))
}

/// Masks the embeddings and reconstructs every slot. Missing slots come out
/// as the decoder's response to a zero input.
pub fn impute(
    store: &ParameterStore,
    aes: &AutoencoderParams,
    embeddings: &[Option<Vec<f64>>; 4],
    mask: ModalityMask,
) -> Result<[Tensor; 4]> {
    let dim = aes.0[0].dim;
    let inputs = apply_mask(embeddings, mask, dim)?;
    let mut out = Vec::with_capacity(4);
    for m in Modality::ALL {
        out.push(reconstruct(store, aes.get(m), &inputs[m.index()])?.0);
    }
    let mut it = out.into_iter();
    Ok(std::array::from_fn(|_| it.next().expect("four slots")))
}
