//! Shared scoring layer and the training objective.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{softplus, softplus_inverse, Graph, NodeId};
use crate::params::{ParamId, ParameterStore};
use crate::tensor::{init_uniform_fan, Tensor};

/// `W_s` is `[1, 4d]` over the concatenation `(u, o, m, v)`. The mixing
/// weights are `softplus(alpha_raw)` and `softplus(beta_raw)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusionParams {
    pub w: ParamId,
    pub b: ParamId,
    pub alpha_raw: ParamId,
    pub beta_raw: ParamId,
    pub dim: usize,
}

impl FusionParams {
    pub fn register<R: Rng + ?Sized>(store: &mut ParameterStore, dim: usize, rng: &mut R) -> Result<Self> {
        let unit = softplus_inverse(1.0);
        Ok(FusionParams {
            w: store.insert("fusion.w", init_uniform_fan(4 * dim, 1, rng)?)?,
            b: store.insert("fusion.b", Tensor::zeros(&[1]))?,
            alpha_raw: store.insert("fusion.alpha_raw", Tensor::scalar(unit))?,
            beta_raw: store.insert("fusion.beta_raw", Tensor::scalar(unit))?,
            dim,
        })
    }

    pub fn from_store(store: &ParameterStore) -> Result<Self> {
        let w = store.id("fusion.w")?;
        let shape = store.value(w).shape();
        if shape.len() != 2 || shape[0] != 1 || !shape[1].is_multiple_of(4) {
            return Err(Error::Format(format!("`fusion.w` has shape {shape:?}")));
        }
        Ok(FusionParams {
            w,
            b: store.id("fusion.b")?,
            alpha_raw: store.id("fusion.alpha_raw")?,
            beta_raw: store.id("fusion.beta_raw")?,
            dim: shape[1] / 4,
        })
    }

    pub fn alpha(&self, store: &ParameterStore) -> f64 {
        softplus(store.value(self.alpha_raw).values()[0])
    }

    pub fn beta(&self, store: &ParameterStore) -> f64 {
        softplus(store.value(self.beta_raw).values()[0])
    }

    pub fn score_node(&self, g: &mut Graph<'_>, slots: &[NodeId; 4]) -> Result<NodeId> {
        g.affine(self.w, slots, Some(self.b))
    }

    /// `mean (pred - truth)^2 + lambda * ||{W_s, b_s}||`, or the squared
    /// norm when `squared_norm` is set.
    pub fn regression_loss_node(
        &self,
        g: &mut Graph<'_>,
        preds: &[NodeId],
        truths: &[f64],
        lambda: f64,
        squared_norm: bool,
    ) -> Result<(NodeId, NodeId)> {
        let mse = mse_node(g, preds, truths)?;
        if lambda == 0.0 {
            return Ok((mse, mse));
        }
        let w = g.param(self.w);
        let b = g.param(self.b);
        let penalty = if squared_norm { g.sum_squares(&[w, b]) } else { g.l2_norm(&[w, b]) };
        let penalty = g.scale(penalty, lambda);
        Ok((g.add(mse, penalty)?, mse))
    }

    /// `alpha * l_reg + beta * recon_sum`.
    pub fn total_loss_node(&self, g: &mut Graph<'_>, l_reg: NodeId, recon_sum: Option<NodeId>) -> Result<NodeId> {
        let ar = g.param(self.alpha_raw);
        let alpha = g.softplus(ar);
        let reg = g.scalar_mul(alpha, l_reg)?;
        let Some(recon) = recon_sum else { return Ok(reg) };
        let br = g.param(self.beta_raw);
        let beta = g.softplus(br);
        let rec = g.scalar_mul(beta, recon)?;
        g.add(reg, rec)
    }
}

fn mse_node(g: &mut Graph<'_>, preds: &[NodeId], truths: &[f64]) -> Result<NodeId> {
    if preds.is_empty() {
        return Err(Error::invalid("regression loss of an empty batch"));
    }
    if preds.len() != truths.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} truths",
            preds.len(),
            truths.len()
        )));
    }
    let mut diffs = Vec::with_capacity(preds.len());
    for (&p, &t) in preds.iter().zip(truths) {
        let t = g.input(vec![t]);
        diffs.push(g.sub(p, t)?);
    }
    let ss = g.sum_squares(&diffs);
    Ok(g.scale(ss, 1.0 / preds.len() as f64))
}

/// Graph handles of one modality's reconstruction term.
#[derive(Debug, Clone, Copy)]
pub struct ReconTerm {
    /// `mse + lambda_rho * kl`.
    pub loss: NodeId,
    pub mse: NodeId,
    pub kl: NodeId,
}

/// `mean_b ||recon_b - target_b||^2 + lambda_rho * KL(rho || mean_b hid_b)`
/// over the samples that have a target. `None` when there are none.
pub fn reconstruction_term(
    g: &mut Graph<'_>,
    recons: &[NodeId],
    targets: &[NodeId],
    hidden: &[NodeId],
    rho: f64,
    lambda_rho: f64,
) -> Result<Option<ReconTerm>> {
    if recons.len() != targets.len() || recons.len() != hidden.len() {
        return Err(Error::invalid("reconstruction inputs disagree in batch size"));
    }
    if recons.is_empty() {
        return Ok(None);
    }
    let mut diffs = Vec::with_capacity(recons.len());
    for (&r, &t) in recons.iter().zip(targets) {
        diffs.push(g.sub(r, t)?);
    }
    let ss = g.sum_squares(&diffs);
    let mse = g.scale(ss, 1.0 / recons.len() as f64);
    let kl = g.kl_sparsity(hidden, rho)?;
    let weighted = g.scale(kl, lambda_rho);
    let loss = g.add(mse, weighted)?;
    Ok(Some(ReconTerm { loss, mse, kl }))
}

/// Per-batch loss values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// Regression error before the weight-decay term.
    pub l_reg: f64,
    /// Reconstruction losses including their sparsity terms.
    pub l_recon: [f64; 4],
    pub kl: [f64; 4],
    pub alpha: f64,
    pub beta: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub const CSV_HEADER: &'static str =
        "epoch,batch,l_reg,l_recon_u,l_recon_o,l_recon_m,l_recon_v,kl_u,kl_o,kl_m,kl_v,alpha,beta,total";

    pub fn csv_row(&self, epoch: usize, batch: usize) -> String {
        let mut s = format!("{epoch},{batch},{:.8}", self.l_reg);
        for v in self.l_recon.iter().chain(&self.kl) {
            s.push_str(&format!(",{v:.8}"));
        }
        s.push_str(&format!(",{:.8},{:.8},{:.8}", self.alpha, self.beta, self.total));
        s
    }
}

/// `W_s · (u ⊕ o ⊕ m ⊕ v) + b_s`.
pub fn score(store: &ParameterStore, params: &FusionParams, slots: [&[f64]; 4]) -> Result<f64> {
    let mut g = Graph::new(store);
    let nodes = slots.map(|s| g.input(s.to_vec()));
    let s = params.score_node(&mut g, &nodes)?;
    Ok(g.scalar(s))
}

fn scratch() -> ParameterStore {
    ParameterStore::new(0)
}

/// Mean squared error plus `lambda` times the norm of `theta` (or its
/// square with `squared_norm`).
pub fn regression_loss(preds: &[f64], truths: &[f64], lambda: f64, theta: &[&[f64]], squared_norm: bool) -> Result<f64> {
    let store = scratch();
    let mut g = Graph::new(&store);
    let p: Vec<NodeId> = preds.iter().map(|&p| g.input(vec![p])).collect();
    let mse = mse_node(&mut g, &p, truths)?;
    if lambda == 0.0 || theta.is_empty() {
        return Ok(g.scalar(mse));
    }
    let th: Vec<NodeId> = theta.iter().map(|t| g.input(t.to_vec())).collect();
    let n = if squared_norm { g.sum_squares(&th) } else { g.l2_norm(&th) };
    Ok(g.scalar(mse) + lambda * g.scalar(n))
}

/// Sparsity penalty over a batch of hidden activations (one row per sample).
pub fn kl_sparsity(hidden: &[Vec<f64>], rho: f64) -> Result<f64> {
    let store = scratch();
    let mut g = Graph::new(&store);
    let h: Vec<NodeId> = hidden.iter().map(|r| g.input(r.clone())).collect();
    let kl = g.kl_sparsity(&h, rho)?;
    Ok(g.scalar(kl))
}

/// One modality's reconstruction loss; `0` for an empty batch.
pub fn reconstruction_loss(
    recons: &[Vec<f64>],
    targets: &[Vec<f64>],
    hidden: &[Vec<f64>],
    rho: f64,
    lambda_rho: f64,
) -> Result<f64> {
    let store = scratch();
    let mut g = Graph::new(&store);
    let mut load = |rows: &[Vec<f64>]| rows.iter().map(|r| g.input(r.clone())).collect::<Vec<_>>();
    let (r, t, h) = (load(recons), load(targets), load(hidden));
    Ok(reconstruction_term(&mut g, &r, &t, &h, rho, lambda_rho)?.map_or(0.0, |term| g.scalar(term.loss)))
}

pub fn total_loss(l_reg: f64, recon_sum: f64, alpha: f64, beta: f64) -> f64 {
    alpha * l_reg + beta * recon_sum
}
