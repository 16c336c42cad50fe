//! ADADELTA with a learning-rate multiplier and optional per-tensor L2 decay.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::params::ParameterStore;

#[derive(Debug, Clone, PartialEq)]
pub struct Adadelta {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    /// Names of tensors that receive `grad += lambda * value` before the step.
    pub weight_decay_names: BTreeSet<String>,
    pub lambda: f64,
    /// Per-tensor multipliers on `lr`; tensors not listed use 1.
    pub lr_scale: BTreeMap<String, f64>,
}

impl Default for Adadelta {
    fn default() -> Self {
        Adadelta {
            lr: 1e-4,
            rho: 0.95,
            eps: 1e-6,
            weight_decay_names: BTreeSet::new(),
            lambda: 0.0,
            lr_scale: BTreeMap::new(),
        }
    }
}

impl Adadelta {
    pub fn new(lr: f64) -> Self {
        Adadelta {
            lr,
            ..Default::default()
        }
    }

    /// Applies one update from the gradients currently held in `store`.
    ///
    /// All gradients are checked before anything is modified, so a
    /// non-finite gradient leaves the store untouched.
    pub fn step(&self, store: &mut ParameterStore) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::invalid(format!("decay rho={} must lie in (0,1)", self.rho)));
        }
        if self.eps <= 0.0 {
            return Err(Error::invalid(format!("eps={} must be positive", self.eps)));
        }
        for (_, p) in store.iter() {
            if !p.grad.is_finite() {
                return Err(Error::TrainingDiverged(p.name.clone()));
            }
        }
        for id in store.ids() {
            let p = store.get_mut(id);
            let decay = if self.weight_decay_names.contains(&p.name) {
                self.lambda
            } else {
                0.0
            };
            let lr = self.lr * self.lr_scale.get(&p.name).copied().unwrap_or(1.0);
            let values = p.value.values_mut();
            let grads = p.grad.values();
            let acc_g = p.acc_g.values_mut();
            let acc_x = p.acc_x.values_mut();
            for k in 0..values.len() {
                let g = grads[k] + decay * values[k];
                acc_g[k] = self.rho * acc_g[k] + (1.0 - self.rho) * g * g;
                let delta = -((acc_x[k] + self.eps).sqrt() / (acc_g[k] + self.eps).sqrt()) * g;
                acc_x[k] = self.rho * acc_x[k] + (1.0 - self.rho) * delta * delta;
                values[k] += lr * delta;
            }
        }
        Ok(())
    }
}

/// Functional form of [`Adadelta::step`].
pub fn adadelta_update(
    store: &mut ParameterStore,
    lr: f64,
    decay_rho: f64,
    eps: f64,
    weight_decay_names: &BTreeSet<String>,
    lambda: f64,
) -> Result<()> {
    Adadelta {
        lr,
        rho: decay_rho,
        eps,
        weight_decay_names: weight_decay_names.clone(),
        lambda,
        ..Default::default()
    }
    .step(store)
}
