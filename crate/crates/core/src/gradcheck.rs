//! Central finite-difference gradient checking.
//!
//! The checker only ever evaluates the loss as a black box; analytic
//! gradients come from whatever the closure returns.

use std::fmt;

use crate::error::Result;
use crate::graph::Gradients;
use crate::params::ParameterStore;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub step: f64,
    pub rel_tol: f64,
    /// Denominator floor for the relative error, so components that are
    /// numerically zero are judged by absolute difference.
    pub floor: f64,
    /// Check at most this many entries per tensor (evenly strided); `None`
    /// checks every entry.
    pub max_per_tensor: Option<usize>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            rel_tol: 1e-4,
            floor: 1e-6,
            max_per_tensor: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub rel_tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.max_rel_err < self.rel_tol)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_err).fold(0.0, f64::max)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tensors {
            writeln!(
                f,
                "{:<24} n={:<6} max_rel={:.3e} (idx {} analytic {:.6e} numeric {:.6e})",
                t.name, t.checked, t.max_rel_err, t.worst_index, t.worst_analytic, t.worst_numeric
            )?;
        }
        Ok(())
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// `loss` must be deterministic in the store; it returns the loss value and,
/// for the unperturbed call, the analytic gradients.
pub fn check_gradients<F>(store: &ParameterStore, loss: F, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&ParameterStore) -> Result<(f64, Option<Gradients>)>,
{
    let (_, grads) = loss(store)?;
    let grads = grads.expect("loss closure must return gradients for the base point");
    let mut work = store.clone();
    let mut tensors = Vec::new();
    for (id, p) in store.iter() {
        let n = p.value.len();
        let stride = match cfg.max_per_tensor {
            Some(m) if m < n => n.div_ceil(m),
            _ => 1,
        };
        let analytic = grads.get(id);
        let mut tc = TensorCheck {
            name: p.name.clone(),
            checked: 0,
            max_rel_err: 0.0,
            worst_index: 0,
            worst_analytic: 0.0,
            worst_numeric: 0.0,
        };
        for k in (0..n).step_by(stride) {
            let orig = p.value.values()[k];
            work.value_mut(id).values_mut()[k] = orig + cfg.step;
            let (plus, _) = loss(&work)?;
            work.value_mut(id).values_mut()[k] = orig - cfg.step;
            let (minus, _) = loss(&work)?;
            work.value_mut(id).values_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = analytic.map_or(0.0, |g| g[k]);
            let err = relative_error(a, numeric, cfg.floor);
            tc.checked += 1;
            if err > tc.max_rel_err || tc.checked == 1 {
                tc.max_rel_err = err.max(tc.max_rel_err);
                tc.worst_index = k;
                tc.worst_analytic = a;
                tc.worst_numeric = numeric;
            }
        }
        tensors.push(tc);
    }
    Ok(GradCheckReport {
        tensors,
        rel_tol: cfg.rel_tol,
    })
}
