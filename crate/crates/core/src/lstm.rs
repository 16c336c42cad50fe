//! LSTM cell used by the three text encoders.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParameterStore};
use crate::tensor::{init_orthogonal, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellState {
    pub c: Tensor,
    pub h: Tensor,
}

impl LstmCellState {
    pub fn zeros(hidden: usize) -> Self {
        LstmCellState {
            c: Tensor::zeros(&[hidden]),
            h: Tensor::zeros(&[hidden]),
        }
    }
}

/// Parameter handles of one LSTM: `w` is `[4H, d_in + H]` acting on
/// `(x_t; h_{t-1})`, `b` is `[4H]`. Gate order is input, forget, output,
/// candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

/// Graph handles for a cell state inside a forward pass.
#[derive(Debug, Clone, Copy)]
pub struct LstmNodes {
    pub h: NodeId,
    pub c: NodeId,
}

impl LstmParams {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParameterStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let w = store.insert(&format!("{prefix}.w"), init_orthogonal(4 * hidden, input + hidden, rng)?)?;
        let b = store.insert(&format!("{prefix}.b"), Tensor::zeros(&[4 * hidden]))?;
        Ok(LstmParams { w, b, input, hidden })
    }

    pub fn from_store(store: &ParameterStore, prefix: &str) -> Result<Self> {
        let w = store.id(&format!("{prefix}.w"))?;
        let b = store.id(&format!("{prefix}.b"))?;
        let shape = store.value(w).shape();
        if shape.len() != 2 || !shape[0].is_multiple_of(4) {
            return Err(Error::Format(format!("`{prefix}.w` has shape {shape:?}")));
        }
        let hidden = shape[0] / 4;
        if shape[1] < hidden || store.value(b).len() != 4 * hidden {
            return Err(Error::Format(format!("`{prefix}` parameter shapes disagree")));
        }
        Ok(LstmParams {
            w,
            b,
            input: shape[1] - hidden,
            hidden,
        })
    }

    pub fn initial_state(&self, g: &mut Graph<'_>) -> LstmNodes {
        LstmNodes {
            h: g.zeros(self.hidden),
            c: g.zeros(self.hidden),
        }
    }

    /// Records one step on the tape.
    pub fn step(&self, g: &mut Graph<'_>, x: NodeId, prev: LstmNodes) -> Result<LstmNodes> {
        if g.value(x).len() != self.input {
            return Err(Error::invalid(format!(
                "lstm input has length {}, expected {}",
                g.value(x).len(),
                self.input
            )));
        }
        let z = g.affine(self.w, &[x, prev.h], Some(self.b))?;
        let hc = g.lstm_cell(z, prev.c)?;
        Ok(LstmNodes {
            h: g.slice(hc, 0, self.hidden)?,
            c: g.slice(hc, self.hidden, self.hidden)?,
        })
    }
}

/// Evaluates one LSTM step outside of any training graph.
pub fn lstm_step(store: &ParameterStore, params: &LstmParams, x: &Tensor, prev: &LstmCellState) -> Result<LstmCellState> {
    if prev.c.len() != params.hidden || prev.h.len() != params.hidden {
        return Err(Error::invalid("previous state does not match hidden size"));
    }
    let mut g = Graph::new(store);
    let x = g.input(x.values().to_vec());
    let h = g.input(prev.h.values().to_vec());
    let c = g.input(prev.c.values().to_vec());
    let next = params.step(&mut g, x, LstmNodes { h, c })?;
    Ok(LstmCellState {
        c: Tensor::vector(g.value(next.c).to_vec()),
        h: Tensor::vector(g.value(next.h).to_vec()),
    })
}
