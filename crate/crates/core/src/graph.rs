//! Reverse-mode differentiation over a recorded operation tape.
//!
//! A [`Graph`] borrows a [`ParameterStore`] for the duration of one forward
//! pass. Every operation appends a node holding its value; [`Graph::backward`]
//! walks the tape in reverse and returns per-parameter gradients, which the
//! caller folds into the store with [`Gradients::accumulate_into`].

use crate::error::{Error, Result};
use crate::params::{ParamId, ParameterStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

/// Lower clamp applied to mean activations inside the KL penalty.
pub const KL_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    /// `W · (xs[0] ⊕ xs[1] ⊕ …) + b`
    Affine {
        w: ParamId,
        b: Option<ParamId>,
        xs: Vec<NodeId>,
    },
    Row {
        table: ParamId,
        index: usize,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    ScalarMul {
        s: NodeId,
        x: NodeId,
    },
    Sigmoid(NodeId),
    Tanh(NodeId),
    Softplus(NodeId),
    Concat(Vec<NodeId>),
    Slice {
        x: NodeId,
        start: usize,
    },
    Mean(Vec<NodeId>),
    AddN(Vec<NodeId>),
    Sum(NodeId),
    SumSquares(Vec<NodeId>),
    Norm(Vec<NodeId>),
    KlSparsity {
        hidden: Vec<NodeId>,
        rho: f64,
    },
    /// Input is the pre-activation `z = [z_i; z_f; z_o; z_g]`; output is `[h; c]`.
    LstmCell {
        z: NodeId,
        c_prev: NodeId,
    },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

pub struct Graph<'s> {
    store: &'s ParameterStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for positive `y`.
pub fn softplus_inverse(y: f64) -> f64 {
    y + (-(-y).exp()).ln_1p()
}

/// KL divergence between Bernoulli(`rho`) and Bernoulli(`rho_hat`), with
/// `rho_hat` clamped into `[KL_CLAMP, 1 - KL_CLAMP]`.
pub fn bernoulli_kl(rho: f64, rho_hat: f64) -> f64 {
    let r = rho_hat.clamp(KL_CLAMP, 1.0 - KL_CLAMP);
    rho * (rho / r).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - r)).ln()
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParameterStore) -> Self {
        Graph {
            store,
            nodes: Vec::with_capacity(1024),
            param_nodes: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'s ParameterStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[0]
    }

    fn push(&mut self, value: Vec<f64>, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn ng(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn same_len(&self, a: NodeId, b: NodeId, what: &str) -> Result<()> {
        let (la, lb) = (self.nodes[a.0].value.len(), self.nodes[b.0].value.len());
        if la != lb {
            return Err(Error::invalid(format!("{what}: length {la} vs {lb}")));
        }
        Ok(())
    }

    pub fn input(&mut self, values: Vec<f64>) -> NodeId {
        self.push(values, Op::Input, false)
    }

    pub fn zeros(&mut self, n: usize) -> NodeId {
        self.input(vec![0.0; n])
    }

    /// A node carrying the current value of a parameter (deduplicated).
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.param_nodes[id.0] {
            return n;
        }
        let v = self.store.value(id).values().to_vec();
        let n = self.push(v, Op::Param(id), true);
        self.param_nodes[id.0] = Some(n);
        n
    }

    pub fn affine(&mut self, w: ParamId, xs: &[NodeId], b: Option<ParamId>) -> Result<NodeId> {
        let wt = self.store.value(w);
        let (rows, cols) = (wt.rows(), wt.cols());
        let in_len: usize = xs.iter().map(|x| self.nodes[x.0].value.len()).sum();
        if in_len != cols {
            return Err(Error::invalid(format!(
                "affine `{}`: expects input length {cols}, got {in_len}",
                self.store.get(w).name
            )));
        }
        let mut out = match b {
            Some(b) => {
                let bv = self.store.value(b).values();
                if bv.len() != rows {
                    return Err(Error::invalid(format!(
                        "affine bias `{}` has length {}, expected {rows}",
                        self.store.get(b).name,
                        bv.len()
                    )));
                }
                bv.to_vec()
            }
            None => vec![0.0; rows],
        };
        let wv = wt.values();
        let mut offset = 0;
        for x in xs {
            let xv = &self.nodes[x.0].value;
            for (r, o) in out.iter_mut().enumerate() {
                let row = &wv[r * cols + offset..r * cols + offset + xv.len()];
                *o += row.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>();
            }
            offset += xv.len();
        }
        Ok(self.push(
            out,
            Op::Affine {
                w,
                b,
                xs: xs.to_vec(),
            },
            true,
        ))
    }

    pub fn row(&mut self, table: ParamId, index: usize) -> Result<NodeId> {
        let t = self.store.value(table);
        if index >= t.rows() {
            return Err(Error::invalid(format!(
                "row {index} out of range for `{}` with {} rows",
                self.store.get(table).name,
                t.rows()
            )));
        }
        let c = t.cols();
        let v = t.values()[index * c..(index + 1) * c].to_vec();
        Ok(self.push(v, Op::Row { table, index }, true))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len(a, b, "add")?;
        let v = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(x, y)| x + y).collect();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len(a, b, "sub")?;
        let v = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(x, y)| x - y).collect();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len(a, b, "mul")?;
        let v = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(x, y)| x * y).collect();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, x: NodeId, k: f64) -> NodeId {
        let v = self.nodes[x.0].value.iter().map(|v| v * k).collect();
        let ng = self.ng(x);
        self.push(v, Op::Scale(x, k), ng)
    }

    /// Multiplies every element of `x` by the single-element node `s`.
    pub fn scalar_mul(&mut self, s: NodeId, x: NodeId) -> Result<NodeId> {
        if self.nodes[s.0].value.len() != 1 {
            return Err(Error::invalid("scalar_mul: first operand must have length 1"));
        }
        let k = self.nodes[s.0].value[0];
        let v = self.nodes[x.0].value.iter().map(|v| v * k).collect();
        let ng = self.ng(s) || self.ng(x);
        Ok(self.push(v, Op::ScalarMul { s, x }, ng))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x.0].value.iter().map(|&v| sigmoid(v)).collect();
        let ng = self.ng(x);
        self.push(v, Op::Sigmoid(x), ng)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x.0].value.iter().map(|v| v.tanh()).collect();
        let ng = self.ng(x);
        self.push(v, Op::Tanh(x), ng)
    }

    pub fn softplus(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x.0].value.iter().map(|&v| softplus(v)).collect();
        let ng = self.ng(x);
        self.push(v, Op::Softplus(x), ng)
    }

    pub fn concat(&mut self, xs: &[NodeId]) -> NodeId {
        let mut v = Vec::with_capacity(xs.iter().map(|x| self.nodes[x.0].value.len()).sum());
        for x in xs {
            v.extend_from_slice(&self.nodes[x.0].value);
        }
        let ng = xs.iter().any(|&x| self.ng(x));
        self.push(v, Op::Concat(xs.to_vec()), ng)
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let src = &self.nodes[x.0].value;
        if start + len > src.len() {
            return Err(Error::invalid(format!(
                "slice [{start}, {}) out of range for length {}",
                start + len,
                src.len()
            )));
        }
        let v = src[start..start + len].to_vec();
        let ng = self.ng(x);
        Ok(self.push(v, Op::Slice { x, start }, ng))
    }

    /// Elementwise mean of equal-length nodes.
    pub fn mean(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let mut v = self.sum_nodes(xs, "mean")?;
        let k = 1.0 / xs.len() as f64;
        v.iter_mut().for_each(|x| *x *= k);
        let ng = xs.iter().any(|&x| self.ng(x));
        Ok(self.push(v, Op::Mean(xs.to_vec()), ng))
    }

    /// Elementwise sum of equal-length nodes.
    pub fn add_n(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let v = self.sum_nodes(xs, "add_n")?;
        let ng = xs.iter().any(|&x| self.ng(x));
        Ok(self.push(v, Op::AddN(xs.to_vec()), ng))
    }

    fn sum_nodes(&self, xs: &[NodeId], what: &str) -> Result<Vec<f64>> {
        let first = xs.first().ok_or_else(|| Error::invalid(format!("{what} of nothing")))?;
        let mut v = self.nodes[first.0].value.clone();
        for x in &xs[1..] {
            self.same_len(*first, *x, what)?;
            v.iter_mut().zip(&self.nodes[x.0].value).for_each(|(a, b)| *a += b);
        }
        Ok(v)
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.nodes[x.0].value.iter().sum();
        let ng = self.ng(x);
        self.push(vec![s], Op::Sum(x), ng)
    }

    /// `Σ x²` over all elements of all inputs.
    pub fn sum_squares(&mut self, xs: &[NodeId]) -> NodeId {
        let s = xs
            .iter()
            .flat_map(|x| self.nodes[x.0].value.iter())
            .map(|v| v * v)
            .sum();
        let ng = xs.iter().any(|&x| self.ng(x));
        self.push(vec![s], Op::SumSquares(xs.to_vec()), ng)
    }

    /// Euclidean norm of the concatenation of the inputs.
    pub fn l2_norm(&mut self, xs: &[NodeId]) -> NodeId {
        let s: f64 = xs
            .iter()
            .flat_map(|x| self.nodes[x.0].value.iter())
            .map(|v| v * v)
            .sum();
        let ng = xs.iter().any(|&x| self.ng(x));
        self.push(vec![s.sqrt()], Op::Norm(xs.to_vec()), ng)
    }

    /// Sparsity penalty `Σ_i KL(rho ‖ mean_b hidden[b][i])`.
    pub fn kl_sparsity(&mut self, hidden: &[NodeId], rho: f64) -> Result<NodeId> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::invalid(format!("sparsity target rho={rho} must lie in (0,1)")));
        }
        let mut mean = self.sum_nodes(hidden, "kl_sparsity")?;
        let k = 1.0 / hidden.len() as f64;
        let h: f64 = mean
            .iter_mut()
            .map(|m| {
                *m *= k;
                bernoulli_kl(rho, *m)
            })
            .sum();
        let ng = hidden.iter().any(|&x| self.ng(x));
        Ok(self.push(
            vec![h],
            Op::KlSparsity {
                hidden: hidden.to_vec(),
                rho,
            },
            ng,
        ))
    }

    /// One LSTM cell update from pre-activations `z` (length `4H`, gate order
    /// input, forget, output, candidate) and the previous memory cell.
    /// Returns a node holding `[h; c]`.
    pub fn lstm_cell(&mut self, z: NodeId, c_prev: NodeId) -> Result<NodeId> {
        let hsz = self.nodes[c_prev.0].value.len();
        let zv = &self.nodes[z.0].value;
        if zv.len() != 4 * hsz {
            return Err(Error::invalid(format!(
                "lstm_cell: pre-activation length {} is not 4 x hidden {hsz}",
                zv.len()
            )));
        }
        let cp = &self.nodes[c_prev.0].value;
        let mut out = vec![0.0; 2 * hsz];
        for k in 0..hsz {
            let i = sigmoid(zv[k]);
            let f = sigmoid(zv[hsz + k]);
            let o = sigmoid(zv[2 * hsz + k]);
            let g = zv[3 * hsz + k].tanh();
            let c = f * cp[k] + i * g;
            out[k] = o * c.tanh();
            out[hsz + k] = c;
        }
        let ng = self.ng(z) || self.ng(c_prev);
        Ok(self.push(out, Op::LstmCell { z, c_prev }, ng))
    }

    /// Reverse pass from the single-element node `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(Error::State("backward called before any forward operation".into()));
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::State(format!(
                "backward needs a scalar loss, node has {} elements",
                self.nodes[loss.0].value.len()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        let mut pgrads: Vec<Option<Vec<f64>>> = vec![None; self.store.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Input => {}
                Op::Param(p) => add_into(&mut pgrads[p.0], &g, 1.0),
                Op::Affine { w, b, xs } => {
                    let wt = self.store.value(*w);
                    let cols = wt.cols();
                    let wv = wt.values();
                    let wg = pgrads[w.0].get_or_insert_with(|| vec![0.0; wv.len()]);
                    let mut offset = 0;
                    for x in xs {
                        let xv = &self.nodes[x.0].value;
                        for (r, &gr) in g.iter().enumerate() {
                            if gr == 0.0 {
                                continue;
                            }
                            let row = &mut wg[r * cols + offset..r * cols + offset + xv.len()];
                            row.iter_mut().zip(xv).for_each(|(a, xi)| *a += gr * xi);
                        }
                        offset += xv.len();
                    }
                    if let Some(b) = b {
                        add_into(&mut pgrads[b.0], &g, 1.0);
                    }
                    let mut offset = 0;
                    for x in xs {
                        let n = self.nodes[x.0].value.len();
                        if self.nodes[x.0].needs_grad {
                            let mut dx = vec![0.0; n];
                            for (r, &gr) in g.iter().enumerate() {
                                if gr == 0.0 {
                                    continue;
                                }
                                let row = &wv[r * cols + offset..r * cols + offset + n];
                                dx.iter_mut().zip(row).for_each(|(d, wi)| *d += gr * wi);
                            }
                            add_owned(&mut grads[x.0], dx);
                        }
                        offset += n;
                    }
                }
                Op::Row { table, index } => {
                    let t = self.store.value(*table);
                    let c = t.cols();
                    let tg = pgrads[table.0].get_or_insert_with(|| vec![0.0; t.len()]);
                    tg[index * c..(index + 1) * c]
                        .iter_mut()
                        .zip(&g)
                        .for_each(|(a, b)| *a += b);
                }
                Op::Add(a, b) => {
                    self.send(&mut grads, *a, &g, 1.0);
                    self.send(&mut grads, *b, &g, 1.0);
                }
                Op::Sub(a, b) => {
                    self.send(&mut grads, *a, &g, 1.0);
                    self.send(&mut grads, *b, &g, -1.0);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    if self.ng(*a) {
                        add_owned(&mut grads[a.0], g.iter().zip(bv).map(|(g, y)| g * y).collect());
                    }
                    if self.ng(*b) {
                        add_owned(&mut grads[b.0], g.iter().zip(av).map(|(g, x)| g * x).collect());
                    }
                }
                Op::Scale(x, k) => self.send(&mut grads, *x, &g, *k),
                Op::ScalarMul { s, x } => {
                    let k = self.nodes[s.0].value[0];
                    if self.ng(*s) {
                        let d: f64 = g.iter().zip(&self.nodes[x.0].value).map(|(a, b)| a * b).sum();
                        add_owned(&mut grads[s.0], vec![d]);
                    }
                    self.send(&mut grads, *x, &g, k);
                }
                Op::Sigmoid(x) => {
                    let y = &node.value;
                    let d = g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect();
                    add_owned(&mut grads[x.0], d);
                }
                Op::Tanh(x) => {
                    let y = &node.value;
                    let d = g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect();
                    add_owned(&mut grads[x.0], d);
                }
                Op::Softplus(x) => {
                    let xv = &self.nodes[x.0].value;
                    let d = g.iter().zip(xv).map(|(g, &x)| g * sigmoid(x)).collect();
                    add_owned(&mut grads[x.0], d);
                }
                Op::Concat(xs) => {
                    let mut offset = 0;
                    for x in xs {
                        let n = self.nodes[x.0].value.len();
                        self.send(&mut grads, *x, &g[offset..offset + n], 1.0);
                        offset += n;
                    }
                }
                Op::Slice { x, start } => {
                    if self.ng(*x) {
                        let n = self.nodes[x.0].value.len();
                        let slot = grads[x.0].get_or_insert_with(|| vec![0.0; n]);
                        slot[*start..*start + g.len()]
                            .iter_mut()
                            .zip(&g)
                            .for_each(|(a, b)| *a += b);
                    }
                }
                Op::Mean(xs) => {
                    let k = 1.0 / xs.len() as f64;
                    for x in xs {
                        self.send(&mut grads, *x, &g, k);
                    }
                }
                Op::AddN(xs) => {
                    for x in xs {
                        self.send(&mut grads, *x, &g, 1.0);
                    }
                }
                Op::Sum(x) => {
                    let n = self.nodes[x.0].value.len();
                    if self.ng(*x) {
                        add_owned(&mut grads[x.0], vec![g[0]; n]);
                    }
                }
                Op::SumSquares(xs) => {
                    for x in xs {
                        if self.ng(*x) {
                            let d = self.nodes[x.0].value.iter().map(|v| 2.0 * v * g[0]).collect();
                            add_owned(&mut grads[x.0], d);
                        }
                    }
                }
                Op::Norm(xs) => {
                    let n = node.value[0];
                    if n > 0.0 {
                        for x in xs {
                            if self.ng(*x) {
                                let d = self.nodes[x.0].value.iter().map(|v| v / n * g[0]).collect();
                                add_owned(&mut grads[x.0], d);
                            }
                        }
                    }
                }
                Op::KlSparsity { hidden, rho } => {
                    let k = 1.0 / hidden.len() as f64;
                    let mut mean = vec![0.0; self.nodes[hidden[0].0].value.len()];
                    for h in hidden {
                        mean.iter_mut().zip(&self.nodes[h.0].value).for_each(|(m, v)| *m += v);
                    }
                    let dmean: Vec<f64> = mean
                        .iter()
                        .map(|m| {
                            let m = m * k;
                            if !(KL_CLAMP..=1.0 - KL_CLAMP).contains(&m) {
                                0.0
                            } else {
                                (-rho / m + (1.0 - rho) / (1.0 - m)) * g[0] * k
                            }
                        })
                        .collect();
                    for h in hidden {
                        self.send(&mut grads, *h, &dmean, 1.0);
                    }
                }
                Op::LstmCell { z, c_prev } => {
                    let hsz = node.value.len() / 2;
                    let zv = &self.nodes[z.0].value;
                    let cp = &self.nodes[c_prev.0].value;
                    let (dh, dc_out) = g.split_at(hsz);
                    let mut dz = vec![0.0; 4 * hsz];
                    let mut dcp = vec![0.0; hsz];
                    for k in 0..hsz {
                        let i = sigmoid(zv[k]);
                        let f = sigmoid(zv[hsz + k]);
                        let o = sigmoid(zv[2 * hsz + k]);
                        let gg = zv[3 * hsz + k].tanh();
                        let c = node.value[hsz + k];
                        let th = c.tanh();
                        let dc = dc_out[k] + dh[k] * o * (1.0 - th * th);
                        dz[k] = dc * gg * i * (1.0 - i);
                        dz[hsz + k] = dc * cp[k] * f * (1.0 - f);
                        dz[2 * hsz + k] = dh[k] * th * o * (1.0 - o);
                        dz[3 * hsz + k] = dc * i * (1.0 - gg * gg);
                        dcp[k] = dc * f;
                    }
                    if self.ng(*z) {
                        add_owned(&mut grads[z.0], dz);
                    }
                    if self.ng(*c_prev) {
                        add_owned(&mut grads[c_prev.0], dcp);
                    }
                }
            }
        }
        Ok(Gradients { grads: pgrads })
    }

    fn send(&self, grads: &mut [Option<Vec<f64>>], to: NodeId, g: &[f64], k: f64) {
        if self.nodes[to.0].needs_grad {
            add_into(&mut grads[to.0], g, k);
        }
    }
}

fn add_into(slot: &mut Option<Vec<f64>>, g: &[f64], k: f64) {
    match slot {
        Some(v) => v.iter_mut().zip(g).for_each(|(a, b)| *a += k * b),
        None => *slot = Some(g.iter().map(|b| k * b).collect()),
    }
}

fn add_owned(slot: &mut Option<Vec<f64>>, g: Vec<f64>) {
    match slot {
        Some(v) => v.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
        None => *slot = Some(g),
    }
}

/// Per-parameter gradients produced by one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// `None` when the loss does not depend on the parameter.
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    pub fn accumulate_into(&self, store: &mut ParameterStore) {
        self.accumulate_scaled(store, 1.0);
    }

    pub fn accumulate_scaled(&self, store: &mut ParameterStore, scale: f64) {
        for (i, g) in self.grads.iter().enumerate() {
            if let Some(g) = g {
                store.accumulate_grad(ParamId(i), g, scale);
            }
        }
    }
}
