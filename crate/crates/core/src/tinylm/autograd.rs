//! Tape-based reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Graph`] records every operation applied during a forward pass. Calling
//! [`Graph::backward`] on a `1×1` node walks the tape in reverse and returns
//! the gradient of that scalar with respect to every tensor in the
//! [`Parameters`] the graph was built over.

use ndarray::{s, Array2, Axis, Zip};

use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

const LAYER_NORM_EPS: f64 = 1e-5;

/// Index of a tensor inside a [`Parameters`] set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// An ordered set of named tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Parameters {
    names: Vec<String>,
    tensors: Vec<Matrix>,
}

impl Parameters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Matrix) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.id(name).map(|id| &self.tensors[id.0])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        let id = self.id(name)?;
        Some(&mut self.tensors[id.0])
    }

    pub fn tensor(&self, id: ParamId) -> &Matrix {
        &self.tensors[id.0]
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Matrix)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter_mut())
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn zeros_like(&self) -> Self {
        Self { names: self.names.clone(), tensors: self.tensors.iter().map(|t| Matrix::zeros(t.raw_dim())).collect() }
    }

    pub fn same_layout(&self, other: &Parameters) -> bool {
        self.names == other.names && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a.dim() == b.dim())
    }
}

/// Gradients share names and shapes with the parameters they belong to.
pub type Gradients = Parameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Gather { table: NodeId, ids: Vec<usize> },
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    MatMulT(NodeId, NodeId),
    LayerNorm { x: NodeId, gain: NodeId, bias: NodeId, xhat: Matrix, inv_std: Vec<f64> },
    Gelu(NodeId),
    Tanh(NodeId),
    Softplus(NodeId),
    Scale(NodeId, f64),
    Sum(Vec<NodeId>),
    MeanRows(NodeId),
    ConcatRows(NodeId, NodeId),
    Reshape(NodeId),
    CausalAttention { q: NodeId, k: NodeId, v: NodeId, heads: usize, probs: Vec<Matrix> },
    PickLogProbs { logits: NodeId, picks: Vec<(usize, usize)>, probs: Vec<(usize, Vec<f64>)> },
}

struct Node {
    value: Matrix,
    op: Op,
}

/// A recorded computation over a borrowed parameter set.
pub struct Graph<'p> {
    params: &'p Parameters,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p Parameters) -> Self {
        Self { params, nodes: Vec::new(), param_nodes: vec![None; params.len()] }
    }

    pub fn params(&self) -> &'p Parameters {
        self.params
    }

    fn push(&mut self, value: Matrix, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        match self.nodes[id.0].op {
            Op::Param(p) => self.params.tensor(p),
            _ => &self.nodes[id.0].value,
        }
    }

    /// The single entry of a `1×1` node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        debug_assert_eq!(v.dim(), (1, 1));
        v[[0, 0]]
    }

    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Constant)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(node) = self.param_nodes[id.0] {
            return node;
        }
        let node = self.push(Matrix::zeros((0, 0)), Op::Param(id));
        self.param_nodes[id.0] = Some(node);
        node
    }

    pub fn param_by_name(&mut self, name: &str) -> NodeId {
        let id = self.params.id(name).unwrap_or_else(|| panic!("no parameter named {name}"));
        self.param(id)
    }

    /// Rows of `table` selected by `ids`.
    pub fn gather(&mut self, table: NodeId, ids: &[usize]) -> NodeId {
        let t = self.value(table);
        let mut out = Matrix::zeros((ids.len(), t.ncols()));
        for (r, &i) in ids.iter().enumerate() {
            out.row_mut(r).assign(&t.row(i));
        }
        self.push(out, Op::Gather { table, ids: ids.to_vec() })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b))
    }

    /// `a + row`, broadcasting the `1×n` row over every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let out = self.value(a) + self.value(row);
        self.push(out, Op::AddRow(a, row))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a) - self.value(b);
        self.push(out, Op::Sub(a, b))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a).dot(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a).dot(&self.value(b).t());
        self.push(out, Op::MatMulT(a, b))
    }

    /// Row-wise layer normalization with `1×n` gain and bias.
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> NodeId {
        let xv = self.value(x);
        let n = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            row.mapv_inplace(|v| (v - mean) * inv);
            inv_std.push(inv);
        }
        let out = &xhat * self.value(gain) + self.value(bias);
        self.push(out, Op::LayerNorm { x, gain, bias, xhat, inv_std })
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).mapv(gelu);
        self.push(out, Op::Gelu(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).mapv(f64::tanh);
        self.push(out, Op::Tanh(x))
    }

    /// `ln(1 + eˣ)` elementwise.
    pub fn softplus(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).mapv(softplus);
        self.push(out, Op::Softplus(x))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let out = self.value(x) * factor;
        self.push(out, Op::Scale(x, factor))
    }

    /// Elementwise sum of equally shaped nodes.
    pub fn sum(&mut self, xs: &[NodeId]) -> NodeId {
        assert!(!xs.is_empty(), "sum of no nodes");
        let mut out = self.value(xs[0]).clone();
        for &x in &xs[1..] {
            out += self.value(x);
        }
        self.push(out, Op::Sum(xs.to_vec()))
    }

    /// Column means as a `1×n` row.
    pub fn mean_rows(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let out = v.mean_axis(Axis(0)).expect("mean over at least one row").insert_axis(Axis(0));
        self.push(out, Op::MeanRows(x))
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = ndarray::concatenate(Axis(0), &[self.value(a).view(), self.value(b).view()])
            .expect("concat with equal column counts");
        self.push(out, Op::ConcatRows(a, b))
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, x: NodeId, rows: usize, cols: usize) -> NodeId {
        let v = self.value(x);
        assert_eq!(v.len(), rows * cols, "reshape must preserve element count");
        let flat: Vec<f64> = v.iter().copied().collect();
        let out = Matrix::from_shape_vec((rows, cols), flat).expect("reshape");
        self.push(out, Op::Reshape(x))
    }

    /// Multi-head scaled dot-product attention where position `i` sees only
    /// positions `0..=i`.
    pub fn causal_attention(&mut self, q: NodeId, k: NodeId, v: NodeId, heads: usize) -> NodeId {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let (t, d) = qv.dim();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut out = Matrix::zeros((t, d));
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut scores = qv.slice(cols).dot(&kv.slice(cols).t());
            for (i, mut row) in scores.rows_mut().into_iter().enumerate() {
                let max = row.iter().take(i + 1).fold(f64::NEG_INFINITY, |m, &x| m.max(x * scale));
                let mut total = 0.0;
                for (j, x) in row.iter_mut().enumerate() {
                    if j <= i {
                        *x = (*x * scale - max).exp();
                        total += *x;
                    } else {
                        *x = 0.0;
                    }
                }
                row.mapv_inplace(|x| x / total);
            }
            out.slice_mut(cols).assign(&scores.dot(&vv.slice(cols)));
            probs.push(scores);
        }
        self.push(out, Op::CausalAttention { q, k, v, heads, probs })
    }

    /// Sum of `log softmax(logits[row])[col]` over `picks`, as a `1×1` node.
    pub fn pick_log_probs(&mut self, logits: NodeId, picks: &[(usize, usize)]) -> NodeId {
        let lv = self.value(logits);
        let mut rows: Vec<usize> = picks.iter().map(|&(r, _)| r).collect();
        rows.sort_unstable();
        rows.dedup();
        let mut probs = Vec::with_capacity(rows.len());
        let mut log_norm = std::collections::HashMap::with_capacity(rows.len());
        for &r in &rows {
            let row = lv.row(r);
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            log_norm.insert(r, max + total.ln());
            probs.push((r, exps.into_iter().map(|e| e / total).collect()));
        }
        let sum: f64 = picks.iter().map(|&(r, c)| lv[[r, c]] - log_norm[&r]).sum();
        self.push(Matrix::from_elem((1, 1), sum), Op::PickLogProbs { logits, picks: picks.to_vec(), probs })
    }

    /// Gradients of the `1×1` node `loss` with respect to every parameter.
    /// Parameters not on any path to `loss` get zero gradients.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).dim() != (1, 1) {
            return Err(Error::ShapeMismatch(format!(
                "backward needs a scalar node, got {:?}",
                self.value(loss).dim()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::ones((1, 1)));
        let mut out = self.params.zeros_like();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Constant => {}
                Op::Param(p) => *out.tensor_mut(*p) += &g,
                Op::Gather { table, ids } => {
                    let tv = self.value(*table);
                    let mut dt = Matrix::zeros(tv.raw_dim());
                    for (r, &i) in ids.iter().enumerate() {
                        let mut dst = dt.row_mut(i);
                        dst += &g.row(r);
                    }
                    accumulate(&mut grads, *table, dt);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::AddRow(a, row) => {
                    let dr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *row, dr);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, -&g);
                    accumulate(&mut grads, *a, g);
                }
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulT(a, b) => {
                    let da = g.dot(self.value(*b));
                    let db = g.t().dot(self.value(*a));
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                    let gv = self.value(*gain);
                    let dgain = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dbias = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dxhat = &g * gv;
                    let n = xhat.ncols() as f64;
                    let mut dx = Matrix::zeros(xhat.raw_dim());
                    for (r, inv) in inv_std.iter().enumerate() {
                        let dh = dxhat.row(r);
                        let xh = xhat.row(r);
                        let sum_dh = dh.sum();
                        let sum_dh_xh = dh.dot(&xh);
                        Zip::from(dx.row_mut(r)).and(&dh).and(&xh).for_each(|o, &d, &x| {
                            *o = inv / n * (n * d - sum_dh - x * sum_dh_xh);
                        });
                    }
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *gain, dgain);
                    accumulate(&mut grads, *bias, dbias);
                }
                Op::Gelu(x) => {
                    let dx = &g * &self.value(*x).mapv(gelu_grad);
                    accumulate(&mut grads, *x, dx);
                }
                Op::Tanh(x) => {
                    let dx = &g * &self.nodes[idx].value.mapv(|y| 1.0 - y * y);
                    accumulate(&mut grads, *x, dx);
                }
                Op::Softplus(x) => {
                    let dx = &g * &self.value(*x).mapv(sigmoid);
                    accumulate(&mut grads, *x, dx);
                }
                Op::Scale(x, f) => accumulate(&mut grads, *x, &g * *f),
                Op::Sum(xs) => {
                    for &x in xs {
                        accumulate(&mut grads, x, g.clone());
                    }
                }
                Op::MeanRows(x) => {
                    let rows = self.value(*x).nrows();
                    let dx = g.broadcast((rows, g.ncols())).expect("broadcast row").to_owned() / rows as f64;
                    accumulate(&mut grads, *x, dx);
                }
                Op::ConcatRows(a, b) => {
                    let na = self.value(*a).nrows();
                    accumulate(&mut grads, *a, g.slice(s![..na, ..]).to_owned());
                    accumulate(&mut grads, *b, g.slice(s![na.., ..]).to_owned());
                }
                Op::Reshape(x) => {
                    let dim = self.value(*x).raw_dim();
                    let flat: Vec<f64> = g.iter().copied().collect();
                    accumulate(&mut grads, *x, Matrix::from_shape_vec(dim, flat).expect("reshape"));
                }
                Op::CausalAttention { q, k, v, heads, probs } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let (t, d) = qv.dim();
                    let dh = d / heads;
                    let scale = 1.0 / (dh as f64).sqrt();
                    let (mut dq, mut dk, mut dv) =
                        (Matrix::zeros((t, d)), Matrix::zeros((t, d)), Matrix::zeros((t, d)));
                    for (h, p) in probs.iter().enumerate() {
                        let cols = s![.., h * dh..(h + 1) * dh];
                        let go = g.slice(cols);
                        let dp = go.dot(&vv.slice(cols).t());
                        dv.slice_mut(cols).assign(&p.t().dot(&go));
                        let mut ds = p * &dp;
                        for (i, mut row) in ds.rows_mut().into_iter().enumerate() {
                            let inner: f64 = row.sum();
                            let prow = p.row(i);
                            Zip::from(&mut row).and(&prow).for_each(|x, &pij| *x -= pij * inner);
                        }
                        ds *= scale;
                        dq.slice_mut(cols).assign(&ds.dot(&kv.slice(cols)));
                        dk.slice_mut(cols).assign(&ds.t().dot(&qv.slice(cols)));
                    }
                    accumulate(&mut grads, *q, dq);
                    accumulate(&mut grads, *k, dk);
                    accumulate(&mut grads, *v, dv);
                }
                Op::PickLogProbs { logits, picks, probs } => {
                    let gs = g[[0, 0]];
                    let lv = self.value(*logits);
                    let mut dl = Matrix::zeros(lv.raw_dim());
                    for &(r, c) in picks {
                        let p = &probs[probs.binary_search_by_key(&r, |e| e.0).expect("row cached")].1;
                        let mut row = dl.row_mut(r);
                        for (o, &pj) in row.iter_mut().zip(p) {
                            *o -= gs * pj;
                        }
                        row[c] += gs;
                    }
                    accumulate(&mut grads, *logits, dl);
                }
            }
        }
        Ok(out)
    }
}

fn accumulate(grads: &mut [Option<Matrix>], id: NodeId, g: Matrix) {
    match &mut grads[id.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Numerically stable softmax of one row.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central differences of `f` over every entry of every parameter.
    fn numeric_grads(params: &Parameters, f: &dyn Fn(&Parameters) -> f64) -> Gradients {
        let h = 1e-5;
        let mut out = params.zeros_like();
        let mut p = params.clone();
        for t in 0..params.len() {
            for i in 0..params.tensors[t].len() {
                let orig = p.tensors[t].as_slice().unwrap()[i];
                p.tensors[t].as_slice_mut().unwrap()[i] = orig + h;
                let up = f(&p);
                p.tensors[t].as_slice_mut().unwrap()[i] = orig - h;
                let down = f(&p);
                p.tensors[t].as_slice_mut().unwrap()[i] = orig;
                out.tensors[t].as_slice_mut().unwrap()[i] = (up - down) / (2.0 * h);
            }
        }
        out
    }

    fn assert_close(a: &Gradients, b: &Gradients, tol: f64) {
        for ((name, x), (_, y)) in a.iter().zip(b.iter()) {
            let diff = (x - y).mapv(|v| v * v).sum().sqrt();
            let scale = x.mapv(|v| v * v).sum().sqrt().max(y.mapv(|v| v * v).sum().sqrt()).max(1e-12);
            assert!(diff / scale < tol, "{name}: rel err {}", diff / scale);
        }
    }

    fn small_params() -> Parameters {
        let mut p = Parameters::new();
        p.push("x", array![[0.3, -0.2, 0.5, 0.1], [0.7, 0.4, -0.6, 0.2], [-0.1, 0.9, 0.3, -0.4]]);
        p.push("w", array![[0.2, -0.5, 0.1, 0.3], [0.4, 0.1, -0.2, 0.6], [-0.3, 0.2, 0.5, -0.1], [0.1, 0.3, 0.2, 0.4]]);
        p.push("gain", array![[1.1, 0.9, 1.2, 0.8]]);
        p.push("bias", array![[0.05, -0.1, 0.0, 0.2]]);
        p.push("unused", array![[1.0, 2.0]]);
        p
    }

    fn composite(p: &Parameters) -> f64 {
        let mut g = Graph::new(p);
        let x = g.param_by_name("x");
        let w = g.param_by_name("w");
        let gain = g.param_by_name("gain");
        let bias = g.param_by_name("bias");
        let n = g.layer_norm(x, gain, bias);
        let q = g.matmul(n, w);
        let k = g.matmul_t(n, w);
        let a = g.causal_attention(q, k, n, 2);
        let act = g.gelu(a);
        let t = g.tanh(act);
        let m = g.mean_rows(t);
        let c = g.concat_rows(m, t);
        let r = g.reshape(c, 2, 8);
        let pick = g.pick_log_probs(r, &[(0, 3), (1, 5), (0, 1)]);
        let sp = g.softplus(pick);
        let s = g.scale(sp, 0.7);
        g.scalar(s)
    }

    #[test]
    fn composite_gradients_match_finite_differences() {
        let p = small_params();
        let mut g = Graph::new(&p);
        let x = g.param_by_name("x");
        let w = g.param_by_name("w");
        let gain = g.param_by_name("gain");
        let bias = g.param_by_name("bias");
        let n = g.layer_norm(x, gain, bias);
        let q = g.matmul(n, w);
        let k = g.matmul_t(n, w);
        let a = g.causal_attention(q, k, n, 2);
        let act = g.gelu(a);
        let t = g.tanh(act);
        let m = g.mean_rows(t);
        let c = g.concat_rows(m, t);
        let r = g.reshape(c, 2, 8);
        let pick = g.pick_log_probs(r, &[(0, 3), (1, 5), (0, 1)]);
        let sp = g.softplus(pick);
        let s = g.scale(sp, 0.7);
        assert!((g.scalar(s) - composite(&p)).abs() < 1e-15);
        let analytic = g.backward(s).unwrap();
        let numeric = numeric_grads(&p, &composite);
        assert_close(&analytic, &numeric, 1e-6);
        assert!(analytic.get("unused").unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gather_add_sub_sum_gradients() {
        let f = |p: &Parameters| {
            let mut g = Graph::new(p);
            let x = g.param_by_name("x");
            let bias = g.param_by_name("bias");
            let rows = g.gather(x, &[2, 0, 2]);
            let shifted = g.add_row(rows, bias);
            let diff = g.sub(shifted, rows);
            let both = g.add(diff, shifted);
            let total = g.sum(&[both, shifted]);
            let pick = g.pick_log_probs(total, &[(0, 0), (2, 3)]);
            (g.scalar(pick), g.backward(pick).unwrap())
        };
        let p = small_params();
        let (_, analytic) = f(&p);
        let numeric = numeric_grads(&p, &|q| f(q).0);
        assert_close(&analytic, &numeric, 1e-6);
    }

    #[test]
    fn attention_is_causal() {
        let mut p = Parameters::new();
        p.push("x", array![[0.1, 0.2], [0.3, -0.4], [0.5, 0.6]]);
        let mut g = Graph::new(&p);
        let x = g.param_by_name("x");
        let a = g.causal_attention(x, x, x, 1);
        // The first position can only attend to itself.
        assert_eq!(g.value(a).row(0), p.get("x").unwrap().row(0));
    }

    #[test]
    fn softplus_and_sigmoid_are_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert_eq!(softplus(800.0), 800.0);
        assert_eq!(sigmoid(0.0), 0.5);
        let p = softmax(&[1.0, 2.0, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
