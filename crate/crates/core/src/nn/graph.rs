//! Tape-based reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Graph`] borrows a [`ParamStore`] for the duration of one forward and
//! backward pass. Parameter nodes read straight from the store, so large
//! tables are never copied onto the tape.

use std::collections::HashMap;

use ndarray::{s, Array2, Axis, Zip};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameter matrices in insertion order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics on a duplicate name; parameter names are fixed by model code.
    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> ParamId {
        let name = name.into();
        let id = ParamId(self.values.len());
        let prev = self.index.insert(name.clone(), id);
        assert!(prev.is_none(), "duplicate parameter name {name}");
        self.names.push(name);
        self.values.push(value);
        id
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.values[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Array2<f64>)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    /// Number of scalar entries.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Replaces a value, checking that the shape is unchanged.
    pub fn set(&mut self, id: ParamId, value: Array2<f64>) -> Result<()> {
        let cur = &self.values[id.0];
        if cur.dim() != value.dim() {
            return Err(Error::Shape(format!(
                "parameter {} is {:?}, got {:?}",
                self.names[id.0],
                cur.dim(),
                value.dim()
            )));
        }
        self.values[id.0] = value;
        Ok(())
    }
}

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    /// a · bᵀ
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// x scaled by entry `[0, k]` of w
    ScaleBy(Var, Var, usize),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Gelu(Var),
    Softmax(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize, usize),
    SelectRows(Var, Vec<usize>),
    Gather(ParamId, Vec<usize>),
    Unfold {
        x: Var,
        seg_len: usize,
        width: usize,
    },
    SegmentMax {
        x: Var,
        argmax: Array2<usize>,
    },
    SegmentMean(Var, Vec<Vec<usize>>),
    MaskRows(Var, Vec<bool>),
    Blend(Var, Var, Vec<bool>),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Array2<f64>,
        inv_std: Vec<f64>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Array2<f64>,
    },
}

#[derive(Debug)]
struct Node {
    /// `None` for parameter nodes, whose value lives in the store.
    value: Option<Array2<f64>>,
    op: Op,
    needs_grad: bool,
}

/// Gradients per parameter, dense.
#[derive(Debug, Default)]
pub struct Gradients {
    grads: HashMap<ParamId, Array2<f64>>,
}

impl Gradients {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (ParamId, Array2<f64>)>) -> Self {
        Gradients {
            grads: pairs.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Multiplies every gradient by `c` (used to average over a batch).
    pub fn scale(&mut self, c: f64) {
        for g in self.grads.values_mut() {
            *g *= c;
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.grads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array2<f64>)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }

    pub fn all_finite(&self) -> bool {
        self.grads.values().all(|g| g.iter().all(|x| x.is_finite()))
    }

    /// Adds another batch's gradients into this one.
    pub fn accumulate(&mut self, other: Gradients) {
        for (id, g) in other.grads {
            match self.grads.get_mut(&id) {
                Some(acc) => *acc += &g,
                None => {
                    self.grads.insert(id, g);
                }
            }
        }
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

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax, stable against large logits.
pub fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    grad_enabled: bool,
}

impl<'p> Graph<'p> {
    /// A graph that records what backward needs.
    pub fn new(store: &'p ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    /// A forward-only graph; [`Graph::backward`] returns no gradients.
    pub fn inference(store: &'p ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            grad_enabled: false,
        }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(val), _) => val,
            (None, Op::Param(id)) => self.store.get(*id),
            _ => unreachable!("node without a value"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    /// Takes the value out of a node; only valid for the final result of
    /// an inference graph.
    pub fn into_value(mut self, v: Var) -> Array2<f64> {
        match self.nodes[v.0].value.take() {
            Some(val) => val,
            None => self.value(v).clone(),
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
            needs_grad: needs_grad && self.grad_enabled,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn input(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Input, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            needs_grad: self.grad_enabled,
        });
        Var(self.nodes.len() - 1)
    }

    /// A parameter treated as a constant (no gradient flows into it).
    pub fn frozen_param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::MatMul(a, b), ng)
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b).t());
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::MatMulT(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let v = self.value(a) + self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::Add(a, b), ng)
    }

    /// Adds a 1×n row to every row of x.
    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        assert_eq!(self.shape(row).0, 1, "add_row expects a single row");
        let v = self.value(x) + self.value(row);
        let ng = self.ng(x) || self.ng(row);
        self.push(v, Op::AddRow(x, row), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let v = self.value(a) * self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::Mul(a, b), ng)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let v = self.value(x) * c;
        let ng = self.ng(x);
        self.push(v, Op::Scale(x, c), ng)
    }

    pub fn scale_by(&mut self, x: Var, w: Var, k: usize) -> Var {
        let c = self.value(w)[[0, k]];
        let v = self.value(x) * c;
        let ng = self.ng(x) || self.ng(w);
        self.push(v, Op::ScaleBy(x, w, k), ng)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(f64::tanh);
        let ng = self.ng(x);
        self.push(v, Op::Tanh(x), ng)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(sigmoid);
        let ng = self.ng(x);
        self.push(v, Op::Sigmoid(x), ng)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(|a| a.max(0.0));
        let ng = self.ng(x);
        self.push(v, Op::Relu(x), ng)
    }

    /// Tanh approximation of GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(gelu);
        let ng = self.ng(x);
        self.push(v, Op::Gelu(x), ng)
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let v = softmax_rows(self.value(x));
        let ng = self.ng(x);
        self.push(v, Op::Softmax(x), ng)
    }

    pub fn concat_cols(&mut self, xs: &[Var]) -> Var {
        let views: Vec<_> = xs.iter().map(|&x| self.value(x).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat_cols row mismatch");
        let ng = xs.iter().any(|&x| self.ng(x));
        self.push(v, Op::ConcatCols(xs.to_vec()), ng)
    }

    pub fn concat_rows(&mut self, xs: &[Var]) -> Var {
        let views: Vec<_> = xs.iter().map(|&x| self.value(x).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("concat_rows column mismatch");
        let ng = xs.iter().any(|&x| self.ng(x));
        self.push(v, Op::ConcatRows(xs.to_vec()), ng)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Var {
        let v = self.value(x).slice(s![.., start..end]).to_owned();
        let ng = self.ng(x);
        self.push(v, Op::SliceCols(x, start, end), ng)
    }

    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Var {
        let v = self.value(x).select(Axis(0), rows);
        let ng = self.ng(x);
        self.push(v, Op::SelectRows(x, rows.to_vec()), ng)
    }

    /// Row lookup into a parameter table (embedding lookup).
    pub fn gather(&mut self, table: ParamId, rows: &[usize]) -> Var {
        let v = self.store.get(table).select(Axis(0), rows);
        self.push(v, Op::Gather(table, rows.to_vec()), true)
    }

    /// Like [`Graph::gather`] but without gradient.
    pub fn gather_frozen(&mut self, table: ParamId, rows: &[usize]) -> Var {
        let v = self.store.get(table).select(Axis(0), rows);
        self.push(v, Op::Gather(table, rows.to_vec()), false)
    }

    /// im2col over stacked segments: x holds `B` segments of `seg_len` rows;
    /// each output row is the concatenation of `width` consecutive rows of
    /// one segment. Output has `B * (seg_len - width + 1)` rows.
    pub fn unfold(&mut self, x: Var, seg_len: usize, width: usize) -> Var {
        let xv = self.value(x);
        let (n, d) = xv.dim();
        assert!(width >= 1 && width <= seg_len && n % seg_len == 0, "bad unfold geometry");
        let b = n / seg_len;
        let nw = seg_len - width + 1;
        let mut out = Array2::zeros((b * nw, width * d));
        for bi in 0..b {
            for st in 0..nw {
                let mut row = out.row_mut(bi * nw + st);
                for k in 0..width {
                    row.slice_mut(s![k * d..(k + 1) * d])
                        .assign(&xv.row(bi * seg_len + st + k));
                }
            }
        }
        let ng = self.ng(x);
        self.push(out, Op::Unfold { x, seg_len, width }, ng)
    }

    /// Column-wise max over a set of candidate rows for each output row.
    /// Every group must be non-empty.
    pub fn segment_max(&mut self, x: Var, groups: &[Vec<usize>]) -> Var {
        let xv = self.value(x);
        let c = xv.ncols();
        let mut out = Array2::zeros((groups.len(), c));
        let mut argmax = Array2::zeros((groups.len(), c));
        for (gi, rows) in groups.iter().enumerate() {
            assert!(!rows.is_empty(), "segment_max group {gi} is empty");
            for j in 0..c {
                let mut best = rows[0];
                for &r in &rows[1..] {
                    if xv[[r, j]] > xv[[best, j]] {
                        best = r;
                    }
                }
                out[[gi, j]] = xv[[best, j]];
                argmax[[gi, j]] = best;
            }
        }
        let ng = self.ng(x);
        self.push(out, Op::SegmentMax { x, argmax }, ng)
    }

    /// Mean of each group's rows; an empty group gives a zero row.
    pub fn segment_mean(&mut self, x: Var, groups: &[Vec<usize>]) -> Var {
        let xv = self.value(x);
        let mut out = Array2::zeros((groups.len(), xv.ncols()));
        for (gi, rows) in groups.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let mut acc = out.row_mut(gi);
            for &r in rows {
                acc += &xv.row(r);
            }
            acc /= rows.len() as f64;
        }
        let ng = self.ng(x);
        self.push(out, Op::SegmentMean(x, groups.to_vec()), ng)
    }

    /// Rows where `keep` is false become exact zeros.
    pub fn mask_rows(&mut self, x: Var, keep: &[bool]) -> Var {
        let mut v = self.value(x).clone();
        assert_eq!(v.nrows(), keep.len(), "mask length");
        for (mut row, &k) in v.rows_mut().into_iter().zip(keep) {
            if !k {
                row.fill(0.0);
            }
        }
        let ng = self.ng(x);
        self.push(v, Op::MaskRows(x, keep.to_vec()), ng)
    }

    /// Row-wise select: `new` where `take_new`, otherwise `old`.
    pub fn blend(&mut self, new: Var, old: Var, take_new: &[bool]) -> Var {
        assert_eq!(self.shape(new), self.shape(old), "blend shape mismatch");
        let mut v = self.value(old).clone();
        let nv = self.value(new);
        for (i, &t) in take_new.iter().enumerate() {
            if t {
                v.row_mut(i).assign(&nv.row(i));
            }
        }
        let ng = self.ng(new) || self.ng(old);
        self.push(v, Op::Blend(new, old, take_new.to_vec()), ng)
    }

    /// Per-row normalization with learned 1×d gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let xv = self.value(x);
        let (n, d) = xv.dim();
        let mut xhat = Array2::zeros((n, d));
        let mut inv_std = Vec::with_capacity(n);
        for (i, row) in xv.rows().into_iter().enumerate() {
            let mean = row.sum() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            Zip::from(xhat.row_mut(i)).and(row).for_each(|h, &v| *h = (v - mean) * is);
        }
        let out = &xhat * self.value(gamma) + self.value(beta);
        let ng = self.ng(x) || self.ng(gamma) || self.ng(beta);
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            ng,
        )
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`, as a 1×1 node.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let probs = softmax_rows(self.value(logits));
        assert_eq!(probs.nrows(), targets.len(), "one target per row");
        let n = targets.len().max(1) as f64;
        let loss: f64 = targets
            .iter()
            .enumerate()
            .map(|(i, &t)| -probs[[i, t]].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / n;
        let ng = self.ng(logits);
        self.push(
            Array2::from_elem((1, 1), loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            ng,
        )
    }

    /// Gradients of a 1×1 node with respect to every parameter reached.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut out = Gradients::default();
        if !self.grad_enabled || !self.ng(loss) {
            return out;
        }
        assert_eq!(self.shape(loss), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Array2<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));

        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(cur) => *cur += &g,
                slot => *slot = Some(g),
            }
        }
        fn acc_param(out: &mut Gradients, id: ParamId, shape: (usize, usize)) -> &mut Array2<f64> {
            out.grads.entry(id).or_insert_with(|| Array2::zeros(shape))
        }

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    let shape = self.store.get(*id).dim();
                    *acc_param(&mut out, *id, shape) += &g;
                }
                Op::MatMul(a, b) => {
                    if self.ng(*a) {
                        acc(&mut grads, *a, g.dot(&self.value(*b).t()));
                    }
                    if self.ng(*b) {
                        acc(&mut grads, *b, self.value(*a).t().dot(&g));
                    }
                }
                Op::MatMulT(a, b) => {
                    if self.ng(*a) {
                        acc(&mut grads, *a, g.dot(self.value(*b)));
                    }
                    if self.ng(*b) {
                        acc(&mut grads, *b, g.t().dot(self.value(*a)));
                    }
                }
                Op::Add(a, b) => {
                    if self.ng(*a) {
                        acc(&mut grads, *a, g.clone());
                    }
                    if self.ng(*b) {
                        acc(&mut grads, *b, g);
                    }
                }
                Op::AddRow(x, row) => {
                    if self.ng(*row) {
                        acc(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if self.ng(*x) {
                        acc(&mut grads, *x, g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.ng(*a) {
                        acc(&mut grads, *a, &g * self.value(*b));
                    }
                    if self.ng(*b) {
                        acc(&mut grads, *b, &g * self.value(*a));
                    }
                }
                Op::Scale(x, c) => acc(&mut grads, *x, g * *c),
                Op::ScaleBy(x, w, k) => {
                    if self.ng(*w) {
                        let mut gw = Array2::zeros(self.shape(*w));
                        gw[[0, *k]] = (&g * self.value(*x)).sum();
                        acc(&mut grads, *w, gw);
                    }
                    if self.ng(*x) {
                        let c = self.value(*w)[[0, *k]];
                        acc(&mut grads, *x, g * c);
                    }
                }
                Op::Tanh(x) => {
                    let y = node.value.as_ref().unwrap();
                    let mut gx = g;
                    Zip::from(&mut gx).and(y).for_each(|g, &y| *g *= 1.0 - y * y);
                    acc(&mut grads, *x, gx);
                }
                Op::Sigmoid(x) => {
                    let y = node.value.as_ref().unwrap();
                    let mut gx = g;
                    Zip::from(&mut gx).and(y).for_each(|g, &y| *g *= y * (1.0 - y));
                    acc(&mut grads, *x, gx);
                }
                Op::Relu(x) => {
                    let mut gx = g;
                    Zip::from(&mut gx)
                        .and(self.value(*x))
                        .for_each(|g, &v| if v <= 0.0 { *g = 0.0 });
                    acc(&mut grads, *x, gx);
                }
                Op::Gelu(x) => {
                    let mut gx = g;
                    Zip::from(&mut gx)
                        .and(self.value(*x))
                        .for_each(|g, &v| *g *= gelu_grad(v));
                    acc(&mut grads, *x, gx);
                }
                Op::Softmax(x) => {
                    let y = node.value.as_ref().unwrap();
                    let mut gx = &g * y;
                    for (mut row, yrow) in gx.rows_mut().into_iter().zip(y.rows()) {
                        let dot = row.sum();
                        Zip::from(&mut row).and(yrow).for_each(|r, &yv| *r -= yv * dot);
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::ConcatCols(xs) => {
                    let mut at = 0;
                    for &x in xs {
                        let w = self.shape(x).1;
                        if self.ng(x) {
                            acc(&mut grads, x, g.slice(s![.., at..at + w]).to_owned());
                        }
                        at += w;
                    }
                }
                Op::ConcatRows(xs) => {
                    let mut at = 0;
                    for &x in xs {
                        let h = self.shape(x).0;
                        if self.ng(x) {
                            acc(&mut grads, x, g.slice(s![at..at + h, ..]).to_owned());
                        }
                        at += h;
                    }
                }
                Op::SliceCols(x, start, end) => {
                    let mut gx = Array2::zeros(self.shape(*x));
                    gx.slice_mut(s![.., *start..*end]).assign(&g);
                    acc(&mut grads, *x, gx);
                }
                Op::SelectRows(x, rows) => {
                    let mut gx = Array2::zeros(self.shape(*x));
                    for (gi, &r) in rows.iter().enumerate() {
                        let mut dst = gx.row_mut(r);
                        dst += &g.row(gi);
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Gather(table, rows) => {
                    let shape = self.store.get(*table).dim();
                    let dst = acc_param(&mut out, *table, shape);
                    for (gi, &r) in rows.iter().enumerate() {
                        let mut d = dst.row_mut(r);
                        d += &g.row(gi);
                    }
                }
                Op::Unfold { x, seg_len, width } => {
                    let (n, d) = self.shape(*x);
                    let b = n / seg_len;
                    let nw = seg_len - width + 1;
                    let mut gx = Array2::zeros((n, d));
                    for bi in 0..b {
                        for st in 0..nw {
                            let grow = g.row(bi * nw + st);
                            for k in 0..*width {
                                let mut dst = gx.row_mut(bi * seg_len + st + k);
                                dst += &grow.slice(s![k * d..(k + 1) * d]);
                            }
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::SegmentMax { x, argmax } => {
                    let mut gx = Array2::zeros(self.shape(*x));
                    for ((gi, j), &r) in argmax.indexed_iter() {
                        gx[[r, j]] += g[[gi, j]];
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::SegmentMean(x, groups) => {
                    let mut gx = Array2::zeros(self.shape(*x));
                    for (gi, rows) in groups.iter().enumerate() {
                        let share = g.row(gi).mapv(|v| v / rows.len() as f64);
                        for &r in rows {
                            let mut row = gx.row_mut(r);
                            row += &share;
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::MaskRows(x, keep) => {
                    let mut gx = g;
                    for (mut row, &k) in gx.rows_mut().into_iter().zip(keep) {
                        if !k {
                            row.fill(0.0);
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Blend(new, old, take_new) => {
                    if self.ng(*new) {
                        let mut gn = g.clone();
                        for (mut row, &t) in gn.rows_mut().into_iter().zip(take_new) {
                            if !t {
                                row.fill(0.0);
                            }
                        }
                        acc(&mut grads, *new, gn);
                    }
                    if self.ng(*old) {
                        let mut go = g;
                        for (mut row, &t) in go.rows_mut().into_iter().zip(take_new) {
                            if t {
                                row.fill(0.0);
                            }
                        }
                        acc(&mut grads, *old, go);
                    }
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    if self.ng(*gamma) {
                        acc(&mut grads, *gamma, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if self.ng(*beta) {
                        acc(&mut grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if self.ng(*x) {
                        let gh = &g * self.value(*gamma);
                        let d = gh.ncols() as f64;
                        let mut gx = Array2::zeros(gh.dim());
                        for (i, &s) in inv_std.iter().enumerate() {
                            let ghr = gh.row(i);
                            let xr = xhat.row(i);
                            let m1 = ghr.sum() / d;
                            let m2 = ghr.dot(&xr) / d;
                            Zip::from(gx.row_mut(i))
                                .and(ghr)
                                .and(xr)
                                .for_each(|o, &a, &h| *o = s * (a - m1 - h * m2));
                        }
                        acc(&mut grads, *x, gx);
                    }
                }
                Op::CrossEntropy { logits, targets, probs } => {
                    let n = targets.len().max(1) as f64;
                    let mut gl = probs.clone();
                    for (i, &t) in targets.iter().enumerate() {
                        gl[[i, t]] -= 1.0;
                    }
                    gl *= g[[0, 0]] / n;
                    acc(&mut grads, *logits, gl);
                }
            }
        }
        out
    }
}

/// Largest relative error between analytic and central-difference
/// gradients over every entry of the given parameters.
///
/// `loss` builds the scalar objective on a fresh graph.
pub fn gradient_check<F>(store: &mut ParamStore, params: &[ParamId], eps: f64, loss: F) -> f64
where
    F: Fn(&mut Graph) -> Var,
{
    let analytic = {
        let mut g = Graph::new(store);
        let l = loss(&mut g);
        g.backward(l)
    };
    let eval = |store: &ParamStore| {
        let mut g = Graph::inference(store);
        let l = loss(&mut g);
        g.value(l)[[0, 0]]
    };
    let mut worst: f64 = 0.0;
    for &id in params {
        let shape = store.get(id).dim();
        let zeros = Array2::zeros(shape);
        let a = analytic.get(id).unwrap_or(&zeros).clone();
        for idx in 0..shape.0 * shape.1 {
            let (r, c) = (idx / shape.1, idx % shape.1);
            let orig = store.get(id)[[r, c]];
            store.get_mut(id)[[r, c]] = orig + eps;
            let up = eval(store);
            store.get_mut(id)[[r, c]] = orig - eps;
            let down = eval(store);
            store.get_mut(id)[[r, c]] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let denom = a[[r, c]].abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a[[r, c]] - numeric).abs() / denom);
        }
    }
    worst
}
