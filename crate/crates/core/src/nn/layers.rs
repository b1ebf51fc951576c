use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::graph::{Graph, ParamId, ParamStore, Var};

/// Glorot-uniform initialization.
pub fn xavier<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..=limit))
}

pub fn normal<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    let dist = Normal::new(0.0, std).expect("std is positive");
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

/// Affine map `x W + b`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, input: usize, output: usize) -> Self {
        Linear {
            weight: store.add(format!("{name}.weight"), xavier(rng, input, output)),
            bias: store.add(format!("{name}.bias"), Array2::zeros((1, output))),
        }
    }

    /// Weights drawn from N(0, std²), zero bias.
    pub fn normal<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, input: usize, output: usize, std: f64) -> Self {
        Linear {
            weight: store.add(format!("{name}.weight"), normal(rng, input, output, std)),
            bias: store.add(format!("{name}.bias"), Array2::zeros((1, output))),
        }
    }

    pub fn zeros(store: &mut ParamStore, name: &str, input: usize, output: usize) -> Self {
        Linear {
            weight: store.add(format!("{name}.weight"), Array2::zeros((input, output))),
            bias: store.add(format!("{name}.bias"), Array2::zeros((1, output))),
        }
    }

    /// Looks up `{name}.weight` and `{name}.bias`.
    pub fn find(store: &ParamStore, name: &str) -> Option<Self> {
        Some(Linear {
            weight: store.id(&format!("{name}.weight"))?,
            bias: store.id(&format!("{name}.bias"))?,
        })
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let h = g.matmul(x, w);
        g.add_row(h, b)
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        store.get(self.weight).nrows()
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        store.get(self.weight).ncols()
    }
}

/// One LSTM direction with gate order input, forget, cell, output.
#[derive(Debug, Clone, Copy)]
pub struct Lstm {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl Lstm {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, input: usize, hidden: usize) -> Self {
        let mut bias = Array2::zeros((1, 4 * hidden));
        // forget gate starts open
        bias.slice_mut(ndarray::s![.., hidden..2 * hidden]).fill(1.0);
        Lstm {
            w_ih: store.add(format!("{name}.weight_ih"), xavier(rng, input, 4 * hidden)),
            w_hh: store.add(format!("{name}.weight_hh"), xavier(rng, hidden, 4 * hidden)),
            bias: store.add(format!("{name}.bias"), bias),
            hidden,
        }
    }

    pub fn find(store: &ParamStore, name: &str) -> Option<Self> {
        let w_hh = store.id(&format!("{name}.weight_hh"))?;
        Some(Lstm {
            w_ih: store.id(&format!("{name}.weight_ih"))?,
            w_hh,
            bias: store.id(&format!("{name}.bias"))?,
            hidden: store.get(w_hh).nrows(),
        })
    }

    /// Runs over `batch` sequences of `seq_len` rows stacked in `x`
    /// (`batch * seq_len` rows). Positions with `mask[b][t] == false` leave
    /// the state untouched, so with trailing padding the final state is the
    /// state after the last real token in either direction.
    ///
    /// Returns the hidden state after each time step (indexed by position,
    /// each `batch × hidden`) and the final hidden state.
    pub fn run(&self, g: &mut Graph, x: Var, batch: usize, seq_len: usize, mask: &[Vec<bool>], reverse: bool) -> (Vec<Var>, Var) {
        let h = self.hidden;
        let w_ih = g.param(self.w_ih);
        let w_hh = g.param(self.w_hh);
        let bias = g.param(self.bias);
        let proj = g.matmul(x, w_ih);
        let proj = g.add_row(proj, bias);
        let mut hs = g.input(Array2::zeros((batch, h)));
        let mut cs = g.input(Array2::zeros((batch, h)));
        let mut outputs = vec![hs; seq_len];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..seq_len).rev())
        } else {
            Box::new(0..seq_len)
        };
        for t in order {
            let rows: Vec<usize> = (0..batch).map(|b| b * seq_len + t).collect();
            let active: Vec<bool> = (0..batch).map(|b| mask[b][t]).collect();
            if !active.iter().any(|&a| a) {
                outputs[t] = hs;
                continue;
            }
            let xt = g.select_rows(proj, &rows);
            let rec = g.matmul(hs, w_hh);
            let gates = g.add(xt, rec);
            let i = g.slice_cols(gates, 0, h);
            let f = g.slice_cols(gates, h, 2 * h);
            let c_hat = g.slice_cols(gates, 2 * h, 3 * h);
            let o = g.slice_cols(gates, 3 * h, 4 * h);
            let i = g.sigmoid(i);
            let f = g.sigmoid(f);
            let c_hat = g.tanh(c_hat);
            let o = g.sigmoid(o);
            let keep = g.mul(f, cs);
            let write = g.mul(i, c_hat);
            let c_new = g.add(keep, write);
            let c_act = g.tanh(c_new);
            let h_new = g.mul(o, c_act);
            if active.iter().all(|&a| a) {
                cs = c_new;
                hs = h_new;
            } else {
                cs = g.blend(c_new, cs, &active);
                hs = g.blend(h_new, hs, &active);
            }
            outputs[t] = hs;
        }
        (outputs, hs)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Option<Array2<f64>>>,
    v: Vec<Option<Array2<f64>>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Updates every parameter that has a gradient.
    pub fn update(&mut self, store: &mut ParamStore, grads: &super::graph::Gradients) {
        self.step += 1;
        if self.m.len() < store.len() {
            self.m.resize(store.len(), None);
            self.v.resize(store.len(), None);
        }
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let mut ids: Vec<_> = grads.iter().map(|(id, _)| id).collect();
        // deterministic order regardless of hash-map iteration
        ids.sort();
        for id in ids {
            let g = grads.get(id).unwrap();
            let i = id.index();
            let m = self.m[i].get_or_insert_with(|| Array2::zeros(g.dim()));
            let v = self.v[i].get_or_insert_with(|| Array2::zeros(g.dim()));
            let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
            ndarray::Zip::from(store.get_mut(id))
                .and(m)
                .and(v)
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let mh = *m / bc1;
                    let vh = *v / bc2;
                    *p -= lr * mh / (vh.sqrt() + eps);
                });
        }
    }
}
