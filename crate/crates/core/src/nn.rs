//! Parameter store, Adam optimizer, and transformer layer builders on top of
//! the tape.

use std::sync::Arc;

use indexmap::IndexMap;
use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tape::{Gradients, NodeId, Tape};

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Xavier { fan_in: usize, fan_out: usize },
    Uniform { scale: f64 },
    Zeros,
    Ones,
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Named parameter tensors plus Adam moments. Initialization is seeded per
/// tensor name, so two models sharing a seed initialize shared tensors
/// identically regardless of creation order.
#[derive(Debug, Clone)]
pub struct ParamStore {
    seed: u64,
    tensors: IndexMap<String, Arc<Array2<f64>>>,
    adam_m: IndexMap<String, Array2<f64>>,
    adam_v: IndexMap<String, Array2<f64>>,
    step: u64,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            tensors: IndexMap::new(),
            adam_m: IndexMap::new(),
            adam_v: IndexMap::new(),
            step: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get_or_init(&mut self, name: &str, rows: usize, cols: usize, init: Init) -> Arc<Array2<f64>> {
        if let Some(t) = self.tensors.get(name) {
            assert_eq!(t.dim(), (rows, cols), "shape clash for param {name}");
            return Arc::clone(t);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(name));
        let value = match init {
            Init::Xavier { fan_in, fan_out } => {
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Array2::from_shape_fn((rows, cols), |_| rng.random_range(-a..a))
            }
            Init::Uniform { scale } => {
                Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
            }
            Init::Zeros => Array2::zeros((rows, cols)),
            Init::Ones => Array2::from_elem((rows, cols), 1.0),
        };
        let arc = Arc::new(value);
        self.tensors.insert(name.to_string(), Arc::clone(&arc));
        arc
    }

    pub fn get(&self, name: &str) -> Option<&Arc<Array2<f64>>> {
        self.tensors.get(name)
    }

    pub fn set(&mut self, name: &str, value: Array2<f64>) {
        self.tensors.insert(name.to_string(), Arc::new(value));
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&String, &Arc<Array2<f64>>)> {
        self.tensors.iter()
    }

    pub fn param_count(&self) -> usize {
        self.tensors.values().map(|t| t.len()).sum()
    }

    /// Nudge one scalar in place; finite-difference checks use this.
    pub fn perturb(&mut self, name: &str, row: usize, col: usize, delta: f64) {
        let t = self.tensors.get_mut(name).expect("param exists");
        let arr = Arc::make_mut(t);
        arr[(row, col)] += delta;
    }

    /// One Adam update over the provided gradients; tensors without a
    /// gradient stay untouched.
    pub fn adam_step(&mut self, grads: &Gradients, lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - B1.powi(t);
        let bc2 = 1.0 - B2.powi(t);
        for (name, g) in &grads.by_param {
            let Some(theta) = self.tensors.get(name) else {
                continue;
            };
            let m = self
                .adam_m
                .entry(name.clone())
                .or_insert_with(|| Array2::zeros(g.dim()));
            *m *= B1;
            *m += &(g * (1.0 - B1));
            let v = self
                .adam_v
                .entry(name.clone())
                .or_insert_with(|| Array2::zeros(g.dim()));
            *v *= B2;
            *v += &(g.mapv(|z| z * z) * (1.0 - B2));
            let mut new = theta.as_ref().clone();
            for i in 0..new.nrows() {
                for j in 0..new.ncols() {
                    let mhat = m[(i, j)] / bc1;
                    let vhat = v[(i, j)] / bc2;
                    new[(i, j)] -= lr * mhat / (vhat.sqrt() + EPS);
                }
            }
            self.tensors.insert(name.clone(), Arc::new(new));
        }
    }
}

/// Dropout configuration for a training-mode forward pass.
pub struct TrainMode {
    pub dropout: f64,
    pub rng: ChaCha8Rng,
}

/// A single forward construction: owns the tape, borrows the store, and
/// carries optional dropout state. Evaluation passes are deterministic.
pub struct ForwardPass<'a> {
    pub tape: Tape,
    pub store: &'a mut ParamStore,
    train: Option<TrainMode>,
}

impl<'a> ForwardPass<'a> {
    pub fn eval(store: &'a mut ParamStore) -> Self {
        Self {
            tape: Tape::new(),
            store,
            train: None,
        }
    }

    pub fn train(store: &'a mut ParamStore, dropout: f64, rng: ChaCha8Rng) -> Self {
        Self {
            tape: Tape::new(),
            store,
            train: Some(TrainMode { dropout, rng }),
        }
    }

    pub fn is_train(&self) -> bool {
        self.train.is_some()
    }

    pub fn param(&mut self, name: &str, rows: usize, cols: usize, init: Init) -> NodeId {
        let value = self.store.get_or_init(name, rows, cols, init);
        self.tape.param(name, value)
    }

    /// Inverted dropout on a node; identity in eval mode or at rate 0.
    pub fn dropout(&mut self, x: NodeId) -> NodeId {
        let Some(mode) = self.train.as_mut() else {
            return x;
        };
        if mode.dropout <= 0.0 {
            return x;
        }
        let p = mode.dropout;
        let keep = 1.0 - p;
        let dim = self.tape.value(x).dim();
        let mask = Array2::from_shape_fn(dim, |_| {
            if mode.rng.random_bool(keep) {
                1.0 / keep
            } else {
                0.0
            }
        });
        self.tape.mul_const(x, Arc::new(mask))
    }

    /// `x W (+ b)` with Xavier-initialized weights.
    pub fn linear(&mut self, prefix: &str, x: NodeId, in_dim: usize, out_dim: usize, bias: bool) -> NodeId {
        let w = self.param(
            &format!("{prefix}.w"),
            in_dim,
            out_dim,
            Init::Xavier {
                fan_in: in_dim,
                fan_out: out_dim,
            },
        );
        let y = self.tape.matmul(x, w);
        if bias {
            let b = self.param(&format!("{prefix}.b"), 1, out_dim, Init::Zeros);
            self.tape.add_row_broadcast(y, b)
        } else {
            y
        }
    }

    pub fn layer_norm(&mut self, prefix: &str, x: NodeId, dim: usize) -> NodeId {
        let g = self.param(&format!("{prefix}.g"), 1, dim, Init::Ones);
        let b = self.param(&format!("{prefix}.b"), 1, dim, Init::Zeros);
        self.tape.layer_norm(x, g, b)
    }

    /// Multi-head attention. Queries come from `x_q`, keys and values from
    /// `x_kv`; pass the same node for self-attention. `mask` is added to the
    /// pre-softmax scores.
    pub fn multi_head_attention(
        &mut self,
        prefix: &str,
        x_q: NodeId,
        x_kv: NodeId,
        dim: usize,
        heads: usize,
        mask: Option<&Array2<f64>>,
    ) -> NodeId {
        assert_eq!(dim % heads, 0, "dim {dim} not divisible by heads {heads}");
        let dh = dim / heads;
        let q = self.linear(&format!("{prefix}.q"), x_q, dim, dim, true);
        // No key bias: a shared shift of every key cancels in the row
        // softmax, leaving a dead parameter.
        let k = self.linear(&format!("{prefix}.k"), x_kv, dim, dim, false);
        let v = self.linear(&format!("{prefix}.v"), x_kv, dim, dim, true);
        let mut head_outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = self.tape.slice_cols(q, h * dh, dh);
            let kh = self.tape.slice_cols(k, h * dh, dh);
            let vh = self.tape.slice_cols(v, h * dh, dh);
            let kt = self.tape.transpose(kh);
            let scores = self.tape.matmul(qh, kt);
            let scaled = self.tape.scale(scores, 1.0 / (dh as f64).sqrt());
            let masked = match mask {
                Some(m) => self.tape.add_const(scaled, m),
                None => scaled,
            };
            let attn = self.tape.softmax_rows(masked);
            head_outs.push(self.tape.matmul(attn, vh));
        }
        let concat = self.tape.concat_cols(&head_outs);
        self.linear(&format!("{prefix}.o"), concat, dim, dim, true)
    }

    pub fn feed_forward(&mut self, prefix: &str, x: NodeId, dim: usize, ff_dim: usize) -> NodeId {
        let h = self.linear(&format!("{prefix}.w1"), x, dim, ff_dim, true);
        let a = self.tape.gelu(h);
        self.linear(&format!("{prefix}.w2"), a, ff_dim, dim, true)
    }

    /// Pre-norm transformer block: `x + drop(attn(ln1(x)))`, then
    /// `h + drop(ff(ln2(h)))`.
    pub fn encoder_block(
        &mut self,
        prefix: &str,
        x: NodeId,
        dim: usize,
        heads: usize,
        ff_dim: usize,
        mask: Option<&Array2<f64>>,
    ) -> NodeId {
        let n1 = self.layer_norm(&format!("{prefix}.ln1"), x, dim);
        let attn = self.multi_head_attention(&format!("{prefix}.attn"), n1, n1, dim, heads, mask);
        let attn = self.dropout(attn);
        let h = self.tape.add(x, attn);
        let n2 = self.layer_norm(&format!("{prefix}.ln2"), h, dim);
        let ff = self.feed_forward(&format!("{prefix}.ff"), n2, dim, ff_dim);
        let ff = self.dropout(ff);
        self.tape.add(h, ff)
    }

    /// Decoder block: causal self-attention, cross-attention over encoder
    /// states, feed-forward; all pre-norm.
    pub fn decoder_block(
        &mut self,
        prefix: &str,
        x: NodeId,
        enc: NodeId,
        dim: usize,
        heads: usize,
        ff_dim: usize,
        causal_mask: &Array2<f64>,
    ) -> NodeId {
        let n1 = self.layer_norm(&format!("{prefix}.ln1"), x, dim);
        let self_attn =
            self.multi_head_attention(&format!("{prefix}.self"), n1, n1, dim, heads, Some(causal_mask));
        let self_attn = self.dropout(self_attn);
        let h = self.tape.add(x, self_attn);
        let n2 = self.layer_norm(&format!("{prefix}.ln2"), h, dim);
        let cross = self.multi_head_attention(&format!("{prefix}.cross"), n2, enc, dim, heads, None);
        let cross = self.dropout(cross);
        let h2 = self.tape.add(h, cross);
        let n3 = self.layer_norm(&format!("{prefix}.ln3"), h2, dim);
        let ff = self.feed_forward(&format!("{prefix}.ff"), n3, dim, ff_dim);
        let ff = self.dropout(ff);
        self.tape.add(h2, ff)
    }
}

/// Strictly-lower-triangle mask with large negative entries above the
/// diagonal, so position t attends to positions 0..=t.
pub fn causal_mask(n: usize) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            m[(i, j)] = -1e30;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_init_is_deterministic_per_name() {
        let mut a = ParamStore::new(7);
        let mut b = ParamStore::new(7);
        // created in different orders
        let x1 = a.get_or_init("x", 3, 4, Init::Xavier { fan_in: 3, fan_out: 4 });
        let _y1 = a.get_or_init("y", 2, 2, Init::Uniform { scale: 0.1 });
        let _y2 = b.get_or_init("y", 2, 2, Init::Uniform { scale: 0.1 });
        let x2 = b.get_or_init("x", 3, 4, Init::Xavier { fan_in: 3, fan_out: 4 });
        assert_eq!(x1.as_ref(), x2.as_ref());
        let mut c = ParamStore::new(8);
        let x3 = c.get_or_init("x", 3, 4, Init::Xavier { fan_in: 3, fan_out: 4 });
        assert_ne!(x1.as_ref(), x3.as_ref());
    }

    #[test]
    fn adam_reduces_a_quadratic() {
        // minimize sum((x - 3)^2) via tape gradients
        let mut store = ParamStore::new(1);
        store.set("x", Array2::from_elem((1, 1), 10.0));
        for _ in 0..500 {
            let mut fp = ForwardPass::eval(&mut store);
            let x = fp.param("x", 1, 1, Init::Zeros);
            let t = fp.tape.add_scalar(x, -3.0);
            let sq = fp.tape.mul_elem(t, t);
            let loss = fp.tape.sum_all(sq);
            let grads = fp.tape.backward(loss);
            store.adam_step(&grads, 0.1);
        }
        let x = store.get("x").unwrap();
        assert!((x[(0, 0)] - 3.0).abs() < 1e-2, "x = {}", x[(0, 0)]);
    }

    #[test]
    fn encoder_block_runs_and_is_deterministic_in_eval() {
        let mut store = ParamStore::new(3);
        let x0 = Array2::from_shape_fn((5, 16), |(i, j)| ((i * 17 + j) as f64).sin());
        let run = |store: &mut ParamStore| {
            let mut fp = ForwardPass::eval(store);
            let x = fp.tape.constant(x0.clone());
            let y = fp.encoder_block("blk", x, 16, 4, 32, None);
            fp.tape.value(y).clone()
        };
        let a = run(&mut store);
        let b = run(&mut store);
        assert_eq!(a, b);
        assert_eq!(a.dim(), (5, 16));
    }

    #[test]
    fn dropout_is_identity_in_eval_and_scales_in_train() {
        let mut store = ParamStore::new(3);
        let x0 = Array2::from_elem((4, 8), 1.0);
        let mut fp = ForwardPass::eval(&mut store);
        let x = fp.tape.constant(x0.clone());
        let y = fp.dropout(x);
        assert_eq!(x, y);

        let rng = ChaCha8Rng::seed_from_u64(5);
        let mut fp = ForwardPass::train(&mut store, 0.5, rng);
        let x = fp.tape.constant(x0);
        let y = fp.dropout(x);
        let v = fp.tape.value(y);
        assert!(v.iter().all(|&z| z == 0.0 || (z - 2.0).abs() < 1e-12));
    }

    #[test]
    fn causal_mask_blocks_future_positions() {
        let m = causal_mask(3);
        assert_eq!(m[(0, 0)], 0.0);
        assert!(m[(0, 2)] < -1e29);
        assert_eq!(m[(2, 0)], 0.0);
    }
}
