//! Reverse-mode autodiff over `ndarray` matrices.
//!
//! A [`Tape`] records a dynamic graph of eager matrix operations; calling
//! [`Tape::backward`] on a scalar node accumulates gradients for every
//! parameter leaf. Everything runs in f64 so finite-difference checks are
//! meaningful at tight tolerances.

use std::collections::HashMap;
use std::sync::Arc;

use indexmap::IndexMap;
use ndarray::{s, Array2, Axis};

pub type NodeId = usize;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    MulElem(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    AddRowBroadcast(NodeId, NodeId),
    AddConst(NodeId),
    MulConst(NodeId, Arc<Array2<f64>>),
    ConcatRows(Vec<NodeId>),
    ConcatCols(Vec<NodeId>),
    SliceCols { x: NodeId, start: usize, len: usize },
    Transpose(NodeId),
    SoftmaxRows(NodeId),
    LayerNorm { x: NodeId, gain: NodeId, bias: NodeId },
    Gelu(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    Sqrt(NodeId),
    MeanRows(NodeId),
    MaxRows { x: NodeId, argmax: Vec<usize> },
    SumAll(NodeId),
    GatherRows { table: NodeId, indices: Vec<usize> },
    SigmoidBce { logit: NodeId, target: f64 },
    NllSum { logits: NodeId, targets: Vec<usize> },
}

struct Node {
    value: Arc<Array2<f64>>,
    op: Op,
}

/// Gradients keyed by parameter name after a backward pass.
#[derive(Debug, Default)]
pub struct Gradients {
    pub by_param: IndexMap<String, Array2<f64>>,
}

const LN_EPS: f64 = 1e-5;

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_leaves: HashMap<String, NodeId>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.dim(), (1, 1), "node is not scalar");
        v[(0, 0)]
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        self.nodes.push(Node {
            value: Arc::new(value),
            op,
        });
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn constant_shared(&mut self, value: Arc<Array2<f64>>) -> NodeId {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
        });
        self.nodes.len() - 1
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> NodeId {
        self.constant(Array2::zeros((rows, cols)))
    }

    /// One leaf per parameter per tape; repeated requests share the node so
    /// gradients accumulate across uses.
    pub fn param(&mut self, name: &str, value: Arc<Array2<f64>>) -> NodeId {
        if let Some(&id) = self.param_leaves.get(name) {
            return id;
        }
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
        });
        let id = self.nodes.len() - 1;
        self.param_leaves.insert(name.to_string(), id);
        id
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.value(a);
        let vb = self.value(b);
        assert_eq!(
            va.ncols(),
            vb.nrows(),
            "matmul dims {}x{} vs {}x{}",
            va.nrows(),
            va.ncols(),
            vb.nrows(),
            vb.ncols()
        );
        let out = va.dot(vb);
        self.push(out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a) - self.value(b);
        self.push(out, Op::Sub(a, b))
    }

    pub fn mul_elem(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a) * self.value(b);
        self.push(out, Op::MulElem(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let out = self.value(a) * c;
        self.push(out, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let out = self.value(a) + c;
        self.push(out, Op::AddScalar(a))
    }

    /// `x + b` where `b` is a 1-row bias broadcast over rows of `x`.
    pub fn add_row_broadcast(&mut self, x: NodeId, bias: NodeId) -> NodeId {
        let vx = self.value(x);
        let vb = self.value(bias);
        assert_eq!(vb.nrows(), 1);
        assert_eq!(vb.ncols(), vx.ncols());
        let out = vx + &vb.row(0);
        self.push(out, Op::AddRowBroadcast(x, bias))
    }

    /// Adds a fixed array (e.g. an attention mask); gradient passes through.
    pub fn add_const(&mut self, x: NodeId, c: &Array2<f64>) -> NodeId {
        let out = self.value(x) + c;
        self.push(out, Op::AddConst(x))
    }

    /// Elementwise product with a fixed array (dropout masks).
    pub fn mul_const(&mut self, x: NodeId, c: Arc<Array2<f64>>) -> NodeId {
        let out = self.value(x) as &Array2<f64> * c.as_ref();
        self.push(out, Op::MulConst(x, c))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let cols = self.value(parts[0]).ncols();
        let total: usize = parts.iter().map(|&p| self.value(p).nrows()).sum();
        let mut out = Array2::zeros((total, cols));
        let mut row = 0;
        for &p in parts {
            let v = self.value(p);
            assert_eq!(v.ncols(), cols, "concat_rows column mismatch");
            out.slice_mut(s![row..row + v.nrows(), ..]).assign(v);
            row += v.nrows();
        }
        self.push(out, Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).nrows();
        let total: usize = parts.iter().map(|&p| self.value(p).ncols()).sum();
        let mut out = Array2::zeros((rows, total));
        let mut col = 0;
        for &p in parts {
            let v = self.value(p);
            assert_eq!(v.nrows(), rows, "concat_cols row mismatch");
            out.slice_mut(s![.., col..col + v.ncols()]).assign(v);
            col += v.ncols();
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.value(x);
        assert!(start + len <= v.ncols());
        let out = v.slice(s![.., start..start + len]).to_owned();
        self.push(out, Op::SliceCols { x, start, len })
    }

    pub fn transpose(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).t().to_owned();
        self.push(out, Op::Transpose(x))
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let mut out = v.clone();
        for mut row in out.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|z| (z - max).exp());
            let sum: f64 = row.sum();
            row.mapv_inplace(|z| z / sum);
        }
        self.push(out, Op::SoftmaxRows(x))
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> NodeId {
        let v = self.value(x);
        let g = self.value(gain);
        let b = self.value(bias);
        assert_eq!(g.nrows(), 1);
        assert_eq!(b.nrows(), 1);
        let d = v.ncols() as f64;
        let mut out = Array2::zeros(v.dim());
        for (i, row) in v.rows().into_iter().enumerate() {
            let mean = row.sum() / d;
            let var = row.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / d;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            for (j, &z) in row.iter().enumerate() {
                out[(i, j)] = (z - mean) * inv * g[(0, j)] + b[(0, j)];
            }
        }
        self.push(out, Op::LayerNorm { x, gain, bias })
    }

    /// Smooth GELU approximation `x * sigmoid(1.702 x)`; differentiable
    /// everywhere, which keeps finite-difference checks clean.
    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).mapv(|z| z * sigmoid(1.702 * z));
        self.push(out, Op::Gelu(x))
    }

    pub fn sigmoid_node(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).mapv(sigmoid);
        self.push(out, Op::Sigmoid(x))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).mapv(|z| z.max(0.0));
        self.push(out, Op::Relu(x))
    }

    pub fn sqrt(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).mapv(f64::sqrt);
        self.push(out, Op::Sqrt(x))
    }

    pub fn mean_rows(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let n = v.nrows() as f64;
        let out = v.sum_axis(Axis(0)).insert_axis(Axis(0)) / n;
        self.push(out, Op::MeanRows(x))
    }

    /// Columnwise max over rows; ties route gradient to the first maximal
    /// row.
    pub fn max_rows(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        assert!(v.nrows() > 0);
        let mut out = Array2::zeros((1, v.ncols()));
        let mut argmax = vec![0usize; v.ncols()];
        for j in 0..v.ncols() {
            let mut best = f64::NEG_INFINITY;
            for i in 0..v.nrows() {
                if v[(i, j)] > best {
                    best = v[(i, j)];
                    argmax[j] = i;
                }
            }
            out[(0, j)] = best;
        }
        self.push(out, Op::MaxRows { x, argmax })
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let total = self.value(x).sum();
        self.push(Array2::from_elem((1, 1), total), Op::SumAll(x))
    }

    /// Rows of `table` selected by index; used for token and positional
    /// embeddings. Gradient scatter-adds into the table.
    pub fn gather_rows(&mut self, table: NodeId, indices: &[usize]) -> NodeId {
        let t = self.value(table);
        let mut out = Array2::zeros((indices.len(), t.ncols()));
        for (i, &idx) in indices.iter().enumerate() {
            assert!(idx < t.nrows(), "gather index {idx} out of {}", t.nrows());
            out.row_mut(i).assign(&t.row(idx));
        }
        self.push(
            out,
            Op::GatherRows {
                table,
                indices: indices.to_vec(),
            },
        )
    }

    /// Numerically stable binary cross-entropy on a logit:
    /// `max(z,0) - y*z + ln(1+exp(-|z|))`.
    pub fn sigmoid_bce(&mut self, logit: NodeId, target: f64) -> NodeId {
        let z = self.scalar(logit);
        let loss = z.max(0.0) - target * z + (1.0 + (-z.abs()).exp()).ln();
        self.push(
            Array2::from_elem((1, 1), loss),
            Op::SigmoidBce { logit, target },
        )
    }

    /// Sum of per-row negative log-likelihoods of `targets` under row-wise
    /// softmax of `logits`.
    pub fn nll_sum(&mut self, logits: NodeId, targets: &[usize]) -> NodeId {
        let v = self.value(logits);
        assert_eq!(v.nrows(), targets.len());
        let mut total = 0.0;
        for (row, &t) in v.rows().into_iter().zip(targets) {
            assert!(t < row.len());
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let logsumexp = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            total += logsumexp - row[t];
        }
        self.push(
            Array2::from_elem((1, 1), total),
            Op::NllSum {
                logits,
                targets: targets.to_vec(),
            },
        )
    }

    /// Reverse pass from a scalar root. Returns per-parameter gradients.
    pub fn backward(&self, root: NodeId) -> Gradients {
        assert_eq!(self.value(root).dim(), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[root] = Some(Array2::from_elem((1, 1), 1.0));

        for id in (0..=root).rev() {
            let Some(g) = grads[id].take() else {
                continue;
            };
            match &self.nodes[id].op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let va = self.value(*a);
                    let vb = self.value(*b);
                    add_grad(&mut grads[*a], g.dot(&vb.t()));
                    add_grad(&mut grads[*b], va.t().dot(&g));
                }
                Op::Add(a, b) => {
                    add_grad(&mut grads[*a], g.clone());
                    add_grad(&mut grads[*b], g);
                }
                Op::Sub(a, b) => {
                    add_grad(&mut grads[*a], g.clone());
                    add_grad(&mut grads[*b], -g);
                }
                Op::MulElem(a, b) => {
                    let va = self.value(*a).clone();
                    let vb = self.value(*b).clone();
                    add_grad(&mut grads[*a], &g * &vb);
                    add_grad(&mut grads[*b], &g * &va);
                }
                Op::Scale(a, c) => add_grad(&mut grads[*a], &g * *c),
                Op::AddScalar(a) => add_grad(&mut grads[*a], g),
                Op::AddRowBroadcast(x, bias) => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    add_grad(&mut grads[*x], g);
                    add_grad(&mut grads[*bias], gb);
                }
                Op::AddConst(x) => add_grad(&mut grads[*x], g),
                Op::MulConst(x, c) => add_grad(&mut grads[*x], &g * c.as_ref()),
                Op::ConcatRows(parts) => {
                    let mut row = 0;
                    for &p in parts {
                        let n = self.value(p).nrows();
                        add_grad(&mut grads[p], g.slice(s![row..row + n, ..]).to_owned());
                        row += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut col = 0;
                    for &p in parts {
                        let n = self.value(p).ncols();
                        add_grad(&mut grads[p], g.slice(s![.., col..col + n]).to_owned());
                        col += n;
                    }
                }
                Op::SliceCols { x, start, len } => {
                    let vx = self.value(*x);
                    let mut gx = Array2::zeros(vx.dim());
                    gx.slice_mut(s![.., *start..*start + *len]).assign(&g);
                    add_grad(&mut grads[*x], gx);
                }
                Op::Transpose(x) => add_grad(&mut grads[*x], g.t().to_owned()),
                Op::SoftmaxRows(x) => {
                    let y = self.value(id).clone();
                    let mut gx = Array2::zeros(y.dim());
                    for i in 0..y.nrows() {
                        let dot: f64 = (0..y.ncols()).map(|j| g[(i, j)] * y[(i, j)]).sum();
                        for j in 0..y.ncols() {
                            gx[(i, j)] = y[(i, j)] * (g[(i, j)] - dot);
                        }
                    }
                    add_grad(&mut grads[*x], gx);
                }
                Op::LayerNorm { x, gain, bias } => {
                    let vx = self.value(*x);
                    let vg = self.value(*gain);
                    let d = vx.ncols() as f64;
                    let mut gx = Array2::zeros(vx.dim());
                    let mut ggain = Array2::zeros((1, vx.ncols()));
                    let mut gbias = Array2::zeros((1, vx.ncols()));
                    for i in 0..vx.nrows() {
                        let row = vx.row(i);
                        let mean = row.sum() / d;
                        let var = row.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / d;
                        let inv = 1.0 / (var + LN_EPS).sqrt();
                        // xhat and the two reduced terms of the LN backward
                        let mut sum_gy = 0.0;
                        let mut sum_gy_xhat = 0.0;
                        let xhat: Vec<f64> = row.iter().map(|z| (z - mean) * inv).collect();
                        for j in 0..vx.ncols() {
                            let gy = g[(i, j)] * vg[(0, j)];
                            sum_gy += gy;
                            sum_gy_xhat += gy * xhat[j];
                            ggain[(0, j)] += g[(i, j)] * xhat[j];
                            gbias[(0, j)] += g[(i, j)];
                        }
                        for j in 0..vx.ncols() {
                            let gy = g[(i, j)] * vg[(0, j)];
                            gx[(i, j)] = inv * (gy - sum_gy / d - xhat[j] * sum_gy_xhat / d);
                        }
                    }
                    add_grad(&mut grads[*x], gx);
                    add_grad(&mut grads[*gain], ggain);
                    add_grad(&mut grads[*bias], gbias);
                }
                Op::Gelu(x) => {
                    let vx = self.value(*x);
                    let gx = azip_map(vx, &g, |z, gz| {
                        let s = sigmoid(1.702 * z);
                        gz * (s + z * 1.702 * s * (1.0 - s))
                    });
                    add_grad(&mut grads[*x], gx);
                }
                Op::Sigmoid(x) => {
                    let y = self.value(id);
                    let gx = azip_map(y, &g, |yz, gz| gz * yz * (1.0 - yz));
                    add_grad(&mut grads[*x], gx);
                }
                Op::Relu(x) => {
                    let vx = self.value(*x);
                    let gx = azip_map(vx, &g, |z, gz| if z > 0.0 { gz } else { 0.0 });
                    add_grad(&mut grads[*x], gx);
                }
                Op::Sqrt(x) => {
                    let y = self.value(id);
                    let gx = azip_map(y, &g, |yz, gz| if yz > 0.0 { gz * 0.5 / yz } else { 0.0 });
                    add_grad(&mut grads[*x], gx);
                }
                Op::MeanRows(x) => {
                    let vx = self.value(*x);
                    let n = vx.nrows();
                    let mut gx = Array2::zeros(vx.dim());
                    for i in 0..n {
                        for j in 0..vx.ncols() {
                            gx[(i, j)] = g[(0, j)] / n as f64;
                        }
                    }
                    add_grad(&mut grads[*x], gx);
                }
                Op::MaxRows { x, argmax } => {
                    let vx = self.value(*x);
                    let mut gx = Array2::zeros(vx.dim());
                    for (j, &i) in argmax.iter().enumerate() {
                        gx[(i, j)] += g[(0, j)];
                    }
                    add_grad(&mut grads[*x], gx);
                }
                Op::SumAll(x) => {
                    let vx = self.value(*x);
                    add_grad(&mut grads[*x], Array2::from_elem(vx.dim(), g[(0, 0)]));
                }
                Op::GatherRows { table, indices } => {
                    let t = self.value(*table);
                    let mut gt = Array2::zeros(t.dim());
                    for (i, &idx) in indices.iter().enumerate() {
                        let mut row = gt.row_mut(idx);
                        row += &g.row(i);
                    }
                    add_grad(&mut grads[*table], gt);
                }
                Op::SigmoidBce { logit, target } => {
                    let z = self.scalar(*logit);
                    let dz = (sigmoid(z) - target) * g[(0, 0)];
                    add_grad(&mut grads[*logit], Array2::from_elem((1, 1), dz));
                }
                Op::NllSum { logits, targets } => {
                    let v = self.value(*logits);
                    let mut gx = Array2::zeros(v.dim());
                    for (i, &t) in targets.iter().enumerate() {
                        let row = v.row(i);
                        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
                        for j in 0..v.ncols() {
                            let p = (v[(i, j)] - max).exp() / sum;
                            gx[(i, j)] = g[(0, 0)] * (p - if j == t { 1.0 } else { 0.0 });
                        }
                    }
                    add_grad(&mut grads[*logits], gx);
                }
            }
        }

        let mut out = Gradients::default();
        for (name, &leaf) in &self.param_leaves {
            if leaf <= root {
                if let Some(g) = &grads[leaf] {
                    out.by_param.insert(name.clone(), g.clone());
                }
            }
        }
        out.by_param.sort_keys();
        out
    }
}

fn add_grad(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        None => *slot = Some(g),
        Some(s) => *s += &g,
    }
}

fn azip_map(a: &Array2<f64>, b: &Array2<f64>, f: impl Fn(f64, f64) -> f64) -> Array2<f64> {
    let mut out = Array2::zeros(a.dim());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out[(i, j)] = f(a[(i, j)], b[(i, j)]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central-difference gradient of a scalar-valued builder with respect
    /// to one input matrix.
    fn numeric_grad(
        build: impl Fn(&mut Tape, NodeId) -> NodeId,
        x0: &Array2<f64>,
        eps: f64,
    ) -> Array2<f64> {
        let mut out = Array2::zeros(x0.dim());
        for i in 0..x0.nrows() {
            for j in 0..x0.ncols() {
                let mut xp = x0.clone();
                xp[(i, j)] += eps;
                let mut tp = Tape::new();
                let id = tp.param("x", Arc::new(xp));
                let root = build(&mut tp, id);
                let fp = tp.scalar(root);

                let mut xm = x0.clone();
                xm[(i, j)] -= eps;
                let mut tm = Tape::new();
                let id = tm.param("x", Arc::new(xm));
                let root = build(&mut tm, id);
                let fm = tm.scalar(root);
                out[(i, j)] = (fp - fm) / (2.0 * eps);
            }
        }
        out
    }

    fn check_op(build: impl Fn(&mut Tape, NodeId) -> NodeId, x0: Array2<f64>) {
        let mut tape = Tape::new();
        let x = tape.param("x", Arc::new(x0.clone()));
        let root = build(&mut tape, x);
        let grads = tape.backward(root);
        let analytic = &grads.by_param["x"];
        let numeric = numeric_grad(&build, &x0, 1e-6);
        for i in 0..x0.nrows() {
            for j in 0..x0.ncols() {
                let a = analytic[(i, j)];
                let n = numeric[(i, j)];
                let denom = a.abs() + n.abs();
                let rel = if denom < 1e-9 { 0.0 } else { (a - n).abs() / denom };
                assert!(
                    rel < 1e-6,
                    "({i},{j}): analytic {a} vs numeric {n} rel {rel}"
                );
            }
        }
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let w = array![[0.3, -0.2], [0.5, 0.7], [-0.1, 0.4]];
        check_op(
            move |t, x| {
                let wn = t.constant(w.clone());
                let y = t.matmul(x, wn);
                t.sum_all(y)
            },
            array![[0.2, -0.4, 0.9], [1.1, 0.3, -0.6]],
        );
    }

    #[test]
    fn softmax_gradient_matches_finite_differences() {
        check_op(
            |t, x| {
                let s = t.softmax_rows(x);
                let w = t.constant(array![[0.3, -1.0, 0.5], [0.2, 0.9, -0.4]]);
                let m = t.mul_elem(s, w);
                t.sum_all(m)
            },
            array![[0.1, 0.8, -0.5], [2.0, -1.0, 0.0]],
        );
    }

    #[test]
    fn layer_norm_gradient_matches_finite_differences() {
        check_op(
            |t, x| {
                let g = t.constant(array![[1.2, 0.8, 1.0, 0.9]]);
                let b = t.constant(array![[0.1, -0.2, 0.0, 0.3]]);
                let y = t.layer_norm(x, g, b);
                let w = t.constant(array![[0.5, -0.3, 0.8, 0.2], [1.0, 0.4, -0.6, 0.7]]);
                let m = t.mul_elem(y, w);
                t.sum_all(m)
            },
            array![[0.3, -0.9, 1.4, 0.2], [2.0, 0.1, -0.7, 0.5]],
        );
    }

    #[test]
    fn gelu_sigmoid_sqrt_gradients() {
        check_op(
            |t, x| {
                let y = t.gelu(x);
                t.sum_all(y)
            },
            array![[0.4, -1.3], [2.2, 0.05]],
        );
        check_op(
            |t, x| {
                let y = t.sigmoid_node(x);
                t.sum_all(y)
            },
            array![[0.4, -1.3], [2.2, 0.05]],
        );
        check_op(
            |t, x| {
                let y = t.sqrt(x);
                t.sum_all(y)
            },
            array![[0.4, 1.3], [2.2, 0.55]],
        );
    }

    #[test]
    fn gather_and_concat_gradients() {
        check_op(
            |t, x| {
                let g = t.gather_rows(x, &[0, 2, 0]);
                let c = t.concat_rows(&[g, g]);
                let sl = t.slice_cols(c, 1, 1);
                t.sum_all(sl)
            },
            array![[0.3, -0.9], [1.4, 0.2], [0.1, 0.8]],
        );
    }

    #[test]
    fn nll_and_bce_gradients() {
        check_op(
            |t, x| t.nll_sum(x, &[2, 0]),
            array![[0.3, -0.9, 0.4], [1.4, 0.2, -0.2]],
        );
        check_op(|t, x| t.sigmoid_bce(x, 1.0), array![[0.37]]);
        check_op(|t, x| t.sigmoid_bce(x, 0.0), array![[-1.2]]);
    }

    #[test]
    fn max_and_mean_rows_gradients() {
        check_op(
            |t, x| {
                let m = t.max_rows(x);
                t.sum_all(m)
            },
            array![[0.3, -0.9], [1.4, 0.2], [0.1, 0.8]],
        );
        check_op(
            |t, x| {
                let m = t.mean_rows(x);
                t.sum_all(m)
            },
            array![[0.3, -0.9], [1.4, 0.2]],
        );
    }

    #[test]
    fn param_leaf_is_shared_and_grads_accumulate() {
        let mut tape = Tape::new();
        let x0 = array![[1.0, 2.0]];
        let a = tape.param("x", Arc::new(x0.clone()));
        let b = tape.param("x", Arc::new(x0));
        assert_eq!(a, b);
        let y = tape.add(a, b); // 2x
        let root = tape.sum_all(y);
        let grads = tape.backward(root);
        assert_eq!(grads.by_param["x"], array![[2.0, 2.0]]);
    }

    #[test]
    fn sigmoid_bce_matches_naive_formula() {
        for (z, y) in [(0.7, 1.0), (-2.3, 0.0), (4.0, 1.0), (0.0, 0.0)] {
            let mut tape = Tape::new();
            let logit = tape.constant(Array2::from_elem((1, 1), z));
            let loss = tape.sigmoid_bce(logit, y);
            let p = 1.0 / (1.0 + (-z as f64).exp());
            let naive = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            assert!((tape.scalar(loss) - naive).abs() < 1e-12);
        }
    }
}
