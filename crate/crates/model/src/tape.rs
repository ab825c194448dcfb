//! Reverse-mode autodiff over a flat operation tape.
//!
//! Each forward pass builds a fresh tape; parameters enter as leaves, and
//! `backward` returns one gradient slot per node. Leaves reused several
//! times (the shared encoder weights, the zero-knowledge vector) accumulate
//! gradients across all their uses.

use crate::tensor::{matmul, matmul_nt, matmul_tn, softmax_rows, Matrix};

/// Probabilities below this are clamped before taking the log.
pub const PROB_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Gather { src: NodeId, rows: Vec<usize> },
    MatMul { a: NodeId, b: NodeId },
    MatMulNT { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    AddRow { a: NodeId, row: NodeId },
    Scale { a: NodeId, factor: f64 },
    Relu { a: NodeId },
    SoftmaxRows { a: NodeId },
    MeanRows { a: NodeId },
    ConcatCols { parts: Vec<NodeId> },
    ConcatRows { parts: Vec<NodeId> },
    SliceCols { a: NodeId, start: usize, len: usize },
    MulMask { a: NodeId, mask: Matrix },
    NllFromProbs { probs: NodeId, class: usize },
}

struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn gather(&mut self, src: NodeId, rows: Vec<usize>) -> NodeId {
        let source = self.value(src);
        let mut out = Matrix::zeros(rows.len(), source.cols);
        for (i, &r) in rows.iter().enumerate() {
            let cols = source.cols;
            out.data[i * cols..(i + 1) * cols].copy_from_slice(source.row(r));
        }
        self.push(out, Op::Gather { src, rows })
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = matmul(self.value(a), self.value(b));
        self.push(value, Op::MatMul { a, b })
    }

    /// `a * b^T`.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = matmul_nt(self.value(a), self.value(b));
        self.push(value, Op::MatMulNT { a, b })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!((va.rows, va.cols), (vb.rows, vb.cols), "add shape mismatch");
        let mut value = va.clone();
        value.add_assign(vb);
        self.push(value, Op::Add { a, b })
    }

    /// Broadcast a 1 x n row over every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let (va, vr) = (self.value(a), self.value(row));
        assert_eq!(vr.rows, 1, "bias must be a row vector");
        assert_eq!(va.cols, vr.cols, "add_row shape mismatch");
        let mut value = va.clone();
        for i in 0..value.rows {
            for j in 0..value.cols {
                let v = value.get(i, j) + vr.get(0, j);
                value.set(i, j, v);
            }
        }
        self.push(value, Op::AddRow { a, row })
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let mut value = self.value(a).clone();
        for v in &mut value.data {
            *v *= factor;
        }
        self.push(value, Op::Scale { a, factor })
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let mut value = self.value(a).clone();
        for v in &mut value.data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.push(value, Op::Relu { a })
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let value = softmax_rows(self.value(a));
        self.push(value, Op::SoftmaxRows { a })
    }

    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let mut out = Matrix::zeros(1, va.cols);
        for i in 0..va.rows {
            for j in 0..va.cols {
                out.data[j] += va.get(i, j);
            }
        }
        for v in &mut out.data {
            *v /= va.rows as f64;
        }
        self.push(out, Op::MeanRows { a })
    }

    pub fn concat_cols(&mut self, parts: Vec<NodeId>) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows;
        let total: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Matrix::zeros(rows, total);
        let mut offset = 0;
        for &p in &parts {
            let v = self.value(p);
            assert_eq!(v.rows, rows, "concat_cols row mismatch");
            for i in 0..rows {
                for j in 0..v.cols {
                    out.set(i, offset + j, v.get(i, j));
                }
            }
            offset += v.cols;
        }
        self.push(out, Op::ConcatCols { parts })
    }

    pub fn concat_rows(&mut self, parts: Vec<NodeId>) -> NodeId {
        assert!(!parts.is_empty());
        let cols = self.value(parts[0]).cols;
        let total: usize = parts.iter().map(|&p| self.value(p).rows).sum();
        let mut out = Matrix::zeros(total, cols);
        let mut offset = 0;
        for &p in &parts {
            let v = self.value(p);
            assert_eq!(v.cols, cols, "concat_rows col mismatch");
            for i in 0..v.rows {
                out.data[(offset + i) * cols..(offset + i + 1) * cols].copy_from_slice(v.row(i));
            }
            offset += v.rows;
        }
        self.push(out, Op::ConcatRows { parts })
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let va = self.value(a);
        assert!(start + len <= va.cols, "slice_cols out of range");
        let mut out = Matrix::zeros(va.rows, len);
        for i in 0..va.rows {
            for j in 0..len {
                out.set(i, j, va.get(i, start + j));
            }
        }
        self.push(out, Op::SliceCols { a, start, len })
    }

    /// Elementwise multiply by a constant mask (dropout).
    pub fn mul_mask(&mut self, a: NodeId, mask: Matrix) -> NodeId {
        let va = self.value(a);
        assert_eq!((va.rows, va.cols), (mask.rows, mask.cols));
        let mut value = va.clone();
        for (v, m) in value.data.iter_mut().zip(&mask.data) {
            *v *= m;
        }
        self.push(value, Op::MulMask { a, mask })
    }

    /// Negative log-likelihood of `class` under a 1 x C distribution,
    /// clamped at [`PROB_EPSILON`].
    pub fn nll_from_probs(&mut self, probs: NodeId, class: usize) -> NodeId {
        let p = self.value(probs);
        assert_eq!(p.rows, 1);
        assert!(class < p.cols, "class out of range");
        let mut prob = p.get(0, class);
        if prob < PROB_EPSILON {
            log::warn!("probability {prob:.3e} clamped to {PROB_EPSILON:.0e} in loss");
            prob = PROB_EPSILON;
        }
        let value = Matrix::from_vec(1, 1, vec![-prob.ln()]);
        self.push(value, Op::NllFromProbs { probs, class })
    }

    /// Reverse pass from `root`; returns one gradient slot per node.
    pub fn backward(&self, root: NodeId) -> Vec<Option<Matrix>> {
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        let root_value = self.value(root);
        let mut seed = Matrix::zeros(root_value.rows, root_value.cols);
        for v in &mut seed.data {
            *v = 1.0;
        }
        grads[root.0] = Some(seed);

        for id in (0..=root.0).rev() {
            let Some(grad) = grads[id].take() else {
                continue;
            };
            // Put the gradient back so callers can read it afterwards.
            grads[id] = Some(grad.clone());
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {}
                Op::Gather { src, rows } => {
                    let source = self.value(*src);
                    let mut d = take_or_zeros(&mut grads[src.0], source.rows, source.cols);
                    for (i, &r) in rows.iter().enumerate() {
                        for j in 0..grad.cols {
                            let v = d.get(r, j) + grad.get(i, j);
                            d.set(r, j, v);
                        }
                    }
                    grads[src.0] = Some(d);
                }
                Op::MatMul { a, b } => {
                    let da = matmul_nt(&grad, self.value(*b));
                    accumulate(&mut grads[a.0], da);
                    let db = matmul_tn(self.value(*a), &grad);
                    accumulate(&mut grads[b.0], db);
                }
                Op::MatMulNT { a, b } => {
                    let da = matmul(&grad, self.value(*b));
                    accumulate(&mut grads[a.0], da);
                    let db = matmul_tn(&grad, self.value(*a));
                    accumulate(&mut grads[b.0], db);
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads[a.0], grad.clone());
                    accumulate(&mut grads[b.0], grad.clone());
                }
                Op::AddRow { a, row } => {
                    accumulate(&mut grads[a.0], grad.clone());
                    let mut drow = Matrix::zeros(1, grad.cols);
                    for i in 0..grad.rows {
                        for j in 0..grad.cols {
                            drow.data[j] += grad.get(i, j);
                        }
                    }
                    accumulate(&mut grads[row.0], drow);
                }
                Op::Scale { a, factor } => {
                    let mut d = grad.clone();
                    for v in &mut d.data {
                        *v *= factor;
                    }
                    accumulate(&mut grads[a.0], d);
                }
                Op::Relu { a } => {
                    let input = self.value(*a);
                    let mut d = grad.clone();
                    for (dv, &x) in d.data.iter_mut().zip(&input.data) {
                        if x <= 0.0 {
                            *dv = 0.0;
                        }
                    }
                    accumulate(&mut grads[a.0], d);
                }
                Op::SoftmaxRows { a } => {
                    let y = &node.value;
                    let mut d = Matrix::zeros(y.rows, y.cols);
                    for i in 0..y.rows {
                        let mut dot = 0.0;
                        for j in 0..y.cols {
                            dot += grad.get(i, j) * y.get(i, j);
                        }
                        for j in 0..y.cols {
                            d.set(i, j, y.get(i, j) * (grad.get(i, j) - dot));
                        }
                    }
                    accumulate(&mut grads[a.0], d);
                }
                Op::MeanRows { a } => {
                    let input = self.value(*a);
                    let factor = 1.0 / input.rows as f64;
                    let mut d = Matrix::zeros(input.rows, input.cols);
                    for i in 0..input.rows {
                        for j in 0..input.cols {
                            d.set(i, j, grad.get(0, j) * factor);
                        }
                    }
                    accumulate(&mut grads[a.0], d);
                }
                Op::ConcatCols { parts } => {
                    let mut offset = 0;
                    for &p in parts {
                        let v = self.value(p);
                        let mut d = Matrix::zeros(v.rows, v.cols);
                        for i in 0..v.rows {
                            for j in 0..v.cols {
                                d.set(i, j, grad.get(i, offset + j));
                            }
                        }
                        accumulate(&mut grads[p.0], d);
                        offset += v.cols;
                    }
                }
                Op::ConcatRows { parts } => {
                    let mut offset = 0;
                    for &p in parts {
                        let v = self.value(p);
                        let mut d = Matrix::zeros(v.rows, v.cols);
                        for i in 0..v.rows {
                            d.data[i * v.cols..(i + 1) * v.cols]
                                .copy_from_slice(&grad.row(offset + i)[..v.cols]);
                        }
                        accumulate(&mut grads[p.0], d);
                        offset += v.rows;
                    }
                }
                Op::SliceCols { a, start, len } => {
                    let input = self.value(*a);
                    let mut d = take_or_zeros(&mut grads[a.0], input.rows, input.cols);
                    for i in 0..grad.rows {
                        for j in 0..*len {
                            let v = d.get(i, start + j) + grad.get(i, j);
                            d.set(i, start + j, v);
                        }
                    }
                    grads[a.0] = Some(d);
                }
                Op::MulMask { a, mask } => {
                    let mut d = grad.clone();
                    for (dv, m) in d.data.iter_mut().zip(&mask.data) {
                        *dv *= m;
                    }
                    accumulate(&mut grads[a.0], d);
                }
                Op::NllFromProbs { probs, class } => {
                    let p = self.value(*probs);
                    let mut d = Matrix::zeros(1, p.cols);
                    let prob = p.get(0, *class).max(PROB_EPSILON);
                    d.set(0, *class, -grad.get(0, 0) / prob);
                    accumulate(&mut grads[probs.0], d);
                }
            }
        }
        grads
    }
}

fn accumulate(slot: &mut Option<Matrix>, grad: Matrix) {
    match slot {
        Some(existing) => existing.add_assign(&grad),
        None => *slot = Some(grad),
    }
}

fn take_or_zeros(slot: &mut Option<Matrix>, rows: usize, cols: usize) -> Matrix {
    slot.take().unwrap_or_else(|| Matrix::zeros(rows, cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss_of(input: &Matrix, build: impl Fn(&mut Tape, NodeId) -> NodeId) -> f64 {
        let mut tape = Tape::new();
        let leaf = tape.leaf(input.clone());
        let root = build(&mut tape, leaf);
        tape.value(root).get(0, 0)
    }

    fn grad_of(input: &Matrix, build: impl Fn(&mut Tape, NodeId) -> NodeId) -> Matrix {
        let mut tape = Tape::new();
        let leaf = tape.leaf(input.clone());
        let root = build(&mut tape, leaf);
        let grads = tape.backward(root);
        grads[leaf.0].clone().unwrap()
    }

    fn assert_grad_matches(input: Matrix, build: impl Fn(&mut Tape, NodeId) -> NodeId + Copy) {
        let analytic = grad_of(&input, build);
        let eps = 1e-6;
        for i in 0..input.len() {
            let mut plus = input.clone();
            plus.data[i] += eps;
            let mut minus = input.clone();
            minus.data[i] -= eps;
            let numeric = (loss_of(&plus, build) - loss_of(&minus, build)) / (2.0 * eps);
            let a = analytic.data[i];
            assert!(
                (a - numeric).abs() < 1e-6 * (1.0 + a.abs().max(numeric.abs())),
                "grad mismatch at {i}: analytic {a} vs numeric {numeric}"
            );
        }
    }

    #[test]
    fn softmax_nll_gradient() {
        let input = Matrix::row_vector(vec![0.3, -0.7, 1.1, 0.05]);
        assert_grad_matches(input, |tape, x| {
            let p = tape.softmax_rows(x);
            tape.nll_from_probs(p, 2)
        });
    }

    #[test]
    fn matmul_relu_chain_gradient() {
        let input = Matrix::from_vec(2, 3, vec![0.1, -0.4, 0.9, 0.2, 0.7, -0.3]);
        assert_grad_matches(input, |tape, x| {
            let w = tape.leaf(Matrix::from_vec(
                3,
                2,
                vec![0.5, -0.2, 0.8, 0.3, -0.6, 0.4],
            ));
            let h = tape.matmul(x, w);
            let r = tape.relu(h);
            let m = tape.mean_rows(r);
            let p = tape.softmax_rows(m);
            tape.nll_from_probs(p, 0)
        });
    }

    #[test]
    fn attention_like_graph_gradient() {
        let input = Matrix::from_vec(3, 4, vec![
            0.1, 0.2, -0.1, 0.4, -0.3, 0.5, 0.2, -0.2, 0.6, -0.5, 0.3, 0.1,
        ]);
        assert_grad_matches(input, |tape, x| {
            let scores = tape.matmul_nt(x, x);
            let scaled = tape.scale(scores, 0.5);
            let attn = tape.softmax_rows(scaled);
            let mixed = tape.matmul(attn, x);
            let pooled = tape.mean_rows(mixed);
            let p = tape.softmax_rows(pooled);
            tape.nll_from_probs(p, 1)
        });
    }

    #[test]
    fn gather_concat_slice_gradient() {
        let input = Matrix::from_vec(4, 2, vec![0.1, 0.9, -0.2, 0.3, 0.5, -0.7, 0.4, 0.2]);
        assert_grad_matches(input, |tape, x| {
            let g = tape.gather(x, vec![0, 2, 2, 3]);
            let left = tape.slice_cols(g, 0, 1);
            let right = tape.slice_cols(g, 1, 1);
            let cat = tape.concat_cols(vec![right, left]);
            let pooled = tape.mean_rows(cat);
            let p = tape.softmax_rows(pooled);
            tape.nll_from_probs(p, 0)
        });
    }

    #[test]
    fn shared_leaf_accumulates() {
        // One leaf used twice: gradient must be the sum of both paths.
        let input = Matrix::row_vector(vec![0.2, -0.1]);
        assert_grad_matches(input, |tape, x| {
            let doubled = tape.add(x, x);
            let p = tape.softmax_rows(doubled);
            tape.nll_from_probs(p, 1)
        });
    }
}
