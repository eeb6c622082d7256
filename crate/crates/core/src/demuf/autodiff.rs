//! Reverse-mode tape over dense f64 matrices, covering exactly the
//! operation set the learners need: matmul, elementwise arithmetic, column
//! masks, relaxed categorical masks, dropout, row softmax cross-entropy,
//! squared-difference penalties, and the learnable spectral filter applied
//! through a fixed eigenbasis. Scalars ride along as 1x1 matrices.

use std::rc::Rc;

use ndarray::{Array1, Array2};

/// Shared eigenbasis for spectral filter application.
#[derive(Debug)]
pub struct FilterBasis {
    pub eigenvectors: Array2<f64>,
    pub eigenvalues: Array1<f64>,
}

/// Peaked second-order response r(lambda) = 1 - ((1-eps) - lambda)^2 / (1+|eps|)^2.
pub fn geps_response(eps: f64, lambda: f64) -> f64 {
    let u = 1.0 - eps;
    let s = 1.0 + eps.abs();
    1.0 - (u - lambda).powi(2) / (s * s)
}

/// d r / d eps with the subgradient convention sign(0) = 0 at the |eps| kink.
pub fn geps_response_deps(eps: f64, lambda: f64) -> f64 {
    let u = 1.0 - eps;
    let s = 1.0 + eps.abs();
    let sigma = if eps > 0.0 {
        1.0
    } else if eps < 0.0 {
        -1.0
    } else {
        0.0
    };
    2.0 * (u - lambda) * (s + sigma * (u - lambda)) / (s * s * s)
}

pub type NodeId = usize;

enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    /// Broadcast row-vector addition: (n x d) + (1 x d).
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    /// (1 x 1) scalar times matrix.
    ScalarMul(NodeId, NodeId),
    Relu(NodeId),
    /// Fixed inverted-dropout mask applied elementwise.
    Dropout(NodeId, Array2<f64>),
    /// Column mask broadcast: (n x d) * (1 x d).
    ColMask(NodeId, NodeId),
    ConcatCols(Vec<NodeId>),
    /// Two-category concrete relaxation per feature; logits are (d x 2),
    /// output is the (1 x d) soft mask taking category 1's probability.
    GumbelMask {
        logits: NodeId,
        noise: Array2<f64>,
        tau: f64,
    },
    /// (g_eps(tilde_L))^h X through the eigenbasis, with eps a 1x1 node.
    SpectralFilter {
        x: NodeId,
        eps: NodeId,
        depth: usize,
        basis: Rc<FilterBasis>,
    },
    /// Mean cross-entropy of row softmax against integer targets over a
    /// row subset; output 1x1.
    SoftmaxCrossEntropy {
        logits: NodeId,
        targets: Rc<Vec<usize>>,
        rows: Rc<Vec<usize>>,
    },
    /// Squared Frobenius difference, output 1x1.
    SumSqDiff(NodeId, NodeId),
}

struct Node {
    op: Op,
    value: Array2<f64>,
    /// Forward by-products needed in backward (projected signals, probs).
    cache: Option<Array2<f64>>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

pub struct Gradients(Vec<Option<Array2<f64>>>);

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Array2<f64>> {
        self.0[id].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id].value[[0, 0]]
    }

    fn push(&mut self, op: Op, value: Array2<f64>, cache: Option<Array2<f64>>) -> NodeId {
        self.nodes.push(Node { op, value, cache });
        self.nodes.len() - 1
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> NodeId {
        self.push(Op::Leaf, value, None)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a].value.dot(&self.nodes[b].value);
        self.push(Op::MatMul(a, b), value, None)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = &self.nodes[a].value + &self.nodes[b].value;
        self.push(Op::Add(a, b), value, None)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = &self.nodes[a].value - &self.nodes[b].value;
        self.push(Op::Sub(a, b), value, None)
    }

    pub fn add_row(&mut self, m: NodeId, row: NodeId) -> NodeId {
        let mut value = self.nodes[m].value.clone();
        let r = &self.nodes[row].value;
        for mut vrow in value.rows_mut() {
            for (v, b) in vrow.iter_mut().zip(r.row(0).iter()) {
                *v += b;
            }
        }
        self.push(Op::AddRow(m, row), value, None)
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let value = self.nodes[a].value.mapv(|v| v * s);
        self.push(Op::Scale(a, s), value, None)
    }

    pub fn scalar_mul(&mut self, scalar: NodeId, m: NodeId) -> NodeId {
        let s = self.scalar(scalar);
        let value = self.nodes[m].value.mapv(|v| v * s);
        self.push(Op::ScalarMul(scalar, m), value, None)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a].value.mapv(|v| v.max(0.0));
        self.push(Op::Relu(a), value, None)
    }

    pub fn dropout(&mut self, a: NodeId, mask: Array2<f64>) -> NodeId {
        let value = &self.nodes[a].value * &mask;
        self.push(Op::Dropout(a, mask), value, None)
    }

    pub fn col_mask(&mut self, x: NodeId, mask: NodeId) -> NodeId {
        let m = &self.nodes[mask].value;
        let mut value = self.nodes[x].value.clone();
        for mut row in value.rows_mut() {
            for (v, g) in row.iter_mut().zip(m.row(0).iter()) {
                *v *= g;
            }
        }
        self.push(Op::ColMask(x, mask), value, None)
    }

    pub fn concat_cols(&mut self, parts: Vec<NodeId>) -> NodeId {
        let n = self.nodes[parts[0]].value.nrows();
        let total: usize = parts.iter().map(|&p| self.nodes[p].value.ncols()).sum();
        let mut value = Array2::<f64>::zeros((n, total));
        let mut offset = 0;
        for &p in &parts {
            let v = &self.nodes[p].value;
            for i in 0..n {
                for j in 0..v.ncols() {
                    value[[i, offset + j]] = v[[i, j]];
                }
            }
            offset += v.ncols();
        }
        self.push(Op::ConcatCols(parts), value, None)
    }

    pub fn gumbel_mask(&mut self, logits: NodeId, noise: Array2<f64>, tau: f64) -> NodeId {
        let l = &self.nodes[logits].value;
        let d = l.nrows();
        let mut value = Array2::<f64>::zeros((1, d));
        for j in 0..d {
            let a0 = (l[[j, 0]] + noise[[j, 0]]) / tau;
            let a1 = (l[[j, 1]] + noise[[j, 1]]) / tau;
            let m = a0.max(a1);
            let e0 = (a0 - m).exp();
            let e1 = (a1 - m).exp();
            value[[0, j]] = e1 / (e0 + e1);
        }
        self.push(Op::GumbelMask { logits, noise, tau }, value, None)
    }

    pub fn spectral_filter(
        &mut self,
        x: NodeId,
        eps: NodeId,
        depth: usize,
        basis: Rc<FilterBasis>,
    ) -> NodeId {
        let xv = &self.nodes[x].value;
        if depth == 0 {
            let value = xv.clone();
            return self.push(
                Op::SpectralFilter {
                    x,
                    eps,
                    depth,
                    basis,
                },
                value,
                None,
            );
        }
        let e = self.scalar(eps);
        let projected = basis.eigenvectors.t().dot(xv);
        let mut scaled = projected.clone();
        for (i, mut row) in scaled.rows_mut().into_iter().enumerate() {
            let r = geps_response(e, basis.eigenvalues[i]).powi(depth as i32);
            row.mapv_inplace(|v| v * r);
        }
        let value = basis.eigenvectors.dot(&scaled);
        self.push(
            Op::SpectralFilter {
                x,
                eps,
                depth,
                basis,
            },
            value,
            Some(projected),
        )
    }

    pub fn softmax_cross_entropy(
        &mut self,
        logits: NodeId,
        targets: Rc<Vec<usize>>,
        rows: Rc<Vec<usize>>,
    ) -> NodeId {
        let l = &self.nodes[logits].value;
        let (n, k) = (l.nrows(), l.ncols());
        let mut probs = Array2::<f64>::zeros((n, k));
        for i in 0..n {
            let row = l.row(i);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for j in 0..k {
                let e = (l[[i, j]] - m).exp();
                probs[[i, j]] = e;
                denom += e;
            }
            for j in 0..k {
                probs[[i, j]] /= denom;
            }
        }
        let mut loss = 0.0;
        for &r in rows.iter() {
            loss -= probs[[r, targets[r]]].max(1e-300).ln();
        }
        loss /= rows.len() as f64;
        let value = Array2::from_elem((1, 1), loss);
        self.push(
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                rows,
            },
            value,
            Some(probs),
        )
    }

    pub fn sum_sq_diff(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let d = &self.nodes[a].value - &self.nodes[b].value;
        let value = Array2::from_elem((1, 1), d.iter().map(|v| v * v).sum());
        self.push(Op::SumSqDiff(a, b), value, None)
    }

    /// Reverse pass from a 1x1 output node.
    pub fn backward(&self, output: NodeId) -> Gradients {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[output] = Some(Array2::from_elem((1, 1), 1.0));
        for id in (0..=output).rev() {
            let Some(grad) = grads[id].take() else {
                continue;
            };
            self.propagate(id, &grad, &mut grads);
            grads[id] = Some(grad);
        }
        Gradients(grads)
    }

    fn accumulate(grads: &mut [Option<Array2<f64>>], id: NodeId, delta: Array2<f64>) {
        match &mut grads[id] {
            Some(g) => *g += &delta,
            slot => *slot = Some(delta),
        }
    }

    fn propagate(&self, id: NodeId, grad: &Array2<f64>, grads: &mut Vec<Option<Array2<f64>>>) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let da = grad.dot(&self.nodes[*b].value.t());
                let db = self.nodes[*a].value.t().dot(grad);
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::Add(a, b) => {
                Self::accumulate(grads, *a, grad.clone());
                Self::accumulate(grads, *b, grad.clone());
            }
            Op::Sub(a, b) => {
                Self::accumulate(grads, *a, grad.clone());
                Self::accumulate(grads, *b, grad.mapv(|v| -v));
            }
            Op::AddRow(m, row) => {
                Self::accumulate(grads, *m, grad.clone());
                let mut db = Array2::<f64>::zeros((1, grad.ncols()));
                for r in grad.rows() {
                    for (acc, v) in db.row_mut(0).iter_mut().zip(r.iter()) {
                        *acc += v;
                    }
                }
                Self::accumulate(grads, *row, db);
            }
            Op::Scale(a, s) => {
                Self::accumulate(grads, *a, grad.mapv(|v| v * s));
            }
            Op::ScalarMul(scalar, m) => {
                let s = self.scalar(*scalar);
                let dm = grad.mapv(|v| v * s);
                let ds: f64 = grad
                    .iter()
                    .zip(self.nodes[*m].value.iter())
                    .map(|(g, v)| g * v)
                    .sum();
                Self::accumulate(grads, *m, dm);
                Self::accumulate(grads, *scalar, Array2::from_elem((1, 1), ds));
            }
            Op::Relu(a) => {
                let da = Array2::from_shape_fn(grad.dim(), |(i, j)| {
                    if self.nodes[*a].value[[i, j]] > 0.0 {
                        grad[[i, j]]
                    } else {
                        0.0
                    }
                });
                Self::accumulate(grads, *a, da);
            }
            Op::Dropout(a, mask) => {
                Self::accumulate(grads, *a, grad * mask);
            }
            Op::ColMask(x, mask) => {
                let m = &self.nodes[*mask].value;
                let xv = &self.nodes[*x].value;
                let mut dx = grad.clone();
                for mut row in dx.rows_mut() {
                    for (v, g) in row.iter_mut().zip(m.row(0).iter()) {
                        *v *= g;
                    }
                }
                let mut dm = Array2::<f64>::zeros((1, m.ncols()));
                for i in 0..grad.nrows() {
                    for j in 0..grad.ncols() {
                        dm[[0, j]] += grad[[i, j]] * xv[[i, j]];
                    }
                }
                Self::accumulate(grads, *x, dx);
                Self::accumulate(grads, *mask, dm);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.nodes[p].value.ncols();
                    let mut dp = Array2::<f64>::zeros((grad.nrows(), w));
                    for i in 0..grad.nrows() {
                        for j in 0..w {
                            dp[[i, j]] = grad[[i, offset + j]];
                        }
                    }
                    Self::accumulate(grads, p, dp);
                    offset += w;
                }
            }
            Op::GumbelMask { logits, noise, tau } => {
                let _ = noise;
                let m = &self.nodes[id].value;
                let d = m.ncols();
                let mut dl = Array2::<f64>::zeros((d, 2));
                for j in 0..d {
                    let p = m[[0, j]];
                    let dm = grad[[0, j]] * p * (1.0 - p) / tau;
                    dl[[j, 1]] += dm;
                    dl[[j, 0]] -= dm;
                }
                Self::accumulate(grads, *logits, dl);
            }
            Op::SpectralFilter {
                x,
                eps,
                depth,
                basis,
            } => {
                if *depth == 0 {
                    Self::accumulate(grads, *x, grad.clone());
                    Self::accumulate(grads, *eps, Array2::zeros((1, 1)));
                    return;
                }
                let e = self.scalar(*eps);
                let projected = self.nodes[id].cache.as_ref().expect("cached projection");
                let back_projected = basis.eigenvectors.t().dot(grad);
                // dX = U diag(r^h) U^T grad.
                let mut scaled = back_projected.clone();
                let mut deps = 0.0;
                for (i, mut row) in scaled.rows_mut().into_iter().enumerate() {
                    let lambda = basis.eigenvalues[i];
                    let r = geps_response(e, lambda);
                    let rh = r.powi(*depth as i32);
                    let dr = *depth as f64 * r.powi(*depth as i32 - 1) * geps_response_deps(e, lambda);
                    let inner: f64 = back_projected
                        .row(i)
                        .iter()
                        .zip(projected.row(i).iter())
                        .map(|(a, b)| a * b)
                        .sum();
                    deps += dr * inner;
                    row.mapv_inplace(|v| v * rh);
                }
                let dx = basis.eigenvectors.dot(&scaled);
                Self::accumulate(grads, *x, dx);
                Self::accumulate(grads, *eps, Array2::from_elem((1, 1), deps));
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                rows,
            } => {
                let probs = self.nodes[id].cache.as_ref().expect("cached probs");
                let scale = grad[[0, 0]] / rows.len() as f64;
                let mut dl = Array2::<f64>::zeros(probs.dim());
                for &r in rows.iter() {
                    for j in 0..probs.ncols() {
                        let indicator = if j == targets[r] { 1.0 } else { 0.0 };
                        dl[[r, j]] = scale * (probs[[r, j]] - indicator);
                    }
                }
                Self::accumulate(grads, *logits, dl);
            }
            Op::SumSqDiff(a, b) => {
                let diff = &self.nodes[*a].value - &self.nodes[*b].value;
                let s = grad[[0, 0]];
                Self::accumulate(grads, *a, diff.mapv(|v| 2.0 * s * v));
                Self::accumulate(grads, *b, diff.mapv(|v| -2.0 * s * v));
            }
        }
    }
}
