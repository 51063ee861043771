//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of a forward pass as a node holding its
//! value and the indices of its inputs. Because inputs always precede the
//! nodes that consume them, walking the node list from the loss back to the
//! start visits operations in reverse topological order, and a single sweep
//! accumulates every gradient.
//!
//! Tapes are cheap and single-use: training loops build a fresh tape per step,
//! register the current parameters with [`Tape::param`], run the forward pass,
//! and call [`Tape::backward`] on the scalar loss.

use std::sync::atomic::{AtomicU64, Ordering};

use super::matrix::{sigmoid, Matrix};
use crate::error::{Error, Result};

/// Probability floor inside the logarithm of the cross-entropy loss.
pub const LOG_EPS: f64 = 1e-12;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a specific tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Sigmoid(usize),
    Tanh(usize),
    Log(usize),
    Sum(usize),
    Mean(usize),
    Transpose(usize),
    ConcatCols(usize, usize),
    SelectRows(usize, Vec<usize>),
    SoftmaxCrossEntropy {
        logits: usize,
        targets: Vec<usize>,
        probs: Matrix,
    },
    BceWithLogits {
        logits: usize,
        targets: Matrix,
        weights: Matrix,
        total_weight: f64,
    },
}

impl Op {
    fn inputs(&self) -> Vec<usize> {
        match self {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddRow(a, b)
            | Op::ConcatCols(a, b) => {
                vec![*a, *b]
            }
            Op::Scale(a, _)
            | Op::Relu(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Log(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::Transpose(a)
            | Op::SelectRows(a, _) => vec![*a],
            Op::SoftmaxCrossEntropy { logits, .. } | Op::BceWithLogits { logits, .. } => {
                vec![*logits]
            }
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    /// Whether the node depends on a parameter; untracked nodes get no gradient.
    tracked: bool,
}

/// Entry-wise operations exposed through [`Tape::elementwise`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Relu,
    Sigmoid,
    Log,
    Add,
    Mul,
}

#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
    params: Vec<usize>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            params: Vec::new(),
        }
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        let tracked = op.inputs().iter().any(|&i| self.nodes[i].tracked);
        self.nodes.push(Node { value, op, tracked });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(Error::ForeignVariable);
        }
        Ok(v.idx)
    }

    fn val(&self, i: usize) -> &Matrix {
        &self.nodes[i].value
    }

    /// Records a value that is not differentiated with respect to.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Records a trainable parameter.
    pub fn param(&mut self, value: Matrix) -> Var {
        let v = self.push(value, Op::Leaf);
        self.nodes[v.idx].tracked = true;
        self.params.push(v.idx);
        v
    }

    /// Parameters in registration order.
    pub fn params(&self) -> Vec<Var> {
        self.params
            .iter()
            .map(|&idx| Var { tape: self.id, idx })
            .collect()
    }

    pub fn value(&self, v: Var) -> Result<&Matrix> {
        Ok(self.val(self.idx(v)?))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let value = self.val(ia).matmul(self.val(ib))?;
        Ok(self.push(value, Op::MatMul(ia, ib)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let value = self.val(ia).add(self.val(ib))?;
        Ok(self.push(value, Op::Add(ia, ib)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let value = self.val(ia).sub(self.val(ib))?;
        Ok(self.push(value, Op::Sub(ia, ib)))
    }

    /// Entry-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let value = self.val(ia).hadamard(self.val(ib))?;
        Ok(self.push(value, Op::Mul(ia, ib)))
    }

    /// Adds a `1 x cols` row vector to every row of `m`.
    pub fn add_row(&mut self, m: Var, row: Var) -> Result<Var> {
        let (im, ir) = (self.idx(m)?, self.idx(row)?);
        let (mv, rv) = (self.val(im), self.val(ir));
        if rv.rows() != 1 || rv.cols() != mv.cols() {
            return Err(Error::DimensionMismatch {
                op: "add_row",
                left: mv.shape(),
                right: rv.shape(),
            });
        }
        let mut value = mv.clone();
        for r in 0..value.rows() {
            for (o, b) in value.row_mut(r).iter_mut().zip(rv.data()) {
                *o += b;
            }
        }
        Ok(self.push(value, Op::AddRow(im, ir)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let ia = self.idx(a)?;
        let value = self.val(ia).scale(c);
        Ok(self.push(value, Op::Scale(ia, c)))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let value = self.val(ia).relu();
        Ok(self.push(value, Op::Relu(ia)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let value = self.val(ia).sigmoid();
        Ok(self.push(value, Op::Sigmoid(ia)))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let value = self.val(ia).map(f64::tanh);
        Ok(self.push(value, Op::Tanh(ia)))
    }

    /// Natural logarithm; inputs must be positive.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let value = self.val(ia).map(f64::ln);
        Ok(self.push(value, Op::Log(ia)))
    }

    pub fn elementwise(&mut self, op: Elementwise, args: &[Var]) -> Result<Var> {
        let want = match op {
            Elementwise::Add | Elementwise::Mul => 2,
            _ => 1,
        };
        if args.len() != want {
            return Err(Error::invalid(format!(
                "{op:?} takes {want} argument(s), got {}",
                args.len()
            )));
        }
        match op {
            Elementwise::Relu => self.relu(args[0]),
            Elementwise::Sigmoid => self.sigmoid(args[0]),
            Elementwise::Log => self.log(args[0]),
            Elementwise::Add => self.add(args[0], args[1]),
            Elementwise::Mul => self.mul(args[0], args[1]),
        }
    }

    /// Sum of all entries as a 1x1 matrix.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let value = Matrix::scalar(self.val(ia).sum());
        Ok(self.push(value, Op::Sum(ia)))
    }

    /// Mean of all entries as a 1x1 matrix.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let v = self.val(ia);
        let n = (v.rows() * v.cols()).max(1) as f64;
        let value = Matrix::scalar(v.sum() / n);
        Ok(self.push(value, Op::Mean(ia)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let value = self.val(ia).transpose();
        Ok(self.push(value, Op::Transpose(ia)))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let value = self.val(ia).concat_cols(self.val(ib))?;
        Ok(self.push(value, Op::ConcatCols(ia, ib)))
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let ia = self.idx(a)?;
        let n = self.val(ia).rows();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::invalid(format!(
                "row {bad} out of range for {n} rows"
            )));
        }
        let value = self.val(ia).select_rows(rows);
        Ok(self.push(value, Op::SelectRows(ia, rows.to_vec())))
    }

    /// Mean over rows of `-ln(softmax(logits)[target] + LOG_EPS)`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let il = self.idx(logits)?;
        let z = self.val(il);
        if targets.len() != z.rows() {
            return Err(Error::DimensionMismatch {
                op: "softmax_cross_entropy",
                left: z.shape(),
                right: (targets.len(), 1),
            });
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= z.cols()) {
            return Err(Error::invalid(format!(
                "target class {bad} out of range for {} classes",
                z.cols()
            )));
        }
        let probs = z.softmax_rows();
        let n = targets.len().max(1) as f64;
        let loss = targets
            .iter()
            .enumerate()
            .map(|(r, &t)| -(probs[(r, t)] + LOG_EPS).ln())
            .sum::<f64>()
            / n;
        Ok(self.push(
            Matrix::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits: il,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    /// Weighted binary cross-entropy on logits, normalized by the total weight.
    ///
    /// Entries with zero weight do not contribute.
    pub fn bce_with_logits(
        &mut self,
        logits: Var,
        targets: &Matrix,
        weights: &Matrix,
    ) -> Result<Var> {
        let il = self.idx(logits)?;
        let z = self.val(il);
        if z.shape() != targets.shape() || z.shape() != weights.shape() {
            return Err(Error::DimensionMismatch {
                op: "bce_with_logits",
                left: z.shape(),
                right: targets.shape(),
            });
        }
        let total_weight = weights.sum();
        if total_weight <= 0.0 {
            return Err(Error::invalid(
                "bce_with_logits needs positive total weight",
            ));
        }
        let loss = z
            .data()
            .iter()
            .zip(targets.data())
            .zip(weights.data())
            .map(|((&x, &t), &w)| {
                if w == 0.0 {
                    0.0
                } else {
                    w * (x.max(0.0) - x * t + (-x.abs()).exp().ln_1p())
                }
            })
            .sum::<f64>()
            / total_weight;
        Ok(self.push(
            Matrix::scalar(loss),
            Op::BceWithLogits {
                logits: il,
                targets: targets.clone(),
                weights: weights.clone(),
                total_weight,
            },
        ))
    }

    /// Propagates gradients from a scalar `loss` back through the tape.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let il = self.idx(loss)?;
        let shape = self.val(il).shape();
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[il] = Some(Matrix::scalar(1.0));

        for i in (0..=il).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            let accumulate = |grads: &mut [Option<Matrix>], j: usize, gj: Matrix| {
                if self.nodes[j].tracked {
                    accumulate(grads, j, gj)
                } else {
                    Ok(())
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    if self.nodes[*a].tracked {
                        accumulate(&mut grads, *a, g.matmul_bt(self.val(*b))?)?;
                    }
                    if self.nodes[*b].tracked {
                        accumulate(&mut grads, *b, self.val(*a).matmul_at(&g)?)?;
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone())?;
                    accumulate(&mut grads, *b, g.clone())?;
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone())?;
                    accumulate(&mut grads, *b, g.scale(-1.0))?;
                }
                Op::Mul(a, b) => {
                    let ga = g.hadamard(self.val(*b))?;
                    let gb = g.hadamard(self.val(*a))?;
                    accumulate(&mut grads, *a, ga)?;
                    accumulate(&mut grads, *b, gb)?;
                }
                Op::AddRow(m, row) => {
                    let mut gr = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in gr.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *m, g.clone())?;
                    accumulate(&mut grads, *row, gr)?;
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g.scale(*c))?,
                Op::Relu(a) => {
                    let ga = g.zip_map(
                        self.val(*a),
                        "relu_grad",
                        |g, x| if x > 0.0 { g } else { 0.0 },
                    )?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::Sigmoid(a) => {
                    let ga = g.zip_map(&node.value, "sigmoid_grad", |g, y| g * y * (1.0 - y))?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::Tanh(a) => {
                    let ga = g.zip_map(&node.value, "tanh_grad", |g, y| g * (1.0 - y * y))?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::Log(a) => {
                    let ga = g.zip_map(self.val(*a), "log_grad", |g, x| g / x)?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::Sum(a) => {
                    let (r, c) = self.val(*a).shape();
                    accumulate(&mut grads, *a, Matrix::filled(r, c, g.item()))?;
                }
                Op::Mean(a) => {
                    let (r, c) = self.val(*a).shape();
                    let n = (r * c).max(1) as f64;
                    accumulate(&mut grads, *a, Matrix::filled(r, c, g.item() / n))?;
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose())?,
                Op::ConcatCols(a, b) => {
                    let (ga, gb) = g.split_cols(self.val(*a).cols());
                    accumulate(&mut grads, *a, ga)?;
                    accumulate(&mut grads, *b, gb)?;
                }
                Op::SelectRows(a, rows) => {
                    let src = self.val(*a);
                    let mut ga = Matrix::zeros(src.rows(), src.cols());
                    for (k, &r) in rows.iter().enumerate() {
                        for (o, v) in ga.row_mut(r).iter_mut().zip(g.row(k)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    targets,
                    probs,
                } => {
                    let n = targets.len().max(1) as f64;
                    let mut gz = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        let pt = probs[(r, t)];
                        // d/dz of -ln(p_t + eps) = (p_t / (p_t + eps)) * (p - e_t)
                        let factor = g.item() * pt / (pt + LOG_EPS) / n;
                        let row = gz.row_mut(r);
                        row[t] -= 1.0;
                        row.iter_mut().for_each(|v| *v *= factor);
                    }
                    accumulate(&mut grads, *logits, gz)?;
                }
                Op::BceWithLogits {
                    logits,
                    targets,
                    weights,
                    total_weight,
                } => {
                    let z = self.val(*logits);
                    let scale = g.item() / total_weight;
                    let data = z
                        .data()
                        .iter()
                        .zip(targets.data())
                        .zip(weights.data())
                        .map(|((&x, &t), &w)| w * (sigmoid(x) - t) * scale)
                        .collect();
                    let gz = Matrix::from_vec(z.rows(), z.cols(), data)?;
                    accumulate(&mut grads, *logits, gz)?;
                }
            }
            // Leaves keep their gradient for the caller.
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }
        Ok(Gradients {
            tape: self.id,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
            grads,
        })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], i: usize, g: Matrix) -> Result<()> {
    match &mut grads[i] {
        Some(existing) => existing.add_assign(&g),
        slot => {
            *slot = Some(g);
            Ok(())
        }
    }
}

/// Gradients of a scalar loss with respect to the leaves of a tape.
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    shapes: Vec<(usize, usize)>,
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient for a leaf variable; all zeros if the loss does not depend on it.
    pub fn get(&self, v: Var) -> Result<Matrix> {
        if v.tape != self.tape || v.idx >= self.grads.len() {
            return Err(Error::ForeignVariable);
        }
        Ok(match &self.grads[v.idx] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.idx];
                Matrix::zeros(r, c)
            }
        })
    }

    pub fn get_all(&self, vars: &[Var]) -> Result<Vec<Matrix>> {
        vars.iter().map(|&v| self.get(v)).collect()
    }
}
