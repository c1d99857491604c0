use super::kernels;
use super::{matmul_dims, FlopClass, FlopCounter, Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    MeanRows(Var),
    Reshape(Var),
    Sum(Var),
    CrossEntropy {
        logits: Var,
        label: usize,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Tensor>,
}

/// Append-only record of a forward computation.
///
/// Nodes are stored in creation order, which is a topological order: an
/// operation can only reference vars that already exist.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    flops: FlopCounter,
    consumed: bool,
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

    pub fn flops(&self) -> &FlopCounter {
        &self.flops
    }

    pub fn flops_mut(&mut self) -> &mut FlopCounter {
        &mut self.flops
    }

    /// A trainable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` loss w.r.t. `v`, if `v` was reached.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Tensor> {
        self.nodes[v.0].grad.take()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn record(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let rg = self.any_grad(inputs);
        self.push(value, op, rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_as(FlopClass::Other, a, b)
    }

    /// Matrix product, booking `m·n·k` multiply-accumulates under `class`.
    pub fn matmul_as(&mut self, class: FlopClass, a: Var, b: Var) -> Result<Var> {
        let (m, k, n) = matmul_dims(self.value(a), self.value(b))?;
        let mut out = vec![0.0; m * n];
        kernels::matmul(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        self.flops.record(class, (m * n * k) as u64);
        let value = Tensor::new(vec![m, n], out)?;
        Ok(self.record(value, Op::MatMul(a, b), &[a, b]))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose()?;
        Ok(self.record(value, Op::Transpose(a), &[a]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err("add", va, vb));
        }
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.record(value, Op::Add(a, b), &[a, b]))
    }

    /// Adds the vector `b` to every row of `a` (the only broadcast supported).
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let n = va.last_dim();
        if vb.len() != n {
            return Err(shape_err("add_row", va, vb));
        }
        let mut data = va.data().to_vec();
        for row in data.chunks_mut(n) {
            for (x, y) in row.iter_mut().zip(vb.data()) {
                *x += y;
            }
        }
        let value = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.record(value, Op::AddRow(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err("mul", va, vb));
        }
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.record(value, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let va = self.value(a);
        let value = Tensor::new(va.shape().to_vec(), va.data().iter().map(|x| x * c).collect())
            .expect("same layout");
        self.record(value, Op::Scale(a, c), &[a])
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let value = Tensor::new(
            va.shape().to_vec(),
            va.data().iter().map(|&x| kernels::gelu(x)).collect(),
        )
        .expect("same layout");
        self.record(value, Op::Gelu(a), &[a])
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        if va.data().iter().any(|v| v.is_nan()) {
            return Err(TensorError::NaN { op: "softmax" });
        }
        let data = kernels::softmax_rows(va.data(), va.last_dim());
        let value = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.record(value, Op::Softmax(a), &[a]))
    }

    /// Layer normalization over the last axis with affine `gain` and `bias`.
    pub fn layernorm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (vx, vg, vb) = (self.value(x), self.value(gain), self.value(bias));
        let d = vx.last_dim();
        if vg.len() != d {
            return Err(shape_err("layernorm gain", vx, vg));
        }
        if vb.len() != d {
            return Err(shape_err("layernorm bias", vx, vb));
        }
        let (out, xhat, inv_std) = kernels::layernorm_rows(vx.data(), vg.data(), vb.data(), eps);
        let value = Tensor::new(vx.shape().to_vec(), out)?;
        Ok(self.record(
            value,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            &[x, gain, bias],
        ))
    }

    /// Stacks rows. Each input is viewed as `[rows, width]`; widths must agree.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let width = self.value(parts[0]).last_dim();
        let mut data = Vec::new();
        for &p in parts {
            let vp = self.value(p);
            if vp.last_dim() != width {
                return Err(shape_err("concat_rows", self.value(parts[0]), vp));
            }
            data.extend_from_slice(vp.data());
        }
        let rows = data.len() / width;
        let value = Tensor::new(vec![rows, width], data)?;
        Ok(self.record(value, Op::ConcatRows(parts.to_vec()), parts))
    }

    /// Joins matrices side by side; row counts must agree.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(shape_err("concat_cols", self.value(parts[0]), self.value(p)));
            }
        }
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).last_dim()).collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let value = Tensor::new(vec![rows, total], data)?;
        Ok(self.record(value, Op::ConcatCols(parts.to_vec()), parts))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let va = self.value(a);
        let d = va.last_dim();
        if len == 0 || start + len > va.rows() {
            return Err(TensorError::Contract(format!(
                "slice_rows {start}..{} out of range for {:?}",
                start + len,
                va.shape()
            )));
        }
        let value = Tensor::new(vec![len, d], va.data()[start * d..(start + len) * d].to_vec())?;
        Ok(self.record(value, Op::SliceRows(a, start), &[a]))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let va = self.value(a);
        let d = va.last_dim();
        if len == 0 || start + len > d {
            return Err(TensorError::Contract(format!(
                "slice_cols {start}..{} out of range for {:?}",
                start + len,
                va.shape()
            )));
        }
        let rows = va.rows();
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&va.row(r)[start..start + len]);
        }
        let value = Tensor::new(vec![rows, len], data)?;
        Ok(self.record(value, Op::SliceCols(a, start), &[a]))
    }

    /// Column-wise mean of a `[rows, d]` view, giving a `[d]` vector.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let (rows, d) = (va.rows(), va.last_dim());
        let mut data = vec![0.0; d];
        for r in 0..rows {
            for (acc, v) in data.iter_mut().zip(va.row(r)) {
                *acc += v;
            }
        }
        data.iter_mut().for_each(|v| *v /= rows as f64);
        self.record(Tensor::vector(data), Op::MeanRows(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        Ok(self.record(value, Op::Reshape(a), &[a]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.record(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    /// Softmax cross-entropy of a single logit vector against `label`.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let vl = self.value(logits);
        let classes = vl.len();
        if label >= classes {
            return Err(TensorError::Contract(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        if vl.data().iter().any(|v| v.is_nan()) {
            return Err(TensorError::NaN { op: "cross_entropy" });
        }
        let loss = kernels::log_sum_exp(vl.data()) - vl.data()[label];
        let probs = kernels::softmax_rows(vl.data(), classes);
        Ok(self.record(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                label,
                probs,
            },
            &[logits],
        ))
    }

    /// Reverse sweep from a scalar `loss`, populating `grad` on every
    /// reachable node that requires one. A tape can be swept only once.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return Err(TensorError::Contract("tape already consumed by backward".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            let shape = self.nodes[i].value.shape().to_vec();
            self.nodes[i].grad = Some(Tensor::new(shape, g)?);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let mut send = |v: Var, contrib: Vec<f64>| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, c)| *a += c),
                slot => *slot = Some(contrib),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k) = (va.shape()[0], va.shape()[1]);
                let n = vb.shape()[1];
                if self.requires_grad(*a) {
                    let bt = kernels::transpose(vb.data(), k, n);
                    let mut da = vec![0.0; m * k];
                    kernels::matmul(g, &bt, &mut da, m, n, k);
                    send(*a, da);
                }
                if self.requires_grad(*b) {
                    let at = kernels::transpose(va.data(), m, k);
                    let mut db = vec![0.0; k * n];
                    kernels::matmul(&at, g, &mut db, k, m, n);
                    send(*b, db);
                }
            }
            Op::Transpose(a) => {
                let (r, c) = (node.value.shape()[0], node.value.shape()[1]);
                send(*a, kernels::transpose(g, r, c));
            }
            Op::Add(a, b) => {
                send(*a, g.to_vec());
                send(*b, g.to_vec());
            }
            Op::AddRow(a, b) => {
                let n = self.value(*b).len();
                let mut db = vec![0.0; n];
                for row in g.chunks(n) {
                    db.iter_mut().zip(row).for_each(|(d, x)| *d += x);
                }
                send(*a, g.to_vec());
                send(*b, db);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                send(*a, g.iter().zip(vb).map(|(x, y)| x * y).collect());
                send(*b, g.iter().zip(va).map(|(x, y)| x * y).collect());
            }
            Op::Scale(a, c) => send(*a, g.iter().map(|x| x * c).collect()),
            Op::Gelu(a) => {
                let va = self.value(*a).data();
                send(
                    *a,
                    g.iter().zip(va).map(|(d, &x)| d * kernels::gelu_grad(x)).collect(),
                );
            }
            Op::Softmax(a) => {
                let n = node.value.last_dim();
                send(*a, kernels::softmax_rows_backward(node.value.data(), g, n));
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let (dx, dg, db) =
                    kernels::layernorm_rows_backward(xhat, inv_std, self.value(*gain).data(), g);
                send(*x, dx);
                send(*gain, dg);
                send(*bias, db);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    send(p, g[offset..offset + n].to_vec());
                    offset += n;
                }
            }
            Op::ConcatCols(parts) => {
                let total = node.value.last_dim();
                let mut col = 0;
                for &p in parts {
                    let w = self.value(p).last_dim();
                    let part: Vec<f64> = g
                        .chunks(total)
                        .flat_map(|row| row[col..col + w].iter().copied())
                        .collect();
                    send(p, part);
                    col += w;
                }
            }
            Op::SliceRows(a, start) => {
                let va = self.value(*a);
                let d = va.last_dim();
                let mut da = vec![0.0; va.len()];
                da[start * d..start * d + g.len()].copy_from_slice(g);
                send(*a, da);
            }
            Op::SliceCols(a, start) => {
                let va = self.value(*a);
                let d = va.last_dim();
                let w = node.value.last_dim();
                let mut da = vec![0.0; va.len()];
                for (r, row) in g.chunks(w).enumerate() {
                    da[r * d + start..r * d + start + w].copy_from_slice(row);
                }
                send(*a, da);
            }
            Op::MeanRows(a) => {
                let va = self.value(*a);
                let rows = va.rows() as f64;
                let da = (0..va.rows())
                    .flat_map(|_| g.iter().map(|x| x / rows))
                    .collect();
                send(*a, da);
            }
            Op::Reshape(a) => send(*a, g.to_vec()),
            Op::Sum(a) => send(*a, vec![g[0]; self.value(*a).len()]),
            Op::CrossEntropy {
                logits,
                label,
                probs,
            } => {
                let mut d: Vec<f64> = probs.iter().map(|p| p * g[0]).collect();
                d[*label] -= g[0];
                send(*logits, d);
            }
        }
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}
