//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends a node holding its forward value. `backward`
//! walks the tape in reverse and pushes gradients into the [`ParamStore`].
//! Values are 2-D (`rows × cols`) unless stated otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::tensor::{matmul, matmul_at, matmul_bt};
use crate::nn::{ParamId, ParamStore, Tensor};

/// Floor applied inside logarithms of probabilities.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Param(ParamId),
    MatMulBt(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    MulConst(Var, Tensor),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    Gather(Var, Vec<usize>),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Tensor,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    Softmax(Var),
    CrossEntropy(Var, Vec<usize>),
    BceWithLogits(Var, Tensor),
    Dot(Var, Tensor),
}

struct Node {
    value: Tensor,
    op: Op,
}

pub struct Graph {
    nodes: Vec<Node>,
    mode: Mode,
    rng: ChaCha8Rng,
    stat_updates: Vec<(ParamId, Tensor)>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new(mode: Mode, seed: u64) -> Self {
        Self {
            nodes: Vec::new(),
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stat_updates: Vec::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    /// `x · wᵀ` with `x: m×k`, `w: n×k`.
    pub fn matmul_bt(&mut self, x: Var, w: Var) -> Result<Var> {
        let (m, k) = self.dims(x);
        let (n, k2) = self.dims(w);
        if k != k2 {
            return Err(Error::Shape(format!("matmul {m}×{k} by ({n}×{k2})ᵀ")));
        }
        let out = matmul_bt(self.value(x).data(), self.value(w).data(), m, k, n);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMulBt(x, w)))
    }

    /// Adds a length-`n` bias to every row of `x: m×n`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (m, n) = self.dims(x);
        if self.value(b).len() != n {
            return Err(Error::Shape(format!(
                "bias of length {} for width {n}",
                self.value(b).len()
            )));
        }
        let bias = self.value(b).data().to_vec();
        let mut out = self.value(x).clone();
        for r in 0..m {
            for (o, bv) in out.row_slice_mut(r).iter_mut().zip(&bias) {
                *o += bv;
            }
        }
        Ok(self.push(out, Op::AddBias(x, b)))
    }

    fn zip_same(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    fn elementwise2(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data).expect("same shape");
        self.push(t, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "add")?;
        Ok(self.elementwise2(a, b, |x, y| x + y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "sub")?;
        Ok(self.elementwise2(a, b, |x, y| x - y, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "mul")?;
        Ok(self.elementwise2(a, b, |x, y| x * y, Op::Mul(a, b)))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| 1.0 - x);
        self.push(t, Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.value(a).map(sigmoid);
        self.push(t, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).map(f64::tanh);
        self.push(t, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(t, Op::Relu(a))
    }

    /// `x` for `x > 0`, `alpha·x` otherwise.
    pub fn leaky_relu(&mut self, a: Var, alpha: f64) -> Var {
        let t = self.value(a).map(|x| if x > 0.0 { x } else { alpha * x });
        self.push(t, Op::LeakyRelu(a, alpha))
    }

    /// Elementwise product with a constant of the same shape.
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Result<Var> {
        if self.value(a).shape() != c.shape() {
            return Err(Error::Shape(format!(
                "mul_const: {:?} vs {:?}",
                self.value(a).shape(),
                c.shape()
            )));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(c.data())
            .map(|(x, y)| x * y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.push(t, Op::MulConst(a, c)))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let m = self.dims(parts[0]).0;
        if parts.iter().any(|&p| self.dims(p).0 != m) {
            return Err(Error::Shape("concat_cols: row counts differ".into()));
        }
        let widths: Vec<usize> = parts.iter().map(|&p| self.dims(p).1).collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for r in 0..m {
            for &p in parts {
                out.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        Ok(self.push(Tensor::matrix(m, total, out)?, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let n = self.dims(parts[0]).1;
        if parts.iter().any(|&p| self.dims(p).1 != n) {
            return Err(Error::Shape("concat_rows: widths differ".into()));
        }
        let mut out = Vec::new();
        for &p in parts {
            out.extend_from_slice(self.value(p).data());
        }
        let m = out.len() / n.max(1);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, count: usize) -> Result<Var> {
        let (m, n) = self.dims(a);
        if start + count > m {
            return Err(Error::Shape(format!("rows {start}..{} of {m}", start + count)));
        }
        let data = self.value(a).data()[start * n..(start + count) * n].to_vec();
        Ok(self.push(Tensor::matrix(count, n, data)?, Op::SliceRows(a, start)))
    }

    /// Row lookup into `table: V×d`, giving `indices.len() × d`.
    pub fn gather(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let (v, d) = self.dims(table);
        let mut out = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= v {
                return Err(Error::IndexOutOfRange { index: i, size: v });
            }
            out.extend_from_slice(self.value(table).row_slice(i));
        }
        Ok(self.push(
            Tensor::matrix(indices.len(), d, out)?,
            Op::Gather(table, indices.to_vec()),
        ))
    }

    /// Per-column normalization. With `stats = None` the batch mean and
    /// (biased) variance are used and returned so the caller can update
    /// running statistics; otherwise the supplied `(mean, var)` are used.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: Option<(&[f64], &[f64])>,
        eps: f64,
    ) -> Result<(Var, Vec<f64>, Vec<f64>)> {
        let (m, n) = self.dims(x);
        if self.value(gamma).len() != n || self.value(beta).len() != n {
            return Err(Error::Shape(format!("batch norm over width {n}")));
        }
        let xv = self.value(x);
        let (mean, var) = match stats {
            Some((mu, var)) => (mu.to_vec(), var.to_vec()),
            None => {
                if m < 2 {
                    return Err(Error::InvalidInput(
                        "batch norm in training mode needs a batch of at least 2".into(),
                    ));
                }
                let mut mu = vec![0.0; n];
                for r in 0..m {
                    for (a, v) in mu.iter_mut().zip(xv.row_slice(r)) {
                        *a += v;
                    }
                }
                mu.iter_mut().for_each(|a| *a /= m as f64);
                let mut var = vec![0.0; n];
                for r in 0..m {
                    for ((a, v), mu) in var.iter_mut().zip(xv.row_slice(r)).zip(&mu) {
                        *a += (v - mu) * (v - mu);
                    }
                }
                var.iter_mut().for_each(|a| *a /= m as f64);
                (mu, var)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = xv.clone();
        for r in 0..m {
            for ((h, mu), is) in xhat.row_slice_mut(r).iter_mut().zip(&mean).zip(&inv_std) {
                *h = (*h - mu) * is;
            }
        }
        let g = self.value(gamma).data().to_vec();
        let b = self.value(beta).data().to_vec();
        let mut out = xhat.clone();
        for r in 0..m {
            for ((o, gv), bv) in out.row_slice_mut(r).iter_mut().zip(&g).zip(&b) {
                *o = *o * gv + bv;
            }
        }
        let v = self.push(
            out,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats: stats.is_none(),
            },
        );
        Ok((v, mean, var))
    }

    /// Inverted dropout. Identity in inference mode or when `rate == 0`.
    pub fn dropout(&mut self, x: Var, rate: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidInput(format!("dropout rate {rate} not in [0, 1)")));
        }
        if self.mode == Mode::Infer || rate == 0.0 {
            return Ok(x);
        }
        let scale = 1.0 / (1.0 - rate);
        let shape = self.value(x).shape().to_vec();
        let n = self.value(x).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if self.rng.gen::<f64>() < rate { 0.0 } else { scale })
            .collect();
        self.mul_const(x, Tensor::new(shape, mask)?)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Var {
        let mut t = self.value(a).clone();
        for r in 0..t.rows() {
            softmax_in_place(t.row_slice_mut(r));
        }
        self.push(t, Op::Softmax(a))
    }

    /// Mean over rows of `-ln max(p[target], 1e-12)`.
    pub fn cross_entropy(&mut self, probs: Var, targets: &[usize]) -> Result<Var> {
        let (m, v) = self.dims(probs);
        if targets.len() != m {
            return Err(Error::Shape(format!("{} targets for {m} rows", targets.len())));
        }
        let p = self.value(probs);
        let mut loss = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            if t >= v {
                return Err(Error::IndexOutOfRange { index: t, size: v });
            }
            loss -= p.get(r, t).max(LOG_FLOOR).ln();
        }
        loss /= m as f64;
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy(probs, targets.to_vec())))
    }

    /// Mean binary cross-entropy of sigmoid(logits) against `targets`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Tensor) -> Result<Var> {
        if self.value(logits).shape() != targets.shape() {
            return Err(Error::Shape("bce targets shape".into()));
        }
        let z = self.value(logits).data();
        let n = z.len().max(1) as f64;
        let loss: f64 = z
            .iter()
            .zip(targets.data())
            .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
            .sum::<f64>()
            / n;
        Ok(self.push(Tensor::scalar(loss), Op::BceWithLogits(logits, targets)))
    }

    /// `Σ a ⊙ w` as a scalar.
    pub fn dot(&mut self, a: Var, w: Tensor) -> Result<Var> {
        if self.value(a).len() != w.len() {
            return Err(Error::Shape("dot: length mismatch".into()));
        }
        let s = self
            .value(a)
            .data()
            .iter()
            .zip(w.data())
            .map(|(x, y)| x * y)
            .sum();
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, w)))
    }

    pub(crate) fn queue_stat_update(&mut self, id: ParamId, value: Tensor) {
        self.stat_updates.push((id, value));
    }

    /// Writes queued running-statistic updates into the store.
    pub fn commit_stats(&mut self, store: &mut ParamStore) -> Result<()> {
        for (id, t) in self.stat_updates.drain(..) {
            store.set_value(id, t)?;
        }
        Ok(())
    }

    /// Reverse pass from a scalar `loss`, accumulating into parameter grads.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Shape("backward needs a scalar loss".into()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(t) => t.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let out = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => store.accumulate_grad(*id, &g),
                Op::MatMulBt(x, w) => {
                    let (m, k) = self.dims(*x);
                    let n = self.dims(*w).0;
                    let dx = matmul(g.data(), self.value(*w).data(), m, n, k);
                    let dw = matmul_at(g.data(), self.value(*x).data(), m, n, k);
                    acc(&mut grads, *x, Tensor::new(self.value(*x).shape().to_vec(), dx)?);
                    acc(&mut grads, *w, Tensor::new(self.value(*w).shape().to_vec(), dw)?);
                }
                Op::AddBias(x, b) => {
                    let n = g.cols();
                    let mut db = vec![0.0; n];
                    for r in 0..g.rows() {
                        for (d, v) in db.iter_mut().zip(g.row_slice(r)) {
                            *d += v;
                        }
                    }
                    acc(&mut grads, *b, Tensor::new(self.value(*b).shape().to_vec(), db)?);
                    acc(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, g.map(|v| -v));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = zip(&g, self.value(*b), |g, y| g * y);
                    let gb = zip(&g, self.value(*a), |g, x| g * x);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::OneMinus(a) => acc(&mut grads, *a, g.map(|v| -v)),
                Op::Sigmoid(a) => acc(&mut grads, *a, zip(&g, out, |g, s| g * s * (1.0 - s))),
                Op::Tanh(a) => acc(&mut grads, *a, zip(&g, out, |g, t| g * (1.0 - t * t))),
                Op::Relu(a) => {
                    let d = zip(&g, self.value(*a), |g, x| if x > 0.0 { g } else { 0.0 });
                    acc(&mut grads, *a, d);
                }
                Op::LeakyRelu(a, alpha) => {
                    let d = zip(&g, self.value(*a), |g, x| if x > 0.0 { g } else { alpha * g });
                    acc(&mut grads, *a, d);
                }
                Op::MulConst(a, c) => acc(&mut grads, *a, zip(&g, c, |g, c| g * c)),
                Op::ConcatCols(parts) => {
                    let m = g.rows();
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.dims(p).1;
                        let mut d = Vec::with_capacity(m * w);
                        for r in 0..m {
                            d.extend_from_slice(&g.row_slice(r)[offset..offset + w]);
                        }
                        offset += w;
                        acc(&mut grads, p, Tensor::new(self.value(p).shape().to_vec(), d)?);
                    }
                }
                Op::ConcatRows(parts) => {
                    let n = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        let d = g.data()[offset..offset + len].to_vec();
                        offset += len;
                        debug_assert_eq!(len % n.max(1), 0);
                        acc(&mut grads, p, Tensor::new(self.value(p).shape().to_vec(), d)?);
                    }
                }
                Op::SliceRows(a, start) => {
                    let n = g.cols();
                    let mut d = Tensor::zeros(self.value(*a).shape());
                    d.data_mut()[start * n..start * n + g.len()].copy_from_slice(g.data());
                    acc(&mut grads, *a, d);
                }
                Op::Gather(table, indices) => {
                    let mut d = Tensor::zeros(self.value(*table).shape());
                    for (r, &i) in indices.iter().enumerate() {
                        for (o, v) in d.row_slice_mut(i).iter_mut().zip(g.row_slice(r)) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *table, d);
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                    batch_stats,
                } => {
                    let (m, n) = (g.rows(), g.cols());
                    let gam = self.value(*gamma).data();
                    let mut dgamma = vec![0.0; n];
                    let mut dbeta = vec![0.0; n];
                    for r in 0..m {
                        for j in 0..n {
                            let gv = g.get(r, j);
                            dgamma[j] += gv * xhat.get(r, j);
                            dbeta[j] += gv;
                        }
                    }
                    let mut dx = Tensor::zeros(self.value(*x).shape());
                    if *batch_stats {
                        // dx = inv_std/m · (m·dxhat − Σdxhat − xhat·Σ(dxhat·xhat))
                        let mf = m as f64;
                        for j in 0..n {
                            let sum_dxhat = dbeta[j] * gam[j];
                            let sum_dxhat_xhat = dgamma[j] * gam[j];
                            for r in 0..m {
                                let dxhat = g.get(r, j) * gam[j];
                                dx.row_slice_mut(r)[j] = inv_std[j] / mf
                                    * (mf * dxhat - sum_dxhat - xhat.get(r, j) * sum_dxhat_xhat);
                            }
                        }
                    } else {
                        for r in 0..m {
                            for j in 0..n {
                                dx.row_slice_mut(r)[j] = g.get(r, j) * gam[j] * inv_std[j];
                            }
                        }
                    }
                    acc(&mut grads, *x, dx);
                    acc(&mut grads, *gamma, Tensor::new(self.value(*gamma).shape().to_vec(), dgamma)?);
                    acc(&mut grads, *beta, Tensor::new(self.value(*beta).shape().to_vec(), dbeta)?);
                }
                Op::Softmax(a) => {
                    let mut d = g.clone();
                    for r in 0..d.rows() {
                        let p = out.row_slice(r);
                        let dot: f64 = g.row_slice(r).iter().zip(p).map(|(g, p)| g * p).sum();
                        for ((dv, gv), pv) in d.row_slice_mut(r).iter_mut().zip(g.row_slice(r)).zip(p)
                        {
                            *dv = pv * (gv - dot);
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::CrossEntropy(probs, targets) => {
                    let p = self.value(*probs);
                    let scale = g.data()[0] / targets.len() as f64;
                    let mut d = Tensor::zeros(p.shape());
                    for (r, &t) in targets.iter().enumerate() {
                        let pv = p.get(r, t);
                        if pv > LOG_FLOOR {
                            d.row_slice_mut(r)[t] = -scale / pv;
                        }
                    }
                    acc(&mut grads, *probs, d);
                }
                Op::BceWithLogits(logits, targets) => {
                    let z = self.value(*logits);
                    let scale = g.data()[0] / z.len().max(1) as f64;
                    let d = zip(z, targets, |z, y| scale * (sigmoid(z) - y));
                    acc(&mut grads, *logits, d);
                }
                Op::Dot(a, w) => {
                    let s = g.data()[0];
                    acc(&mut grads, *a, w.map(|v| v * s).reshape(self.value(*a).shape().to_vec())?);
                }
            }
        }
        store.mark_grads_ready();
        Ok(())
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
