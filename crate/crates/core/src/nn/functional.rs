//! Tensor-in, tensor-out versions of the layer operations. Each one runs
//! the same graph code the trainable layers use, on constant inputs.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::graph::softmax_in_place;
use crate::nn::init::{glorot_uniform, orthogonal};
use crate::nn::layers::{gru_scan, gru_step, GruVars, BN_EPS, BN_MOMENTUM};
use crate::nn::{Graph, Mode, Tensor, Var};

/// Standalone GRU cell weights, each `hidden × (hidden + input)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruCellParams {
    pub wz: Tensor,
    pub wr: Tensor,
    pub wh: Tensor,
    pub bz: Option<Tensor>,
    pub br: Option<Tensor>,
    pub bh: Option<Tensor>,
}

impl GruCellParams {
    pub fn zeros(input: usize, hidden: usize, bias: bool) -> Self {
        let w = || Tensor::zeros(&[hidden, hidden + input]);
        let b = || bias.then(|| Tensor::zeros(&[hidden]));
        Self {
            wz: w(),
            wr: w(),
            wh: w(),
            bz: b(),
            br: b(),
            bh: b(),
        }
    }

    pub fn random<R: Rng>(rng: &mut R, input: usize, hidden: usize, bias: bool) -> Self {
        let w = |rng: &mut R| {
            let rec = orthogonal(rng, hidden);
            let inp = glorot_uniform(rng, hidden, input, input, hidden);
            let mut d = Vec::new();
            for r in 0..hidden {
                d.extend_from_slice(rec.row_slice(r));
                d.extend_from_slice(inp.row_slice(r));
            }
            Tensor::matrix(hidden, hidden + input, d).unwrap()
        };
        let b = |rng: &mut R| {
            bias.then(|| Tensor::vector((0..hidden).map(|_| rng.gen_range(-0.1..0.1)).collect()))
        };
        Self {
            wz: w(rng),
            wr: w(rng),
            wh: w(rng),
            bz: b(rng),
            br: b(rng),
            bh: b(rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.wz.rows()
    }

    pub fn input(&self) -> usize {
        self.wz.cols() - self.hidden()
    }

    fn check(&self) -> Result<()> {
        let (h, c) = (self.wz.rows(), self.wz.cols());
        for w in [&self.wr, &self.wh] {
            if w.rows() != h || w.cols() != c {
                return Err(Error::Shape("GRU gate matrices differ in shape".into()));
            }
        }
        for b in [&self.bz, &self.br, &self.bh].into_iter().flatten() {
            if b.len() != h {
                return Err(Error::Shape("GRU bias length".into()));
            }
        }
        if c < h {
            return Err(Error::Shape("GRU weights narrower than hidden size".into()));
        }
        Ok(())
    }

    pub(crate) fn vars(&self, g: &mut Graph) -> GruVars {
        GruVars {
            wz: g.constant(self.wz.clone()),
            wr: g.constant(self.wr.clone()),
            wh: g.constant(self.wh.clone()),
            bz: self.bz.clone().map(|b| g.constant(b)),
            br: self.br.clone().map(|b| g.constant(b)),
            bh: self.bh.clone().map(|b| g.constant(b)),
        }
    }
}

fn as_row(t: &Tensor) -> Tensor {
    Tensor::row(t.data().to_vec())
}

/// One GRU step for a single `x_t` and `h_{t-1}` (vectors or `1 × n` rows).
pub fn gru_cell_step(x: &Tensor, h_prev: &Tensor, p: &GruCellParams) -> Result<Tensor> {
    p.check()?;
    if x.len() != p.input() || h_prev.len() != p.hidden() {
        return Err(Error::Shape(format!(
            "GRU expects input {} / hidden {}, got {} / {}",
            p.input(),
            p.hidden(),
            x.len(),
            h_prev.len()
        )));
    }
    let mut g = Graph::new(Mode::Infer, 0);
    let vars = p.vars(&mut g);
    let xv = g.constant(as_row(x));
    let hv = g.constant(as_row(h_prev));
    let out = gru_step(&mut g, xv, hv, &vars)?;
    Ok(Tensor::vector(g.value(out).data().to_vec()))
}

fn split_rows(g: &mut Graph, seq: &Tensor) -> Vec<Var> {
    (0..seq.rows())
        .map(|t| g.constant(Tensor::row(seq.row_slice(t).to_vec())))
        .collect()
}

/// GRU over a `T × d` sequence from a zero state. Returns `T × h` when
/// `return_sequence`, otherwise the final state as a length-`h` vector.
pub fn gru_forward(seq: &Tensor, p: &GruCellParams, return_sequence: bool) -> Result<Tensor> {
    p.check()?;
    if seq.is_empty() || seq.rows() == 0 {
        return Err(Error::InvalidInput("GRU over an empty sequence".into()));
    }
    if seq.cols() != p.input() {
        return Err(Error::DimensionMismatch {
            expected: p.input(),
            found: seq.cols(),
        });
    }
    let mut g = Graph::new(Mode::Infer, 0);
    let vars = p.vars(&mut g);
    let xs = split_rows(&mut g, seq);
    let states = gru_scan(&mut g, &xs, &vars, p.hidden(), None)?;
    if return_sequence {
        let rows: Vec<Tensor> = states.iter().map(|&s| g.value(s).clone()).collect();
        Tensor::stack_rows(&rows)
    } else {
        Ok(Tensor::vector(g.value(*states.last().unwrap()).data().to_vec()))
    }
}

/// Bidirectional GRU over `T × d`, giving `T × 2h`: row `t` is the forward
/// state at `t` followed by the backward state aligned to `t`.
pub fn bigru_forward(seq: &Tensor, p_fwd: &GruCellParams, p_bwd: &GruCellParams) -> Result<Tensor> {
    let fwd = gru_forward(seq, p_fwd, true)?;
    let rev_rows: Vec<Tensor> = (0..seq.rows())
        .rev()
        .map(|t| Tensor::row(seq.row_slice(t).to_vec()))
        .collect();
    let rev = Tensor::stack_rows(&rev_rows)?;
    let bwd_rev = gru_forward(&rev, p_bwd, true)?;
    let t_len = seq.rows();
    let mut rows = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut r = fwd.row_slice(t).to_vec();
        r.extend_from_slice(bwd_rev.row_slice(t_len - 1 - t));
        rows.push(Tensor::row(r));
    }
    Tensor::stack_rows(&rows)
}

/// `x · wᵀ + b` with `w: out × in`.
pub fn dense(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let mut g = Graph::new(Mode::Infer, 0);
    let rows = x.rows();
    let xv = g.constant(Tensor::matrix(rows, x.cols(), x.data().to_vec())?);
    let wv = g.constant(w.clone());
    let mut y = g.matmul_bt(xv, wv)?;
    if let Some(b) = b {
        let bv = g.constant(b.clone());
        y = g.add_bias(y, bv)?;
    }
    Ok(g.value(y).clone())
}

fn unary(x: &Tensor, f: impl FnOnce(&mut Graph, Var) -> Var) -> Tensor {
    let mut g = Graph::new(Mode::Infer, 0);
    let v = g.constant(x.clone());
    let y = f(&mut g, v);
    g.value(y).clone()
}

pub fn leaky_relu(x: &Tensor, alpha: f64) -> Tensor {
    unary(x, |g, v| g.leaky_relu(v, alpha))
}

pub fn relu(x: &Tensor) -> Tensor {
    unary(x, |g, v| g.relu(v))
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    unary(x, |g, v| g.sigmoid(v))
}

pub fn tanh(x: &Tensor) -> Tensor {
    unary(x, |g, v| g.tanh(v))
}

/// Row-wise softmax (a 1-D tensor is one row).
pub fn softmax(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_slice_mut(r));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub updates: u64,
}

impl BatchNormParams {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: Tensor::full(&[width], 1.0),
            beta: Tensor::zeros(&[width]),
            running_mean: Tensor::zeros(&[width]),
            running_var: Tensor::full(&[width], 1.0),
            updates: 0,
        }
    }
}

/// Batch normalization over the rows of `x`. Training mode updates the
/// running statistics in `params`: a moving average with momentum 0.99,
/// bias-corrected for the number of updates.
pub fn batch_norm(x: &Tensor, params: &mut BatchNormParams, mode: Mode) -> Result<Tensor> {
    let mut g = Graph::new(mode, 0);
    let xv = g.constant(Tensor::matrix(x.rows(), x.cols(), x.data().to_vec())?);
    let gamma = g.constant(params.gamma.clone());
    let beta = g.constant(params.beta.clone());
    let y = match mode {
        Mode::Train => {
            let (y, mean, var) = g.batch_norm(xv, gamma, beta, None, BN_EPS)?;
            params.updates += 1;
            let w = crate::nn::layers::debiased_weight(BN_MOMENTUM, params.updates as f64);
            let blend = |old: &mut Tensor, new: &[f64]| {
                for (o, x) in old.data_mut().iter_mut().zip(new) {
                    *o = (1.0 - w) * *o + w * x;
                }
            };
            blend(&mut params.running_mean, &mean);
            blend(&mut params.running_var, &var);
            y
        }
        Mode::Infer => {
            let mean = params.running_mean.data().to_vec();
            let var = params.running_var.data().to_vec();
            g.batch_norm(xv, gamma, beta, Some((&mean, &var)), BN_EPS)?.0
        }
    };
    Ok(g.value(y).clone())
}

/// Inverted dropout with its own seeded mask stream.
pub fn dropout(x: &Tensor, rate: f64, mode: Mode, seed: u64) -> Result<Tensor> {
    let mut g = Graph::new(mode, seed);
    let v = g.constant(x.clone());
    let y = g.dropout(v, rate)?;
    Ok(g.value(y).clone())
}

/// Mean over rows of `-ln max(p[target], 1e-12)`. Rows must sum to 1.
pub fn cross_entropy(probs: &Tensor, targets: &[usize]) -> Result<f64> {
    for r in 0..probs.rows() {
        let s: f64 = probs.row_slice(r).iter().sum();
        if (s - 1.0).abs() > 1e-6 || probs.row_slice(r).iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidInput(format!(
                "row {r} is not a probability distribution (sum {s})"
            )));
        }
    }
    let mut g = Graph::new(Mode::Infer, 0);
    let p = g.constant(Tensor::matrix(probs.rows(), probs.cols(), probs.data().to_vec())?);
    let l = g.cross_entropy(p, targets)?;
    Ok(g.value(l).data()[0])
}
