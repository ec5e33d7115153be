//! Layers backed by a [`ParamStore`].

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::init::{glorot_uniform, orthogonal};
use crate::nn::{Graph, Mode, ParamId, ParamStore, Tensor, Var};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.99;

#[derive(Clone, Debug)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let w = store.add(
            format!("{name}.w"),
            glorot_uniform(rng, out_dim, in_dim, in_dim, out_dim),
        );
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[out_dim]));
        Self { w, b, in_dim, out_dim }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        let xw = g.matmul_bt(x, w)?;
        g.add_bias(xw, b)
    }
}

/// Graph handles for one GRU cell's weights.
#[derive(Clone, Copy, Debug)]
pub struct GruVars {
    pub wz: Var,
    pub wr: Var,
    pub wh: Var,
    pub bz: Option<Var>,
    pub br: Option<Var>,
    pub bh: Option<Var>,
}

fn affine(g: &mut Graph, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
    let y = g.matmul_bt(x, w)?;
    match b {
        Some(b) => g.add_bias(y, b),
        None => Ok(y),
    }
}

/// One GRU step:
///
/// ```text
/// z  = σ(W_z·[h, x] + b_z)
/// r  = σ(W_r·[h, x] + b_r)
/// ĥ  = tanh(W·[r⊙h, x] + b)
/// h' = (1 − z)⊙h + z⊙ĥ
/// ```
pub fn gru_step(g: &mut Graph, x: Var, h: Var, p: &GruVars) -> Result<Var> {
    let hx = g.concat_cols(&[h, x])?;
    let za = affine(g, hx, p.wz, p.bz)?;
    let z = g.sigmoid(za);
    let ra = affine(g, hx, p.wr, p.br)?;
    let r = g.sigmoid(ra);
    let rh = g.mul(r, h)?;
    let rhx = g.concat_cols(&[rh, x])?;
    let ca = affine(g, rhx, p.wh, p.bh)?;
    let cand = g.tanh(ca);
    let keep = g.one_minus(z);
    let old = g.mul(keep, h)?;
    let new = g.mul(z, cand)?;
    g.add(old, new)
}

/// Runs `gru_step` over `xs` from a zero state and returns every state.
///
/// `masks[t]` (shape `batch × hidden`, entries 0/1) freezes the state of
/// padded rows at step `t`.
pub fn gru_scan(g: &mut Graph, xs: &[Var], p: &GruVars, hidden: usize, masks: Option<&[Tensor]>) -> Result<Vec<Var>> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("GRU over an empty sequence".into()));
    }
    let batch = g.value(xs[0]).rows();
    let mut h = g.constant(Tensor::zeros(&[batch, hidden]));
    let mut states = Vec::with_capacity(xs.len());
    for (t, &x) in xs.iter().enumerate() {
        let next = gru_step(g, x, h, p)?;
        h = match masks.map(|m| &m[t]) {
            Some(m) if m.data().iter().any(|&v| v != 1.0) => {
                // m⊙new + (1−m)⊙h is exact for 0/1 masks
                let take = g.mul_const(next, m.clone())?;
                let hold = g.mul_const(h, m.map(|v| 1.0 - v))?;
                g.add(take, hold)?
            }
            _ => next,
        };
        states.push(h);
    }
    Ok(states)
}

#[derive(Clone, Debug)]
pub struct Gru {
    pub wz: ParamId,
    pub wr: ParamId,
    pub wh: ParamId,
    pub bias: Option<[ParamId; 3]>,
    pub input: usize,
    pub hidden: usize,
}

impl Gru {
    /// Weight matrices are `hidden × (hidden + input)`; the recurrent block
    /// is orthogonal and the input block Glorot-uniform.
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, bias: bool, rng: &mut R) -> Self {
        let mut weight = |gate: &str, rng: &mut R| {
            let rec = orthogonal(rng, hidden);
            let inp = glorot_uniform(rng, hidden, input, input, hidden);
            let mut data = Vec::with_capacity(hidden * (hidden + input));
            for r in 0..hidden {
                data.extend_from_slice(rec.row_slice(r));
                data.extend_from_slice(inp.row_slice(r));
            }
            store.add(
                format!("{name}.{gate}"),
                Tensor::matrix(hidden, hidden + input, data).expect("shape"),
            )
        };
        let wz = weight("wz", rng);
        let wr = weight("wr", rng);
        let wh = weight("wh", rng);
        let bias = bias.then(|| {
            ["bz", "br", "bh"].map(|b| store.add(format!("{name}.{b}"), Tensor::zeros(&[hidden])))
        });
        Self {
            wz,
            wr,
            wh,
            bias,
            input,
            hidden,
        }
    }

    pub fn vars(&self, g: &mut Graph, store: &ParamStore) -> GruVars {
        let [bz, br, bh] = match self.bias {
            Some(b) => b.map(|id| Some(g.param(store, id))),
            None => [None; 3],
        };
        GruVars {
            wz: g.param(store, self.wz),
            wr: g.param(store, self.wr),
            wh: g.param(store, self.wh),
            bz,
            br,
            bh,
        }
    }

    pub fn scan(&self, g: &mut Graph, store: &ParamStore, xs: &[Var], masks: Option<&[Tensor]>) -> Result<Vec<Var>> {
        let p = self.vars(g, store);
        gru_scan(g, xs, &p, self.hidden, masks)
    }
}

#[derive(Clone, Debug)]
pub struct BiGru {
    pub fwd: Gru,
    pub bwd: Gru,
}

impl BiGru {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, bias: bool, rng: &mut R) -> Self {
        Self {
            fwd: Gru::new(store, &format!("{name}.fwd"), input, hidden, bias, rng),
            bwd: Gru::new(store, &format!("{name}.bwd"), input, hidden, bias, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden
    }

    /// Forward states and time-aligned backward states.
    fn both(&self, g: &mut Graph, store: &ParamStore, xs: &[Var], masks: Option<&[Tensor]>) -> Result<(Vec<Var>, Vec<Var>)> {
        let fwd = self.fwd.scan(g, store, xs, masks)?;
        let rev: Vec<Var> = xs.iter().rev().copied().collect();
        let rev_masks: Option<Vec<Tensor>> = masks.map(|m| m.iter().rev().cloned().collect());
        let mut bwd = self.bwd.scan(g, store, &rev, rev_masks.as_deref())?;
        bwd.reverse();
        Ok((fwd, bwd))
    }

    /// Per-step `[forward, backward]` states, each `batch × 2·hidden`.
    pub fn sequence(&self, g: &mut Graph, store: &ParamStore, xs: &[Var], masks: Option<&[Tensor]>) -> Result<Vec<Var>> {
        let (fwd, bwd) = self.both(g, store, xs, masks)?;
        fwd.iter()
            .zip(&bwd)
            .map(|(&f, &b)| g.concat_cols(&[f, b]))
            .collect()
    }

    /// Final forward state joined with the final backward state (the one
    /// produced after reading the first frame).
    pub fn last(&self, g: &mut Graph, store: &ParamStore, xs: &[Var], masks: Option<&[Tensor]>) -> Result<Var> {
        let (fwd, bwd) = self.both(g, store, xs, masks)?;
        g.concat_cols(&[*fwd.last().unwrap(), bwd[0]])
    }
}

#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, vocab: usize, dim: usize, rng: &mut R) -> Self {
        let data = (0..vocab * dim).map(|_| rng.gen_range(-0.05..0.05)).collect();
        let table = store.add(
            format!("{name}.table"),
            Tensor::matrix(vocab, dim, data).expect("shape"),
        );
        Self { table, vocab, dim }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, indices: &[usize]) -> Result<Var> {
        let t = g.param(store, self.table);
        g.gather(t, indices)
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    /// Number of running-statistic updates so far (a one-element buffer).
    pub updates: ParamId,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Self {
        Self {
            gamma: store.add(format!("{name}.gamma"), Tensor::full(&[width], 1.0)),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(&[width])),
            running_mean: store.add_buffer(format!("{name}.running_mean"), Tensor::zeros(&[width])),
            running_var: store.add_buffer(format!("{name}.running_var"), Tensor::full(&[width], 1.0)),
            updates: store.add_buffer(format!("{name}.updates"), Tensor::vector(vec![0.0])),
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }

    /// Training mode normalizes with batch statistics and queues a
    /// running-statistics update on the graph; inference mode uses the
    /// stored running statistics.
    ///
    /// The running statistics are a bias-corrected moving average: after
    /// `n` updates they equal `Σ mᵏ(1−m)xₙ₋ₖ / (1−mⁿ)`, so the initial
    /// values stop mattering after the first update.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let gamma = g.param(store, self.gamma);
        let beta = g.param(store, self.beta);
        match g.mode() {
            Mode::Train => {
                let (y, mean, var) = g.batch_norm(x, gamma, beta, None, self.eps)?;
                let n = store.value(self.updates).data()[0] + 1.0;
                let w = debiased_weight(self.momentum, n);
                let blend = |old: &Tensor, new: &[f64]| {
                    Tensor::vector(old.data().iter().zip(new).map(|(o, x)| (1.0 - w) * o + w * x).collect())
                };
                let m = blend(store.value(self.running_mean), &mean);
                let v = blend(store.value(self.running_var), &var);
                g.queue_stat_update(self.running_mean, m);
                g.queue_stat_update(self.running_var, v);
                g.queue_stat_update(self.updates, Tensor::vector(vec![n]));
                Ok(y)
            }
            Mode::Infer => {
                let mean = store.value(self.running_mean).data().to_vec();
                let var = store.value(self.running_var).data().to_vec();
                let (y, _, _) = g.batch_norm(x, gamma, beta, Some((&mean, &var)), self.eps)?;
                Ok(y)
            }
        }
    }
}

/// Weight of the newest batch in the `n`-th bias-corrected average update.
pub(crate) fn debiased_weight(momentum: f64, n: f64) -> f64 {
    (1.0 - momentum) / (1.0 - momentum.powf(n))
}
