//! Pre-LN causal transformer with hand-written backpropagation.

use super::config::PlannerConfig;
use super::params::{Params, SlotParams};
use super::vocab::{PromptItem, Vocab, EOS};
use super::PlannerError;
use crate::tensor::{axpy, dot, Matrix};
use crate::tokens::{sincos_embedding, QueryToken, RpEmbedding};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Which projector a `<query>` slot uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Detection,
    Map,
}

impl SlotKind {
    fn index(self) -> usize {
        match self {
            SlotKind::Detection => 0,
            SlotKind::Map => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotInput {
    pub kind: SlotKind,
    pub queries: Vec<QueryToken>,
}

/// A prompt with raw query tokens per slot and the answer ids (ending in EOS).
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub prompt: Vec<PromptItem>,
    pub slots: Vec<SlotInput>,
    pub answer: Vec<u32>,
}

/// One stream position: a vocabulary id or a row already in model space.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamToken {
    Text(u32),
    Injected(Vec<f64>),
}

/// Discrete tokens with projected 3D rows spliced in at the slots.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenStream {
    pub tokens: Vec<StreamToken>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Splice one projected matrix per slot into a tokenized prompt.
pub fn assemble_stream(prompt: &[PromptItem], injected: &[Matrix]) -> Result<TokenStream, PlannerError> {
    let slots = prompt.iter().filter(|p| matches!(p, PromptItem::Slot(_))).count();
    if slots != injected.len() {
        return Err(PlannerError::Assembly(format!(
            "{slots} slots but {} matrices",
            injected.len()
        )));
    }
    let mut tokens = Vec::new();
    for item in prompt {
        match *item {
            PromptItem::Token(id) => tokens.push(StreamToken::Text(id)),
            PromptItem::Slot(i) => {
                let m = injected.get(i).ok_or_else(|| {
                    PlannerError::Assembly(format!("slot {i} has no matrix"))
                })?;
                tokens.extend((0..m.rows()).map(|r| StreamToken::Injected(m.row(r).to_vec())));
            }
        }
    }
    Ok(TokenStream { tokens })
}

#[derive(Debug, Clone, Copy)]
enum Item<'a> {
    Text(u32),
    Injected(&'a [f64]),
    Query {
        kind: usize,
        row: usize,
        q: &'a QueryToken,
    },
}

#[derive(Debug, Clone)]
enum Origin {
    Text(u32),
    Fixed,
    Query {
        kind: usize,
        row: usize,
        reference: [f64; 3],
        u: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: PlannerConfig,
    pub vocab: Vocab,
    pub params: Params,
}

struct LnCache {
    xhat: Matrix,
    rstd: Vec<f64>,
}

struct LayerCache {
    ln1: LnCache,
    a: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    probs: Vec<f64>,
    ctx: Matrix,
    ln2: LnCache,
    m: Matrix,
    pre: Matrix,
    act: Matrix,
}

struct Cache {
    origins: Vec<Origin>,
    layers: Vec<LayerCache>,
    lnf: LnCache,
    z: Matrix,
    positions: Vec<usize>,
}

fn layer_norm(x: &Matrix, g: &Matrix, b: &Matrix) -> (Matrix, LnCache) {
    let (t, d) = x.shape();
    let mut y = Matrix::zeros(t, d);
    let mut xhat = Matrix::zeros(t, d);
    let mut rstd = vec![0.0; t];
    for (i, rs) in rstd.iter_mut().enumerate() {
        let row = x.row(i);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let r = 1.0 / (var + LN_EPS).sqrt();
        *rs = r;
        let xh = xhat.row_mut(i);
        for j in 0..d {
            xh[j] = (row[j] - mean) * r;
        }
        let yr = y.row_mut(i);
        for j in 0..d {
            yr[j] = xh[j] * g.data()[j] + b.data()[j];
        }
    }
    (y, LnCache { xhat, rstd })
}

fn ln_row(x: &[f64], g: &Matrix, b: &Matrix) -> Vec<f64> {
    let d = x.len();
    let mean = x.iter().sum::<f64>() / d as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
    let r = 1.0 / (var + LN_EPS).sqrt();
    (0..d)
        .map(|j| (x[j] - mean) * r * g.data()[j] + b.data()[j])
        .collect()
}

fn ln_backward(dy: &Matrix, c: &LnCache, g: &Matrix, dg: &mut Matrix, db: &mut Matrix) -> Matrix {
    let (t, d) = dy.shape();
    let mut dx = Matrix::zeros(t, d);
    for i in 0..t {
        let dyr = dy.row(i);
        let xh = c.xhat.row(i);
        let mut dxhat = vec![0.0; d];
        for j in 0..d {
            dg.data_mut()[j] += dyr[j] * xh[j];
            db.data_mut()[j] += dyr[j];
            dxhat[j] = dyr[j] * g.data()[j];
        }
        let m1 = dxhat.iter().sum::<f64>() / d as f64;
        let m2 = dot(&dxhat, xh) / d as f64;
        let out = dx.row_mut(i);
        for j in 0..d {
            out[j] = c.rstd[i] * (dxhat[j] - m1 - xh[j] * m2);
        }
    }
    dx
}

/// `y = x Wᵀ (+ b)`, `W` stored `[out × in]`.
fn linear(x: &Matrix, w: &Matrix, b: Option<&Matrix>) -> Matrix {
    let mut y = Matrix::zeros(x.rows(), w.rows());
    for t in 0..x.rows() {
        let xr = x.row(t);
        let yr = y.row_mut(t);
        for (o, yo) in yr.iter_mut().enumerate() {
            *yo = dot(w.row(o), xr) + b.map_or(0.0, |b| b.data()[o]);
        }
    }
    y
}

fn linear_row(x: &[f64], w: &Matrix, b: Option<&Matrix>) -> Vec<f64> {
    (0..w.rows())
        .map(|o| dot(w.row(o), x) + b.map_or(0.0, |b| b.data()[o]))
        .collect()
}

fn linear_backward(dy: &Matrix, x: &Matrix, w: &Matrix, dw: &mut Matrix, mut db: Option<&mut Matrix>) -> Matrix {
    let mut dx = Matrix::zeros(x.rows(), w.cols());
    for t in 0..dy.rows() {
        let dyr = dy.row(t);
        let xr = x.row(t);
        for (o, &g) in dyr.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            axpy(dx.row_mut(t), g, w.row(o));
            axpy(dw.row_mut(o), g, xr);
            if let Some(db) = db.as_deref_mut() {
                db.data_mut()[o] += g;
            }
        }
    }
    dx
}

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + 0.044715 * u * u * u)).tanh())
}

fn gelu_grad(u: f64) -> f64 {
    let th = (GELU_C * (u + 0.044715 * u * u * u)).tanh();
    0.5 * (1.0 + th) + 0.5 * u * (1.0 - th * th) * GELU_C * (1.0 + 3.0 * 0.044715 * u * u)
}

fn log_softmax_pick(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let lse = max + sum.ln();
    let probs = logits.iter().map(|l| (l - lse).exp()).collect();
    (lse - logits[target], probs)
}

/// Mean negative log-likelihood of `targets` under row-wise softmax of `logits`.
pub fn cross_entropy(logits: &Matrix, targets: &[u32]) -> Result<f64, PlannerError> {
    if targets.is_empty() {
        return Err(PlannerError::EmptyAnswer);
    }
    if logits.rows() != targets.len() {
        return Err(PlannerError::Assembly(format!(
            "{} logit rows for {} targets",
            logits.rows(),
            targets.len()
        )));
    }
    let total: f64 = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| log_softmax_pick(logits.row(i), t as usize).0)
        .sum();
    Ok(total / targets.len() as f64)
}

/// Result of autoregressive decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub ids: Vec<u32>,
    pub text: String,
    /// No EOS was produced before the length cap.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    Greedy,
    Sample { temperature: f64, seed: u64 },
}

struct KvCache {
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    len: usize,
}

impl Model {
    pub fn new(config: PlannerConfig, seed: u64) -> Result<Self, PlannerError> {
        config.validate()?;
        let vocab = Vocab::build();
        let params = Params::init(&config, &vocab, seed);
        Ok(Model {
            config,
            vocab,
            params,
        })
    }

    fn items<'a>(&self, ex: &'a Example, with_answer: bool) -> Result<Vec<Item<'a>>, PlannerError> {
        let mut items = Vec::new();
        for p in &ex.prompt {
            match *p {
                PromptItem::Token(id) => items.push(Item::Text(id)),
                PromptItem::Slot(i) => {
                    let slot = ex.slots.get(i).ok_or_else(|| {
                        PlannerError::Assembly(format!("prompt names slot {i} but only {} given", ex.slots.len()))
                    })?;
                    let kind = slot.kind.index();
                    for (row, q) in slot.queries.iter().enumerate() {
                        if q.embedding.len() != self.config.d_q {
                            return Err(PlannerError::Assembly(format!(
                                "query embedding has {} values, expected {}",
                                q.embedding.len(),
                                self.config.d_q
                            )));
                        }
                        items.push(Item::Query { kind, row, q });
                    }
                }
            }
        }
        let slot_refs = ex.prompt.iter().filter(|p| matches!(p, PromptItem::Slot(_))).count();
        if slot_refs != ex.slots.len() {
            return Err(PlannerError::Assembly(format!(
                "{slot_refs} slots in prompt but {} inputs",
                ex.slots.len()
            )));
        }
        if with_answer && ex.answer.len() > 1 {
            items.extend(ex.answer[..ex.answer.len() - 1].iter().map(|&id| Item::Text(id)));
        }
        Ok(items)
    }

    fn check_len(&self, n: usize) -> Result<(), PlannerError> {
        if n > self.config.context {
            Err(PlannerError::Length {
                len: n,
                context: self.config.context,
            })
        } else if n == 0 {
            Err(PlannerError::Assembly("empty stream".into()))
        } else {
            Ok(())
        }
    }

    fn query_u(&self, kind: usize, row: usize, q: &QueryToken) -> Vec<f64> {
        let sp: &SlotParams = &self.params.slots[kind];
        let mut u = q.embedding.clone();
        match self.config.rp_embedding {
            RpEmbedding::None => {}
            RpEmbedding::Sincos => {
                for (a, b) in u.iter_mut().zip(sincos_embedding(&q.reference_point, self.config.d_q)) {
                    *a += b;
                }
            }
            RpEmbedding::Learned => {
                let r = row.min(sp.learned.rows().saturating_sub(1));
                for (a, b) in u.iter_mut().zip(sp.learned.row(r)) {
                    *a += b;
                }
            }
            RpEmbedding::Rp => {
                let r = &q.reference_point;
                for (i, a) in u.iter_mut().enumerate() {
                    let w = sp.rp_w.row(i);
                    *a += w[0] * r[0] + w[1] * r[1] + w[2] * r[2] + sp.rp_b.data()[i];
                }
            }
        }
        u
    }

    fn embed_item(&self, item: &Item, t: usize) -> (Vec<f64>, Origin) {
        let pos = self.params.pos_emb.row(t);
        let (mut x, origin) = match *item {
            Item::Text(id) => (self.params.tok_emb.row(id as usize).to_vec(), Origin::Text(id)),
            Item::Injected(row) => (row.to_vec(), Origin::Fixed),
            Item::Query { kind, row, q } => {
                let u = self.query_u(kind, row, q);
                let sp = &self.params.slots[kind];
                let x = linear_row(&u, &sp.proj_w, Some(&sp.proj_b));
                (
                    x,
                    Origin::Query {
                        kind,
                        row,
                        reference: q.reference_point,
                        u,
                    },
                )
            }
        };
        for (a, b) in x.iter_mut().zip(pos) {
            *a += b;
        }
        (x, origin)
    }

    fn forward_items(&self, items: &[Item], positions: &[usize]) -> Result<(Matrix, Cache), PlannerError> {
        self.check_len(items.len())?;
        for (i, item) in items.iter().enumerate() {
            if let Item::Text(id) = item {
                if *id as usize >= self.vocab.len() {
                    return Err(PlannerError::Assembly(format!("token id {id} at {i} outside vocabulary")));
                }
            }
            if let Item::Injected(r) = item {
                if r.len() != self.config.d_llm {
                    return Err(PlannerError::Assembly(format!(
                        "injected row has {} values, expected {}",
                        r.len(),
                        self.config.d_llm
                    )));
                }
            }
        }
        let cfg = &self.config;
        let t_len = items.len();
        let d = cfg.d_llm;
        let mut h = Matrix::zeros(t_len, d);
        let mut origins = Vec::with_capacity(t_len);
        for (t, item) in items.iter().enumerate() {
            let (x, o) = self.embed_item(item, t);
            h.row_mut(t).copy_from_slice(&x);
            origins.push(o);
        }
        let nh = cfg.heads;
        let hd = cfg.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        let mut layers = Vec::with_capacity(cfg.layers);
        for lp in &self.params.layers {
            let (a, ln1) = layer_norm(&h, &lp.ln1_g, &lp.ln1_b);
            let q = linear(&a, &lp.wq, None);
            let k = linear(&a, &lp.wk, None);
            let v = linear(&a, &lp.wv, None);
            let mut probs = vec![0.0; nh * t_len * t_len];
            let mut ctx = Matrix::zeros(t_len, d);
            for head in 0..nh {
                let sl = head * hd..(head + 1) * hd;
                for t in 0..t_len {
                    let qt = &q.row(t)[sl.clone()];
                    let base = (head * t_len + t) * t_len;
                    let p = &mut probs[base..base + t + 1];
                    let mut max = f64::NEG_INFINITY;
                    for (s, ps) in p.iter_mut().enumerate() {
                        *ps = dot(qt, &k.row(s)[sl.clone()]) * scale;
                        max = max.max(*ps);
                    }
                    let mut sum = 0.0;
                    for ps in p.iter_mut() {
                        *ps = (*ps - max).exp();
                        sum += *ps;
                    }
                    let c = &mut ctx.row_mut(t)[sl.clone()];
                    for (s, ps) in p.iter_mut().enumerate() {
                        *ps /= sum;
                        axpy(c, *ps, &v.row(s)[sl.clone()]);
                    }
                }
            }
            let o = linear(&ctx, &lp.wo, None);
            for (hv, ov) in h.data_mut().iter_mut().zip(o.data()) {
                *hv += ov;
            }
            let (m, ln2) = layer_norm(&h, &lp.ln2_g, &lp.ln2_b);
            let pre = linear(&m, &lp.w1, Some(&lp.b1));
            let mut act = pre.clone();
            act.data_mut().iter_mut().for_each(|x| *x = gelu(*x));
            let out = linear(&act, &lp.w2, Some(&lp.b2));
            for (hv, ov) in h.data_mut().iter_mut().zip(out.data()) {
                *hv += ov;
            }
            layers.push(LayerCache {
                ln1,
                a,
                q,
                k,
                v,
                probs,
                ctx,
                ln2,
                m,
                pre,
                act,
            });
        }
        let (z, lnf) = layer_norm(&h, &self.params.lnf_g, &self.params.lnf_b);
        let vsize = self.vocab.len();
        let mut logits = Matrix::zeros(positions.len(), vsize);
        for (i, &p) in positions.iter().enumerate() {
            let zr = z.row(p);
            let lr = logits.row_mut(i);
            for (w, l) in lr.iter_mut().enumerate() {
                *l = dot(zr, self.params.tok_emb.row(w)) + self.params.head_bias.data()[w];
            }
        }
        if !logits.is_finite() {
            return Err(PlannerError::Numeric("non-finite logits".into()));
        }
        Ok((
            logits,
            Cache {
                origins,
                layers,
                lnf,
                z,
                positions: positions.to_vec(),
            },
        ))
    }

    fn backward(&self, cache: &Cache, dlogits: &Matrix) -> Params {
        let cfg = &self.config;
        let p = &self.params;
        let mut g = Params::zeros(cfg, self.vocab.len());
        let t_len = cache.z.rows();
        let d = cfg.d_llm;
        let mut dz = Matrix::zeros(t_len, d);
        for (i, &pos) in cache.positions.iter().enumerate() {
            let dl = dlogits.row(i);
            let zr = cache.z.row(pos);
            for (w, &gl) in dl.iter().enumerate() {
                if gl == 0.0 {
                    continue;
                }
                axpy(dz.row_mut(pos), gl, p.tok_emb.row(w));
                axpy(g.tok_emb.row_mut(w), gl, zr);
                g.head_bias.data_mut()[w] += gl;
            }
        }
        let mut dh = ln_backward(&dz, &cache.lnf, &p.lnf_g, &mut g.lnf_g, &mut g.lnf_b);
        let nh = cfg.heads;
        let hd = cfg.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        for (li, lc) in cache.layers.iter().enumerate().rev() {
            let lp = &p.layers[li];
            let lg = &mut g.layers[li];
            // MLP branch
            let mut dact = linear_backward(&dh, &lc.act, &lp.w2, &mut lg.w2, Some(&mut lg.b2));
            for (da, &u) in dact.data_mut().iter_mut().zip(lc.pre.data()) {
                *da *= gelu_grad(u);
            }
            let dm = linear_backward(&dact, &lc.m, &lp.w1, &mut lg.w1, Some(&mut lg.b1));
            let dx2 = ln_backward(&dm, &lc.ln2, &lp.ln2_g, &mut lg.ln2_g, &mut lg.ln2_b);
            for (a, b) in dh.data_mut().iter_mut().zip(dx2.data()) {
                *a += b;
            }
            // attention branch
            let dctx = linear_backward(&dh, &lc.ctx, &lp.wo, &mut lg.wo, None);
            let mut dq = Matrix::zeros(t_len, d);
            let mut dk = Matrix::zeros(t_len, d);
            let mut dv = Matrix::zeros(t_len, d);
            let mut dp = vec![0.0; t_len];
            for head in 0..nh {
                let sl = head * hd..(head + 1) * hd;
                for t in 0..t_len {
                    let base = (head * t_len + t) * t_len;
                    let pr = &lc.probs[base..base + t + 1];
                    let dct = &dctx.row(t)[sl.clone()];
                    let mut acc = 0.0;
                    for s in 0..=t {
                        dp[s] = dot(dct, &lc.v.row(s)[sl.clone()]);
                        acc += pr[s] * dp[s];
                        axpy(&mut dv.row_mut(s)[sl.clone()], pr[s], dct);
                    }
                    for s in 0..=t {
                        let ds = pr[s] * (dp[s] - acc) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        axpy(&mut dq.row_mut(t)[sl.clone()], ds, &lc.k.row(s)[sl.clone()]);
                        axpy(&mut dk.row_mut(s)[sl.clone()], ds, &lc.q.row(t)[sl.clone()]);
                    }
                }
            }
            let mut da = linear_backward(&dq, &lc.a, &lp.wq, &mut lg.wq, None);
            let dak = linear_backward(&dk, &lc.a, &lp.wk, &mut lg.wk, None);
            let dav = linear_backward(&dv, &lc.a, &lp.wv, &mut lg.wv, None);
            for ((a, b), c) in da.data_mut().iter_mut().zip(dak.data()).zip(dav.data()) {
                *a += b + c;
            }
            let dx1 = ln_backward(&da, &lc.ln1, &lp.ln1_g, &mut lg.ln1_g, &mut lg.ln1_b);
            for (a, b) in dh.data_mut().iter_mut().zip(dx1.data()) {
                *a += b;
            }
        }
        for (t, origin) in cache.origins.iter().enumerate() {
            let dx = dh.row(t);
            axpy(g.pos_emb.row_mut(t), 1.0, dx);
            match origin {
                Origin::Text(id) => axpy(g.tok_emb.row_mut(*id as usize), 1.0, dx),
                Origin::Fixed => {}
                Origin::Query {
                    kind,
                    row,
                    reference,
                    u,
                } => {
                    let sp = &p.slots[*kind];
                    let sg = &mut g.slots[*kind];
                    let mut du = vec![0.0; cfg.d_q];
                    for (o, &gx) in dx.iter().enumerate() {
                        axpy(sg.proj_w.row_mut(o), gx, u);
                        sg.proj_b.data_mut()[o] += gx;
                        axpy(&mut du, gx, sp.proj_w.row(o));
                    }
                    match cfg.rp_embedding {
                        RpEmbedding::Rp => {
                            for (i, &gu) in du.iter().enumerate() {
                                axpy(sg.rp_w.row_mut(i), gu, reference);
                                sg.rp_b.data_mut()[i] += gu;
                            }
                        }
                        RpEmbedding::Learned => {
                            let r = (*row).min(sg.learned.rows().saturating_sub(1));
                            axpy(sg.learned.row_mut(r), 1.0, &du);
                        }
                        RpEmbedding::None | RpEmbedding::Sincos => {}
                    }
                }
            }
        }
        g
    }

    /// Logits at the positions that predict each answer token.
    pub fn answer_logits(&self, ex: &Example) -> Result<Matrix, PlannerError> {
        let items = self.items(ex, true)?;
        let positions = self.target_positions(ex, items.len())?;
        Ok(self.forward_items(&items, &positions)?.0)
    }

    fn target_positions(&self, ex: &Example, n_items: usize) -> Result<Vec<usize>, PlannerError> {
        if ex.answer.is_empty() {
            return Err(PlannerError::EmptyAnswer);
        }
        let start = n_items + 1 - ex.answer.len();
        if start == 0 {
            return Err(PlannerError::Assembly("answer needs a preceding prompt token".into()));
        }
        Ok((start - 1..n_items).collect())
    }

    pub fn loss(&self, ex: &Example) -> Result<f64, PlannerError> {
        let logits = self.answer_logits(ex)?;
        cross_entropy(&logits, &ex.answer)
    }

    /// Loss and gradient for one example.
    pub fn loss_and_grad(&self, ex: &Example) -> Result<(f64, Params), PlannerError> {
        let items = self.items(ex, true)?;
        let positions = self.target_positions(ex, items.len())?;
        let (logits, cache) = self.forward_items(&items, &positions)?;
        let n = ex.answer.len() as f64;
        let mut dlogits = Matrix::zeros(logits.rows(), logits.cols());
        let mut total = 0.0;
        for (i, &target) in ex.answer.iter().enumerate() {
            let (nll, probs) = log_softmax_pick(logits.row(i), target as usize);
            total += nll;
            let dr = dlogits.row_mut(i);
            for (dv, pv) in dr.iter_mut().zip(&probs) {
                *dv = pv / n;
            }
            dr[target as usize] -= 1.0 / n;
        }
        let grads = self.backward(&cache, &dlogits);
        Ok((total / n, grads))
    }

    /// Logits at every position of an assembled stream.
    pub fn forward_stream(&self, stream: &TokenStream) -> Result<Matrix, PlannerError> {
        let items: Vec<Item> = stream
            .tokens
            .iter()
            .map(|t| match t {
                StreamToken::Text(id) => Item::Text(*id),
                StreamToken::Injected(r) => Item::Injected(r),
            })
            .collect();
        let positions: Vec<usize> = (0..items.len()).collect();
        Ok(self.forward_items(&items, &positions)?.0)
    }

    /// The projected rows each slot of `ex` would inject.
    pub fn project_slots(&self, ex: &Example) -> Vec<Matrix> {
        ex.slots
            .iter()
            .map(|s| {
                let k = s.kind.index();
                let sp = &self.params.slots[k];
                let rows: Vec<Vec<f64>> = s
                    .queries
                    .iter()
                    .enumerate()
                    .map(|(r, q)| linear_row(&self.query_u(k, r, q), &sp.proj_w, Some(&sp.proj_b)))
                    .collect();
                Matrix::from_rows(self.config.d_llm, &rows).expect("rows sized by projector")
            })
            .collect()
    }

    fn step(&self, cache: &mut KvCache, x: Vec<f64>) -> Vec<f64> {
        let cfg = &self.config;
        let d = cfg.d_llm;
        let nh = cfg.heads;
        let hd = cfg.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        let t = cache.len;
        let mut h = x;
        for (li, lp) in self.params.layers.iter().enumerate() {
            let a = ln_row(&h, &lp.ln1_g, &lp.ln1_b);
            let q = linear_row(&a, &lp.wq, None);
            cache.k[li].extend(linear_row(&a, &lp.wk, None));
            cache.v[li].extend(linear_row(&a, &lp.wv, None));
            let ks = &cache.k[li];
            let vs = &cache.v[li];
            let mut ctx = vec![0.0; d];
            let mut scores = vec![0.0; t + 1];
            for head in 0..nh {
                let sl = head * hd..(head + 1) * hd;
                let mut max = f64::NEG_INFINITY;
                for (s, sc) in scores.iter_mut().enumerate() {
                    *sc = dot(&q[sl.clone()], &ks[s * d + sl.start..s * d + sl.end]) * scale;
                    max = max.max(*sc);
                }
                let mut sum = 0.0;
                for sc in scores.iter_mut() {
                    *sc = (*sc - max).exp();
                    sum += *sc;
                }
                for (s, sc) in scores.iter().enumerate() {
                    axpy(&mut ctx[sl.clone()], sc / sum, &vs[s * d + sl.start..s * d + sl.end]);
                }
            }
            let o = linear_row(&ctx, &lp.wo, None);
            for (hv, ov) in h.iter_mut().zip(&o) {
                *hv += ov;
            }
            let m = ln_row(&h, &lp.ln2_g, &lp.ln2_b);
            let act: Vec<f64> = linear_row(&m, &lp.w1, Some(&lp.b1)).into_iter().map(gelu).collect();
            let out = linear_row(&act, &lp.w2, Some(&lp.b2));
            for (hv, ov) in h.iter_mut().zip(&out) {
                *hv += ov;
            }
        }
        cache.len += 1;
        ln_row(&h, &self.params.lnf_g, &self.params.lnf_b)
    }

    fn head(&self, z: &[f64]) -> Vec<f64> {
        (0..self.vocab.len())
            .map(|w| dot(z, self.params.tok_emb.row(w)) + self.params.head_bias.data()[w])
            .collect()
    }

    /// Decode an answer for the prompt of `ex` (its `answer` is ignored),
    /// reusing cached keys and values across steps.
    pub fn generate(&self, ex: &Example, mode: DecodeMode, max_new: usize) -> Result<Generation, PlannerError> {
        let prompt_only = Example {
            answer: Vec::new(),
            ..ex.clone()
        };
        let items = self.items(&prompt_only, false)?;
        self.check_len(items.len())?;
        let cap = max_new.min(self.config.context - items.len());
        let mut cache = KvCache {
            k: vec![Vec::new(); self.config.layers],
            v: vec![Vec::new(); self.config.layers],
            len: 0,
        };
        let mut z = Vec::new();
        for (t, item) in items.iter().enumerate() {
            let (x, _) = self.embed_item(item, t);
            z = self.step(&mut cache, x);
        }
        let mut rng = match mode {
            DecodeMode::Sample { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
            DecodeMode::Greedy => None,
        };
        let mut ids = Vec::new();
        let mut truncated = true;
        for _ in 0..cap {
            let logits = self.head(&z);
            if logits.iter().any(|l| !l.is_finite()) {
                return Err(PlannerError::Numeric("non-finite logits during decoding".into()));
            }
            let next = match (mode, rng.as_mut()) {
                (DecodeMode::Sample { temperature, .. }, Some(rng)) if temperature > 0.0 => {
                    sample(&logits, temperature, rng)
                }
                _ => argmax(&logits),
            };
            if next == EOS {
                truncated = false;
                break;
            }
            ids.push(next);
            if cache.len >= self.config.context {
                break;
            }
            let t = cache.len;
            let (x, _) = self.embed_item(&Item::Text(next), t);
            z = self.step(&mut cache, x);
        }
        let text = self.vocab.decode_answer(&ids);
        Ok(Generation {
            ids,
            text,
            truncated,
        })
    }

    /// Logits for the token following the whole stream of `ex`, via the
    /// incremental path.
    pub fn next_token_logits(&self, ex: &Example) -> Result<Vec<f64>, PlannerError> {
        let items = self.items(ex, true)?;
        self.check_len(items.len())?;
        let mut cache = KvCache {
            k: vec![Vec::new(); self.config.layers],
            v: vec![Vec::new(); self.config.layers],
            len: 0,
        };
        let mut z = Vec::new();
        for (t, item) in items.iter().enumerate() {
            let (x, _) = self.embed_item(item, t);
            z = self.step(&mut cache, x);
        }
        Ok(self.head(&z))
    }
}

fn argmax(v: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best as u32
}

fn sample(logits: &[f64], temperature: f64, rng: &mut ChaCha8Rng) -> u32 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|l| ((l - max) / temperature).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (i, wi) in w.iter().enumerate() {
        r -= wi;
        if r <= 0.0 {
            return i as u32;
        }
    }
    (w.len() - 1) as u32
}

/// Per-tensor comparison of analytic and central-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)`, or 0 when both vanish.
    pub rel_error: f64,
}

/// Finite-difference check of every trainable tensor with step `h`.
pub fn gradient_check(model: &Model, ex: &Example, h: f64) -> Result<Vec<GradCheck>, PlannerError> {
    let (_, grads) = model.loss_and_grad(ex)?;
    let analytic: Vec<(String, Vec<f64>)> = grads
        .named()
        .into_iter()
        .map(|(n, m)| (n, m.data().to_vec()))
        .collect();
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(analytic.len());
    for (ti, (name, ga)) in analytic.iter().enumerate() {
        let mut numeric = vec![0.0; ga.len()];
        for (j, gn) in numeric.iter_mut().enumerate() {
            let orig = model.params.named()[ti].1.data()[j];
            set_param(&mut probe, ti, j, orig + h);
            let up = probe.loss(ex)?;
            set_param(&mut probe, ti, j, orig - h);
            let down = probe.loss(ex)?;
            set_param(&mut probe, ti, j, orig);
            *gn = (up - down) / (2.0 * h);
        }
        let na = ga.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = ga
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let denom = na.max(nn);
        out.push(GradCheck {
            name: name.clone(),
            analytic_norm: na,
            numeric_norm: nn,
            rel_error: if denom == 0.0 { 0.0 } else { diff / denom },
        });
    }
    Ok(out)
}

fn set_param(model: &mut Model, tensor: usize, index: usize, value: f64) {
    model.params.named_mut()[tensor].1.data_mut()[index] = value;
}
