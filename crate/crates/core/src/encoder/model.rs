//! Forward and backward passes.
//!
//! Sequences are processed one at a time at their true length, so no padded
//! position ever enters attention. Block layout (pre-norm):
//!
//! ```text
//! x0 = drop(E_tok[ids] + E_pos[0..T])
//! x  = x + drop(MHA(LN1(x)))        attention probabilities also dropped
//! x  = x + drop(GELU(LN2(x) W1 + b1) W2 + b2)
//! out = LNf(x)
//! ```
//!
//! Dropout masks are inverted (kept entries scaled by `1 / (1 - p)`) and
//! drawn from one generator per sequence in a fixed order.

use ndarray::{s, Array1, Array2, ArrayView1, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ProjectorActivation;
use super::params::{EncoderParams, LayerParams};
use super::EncoderError;
use crate::seed::{mix64, rng_from, TAG_DROPOUT};
use crate::smiles::{Special, TokenSequence, Vocabulary};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

/// Active dropout for one sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    pub ratio: f64,
    pub seed: u64,
}

struct MaskSource {
    rng: Option<ChaCha8Rng>,
    ratio: f64,
}

impl MaskSource {
    fn new(dropout: Option<Dropout>) -> Self {
        match dropout {
            Some(d) if d.ratio > 0.0 => MaskSource { rng: Some(rng_from(d.seed)), ratio: d.ratio },
            _ => MaskSource { rng: None, ratio: 0.0 },
        }
    }

    fn draw(&mut self, rows: usize, cols: usize) -> Option<Array2<f64>> {
        let rng = self.rng.as_mut()?;
        let keep = 1.0 / (1.0 - self.ratio);
        let p = self.ratio;
        Some(Array2::from_shape_simple_fn((rows, cols), || if rng.gen::<f64>() < p { 0.0 } else { keep }))
    }
}

fn apply(x: &mut Array2<f64>, mask: &Option<Array2<f64>>) {
    if let Some(m) = mask {
        *x *= m;
    }
}

struct LnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

fn ln_forward(x: &Array2<f64>, g: &Array2<f64>, b: &Array2<f64>) -> (Array2<f64>, LnCache) {
    let d = x.ncols() as f64;
    let mean = x.sum_axis(Axis(1)) / d;
    let centered = x - &mean.view().insert_axis(Axis(1));
    let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / d;
    let inv_std = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    let xhat = centered * &inv_std.view().insert_axis(Axis(1));
    let y = &xhat * g + b;
    (y, LnCache { xhat, inv_std })
}

fn ln_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    g: &Array2<f64>,
    dg: &mut Array2<f64>,
    db: &mut Array2<f64>,
) -> Array2<f64> {
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dxhat = dy * g;
    let d = dy.ncols() as f64;
    let mean_dxhat = dxhat.sum_axis(Axis(1)) / d;
    let mean_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(1)) / d;
    let mut dx = dxhat - &mean_dxhat.insert_axis(Axis(1));
    dx -= &(&cache.xhat * &mean_dxhat_xhat.insert_axis(Axis(1)));
    dx * &cache.inv_std.view().insert_axis(Axis(1))
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn softmax_rows(s: &mut Array2<f64>) {
    for mut row in s.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let z = row.sum();
        row /= z;
    }
}

fn add_row_sum(acc: &mut Array2<f64>, d: &Array2<f64>) {
    *acc += &d.sum_axis(Axis(0)).insert_axis(Axis(0));
}

struct LayerCache {
    ln1: LnCache,
    a: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    prob_masks: Vec<Option<Array2<f64>>>,
    o: Array2<f64>,
    attn_mask: Option<Array2<f64>>,
    ln2: LnCache,
    b: Array2<f64>,
    u: Array2<f64>,
    f: Array2<f64>,
    ffn_mask: Option<Array2<f64>>,
}

/// Activations kept from a forward pass for [`backward_ids`].
pub struct SeqCache {
    ids: Vec<u32>,
    emb_mask: Option<Array2<f64>>,
    layers: Vec<LayerCache>,
    lnf: LnCache,
}

fn check_ids(params: &EncoderParams, ids: &[u32]) -> Result<(), EncoderError> {
    let cfg = &params.config;
    if ids.is_empty() {
        return Err(EncoderError::EmptySequence);
    }
    if ids.len() > cfg.max_len {
        return Err(EncoderError::SequenceTooLong { len: ids.len(), max_len: cfg.max_len });
    }
    if let Some(&id) = ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(EncoderError::UnknownTokenId { id, vocab_size: cfg.vocab_size });
    }
    Ok(())
}

fn layer_forward(l: &LayerParams, x: &mut Array2<f64>, n_heads: usize, masks: &mut MaskSource) -> LayerCache {
    let t = x.nrows();
    let d = x.ncols();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let (a, ln1) = ln_forward(x, &l.ln1_g, &l.ln1_b);
    let q = a.dot(&l.wq) + &l.bq;
    let k = a.dot(&l.wk) + &l.bk;
    let v = a.dot(&l.wv) + &l.bv;
    let mut o = Array2::zeros((t, d));
    let mut probs = Vec::with_capacity(n_heads);
    let mut prob_masks = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut p = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        softmax_rows(&mut p);
        let m = masks.draw(t, t);
        let oh = match &m {
            Some(m) => (&p * m).dot(&v.slice(cols)),
            None => p.dot(&v.slice(cols)),
        };
        o.slice_mut(cols).assign(&oh);
        probs.push(p);
        prob_masks.push(m);
    }
    let mut attn = o.dot(&l.wo) + &l.bo;
    let attn_mask = masks.draw(t, d);
    apply(&mut attn, &attn_mask);
    *x += &attn;

    let (b, ln2) = ln_forward(x, &l.ln2_g, &l.ln2_b);
    let u = b.dot(&l.w1) + &l.b1;
    let f = u.mapv(gelu);
    let mut g = f.dot(&l.w2) + &l.b2;
    let ffn_mask = masks.draw(t, d);
    apply(&mut g, &ffn_mask);
    *x += &g;

    LayerCache { ln1, a, q, k, v, probs, prob_masks, o, attn_mask, ln2, b, u, f, ffn_mask }
}

fn layer_backward(l: &LayerParams, c: &LayerCache, dx: &mut Array2<f64>, gl: &mut LayerParams, n_heads: usize) {
    let d = dx.ncols();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();

    // Feed-forward branch.
    let mut dg = dx.clone();
    apply(&mut dg, &c.ffn_mask);
    gl.w2 += &c.f.t().dot(&dg);
    add_row_sum(&mut gl.b2, &dg);
    let mut du = dg.dot(&l.w2.t());
    Zip::from(&mut du).and(&c.u).for_each(|g, &u| *g *= gelu_grad(u));
    gl.w1 += &c.b.t().dot(&du);
    add_row_sum(&mut gl.b1, &du);
    let db = du.dot(&l.w1.t());
    *dx += &ln_backward(&db, &c.ln2, &l.ln2_g, &mut gl.ln2_g, &mut gl.ln2_b);

    // Attention branch.
    let mut dattn = dx.clone();
    apply(&mut dattn, &c.attn_mask);
    gl.wo += &c.o.t().dot(&dattn);
    add_row_sum(&mut gl.bo, &dattn);
    let d_o = dattn.dot(&l.wo.t());
    let mut dq = Array2::zeros(c.q.raw_dim());
    let mut dk = Array2::zeros(c.k.raw_dim());
    let mut dv = Array2::zeros(c.v.raw_dim());
    for h in 0..n_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let p = &c.probs[h];
        let doh = d_o.slice(cols);
        let (dp, pd) = match &c.prob_masks[h] {
            Some(m) => (doh.dot(&c.v.slice(cols).t()) * m, p * m),
            None => (doh.dot(&c.v.slice(cols).t()), p.clone()),
        };
        dv.slice_mut(cols).assign(&pd.t().dot(&doh));
        let row_dot = (&dp * p).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ds = (dp - &row_dot) * p * scale;
        dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
    }
    let at = c.a.t();
    gl.wq += &at.dot(&dq);
    gl.wk += &at.dot(&dk);
    gl.wv += &at.dot(&dv);
    add_row_sum(&mut gl.bq, &dq);
    add_row_sum(&mut gl.bk, &dk);
    add_row_sum(&mut gl.bv, &dv);
    let da = dq.dot(&l.wq.t()) + dk.dot(&l.wk.t()) + dv.dot(&l.wv.t());
    *dx += &ln_backward(&da, &c.ln1, &l.ln1_g, &mut gl.ln1_g, &mut gl.ln1_b);
}

/// Contextual embeddings `(T, d_model)` for one id sequence, plus the
/// activations needed for backpropagation.
pub fn forward_ids(
    params: &EncoderParams,
    ids: &[u32],
    dropout: Option<Dropout>,
) -> Result<(Array2<f64>, SeqCache), EncoderError> {
    check_ids(params, ids)?;
    let cfg = &params.config;
    let t = ids.len();
    let idx: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
    let mut masks = MaskSource::new(dropout);

    let mut x = params.tok_emb.select(Axis(0), &idx) + &params.pos_emb.slice(s![..t, ..]);
    let emb_mask = masks.draw(t, cfg.d_model);
    apply(&mut x, &emb_mask);
    let layers = params.layers.iter().map(|l| layer_forward(l, &mut x, cfg.n_heads, &mut masks)).collect();
    let (out, lnf) = ln_forward(&x, &params.lnf_g, &params.lnf_b);
    Ok((out, SeqCache { ids: ids.to_vec(), emb_mask, layers, lnf }))
}

/// Accumulates into `grads` the gradient of a scalar whose derivative with
/// respect to the contextual output is `dout`.
pub fn backward_ids(params: &EncoderParams, cache: &SeqCache, dout: &Array2<f64>, grads: &mut EncoderParams) {
    let n_heads = params.config.n_heads;
    let mut dx = ln_backward(dout, &cache.lnf, &params.lnf_g, &mut grads.lnf_g, &mut grads.lnf_b);
    for (i, (l, c)) in params.layers.iter().zip(&cache.layers).enumerate().rev() {
        layer_backward(l, c, &mut dx, &mut grads.layers[i], n_heads);
    }
    apply(&mut dx, &cache.emb_mask);
    for (t, &id) in cache.ids.iter().enumerate() {
        let row = dx.row(t);
        let mut tok = grads.tok_emb.row_mut(id as usize);
        tok += &row;
        let mut pos = grads.pos_emb.row_mut(t);
        pos += &row;
    }
}

/// Contextual embeddings without keeping activations.
pub fn contextual(params: &EncoderParams, ids: &[u32], dropout: Option<Dropout>) -> Result<Array2<f64>, EncoderError> {
    forward_ids(params, ids, dropout).map(|(out, _)| out)
}

/// `[CLS] tokens [SEP]` as vocabulary ids.
pub fn prepare_ids(seq: &TokenSequence, vocab: &Vocabulary, max_len: usize) -> Result<Vec<u32>, EncoderError> {
    let len = seq.len() + 2;
    if len > max_len {
        return Err(EncoderError::SequenceTooLong { len, max_len });
    }
    let mut ids = Vec::with_capacity(len);
    ids.push(Special::Cls.id());
    ids.extend(vocab.ids(seq));
    ids.push(Special::Sep.id());
    Ok(ids)
}

/// Id sequences padded to a common width with `[PAD]`. Only the first
/// `lengths[i]` entries of row `i` are read.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedBatch {
    pub ids: Array2<u32>,
    pub lengths: Vec<usize>,
}

impl PaddedBatch {
    pub fn from_sequences(seqs: &[Vec<u32>]) -> Self {
        let width = seqs.iter().map(Vec::len).max().unwrap_or(0);
        let mut ids = Array2::from_elem((seqs.len(), width), Special::Pad.id());
        for (i, s) in seqs.iter().enumerate() {
            for (j, &id) in s.iter().enumerate() {
                ids[[i, j]] = id;
            }
        }
        PaddedBatch { ids, lengths: seqs.iter().map(Vec::len).collect() }
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn sequence(&self, i: usize) -> Vec<u32> {
        self.ids.row(i).iter().take(self.lengths[i]).copied().collect()
    }
}

/// Dropout for sequence `index` of a batch encoded with `seed`.
pub fn sequence_dropout(params: &EncoderParams, active: bool, seed: u64, index: usize) -> Option<Dropout> {
    active.then(|| Dropout { ratio: params.config.dropout_ratio, seed: mix64(seed, index as u64, TAG_DROPOUT) })
}

/// Contextual embeddings for every sequence of the batch, in order.
pub fn encode(
    batch: &PaddedBatch,
    params: &EncoderParams,
    dropout_active: bool,
    seed: u64,
) -> Result<Vec<Array2<f64>>, EncoderError> {
    (0..batch.len())
        .into_par_iter()
        .map(|i| contextual(params, &batch.sequence(i), sequence_dropout(params, dropout_active, seed, i)))
        .collect()
}

/// The `[CLS]` row.
pub fn pool_cls(contextual: &Array2<f64>) -> Array1<f64> {
    contextual.row(0).to_owned()
}

/// Pooled `h` rows for id sequences, dropout off.
pub fn embed_ids(params: &EncoderParams, seqs: &[Vec<u32>]) -> Result<Array2<f64>, EncoderError> {
    let rows: Vec<Array1<f64>> =
        seqs.par_iter().map(|ids| contextual(params, ids, None).map(|c| pool_cls(&c))).collect::<Result<_, _>>()?;
    let mut h = Array2::zeros((rows.len(), params.config.d_model));
    for (mut dst, src) in h.rows_mut().into_iter().zip(&rows) {
        dst.assign(src);
    }
    Ok(h)
}

/// Projector activations kept for [`project_backward`].
pub struct ProjCache {
    h: Array2<f64>,
    pre: Array2<f64>,
    act: Array2<f64>,
}

fn activate(kind: ProjectorActivation, pre: &Array2<f64>) -> Array2<f64> {
    match kind {
        ProjectorActivation::Relu => pre.mapv(|v| v.max(0.0)),
        ProjectorActivation::Identity => pre.clone(),
    }
}

/// `z = act(h W1 + b1) W2 + b2` applied row-wise.
pub fn project_rows(params: &EncoderParams, h: &Array2<f64>) -> (Array2<f64>, ProjCache) {
    let pre = h.dot(&params.proj_w1) + &params.proj_b1;
    let act = activate(params.config.projector_activation, &pre);
    let z = act.dot(&params.proj_w2) + &params.proj_b2;
    (z, ProjCache { h: h.clone(), pre, act })
}

/// Returns `dL/dh` and accumulates projector gradients.
pub fn project_backward(params: &EncoderParams, cache: &ProjCache, dz: &Array2<f64>, grads: &mut EncoderParams) -> Array2<f64> {
    grads.proj_w2 += &cache.act.t().dot(dz);
    add_row_sum(&mut grads.proj_b2, dz);
    let mut dpre = dz.dot(&params.proj_w2.t());
    if params.config.projector_activation == ProjectorActivation::Relu {
        Zip::from(&mut dpre).and(&cache.pre).for_each(|g, &p| {
            if p <= 0.0 {
                *g = 0.0
            }
        });
    }
    grads.proj_w1 += &cache.h.t().dot(&dpre);
    add_row_sum(&mut grads.proj_b1, &dpre);
    dpre.dot(&params.proj_w1.t())
}

/// Projects a single pooled vector.
pub fn project(h: ArrayView1<f64>, params: &EncoderParams) -> Array1<f64> {
    let (z, _) = project_rows(params, &h.to_owned().insert_axis(Axis(0)));
    z.row(0).to_owned()
}
