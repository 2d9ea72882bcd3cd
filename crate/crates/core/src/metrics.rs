//! Alignment and uniformity of embedding sets.
//!
//! Rows are L2-normalized before either metric. Sums run in index order so
//! results are bit-reproducible.

use ndarray::{Array2, ArrayView1, Axis};
use thiserror::Error;

use crate::augment::{make_view, AugmentError, ExplicitMode};
use crate::encoder::{embed_ids, prepare_ids, EncoderError, EncoderParams};
use crate::seed::{mix64, TAG_EVAL};
use crate::smiles::Vocabulary;

const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("vector norm below {MIN_NORM}")]
    ZeroVector,
    #[error("no pairs to evaluate")]
    EmptySet,
    #[error("uniformity needs at least two embeddings, got {0}")]
    TooFewPoints(usize),
    #[error("embedding dimensions differ")]
    DimensionMismatch,
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
}

pub fn cosine_similarity(u: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<f64, MetricError> {
    if u.len() != v.len() {
        return Err(MetricError::DimensionMismatch);
    }
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu < MIN_NORM || nv < MIN_NORM {
        return Err(MetricError::ZeroVector);
    }
    Ok((u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Rows scaled to unit length.
pub fn normalize_rows(x: &Array2<f64>) -> Result<Array2<f64>, MetricError> {
    let norms = x.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    if norms.iter().any(|&n| !(n >= MIN_NORM)) {
        return Err(MetricError::ZeroVector);
    }
    Ok(x / &norms.insert_axis(Axis(1)))
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean squared distance between normalized rows `a[k]` and `b[k]`.
pub fn alignment_loss(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64, MetricError> {
    if a.dim() != b.dim() {
        return Err(MetricError::DimensionMismatch);
    }
    if a.nrows() == 0 {
        return Err(MetricError::EmptySet);
    }
    let (a, b) = (normalize_rows(a)?, normalize_rows(b)?);
    let total: f64 = a.rows().into_iter().zip(b.rows()).map(|(x, y)| sq_dist(x, y)).sum();
    Ok(total / a.nrows() as f64)
}

/// `log mean_{i<j} exp(-2 |x_i - x_j|^2)` over normalized rows.
pub fn uniformity_loss(x: &Array2<f64>) -> Result<f64, MetricError> {
    let n = x.nrows();
    if n < 2 {
        return Err(MetricError::TooFewPoints(n));
    }
    let x = normalize_rows(x)?;
    // Shifted log-sum-exp; the shift is the largest exponent.
    let mut exps = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            exps.push(-2.0 * sq_dist(x.row(i), x.row(j)));
        }
    }
    let m = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = exps.iter().map(|e| (e - m).exp()).sum();
    Ok(m + (s / exps.len() as f64).ln())
}

/// Ids of `anchor` and of one enumerated variant.
fn eval_ids(
    anchor: &str,
    index: usize,
    seed: u64,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<(Vec<u32>, Vec<u32>), MetricError> {
    let orig = make_view(anchor, ExplicitMode::Original, 0.0, 0)?;
    let enumd = make_view(anchor, ExplicitMode::Enumeration, 0.0, mix64(seed, index as u64, TAG_EVAL))?;
    Ok((prepare_ids(&orig, vocab, max_len)?, prepare_ids(&enumd, vocab, max_len)?))
}

/// Alignment over (polymer, one enumeration) pairs and uniformity over the
/// polymers themselves, on pooled `h` with dropout off.
pub fn evaluate_representation<S: AsRef<str>>(
    corpus: &[S],
    params: &EncoderParams,
    vocab: &Vocabulary,
    seed: u64,
) -> Result<(f64, f64), MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let max_len = params.config.max_len;
    let mut orig = Vec::with_capacity(corpus.len());
    let mut enumd = Vec::with_capacity(corpus.len());
    for (k, s) in corpus.iter().enumerate() {
        let (a, b) = eval_ids(s.as_ref(), k, seed, vocab, max_len)?;
        orig.push(a);
        enumd.push(b);
    }
    let h = embed_ids(params, &orig)?;
    let h_pos = embed_ids(params, &enumd)?;
    let uniformity = uniformity_loss(&h)?;
    Ok((alignment_loss(&h, &h_pos)?, uniformity))
}
