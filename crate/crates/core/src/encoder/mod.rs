//! Compact pre-norm transformer encoder `f` and two-layer projector `g`.

mod checkpoint;
mod config;
mod model;
mod params;

use ndarray::{Array1, Array2};
use thiserror::Error;

pub use checkpoint::{fingerprint, from_bytes, load, save, to_bytes, CheckpointError};
pub use config::{EncoderConfig, ProjectorActivation};
pub use model::{
    backward_ids, contextual, embed_ids, encode, forward_ids, pool_cls, prepare_ids, project, project_backward,
    project_rows, sequence_dropout, Dropout, PaddedBatch, ProjCache, SeqCache,
};
pub use params::{EncoderParams, LayerParams};

use crate::augment::{AugmentationSpec, PositivePair};
use crate::seed::{mix64, TAG_DROPOUT};
use crate::smiles::Vocabulary;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error("sequence of {len} ids exceeds max_len {max_len}")]
    SequenceTooLong { len: usize, max_len: usize },
    #[error("token id {id} is outside the vocabulary of {vocab_size}")]
    UnknownTokenId { id: u32, vocab_size: usize },
    #[error("empty id sequence")]
    EmptySequence,
}

/// Which view a row of an [`EmbeddingBatch`] came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    I,
    J,
    /// The unaugmented anchor.
    Anchor,
}

/// Pooled `h` and projected `z` rows with their sources.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingBatch {
    pub h: Array2<f64>,
    pub z: Array2<f64>,
    pub provenance: Vec<(usize, Branch)>,
}

/// `h_i, h_j, z_i, z_j` for one positive pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairEmbedding {
    pub h_i: Array1<f64>,
    pub h_j: Array1<f64>,
    pub z_i: Array1<f64>,
    pub z_j: Array1<f64>,
}

/// Dropout for one branch of a pair: seeded from that branch's view seed.
pub fn branch_dropout(params: &EncoderParams, spec: &AugmentationSpec, view_seed: u64) -> Option<Dropout> {
    spec.implicit_dropout
        .then(|| Dropout { ratio: params.config.dropout_ratio, seed: mix64(view_seed, 0, TAG_DROPOUT) })
}

/// Both branches of `pair` through encoder and projector. Dropout is active
/// iff `spec.implicit_dropout`, with independent seeds per branch.
pub fn forward_pair(
    pair: &PositivePair,
    params: &EncoderParams,
    vocab: &Vocabulary,
    spec: &AugmentationSpec,
) -> Result<PairEmbedding, EncoderError> {
    let max_len = params.config.max_len;
    let ids_i = prepare_ids(&pair.view_i, vocab, max_len)?;
    let ids_j = prepare_ids(&pair.view_j, vocab, max_len)?;
    let h_i = pool_cls(&contextual(params, &ids_i, branch_dropout(params, spec, pair.seeds.0))?);
    let h_j = pool_cls(&contextual(params, &ids_j, branch_dropout(params, spec, pair.seeds.1))?);
    let z_i = project(h_i.view(), params);
    let z_j = project(h_j.view(), params);
    Ok(PairEmbedding { h_i, h_j, z_i, z_j })
}

impl EmbeddingBatch {
    /// Rows `[i-views; j-views]` for a list of pairs.
    pub fn from_pairs(
        pairs: &[PositivePair],
        params: &EncoderParams,
        vocab: &Vocabulary,
        spec: &AugmentationSpec,
    ) -> Result<Self, EncoderError> {
        use rayon::prelude::*;
        let n = pairs.len();
        let outs: Vec<PairEmbedding> =
            pairs.par_iter().map(|p| forward_pair(p, params, vocab, spec)).collect::<Result<_, _>>()?;
        let d = params.config.d_model;
        let p = params.config.projector_out;
        let mut h = Array2::zeros((2 * n, d));
        let mut z = Array2::zeros((2 * n, p));
        let mut provenance = Vec::with_capacity(2 * n);
        for (k, o) in outs.iter().enumerate() {
            h.row_mut(k).assign(&o.h_i);
            h.row_mut(n + k).assign(&o.h_j);
            z.row_mut(k).assign(&o.z_i);
            z.row_mut(n + k).assign(&o.z_j);
        }
        provenance.extend(pairs.iter().map(|p| (p.anchor_id, Branch::I)));
        provenance.extend(pairs.iter().map(|p| (p.anchor_id, Branch::J)));
        Ok(EmbeddingBatch { h, z, provenance })
    }

    pub fn all_finite(&self) -> bool {
        self.h.iter().chain(self.z.iter()).all(|v| v.is_finite())
    }
}
