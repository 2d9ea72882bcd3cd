//! View construction for positive pairs.
//!
//! Each branch of a pair is built by one explicit mode applied to the anchor
//! string. Implicit dropout is only recorded here; the encoder acts on it.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{mix64, rng_from, TAG_BRANCH_I, TAG_BRANCH_J};
use crate::smiles::{enumerate_random, parse, tokenize, SmilesError, Special, Token, TokenSequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplicitMode {
    Original,
    Enumeration,
    Masking,
    Drop,
}

impl ExplicitMode {
    pub const ALL: [ExplicitMode; 4] =
        [ExplicitMode::Original, ExplicitMode::Enumeration, ExplicitMode::Masking, ExplicitMode::Drop];

    pub fn name(self) -> &'static str {
        match self {
            ExplicitMode::Original => "original",
            ExplicitMode::Enumeration => "enumeration",
            ExplicitMode::Masking => "masking",
            ExplicitMode::Drop => "drop",
        }
    }
}

pub const DEFAULT_RATIO: f64 = 0.10;

/// How the two views of every anchor are produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationSpec {
    pub branch_i: ExplicitMode,
    pub branch_j: ExplicitMode,
    #[serde(rename = "implicit")]
    pub implicit_dropout: bool,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
}

fn default_ratio() -> f64 {
    DEFAULT_RATIO
}

impl Default for AugmentationSpec {
    /// Enumeration against Masking with implicit dropout.
    fn default() -> Self {
        AugmentationSpec {
            branch_i: ExplicitMode::Enumeration,
            branch_j: ExplicitMode::Masking,
            implicit_dropout: true,
            ratio: DEFAULT_RATIO,
        }
    }
}

impl AugmentationSpec {
    /// Identical views, no dropout.
    pub fn baseline() -> Self {
        AugmentationSpec {
            branch_i: ExplicitMode::Original,
            branch_j: ExplicitMode::Original,
            implicit_dropout: false,
            ratio: DEFAULT_RATIO,
        }
    }

    pub fn new(branch_i: ExplicitMode, branch_j: ExplicitMode, implicit_dropout: bool) -> Self {
        AugmentationSpec { branch_i, branch_j, implicit_dropout, ratio: DEFAULT_RATIO }
    }

    pub fn is_baseline(&self) -> bool {
        self.branch_i == ExplicitMode::Original && self.branch_j == ExplicitMode::Original && !self.implicit_dropout
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        check_ratio(self.ratio)
    }

    /// Short stable name, e.g. `enumeration-masking+implicit`.
    pub fn tag(&self) -> String {
        let mut s = format!("{}-{}", self.branch_i.name(), self.branch_j.name());
        if self.implicit_dropout {
            s.push_str("+implicit");
        }
        s
    }
}

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("augmentation ratio {0} is outside [0, 1)")]
    InvalidRatio(f64),
    #[error("dropping {dropped} of {len} tokens leaves an empty sequence")]
    EmptyResult { len: usize, dropped: usize },
    #[error("cannot augment an empty token sequence")]
    EmptyInput,
    #[error("input already contains special token at position {0}")]
    SpecialToken(usize),
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error("anchor {index}: {source}")]
    Anchor {
        index: usize,
        #[source]
        source: Box<AugmentError>,
    },
}

fn check_ratio(ratio: f64) -> Result<(), AugmentError> {
    if (0.0..1.0).contains(&ratio) {
        Ok(())
    } else {
        Err(AugmentError::InvalidRatio(ratio))
    }
}

/// Number of positions touched: `ratio * len` rounded half up.
pub fn replace_count(ratio: f64, len: usize) -> usize {
    (ratio * len as f64 + 0.5).floor() as usize
}

fn check_input(seq: &TokenSequence, ratio: f64) -> Result<(), AugmentError> {
    check_ratio(ratio)?;
    if seq.is_empty() {
        return Err(AugmentError::EmptyInput);
    }
    if let Some(p) = seq.tokens().iter().position(Token::is_special) {
        return Err(AugmentError::SpecialToken(p));
    }
    Ok(())
}

/// Replaces `replace_count(ratio, len)` uniformly chosen positions with `[MASK]`.
pub fn mask_tokens(seq: &TokenSequence, ratio: f64, seed: u64) -> Result<TokenSequence, AugmentError> {
    check_input(seq, ratio)?;
    let k = replace_count(ratio, seq.len());
    let mut out = seq.clone();
    for i in sample(&mut rng_from(seed), seq.len(), k) {
        out.0[i] = Token::Special(Special::Mask);
    }
    Ok(out)
}

/// Deletes `replace_count(ratio, len)` uniformly chosen positions, keeping order.
pub fn drop_tokens(seq: &TokenSequence, ratio: f64, seed: u64) -> Result<TokenSequence, AugmentError> {
    check_input(seq, ratio)?;
    let k = replace_count(ratio, seq.len());
    if k == seq.len() {
        return Err(AugmentError::EmptyResult { len: seq.len(), dropped: k });
    }
    let mut keep = vec![true; seq.len()];
    for i in sample(&mut rng_from(seed), seq.len(), k) {
        keep[i] = false;
    }
    let tokens = seq.tokens().iter().zip(&keep).filter(|(_, &k)| k).map(|(t, _)| t.clone()).collect();
    Ok(TokenSequence(tokens))
}

/// Builds one view of `anchor`.
pub fn make_view(anchor: &str, mode: ExplicitMode, ratio: f64, seed: u64) -> Result<TokenSequence, AugmentError> {
    check_ratio(ratio)?;
    match mode {
        ExplicitMode::Original => Ok(tokenize(anchor)?),
        ExplicitMode::Enumeration => {
            let g = parse(anchor)?;
            Ok(tokenize(&enumerate_random(&g, seed))?)
        }
        ExplicitMode::Masking => mask_tokens(&tokenize(anchor)?, ratio, seed),
        ExplicitMode::Drop => drop_tokens(&tokenize(anchor)?, ratio, seed),
    }
}

/// Two views of one anchor and the seeds that produced them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositivePair {
    pub anchor_id: usize,
    pub view_i: TokenSequence,
    pub view_j: TokenSequence,
    pub seeds: (u64, u64),
}

impl PositivePair {
    /// Rebuilds a pair from its recorded seeds.
    pub fn rebuild(anchor_id: usize, anchor: &str, spec: &AugmentationSpec, seeds: (u64, u64)) -> Result<Self, AugmentError> {
        Ok(PositivePair {
            anchor_id,
            view_i: make_view(anchor, spec.branch_i, spec.ratio, seeds.0)?,
            view_j: make_view(anchor, spec.branch_j, spec.ratio, seeds.1)?,
            seeds,
        })
    }
}

/// Seeds for anchor `index` of a batch.
pub fn pair_seeds(batch_seed: u64, index: usize) -> (u64, u64) {
    (mix64(batch_seed, index as u64, TAG_BRANCH_I), mix64(batch_seed, index as u64, TAG_BRANCH_J))
}

/// One positive pair per anchor, in input order. `anchor_id` is the position
/// in `anchors`.
pub fn make_pair_batch<S: AsRef<str> + Sync>(
    anchors: &[S],
    spec: &AugmentationSpec,
    batch_seed: u64,
) -> Result<Vec<PositivePair>, AugmentError> {
    spec.validate()?;
    anchors
        .par_iter()
        .enumerate()
        .map(|(index, anchor)| {
            PositivePair::rebuild(index, anchor.as_ref(), spec, pair_seeds(batch_seed, index))
                .map_err(|e| AugmentError::Anchor { index, source: Box::new(e) })
        })
        .collect()
}
