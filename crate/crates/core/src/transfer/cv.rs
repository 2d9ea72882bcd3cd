use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::head::{train_head, FoldReport, HeadConfig};
use super::{extract_features, PropertyDataset, TransferError};
use crate::encoder::EncoderParams;
use crate::seed::{mix64, rng_from, TAG_FOLD, TAG_HEAD};
use crate::smiles::Vocabulary;

/// Smallest dataset accepted by [`cross_validate`].
pub const MIN_RECORDS: usize = 10;

/// Seed-shuffled split of `0..n` into `k` folds; fold `f` is
/// `perm[f*n/k .. (f+1)*n/k]`, so sizes differ by at most one.
pub fn fold_partition(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from(mix64(seed, 0, TAG_FOLD)));
    (0..k).map(|f| perm[f * n / k..(f + 1) * n / k].to_vec()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    pub mean_r2: f64,
    pub mean_rmse: f64,
}

/// k-fold CV of a fresh head per fold on fixed features. Folds run in
/// parallel; each fold's head is seeded by `mix64(seed, fold, HEAD)`.
pub fn cross_validate_features(
    x: &Array2<f64>,
    y: &Array1<f64>,
    cfg: &HeadConfig,
    seed: u64,
) -> Result<CvReport, TransferError> {
    cfg.validate()?;
    let n = y.len();
    if x.nrows() != n {
        return Err(TransferError::LengthMismatch);
    }
    if n < MIN_RECORDS.max(2 * cfg.folds) {
        return Err(TransferError::DatasetTooSmall { n, min: MIN_RECORDS.max(2 * cfg.folds) });
    }
    let folds = fold_partition(n, cfg.folds, seed);
    let reports: Vec<FoldReport> = folds
        .par_iter()
        .enumerate()
        .map(|(f, val)| {
            let mut in_val = vec![false; n];
            val.iter().for_each(|&i| in_val[i] = true);
            let train: Vec<usize> = (0..n).filter(|&i| !in_val[i]).collect();
            let (_, mut report) = train_head(
                &x.select(Axis(0), &train),
                &y.select(Axis(0), &train),
                &x.select(Axis(0), val),
                &y.select(Axis(0), val),
                cfg,
                mix64(seed, f as u64, TAG_HEAD),
            )
            .map_err(|e| TransferError::Fold { fold: f, source: Box::new(e) })?;
            report.fold_index = f;
            Ok(report)
        })
        .collect::<Result<_, TransferError>>()?;
    let k = reports.len() as f64;
    let mean_r2 = reports.iter().map(|r| r.r2).sum::<f64>() / k;
    let mean_rmse = reports.iter().map(|r| r.rmse).sum::<f64>() / k;
    Ok(CvReport { folds: reports, mean_r2, mean_rmse })
}

/// Extracts frozen features for `ds` and cross-validates a head on them.
pub fn cross_validate(
    ds: &PropertyDataset,
    params: &EncoderParams,
    vocab: &Vocabulary,
    cfg: &HeadConfig,
    seed: u64,
) -> Result<CvReport, TransferError> {
    if ds.records.len() < MIN_RECORDS {
        return Err(TransferError::DatasetTooSmall { n: ds.records.len(), min: MIN_RECORDS });
    }
    let x = extract_features(&ds.smiles(), params, vocab)?;
    cross_validate_features(&x, &ds.targets(), cfg, seed)
}
