//! Frozen-encoder transfer evaluation: features, regression head, k-fold CV.

mod cv;
mod head;

use ndarray::{Array1, Array2};
use thiserror::Error;

pub use cv::{cross_validate, cross_validate_features, fold_partition, CvReport, MIN_RECORDS};
pub use head::{
    fit_loop, head_loss_and_grad, train_head, EarlyStopping, FoldReport, HeadConfig, HeadParams, LoopSummary,
    TrainedHead,
};

use crate::encoder::{embed_ids, prepare_ids, EncoderError, EncoderParams};
use crate::smiles::{tokenize, SmilesError, Vocabulary};

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("invalid head config: {0}")]
    Config(String),
    #[error("dataset has {n} records; at least {min} are needed")]
    DatasetTooSmall { n: usize, min: usize },
    #[error("target is constant; R^2 is undefined")]
    ConstantTarget,
    #[error("length mismatch between targets and predictions or features")]
    LengthMismatch,
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("row {row}: {source}")]
    Smiles { row: usize, source: SmilesError },
    #[error("row {row}: {source}")]
    Encoder { row: usize, source: EncoderError },
    #[error(transparent)]
    Embed(#[from] EncoderError),
    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: Box<TransferError> },
}

/// Named regression dataset of `(smiles, value)` records.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyDataset {
    pub name: String,
    pub records: Vec<(String, f64)>,
}

impl PropertyDataset {
    pub fn smiles(&self) -> Vec<&str> {
        self.records.iter().map(|(s, _)| s.as_str()).collect()
    }

    pub fn targets(&self) -> Array1<f64> {
        self.records.iter().map(|&(_, v)| v).collect()
    }
}

/// `[CLS]`-pooled `h` per input with dropout off. Parameters are only read.
pub fn extract_features<S: AsRef<str>>(
    smiles: &[S],
    params: &EncoderParams,
    vocab: &Vocabulary,
) -> Result<Array2<f64>, TransferError> {
    let ids = smiles
        .iter()
        .enumerate()
        .map(|(row, s)| {
            let seq = tokenize(s.as_ref()).map_err(|source| TransferError::Smiles { row, source })?;
            prepare_ids(&seq, vocab, params.config.max_len).map_err(|source| TransferError::Encoder { row, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(embed_ids(params, &ids)?)
}

fn check_lengths(y: &Array1<f64>, yhat: &Array1<f64>) -> Result<(), TransferError> {
    if y.len() != yhat.len() || y.len() < 2 {
        return Err(TransferError::LengthMismatch);
    }
    Ok(())
}

/// Root mean squared error.
pub fn rmse(y: &Array1<f64>, yhat: &Array1<f64>) -> Result<f64, TransferError> {
    check_lengths(y, yhat)?;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// `1 - SS_res / SS_tot`.
pub fn r_squared(y: &Array1<f64>, yhat: &Array1<f64>) -> Result<f64, TransferError> {
    check_lengths(y, yhat)?;
    let mean = y.sum() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(TransferError::ConstantTarget);
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn metric_cases() {
        let y = array![0.0, 1.0, 2.0];
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        assert_eq!(r_squared(&y, &array![1.0, 1.0, 1.0]).unwrap(), 0.0);
        let yhat = array![0.0, 1.0, 1.0];
        assert!((rmse(&y, &yhat).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(r_squared(&y, &yhat).unwrap(), 0.5);
        assert!(matches!(r_squared(&array![2.0, 2.0], &array![1.0, 2.0]), Err(TransferError::ConstantTarget)));
        assert!(matches!(rmse(&y, &array![1.0]), Err(TransferError::LengthMismatch)));
    }
}
