use thiserror::Error;

/// Failures raised while reading polymer-SMILES text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    Empty,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("attachment point at byte {offset} must have exactly one neighbor, found {degree}")]
    AttachmentDegree { offset: usize, degree: usize },
    #[error("valence error at byte {offset}: {symbol} has valence {valence}")]
    Valence { offset: usize, symbol: String, valence: u32 },
}

impl SmilesError {
    pub(crate) fn syntax(offset: usize, message: impl Into<String>) -> Self {
        SmilesError::Syntax { offset, message: message.into() }
    }

    /// Byte offset of the failure, when one applies.
    pub fn offset(&self) -> Option<usize> {
        match self {
            SmilesError::Empty => None,
            SmilesError::Syntax { offset, .. }
            | SmilesError::AttachmentDegree { offset, .. }
            | SmilesError::Valence { offset, .. } => Some(*offset),
        }
    }
}
