use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use super::token::{Special, Token, TokenSequence};

const BUILTIN: &str = include_str!("../../data/vocab.txt");

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("vocabulary line {line}: expected reserved token {expected:?}, found {found:?}")]
    Reserved { line: usize, expected: &'static str, found: String },
    #[error("vocabulary line {line}: duplicate token {token:?}")]
    Duplicate { line: usize, token: String },
    #[error("vocabulary line {line}: empty token")]
    EmptyLine { line: usize },
    #[error("reading vocabulary {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Frozen token table: line number is the token id, ids 0-4 are the
/// specials in PAD, CLS, SEP, MASK, UNK order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// The table shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("builtin vocabulary is valid")
    }

    pub fn from_file(path: &Path) -> Result<Self, VocabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| VocabError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, VocabError> {
        let mut tokens = Vec::new();
        let mut index = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                return Err(VocabError::EmptyLine { line: i + 1 });
            }
            if let Some(sp) = Special::ALL.get(i) {
                if line != sp.surface() {
                    return Err(VocabError::Reserved { line: i + 1, expected: sp.surface(), found: line.to_string() });
                }
            }
            if index.insert(line.to_string(), i as u32).is_some() {
                return Err(VocabError::Duplicate { line: i + 1, token: line.to_string() });
            }
            tokens.push(line.to_string());
        }
        if tokens.len() < Special::ALL.len() {
            let line = tokens.len();
            return Err(VocabError::Reserved {
                line: line + 1,
                expected: Special::ALL[line].surface(),
                found: String::new(),
            });
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of a token; unknown surfaces map to `[UNK]`.
    pub fn id(&self, token: &Token) -> u32 {
        match token {
            Token::Special(s) => s.id(),
            t => self.index.get(t.surface()).copied().unwrap_or(Special::Unk.id()),
        }
    }

    pub fn surface(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn ids(&self, seq: &TokenSequence) -> Vec<u32> {
        seq.tokens().iter().map(|t| self.id(t)).collect()
    }

    /// One surface per line, terminated by LF.
    pub fn to_text(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }
}
