use std::fmt;

use super::error::SmilesError;
use super::lexer::{lex, LexKind};

/// Reserved non-chemical tokens.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Special {
    Pad,
    Cls,
    Sep,
    Mask,
    Unk,
}

impl Special {
    pub const ALL: [Special; 5] = [Special::Pad, Special::Cls, Special::Sep, Special::Mask, Special::Unk];

    pub fn surface(self) -> &'static str {
        match self {
            Special::Pad => "[PAD]",
            Special::Cls => "[CLS]",
            Special::Sep => "[SEP]",
            Special::Mask => "[MASK]",
            Special::Unk => "[UNK]",
        }
    }

    /// Reserved vocabulary id (0-4 in PAD, CLS, SEP, MASK, UNK order).
    pub fn id(self) -> u32 {
        self as u32
    }
}

/// One lexical unit of polymer-SMILES.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    /// Organic-subset atom (`C`, `Cl`, `c`) or bracket atom (`[nH]`), surface form.
    Atom(String),
    /// The `[*]` attachment point.
    Attachment,
    /// One of `- = # : / \`.
    Bond(char),
    BranchOpen,
    BranchClose,
    /// Ring-closure number as written (`1`, `%12`).
    RingDigit(String),
    Special(Special),
}

impl Token {
    pub fn surface(&self) -> &str {
        match self {
            Token::Atom(s) | Token::RingDigit(s) => s,
            Token::Attachment => "[*]",
            Token::Bond(c) => match c {
                '-' => "-",
                '=' => "=",
                '#' => "#",
                ':' => ":",
                '/' => "/",
                _ => "\\",
            },
            Token::BranchOpen => "(",
            Token::BranchClose => ")",
            Token::Special(s) => s.surface(),
        }
    }

    pub fn is_special(&self) -> bool {
        matches!(self, Token::Special(_))
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.surface())
    }
}

/// Ordered token list; the unit consumed by augmentations and the encoder.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence(pub Vec<Token>);

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn count(&self, special: Special) -> usize {
        self.0.iter().filter(|t| **t == Token::Special(special)).count()
    }
}

impl From<Vec<Token>> for TokenSequence {
    fn from(v: Vec<Token>) -> Self {
        TokenSequence(v)
    }
}

/// Splits polymer-SMILES into tokens. Concatenating the surfaces gives back
/// `text`; bracket atoms and two-letter halogens are single tokens.
pub fn tokenize(text: &str) -> Result<TokenSequence, SmilesError> {
    let tokens = lex(text)?
        .into_iter()
        .map(|lx| match lx.kind {
            LexKind::Atom(_) => Token::Atom(lx.text.to_string()),
            LexKind::Attachment => Token::Attachment,
            LexKind::Bond(_) => Token::Bond(lx.text.chars().next().expect("one-byte bond")),
            LexKind::BranchOpen => Token::BranchOpen,
            LexKind::BranchClose => Token::BranchClose,
            LexKind::Ring(_) => Token::RingDigit(lx.text.to_string()),
        })
        .collect();
    Ok(TokenSequence(tokens))
}

/// Concatenates token surfaces; `[MASK]` renders literally.
pub fn detokenize(seq: &TokenSequence) -> String {
    seq.0.iter().map(Token::surface).collect()
}
