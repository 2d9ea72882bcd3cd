//! Polymer-SMILES: lexing, parsing into attributed graphs, canonical and
//! randomized writing, and tokenization.
//!
//! The accepted grammar is the organic subset (`B C N O P S F Cl Br I` and
//! aromatic `b c n o p s`), bracket atoms with optional isotope, chirality,
//! hydrogen count and charge, bond symbols `- = # : / \`, branches, ring
//! closures `0`-`9` and `%nn`, and `[*]` for attachment points. Anything else
//! is a [`SmilesError::Syntax`] carrying the byte offset.

mod canon;
mod enumerate;
mod error;
mod graph;
mod lexer;
mod parser;
mod token;
mod vocab;
mod writer;

pub use canon::write_canonical;
pub use enumerate::enumerate_random;
pub use error::SmilesError;
pub use graph::{Atom, AtomLabel, Bond, BondOrder, BondStereo, Chirality, GraphError, PolymerGraph};
pub use parser::{parse, parse_with, ParseOptions};
pub use token::{detokenize, tokenize, Special, Token, TokenSequence};
pub use vocab::{VocabError, Vocabulary};

/// Parses and re-writes `text` canonically.
pub fn canonicalize(text: &str) -> Result<String, SmilesError> {
    Ok(write_canonical(&parse(text)?))
}
