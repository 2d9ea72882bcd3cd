//! Longest-match lexer shared by the parser and the tokenizer.

use super::error::SmilesError;
use super::graph::{BondStereo, Chirality};

/// Every element symbol accepted inside brackets.
const ELEMENTS: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

/// Aromatic symbols accepted inside brackets, mapped to their element.
const AROMATIC_BRACKET: &[(&str, &str)] = &[
    ("se", "Se"),
    ("as", "As"),
    ("te", "Te"),
    ("b", "B"),
    ("c", "C"),
    ("n", "N"),
    ("o", "O"),
    ("p", "P"),
    ("s", "S"),
];

pub(crate) fn is_element(symbol: &str) -> bool {
    ELEMENTS.contains(&symbol)
}

/// Bond symbol as written in the source text.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BondSymbol {
    Single,
    Double,
    Triple,
    Aromatic,
    Up,
    Down,
}

impl BondSymbol {
    pub(crate) fn stereo(self) -> Option<BondStereo> {
        match self {
            BondSymbol::Up => Some(BondStereo::Up),
            BondSymbol::Down => Some(BondStereo::Down),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct AtomSpec {
    pub symbol: String,
    pub aromatic: bool,
    pub isotope: Option<u16>,
    pub chirality: Option<Chirality>,
    pub hydrogens: u8,
    pub charge: i8,
    pub bracketed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum LexKind {
    Atom(AtomSpec),
    Attachment,
    Bond(BondSymbol),
    BranchOpen,
    BranchClose,
    Ring(u8),
}

#[derive(Clone, Debug)]
pub(crate) struct Lexeme<'a> {
    pub kind: LexKind,
    pub text: &'a str,
    pub offset: usize,
}

pub(crate) fn lex(text: &str) -> Result<Vec<Lexeme<'_>>, SmilesError> {
    if text.is_empty() {
        return Err(SmilesError::Empty);
    }
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let kind = match bytes[i] {
            b'[' => {
                let close = text[i..]
                    .find(']')
                    .map(|k| i + k)
                    .ok_or_else(|| SmilesError::syntax(i, "unclosed bracket atom"))?;
                let kind = lex_bracket(&text[i + 1..close], i + 1)?;
                i = close + 1;
                kind
            }
            b'(' => {
                i += 1;
                LexKind::BranchOpen
            }
            b')' => {
                i += 1;
                LexKind::BranchClose
            }
            b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                let sym = match bytes[i] {
                    b'-' => BondSymbol::Single,
                    b'=' => BondSymbol::Double,
                    b'#' => BondSymbol::Triple,
                    b':' => BondSymbol::Aromatic,
                    b'/' => BondSymbol::Up,
                    _ => BondSymbol::Down,
                };
                i += 1;
                LexKind::Bond(sym)
            }
            b'0'..=b'9' => {
                i += 1;
                LexKind::Ring(bytes[start] - b'0')
            }
            b'%' => {
                let d = bytes.get(i + 1..i + 3).filter(|d| d.iter().all(u8::is_ascii_digit));
                let d = d.ok_or_else(|| SmilesError::syntax(i, "'%' must be followed by two digits"))?;
                i += 3;
                LexKind::Ring((d[0] - b'0') * 10 + (d[1] - b'0'))
            }
            b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' | b'b' | b'c' | b'n' | b'o'
            | b'p' | b's' => {
                let two = text.get(i..i + 2);
                let (symbol, aromatic, len) = match two {
                    Some("Cl") => ("Cl", false, 2),
                    Some("Br") => ("Br", false, 2),
                    _ => {
                        let c = bytes[i] as char;
                        if c.is_ascii_lowercase() {
                            (organic_upper(c), true, 1)
                        } else {
                            (&text[i..i + 1], false, 1)
                        }
                    }
                };
                i += len;
                LexKind::Atom(AtomSpec {
                    symbol: symbol.to_string(),
                    aromatic,
                    isotope: None,
                    chirality: None,
                    hydrogens: 0,
                    charge: 0,
                    bracketed: false,
                })
            }
            b'.' => return Err(SmilesError::syntax(i, "disconnected components ('.') are not supported")),
            c if (c as char).is_whitespace() => return Err(SmilesError::syntax(i, "whitespace")),
            c if c.is_ascii_alphabetic() || c == b'*' => {
                return Err(SmilesError::syntax(i, "unknown element outside brackets"))
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(SmilesError::syntax(i, format!("unexpected character {ch:?}")));
            }
        };
        out.push(Lexeme { kind, text: &text[start..i], offset: start });
    }
    Ok(out)
}

fn organic_upper(c: char) -> &'static str {
    match c {
        'b' => "B",
        'c' => "C",
        'n' => "N",
        'o' => "O",
        'p' => "P",
        _ => "S",
    }
}

/// Lexes the inside of `[...]`; `base` is the byte offset of `inner` in the source.
fn lex_bracket(inner: &str, base: usize) -> Result<LexKind, SmilesError> {
    if inner == "*" {
        return Ok(LexKind::Attachment);
    }
    let b = inner.as_bytes();
    let mut i = 0;

    let digits = b.iter().take_while(|c| c.is_ascii_digit()).count();
    let isotope = if digits > 0 {
        let v: u16 = inner[..digits]
            .parse()
            .map_err(|_| SmilesError::syntax(base, "isotope out of range"))?;
        i = digits;
        Some(v)
    } else {
        None
    };

    let rest = &inner[i..];
    if rest.starts_with('*') {
        return Err(SmilesError::syntax(base + i, "attachment point must be written exactly as [*]"));
    }
    let (symbol, aromatic, len) = if let Some((s, e)) =
        AROMATIC_BRACKET.iter().find(|(s, _)| rest.starts_with(s))
    {
        (e.to_string(), true, s.len())
    } else {
        let two = rest.get(..2).filter(|s| is_element(s) && s.as_bytes()[1].is_ascii_lowercase());
        match two {
            Some(s) => (s.to_string(), false, 2),
            None => match rest.get(..1).filter(|s| is_element(s)) {
                Some(s) => (s.to_string(), false, 1),
                None => return Err(SmilesError::syntax(base + i, "unknown element")),
            },
        }
    };
    i += len;

    let mut chirality = None;
    if b.get(i) == Some(&b'@') {
        if b.get(i + 1) == Some(&b'@') {
            chirality = Some(Chirality::Clockwise);
            i += 2;
        } else {
            chirality = Some(Chirality::CounterClockwise);
            i += 1;
        }
    }

    let mut hydrogens = 0u8;
    if b.get(i) == Some(&b'H') {
        i += 1;
        hydrogens = 1;
        if let Some(d) = b.get(i).filter(|c| c.is_ascii_digit()) {
            hydrogens = d - b'0';
            i += 1;
        }
    }

    let mut charge: i8 = 0;
    if let Some(&sign @ (b'+' | b'-')) = b.get(i) {
        let unit: i8 = if sign == b'+' { 1 } else { -1 };
        i += 1;
        if b.get(i) == Some(&sign) {
            charge = 2 * unit;
            i += 1;
        } else {
            let n = b[i..].iter().take_while(|c| c.is_ascii_digit()).count();
            if n > 0 {
                let mag: i8 = inner[i..i + n]
                    .parse()
                    .map_err(|_| SmilesError::syntax(base + i, "charge out of range"))?;
                charge = unit * mag;
                i += n;
            } else {
                charge = unit;
            }
        }
    }

    if i != b.len() {
        return Err(SmilesError::syntax(base + i, "unsupported bracket atom syntax"));
    }
    Ok(LexKind::Atom(AtomSpec {
        symbol,
        aromatic,
        isotope,
        chirality,
        hydrogens,
        charge,
        bracketed: true,
    }))
}
