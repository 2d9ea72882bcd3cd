use std::collections::BTreeMap;

use super::error::SmilesError;
use super::graph::{Atom, Bond, BondOrder, PolymerGraph};
use super::lexer::{lex, BondSymbol, LexKind};

/// Parser switches. The default accepts any valence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject atoms whose bond-order sum exceeds the element's largest
    /// standard valence.
    pub strict_valence: bool,
}

/// Parses polymer-SMILES into a [`PolymerGraph`].
pub fn parse(text: &str) -> Result<PolymerGraph, SmilesError> {
    parse_with(text, ParseOptions::default())
}

pub fn parse_with(text: &str, options: ParseOptions) -> Result<PolymerGraph, SmilesError> {
    let lexemes = lex(text)?;
    let mut atoms: Vec<Atom> = Vec::new();
    let mut atom_offsets: Vec<usize> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(BondSymbol, usize)> = None;
    // (atom before '(', atom count at '(', offset of '(')
    let mut branches: Vec<(usize, usize, usize)> = Vec::new();
    let mut rings: BTreeMap<u8, (usize, Option<BondSymbol>, usize)> = BTreeMap::new();

    let connect = |bonds: &mut Vec<Bond>, atoms: &[Atom], a: usize, b: usize, sym: Option<BondSymbol>| {
        let order = match sym {
            Some(BondSymbol::Double) => BondOrder::Double,
            Some(BondSymbol::Triple) => BondOrder::Triple,
            Some(BondSymbol::Aromatic) => BondOrder::Aromatic,
            Some(_) => BondOrder::Single,
            None if atoms[a].aromatic && atoms[b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        bonds.push(Bond { a, b, order, stereo: sym.and_then(BondSymbol::stereo) });
    };

    for lx in &lexemes {
        match &lx.kind {
            LexKind::Atom(_) | LexKind::Attachment => {
                let atom = match &lx.kind {
                    LexKind::Atom(spec) => Atom {
                        symbol: spec.symbol.clone(),
                        aromatic: spec.aromatic,
                        isotope: spec.isotope,
                        charge: spec.charge,
                        hydrogens: spec.hydrogens,
                        bracketed: spec.bracketed,
                        is_attachment: false,
                        chirality: spec.chirality,
                    },
                    _ => Atom::attachment(),
                };
                let idx = atoms.len();
                atoms.push(atom);
                atom_offsets.push(lx.offset);
                match prev {
                    Some(p) => connect(&mut bonds, &atoms, p, idx, pending.take().map(|(s, _)| s)),
                    None => {
                        if let Some((_, off)) = pending {
                            return Err(SmilesError::syntax(off, "bond without a preceding atom"));
                        }
                    }
                }
                prev = Some(idx);
            }
            LexKind::Bond(sym) => {
                if prev.is_none() {
                    return Err(SmilesError::syntax(lx.offset, "bond without a preceding atom"));
                }
                if pending.is_some() {
                    return Err(SmilesError::syntax(lx.offset, "consecutive bond symbols"));
                }
                pending = Some((*sym, lx.offset));
            }
            LexKind::BranchOpen => {
                let p = prev.ok_or_else(|| SmilesError::syntax(lx.offset, "branch without a preceding atom"))?;
                if let Some((_, off)) = pending {
                    return Err(SmilesError::syntax(off, "bond symbol before '('"));
                }
                branches.push((p, atoms.len(), lx.offset));
            }
            LexKind::BranchClose => {
                let (p, count_at_open, _) = branches
                    .pop()
                    .ok_or_else(|| SmilesError::syntax(lx.offset, "unbalanced ')'"))?;
                if let Some((_, off)) = pending {
                    return Err(SmilesError::syntax(off, "dangling bond before ')'"));
                }
                if atoms.len() == count_at_open {
                    return Err(SmilesError::syntax(lx.offset, "empty branch"));
                }
                prev = Some(p);
            }
            LexKind::Ring(n) => {
                let here = prev.ok_or_else(|| SmilesError::syntax(lx.offset, "ring bond without a preceding atom"))?;
                let sym_here = pending.take().map(|(s, _)| s);
                match rings.remove(n) {
                    Some((partner, sym_open, _)) => {
                        if partner == here {
                            return Err(SmilesError::syntax(lx.offset, "ring bond closes on its own atom"));
                        }
                        if bonds.iter().any(|b| (b.a == partner && b.b == here) || (b.a == here && b.b == partner)) {
                            return Err(SmilesError::syntax(lx.offset, "ring bond duplicates an existing bond"));
                        }
                        let sym = match (sym_open, sym_here) {
                            (Some(a), Some(b)) if a != b => {
                                return Err(SmilesError::syntax(lx.offset, "conflicting ring bond symbols"))
                            }
                            (a, b) => a.or(b),
                        };
                        connect(&mut bonds, &atoms, partner, here, sym);
                    }
                    None => {
                        rings.insert(*n, (here, sym_here, lx.offset));
                    }
                }
            }
        }
    }

    if let Some((_, off)) = pending {
        return Err(SmilesError::syntax(off, "dangling bond at end of input"));
    }
    if let Some(&(_, _, off)) = branches.last() {
        return Err(SmilesError::syntax(off, "unbalanced '('"));
    }
    if let Some((_, &(_, _, off))) = rings.iter().min_by_key(|(_, v)| v.2) {
        return Err(SmilesError::syntax(off, "unmatched ring-closure digit"));
    }

    let graph = PolymerGraph::from_parts_unchecked(atoms, bonds);
    for (i, atom) in graph.atoms().iter().enumerate() {
        if atom.is_attachment && graph.degree(i) != 1 {
            return Err(SmilesError::AttachmentDegree { offset: atom_offsets[i], degree: graph.degree(i) });
        }
    }
    if options.strict_valence {
        check_valence(&graph, &atom_offsets)?;
    }
    Ok(graph)
}

fn max_valence(symbol: &str, charge: i8) -> Option<u32> {
    let v = match (symbol, charge) {
        ("B", 0) => 3,
        ("B", -1) => 4,
        ("C", 0) => 4,
        ("C", 1 | -1) => 3,
        ("N" | "P", 0) => 5,
        ("N" | "P", 1) => 4,
        ("N" | "P", -1) => 2,
        ("O", 0) => 2,
        ("O", 1) => 3,
        ("O", -1) => 1,
        ("S", 0) => 6,
        ("S", 1 | -1) => 5,
        ("F" | "Cl" | "Br" | "I", 0) => 1,
        _ => return None,
    };
    Some(v)
}

fn check_valence(graph: &PolymerGraph, offsets: &[usize]) -> Result<(), SmilesError> {
    for (i, atom) in graph.atoms().iter().enumerate() {
        if atom.is_attachment {
            continue;
        }
        let Some(max) = max_valence(&atom.symbol, atom.charge) else { continue };
        let mut valence = atom.hydrogens as u32;
        for &(_, bi) in graph.neighbors(i) {
            valence += match graph.bonds()[bi].order {
                BondOrder::Single | BondOrder::Aromatic => 1,
                BondOrder::Double => 2,
                BondOrder::Triple => 3,
            };
        }
        if valence > max {
            return Err(SmilesError::Valence { offset: offsets[i], symbol: atom.symbol.clone(), valence });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom() {
        let g = parse("C").unwrap();
        assert_eq!(g.atom_count(), 1);
        assert!(g.bonds().is_empty());
    }

    #[test]
    fn polyvinyl_chloride_repeat_unit() {
        let g = parse("[*]CC([*])Cl").unwrap();
        assert_eq!(g.atom_count(), 5);
        assert_eq!(g.bonds().len(), 4);
        assert_eq!(g.attachment_count(), 2);
        for (i, a) in g.atoms().iter().enumerate() {
            if a.is_attachment {
                assert_eq!(g.degree(i), 1);
            }
        }
        assert_eq!(g.atoms().iter().filter(|a| a.symbol == "Cl").count(), 1);
    }

    #[test]
    fn ring_closure() {
        let g = parse("C1CC1").unwrap();
        assert_eq!(g.atom_count(), 3);
        assert_eq!(g.bonds().len(), 3);
        assert!(g.bond_between(0, 2).is_some());
    }

    #[test]
    fn aromatic_ring_bonds_are_aromatic() {
        let g = parse("c1ccccc1").unwrap();
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        let g = parse("c1ccccc1-c1ccccc1").unwrap();
        assert_eq!(g.bonds().iter().filter(|b| b.order == BondOrder::Single).count(), 1);
    }

    #[test]
    fn ring_bond_symbol_on_either_side() {
        let a = parse("C=1CC1").unwrap();
        let b = parse("C1CC=1").unwrap();
        assert_eq!(a.bond_between(0, 2).unwrap().order, BondOrder::Double);
        assert_eq!(b.bond_between(0, 2).unwrap().order, BondOrder::Double);
        assert!(parse("C=1CC#1").is_err());
    }

    #[test]
    fn syntax_error_offsets() {
        let cases = [
            ("C(", 1),
            ("C)", 1),
            ("=C", 0),
            ("C=", 1),
            ("C1CC", 1),
            ("C()", 2),
            ("C11", 2),
            ("C12CC12", 6),
            ("(C)", 0),
            ("C=(O)", 1),
        ];
        for (s, off) in cases {
            let err = parse(s).unwrap_err();
            assert_eq!(err.offset(), Some(off), "{s}: {err}");
        }
    }

    #[test]
    fn attachment_degree_enforced() {
        assert!(matches!(parse("[*]"), Err(SmilesError::AttachmentDegree { degree: 0, .. })));
        assert!(matches!(parse("C([*])([*])[*]"), Ok(_)));
        assert!(matches!(parse("[*]1CC1"), Err(SmilesError::AttachmentDegree { degree: 2, .. })));
    }

    #[test]
    fn stereo_is_carried_not_enforced() {
        let g = parse("F/C=C/F").unwrap();
        assert_eq!(g.bonds().iter().filter(|b| b.stereo.is_some()).count(), 2);
        let g = parse("N[C@@H](C)C(=O)O").unwrap();
        assert!(g.atoms()[1].chirality.is_some());
    }

    #[test]
    fn valence_is_optional() {
        assert!(parse("C(C)(C)(C)(C)C").is_ok());
        let strict = ParseOptions { strict_valence: true };
        assert!(matches!(parse_with("C(C)(C)(C)(C)C", strict), Err(SmilesError::Valence { .. })));
        assert!(parse_with("C[N+](C)(C)C", strict).is_ok());
        assert!(parse_with("CC(=O)[O-]", strict).is_ok());
        assert!(parse_with("c1ccccc1", strict).is_ok());
        assert!(parse_with("O=S(=O)(C)C", strict).is_ok());
    }
}
