//! Seeded synthetic polymer repeat units and toy properties for desk-scale runs.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::seed::rng_from;
use crate::smiles::{canonicalize, parse, BondOrder, PolymerGraph};

/// Backbone pieces. Rings close inside their piece, so digit 1 can be reused.
const BACKBONE: &[&str] = &[
    "C",
    "CC",
    "C(C)",
    "C(C)(C)",
    "C(F)(F)",
    "C(Cl)",
    "C(F)",
    "C(Br)",
    "C(O)",
    "C(OC)",
    "C(C#N)",
    "C(=O)O",
    "OC(=O)",
    "O",
    "N",
    "NC(=O)",
    "C(=O)N",
    "S",
    "S(=O)(=O)",
    "C=C",
    "C#C",
    "[Si](C)(C)O",
    "C(C(=O)OC)",
    "C(c1ccccc1)",
    "c1ccc(cc1)",
    "c1cccc(c1)",
    "c1ccc(o1)",
    "c1ccc(s1)",
    "C1CCC(CC1)",
    "c1ccc(nc1)",
    "[NH2+]",
    "C(C(F)(F)F)",
    "CC(C)",
    "C(=O)",
];

/// `count` distinct polymer repeat units with two attachment points.
pub fn generate_polymers(count: usize, seed: u64) -> Vec<String> {
    let mut rng = rng_from(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.gen_range(1..=6);
        let mut s = String::from("[*]");
        for _ in 0..n {
            s.push_str(BACKBONE.choose(&mut rng).expect("non-empty table"));
        }
        s.push_str("[*]");
        let canon = canonicalize(&s).expect("generated SMILES parse");
        if seen.insert(canon) {
            out.push(s);
        }
    }
    out
}

/// Counts used by the toy property functions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GraphCounts {
    pub heavy: usize,
    pub aromatic: usize,
    pub hetero: usize,
    pub halogen: usize,
    pub unsaturated_bonds: usize,
    pub ring_bonds: usize,
}

pub fn graph_counts(g: &PolymerGraph) -> GraphCounts {
    let mut c = GraphCounts::default();
    for a in g.atoms().iter().filter(|a| !a.is_attachment) {
        c.heavy += 1;
        c.aromatic += a.aromatic as usize;
        c.hetero += matches!(a.symbol.as_str(), "N" | "O" | "S" | "Si") as usize;
        c.halogen += matches!(a.symbol.as_str(), "F" | "Cl" | "Br" | "I") as usize;
    }
    c.unsaturated_bonds = g.bonds().iter().filter(|b| matches!(b.order, BondOrder::Double | BondOrder::Triple)).count();
    // Edges beyond a spanning tree.
    c.ring_bonds = g.bonds().len() + 1 - g.atom_count();
    c
}

/// Toy band-gap-like property (eV-scale), lower for conjugated units.
pub fn toy_gap(smiles: &str) -> f64 {
    let c = graph_counts(&parse(smiles).expect("parseable"));
    let h = c.heavy as f64;
    7.2 - 3.1 * c.aromatic as f64 / h - 1.4 * c.unsaturated_bonds as f64 / h + 0.9 * c.halogen as f64 / h
        - 0.35 * (c.ring_bonds as f64).sqrt()
}

/// Toy electron-affinity-like property, higher for aromatic and hetero-rich units.
pub fn toy_affinity(smiles: &str) -> f64 {
    let c = graph_counts(&parse(smiles).expect("parseable"));
    let h = c.heavy as f64;
    0.4 + 1.6 * c.aromatic as f64 / h + 0.8 * c.hetero as f64 / h + 1.1 * c.halogen as f64 / h + 0.2 * h.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polymers_are_distinct_and_valid() {
        let p = generate_polymers(300, 4);
        assert_eq!(p.len(), 300);
        let canon: HashSet<String> = p.iter().map(|s| canonicalize(s).unwrap()).collect();
        assert_eq!(canon.len(), 300);
        for s in &p {
            assert_eq!(parse(s).unwrap().attachment_count(), 2);
        }
        assert_eq!(generate_polymers(50, 4), p[..50].to_vec());
    }

    #[test]
    fn counts_for_styrene_unit() {
        let c = graph_counts(&parse("[*]CC([*])c1ccccc1").unwrap());
        assert_eq!(c, GraphCounts { heavy: 8, aromatic: 6, hetero: 0, halogen: 0, unsaturated_bonds: 0, ring_bonds: 1 });
        assert!(toy_gap("[*]CC([*])c1ccccc1") < toy_gap("[*]CC[*]"));
    }
}
