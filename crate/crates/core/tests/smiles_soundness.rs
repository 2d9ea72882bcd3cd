//! Enumeration soundness and canonical-form uniqueness against an
//! independent brute-force isomorphism search.

use polycl_core::smiles::{canonicalize, parse};

mod common;
use common::isomorphic;

#[test]
fn oracle_sanity() {
    let p = |s: &str| parse(s).unwrap();
    assert!(isomorphic(&p("OCC"), &p("CCO")));
    assert!(isomorphic(&p("[*]CC([*])Cl"), &p("ClC([*])C[*]")));
    assert!(!isomorphic(&p("CCO"), &p("COC")));
    assert!(!isomorphic(&p("C=CC"), &p("CC=C(C)")));
    assert!(!isomorphic(&p("[*]CC([*])Cl"), &p("[*]C([*])CCl")));
    assert_eq!(canonicalize("OCC").unwrap(), canonicalize("CCO").unwrap());
    assert_eq!(canonicalize("C").unwrap(), "C");
}

#[test]
fn enumerations_and_canonical_uniqueness() {
    common::check_smiles_soundness();
}
