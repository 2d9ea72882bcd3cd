//! Attributed molecular graph of one polymer repeating unit.

/// Tetrahedral chirality marker carried from `@` / `@@`. Ignored by
/// canonicalization and enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Chirality {
    CounterClockwise,
    Clockwise,
}

/// Directional single-bond marker carried from `/` and `\`. Ignored by
/// canonicalization and enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondStereo {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    /// Element symbol in its capitalized form (`"C"` for both `C` and `c`),
    /// or `"*"` for an attachment point.
    pub symbol: String,
    pub aromatic: bool,
    pub isotope: Option<u16>,
    pub charge: i8,
    /// Hydrogen count written inside brackets; zero for organic-subset atoms.
    pub hydrogens: u8,
    pub bracketed: bool,
    pub is_attachment: bool,
    pub chirality: Option<Chirality>,
}

impl Atom {
    /// The `[*]` attachment point.
    pub fn attachment() -> Self {
        Atom {
            symbol: "*".to_string(),
            aromatic: false,
            isotope: None,
            charge: 0,
            hydrogens: 0,
            bracketed: true,
            is_attachment: true,
            chirality: None,
        }
    }

    /// Key compared by isomorphism checks. Chirality is excluded.
    pub fn label(&self) -> AtomLabel {
        AtomLabel {
            is_attachment: self.is_attachment,
            symbol: self.symbol.clone(),
            aromatic: self.aromatic,
            isotope: self.isotope,
            charge: self.charge,
            hydrogens: self.hydrogens,
            bracketed: self.bracketed,
        }
    }

    /// Surface text of the atom, without stereo marks.
    pub(crate) fn write(&self, out: &mut String) {
        if self.is_attachment {
            out.push_str("[*]");
            return;
        }
        let sym = if self.aromatic { self.symbol.to_ascii_lowercase() } else { self.symbol.clone() };
        if !self.needs_brackets() {
            out.push_str(&sym);
            return;
        }
        out.push('[');
        if let Some(iso) = self.isotope {
            out.push_str(&iso.to_string());
        }
        out.push_str(&sym);
        match self.hydrogens {
            0 => {}
            1 => out.push('H'),
            n => {
                out.push('H');
                out.push_str(&n.to_string());
            }
        }
        match self.charge {
            0 => {}
            1 => out.push('+'),
            -1 => out.push('-'),
            c if c > 0 => out.push_str(&format!("+{c}")),
            c => out.push_str(&format!("-{}", -c)),
        }
        out.push(']');
    }

    fn needs_brackets(&self) -> bool {
        const ORGANIC: &[&str] = &["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"];
        const AROMATIC: &[&str] = &["B", "C", "N", "O", "P", "S"];
        let allowed = if self.aromatic { AROMATIC } else { ORGANIC };
        self.bracketed
            || self.isotope.is_some()
            || self.charge != 0
            || self.hydrogens != 0
            || !allowed.contains(&self.symbol.as_str())
    }
}

/// Isomorphism-relevant atom attributes, ordered attachment-first.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomLabel {
    pub is_attachment: bool,
    pub symbol: String,
    pub aromatic: bool,
    pub isotope: Option<u16>,
    pub charge: i8,
    pub hydrogens: u8,
    pub bracketed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub stereo: Option<BondStereo>,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Connected, simple, undirected graph of one repeating unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolymerGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// Per atom: `(neighbor, bond index)` in insertion order.
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Structural violations reported by [`PolymerGraph::validate`].
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("bond {0} references a missing atom")]
    BadEndpoint(usize),
    #[error("bond {0} is a self-loop")]
    SelfLoop(usize),
    #[error("atoms {0} and {1} are bonded more than once")]
    DuplicateBond(usize, usize),
    #[error("attachment atom {atom} has degree {degree}")]
    AttachmentDegree { atom: usize, degree: usize },
    #[error("graph is empty or disconnected")]
    Disconnected,
}

impl PolymerGraph {
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, bond) in bonds.iter().enumerate() {
            if bond.a >= atoms.len() || bond.b >= atoms.len() {
                return Err(GraphError::BadEndpoint(i));
            }
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        let g = PolymerGraph { atoms, bonds, adjacency };
        g.validate()?;
        Ok(g)
    }

    pub(crate) fn from_parts_unchecked(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Self {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, bond) in bonds.iter().enumerate() {
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        PolymerGraph { atoms, bonds, adjacency }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let n = self.atoms.len();
        if n == 0 {
            return Err(GraphError::Disconnected);
        }
        let mut seen = std::collections::HashSet::new();
        for (i, bond) in self.bonds.iter().enumerate() {
            if bond.a == bond.b {
                return Err(GraphError::SelfLoop(i));
            }
            let key = (bond.a.min(bond.b), bond.a.max(bond.b));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateBond(key.0, key.1));
            }
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            if atom.is_attachment && self.degree(i) != 1 {
                return Err(GraphError::AttachmentDegree { atom: i, degree: self.degree(i) });
            }
        }
        let mut visited = vec![false; n];
        let mut stack = vec![0];
        visited[0] = true;
        while let Some(a) = stack.pop() {
            for &(nb, _) in &self.adjacency[a] {
                if !visited[nb] {
                    visited[nb] = true;
                    stack.push(nb);
                }
            }
        }
        if visited.iter().all(|&v| v) {
            Ok(())
        } else {
            Err(GraphError::Disconnected)
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    /// `(neighbor, bond index)` pairs of `atom`.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn attachment_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.is_attachment).count()
    }

    /// Atoms that are neither attachment points nor hydrogen.
    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| !a.is_attachment && a.symbol != "H").count()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a].iter().find(|(nb, _)| *nb == b).map(|&(_, i)| &self.bonds[i])
    }
}
