//! Depth-first SMILES writer shared by canonical and randomized output.
//!
//! The caller fixes the start atom and the order in which each atom's
//! neighbors are explored; everything else (branch placement, ring digit
//! allocation, bond symbols) follows deterministically.

use super::graph::{BondOrder, PolymerGraph};

pub(crate) struct Written {
    pub text: String,
    /// Atoms in the order they appear in `text`.
    pub order: Vec<usize>,
}

#[derive(Default, Clone)]
struct Plan {
    children: Vec<(usize, usize)>,
    ring_open: Vec<(usize, usize)>,
    ring_close: Vec<(usize, usize)>,
}

/// Writes `graph` starting at `start`, exploring neighbors in the order given by
/// `adjacency[atom]` (`(neighbor, bond index)` pairs covering every bond).
pub(crate) fn write_dfs(graph: &PolymerGraph, start: usize, adjacency: &[Vec<(usize, usize)>]) -> Written {
    let n = graph.atom_count();
    let mut plan = vec![Plan::default(); n];
    let mut visited = vec![false; n];
    let mut rank = vec![usize::MAX; n];
    let mut classified = vec![false; graph.bonds().len()];

    // Pass 1: classify tree edges and ring-closure edges.
    let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
    visited[start] = true;
    rank[start] = 0;
    let mut next_rank = 1;
    while let Some(&(atom, cursor)) = stack.last() {
        if cursor >= adjacency[atom].len() {
            stack.pop();
            continue;
        }
        let (nb, bond) = adjacency[atom][cursor];
        if let Some(top) = stack.last_mut() {
            top.1 += 1;
        }
        if classified[bond] {
            continue;
        }
        classified[bond] = true;
        if visited[nb] {
            plan[nb].ring_open.push((atom, bond));
            plan[atom].ring_close.push((nb, bond));
        } else {
            visited[nb] = true;
            rank[nb] = next_rank;
            next_rank += 1;
            plan[atom].children.push((nb, bond));
            stack.push((nb, 0));
        }
    }

    // Pass 2: emit text.
    let mut w = Emitter {
        graph,
        plan: &plan,
        rank: &rank,
        digit_of: vec![0; graph.bonds().len()],
        in_use: [false; 100],
        text: String::new(),
        order: Vec::with_capacity(n),
    };
    w.emit(start, None);
    Written { text: w.text, order: w.order }
}

struct Emitter<'a> {
    graph: &'a PolymerGraph,
    plan: &'a [Plan],
    rank: &'a [usize],
    digit_of: Vec<u8>,
    in_use: [bool; 100],
    text: String,
    order: Vec<usize>,
}

impl Emitter<'_> {
    fn emit(&mut self, atom: usize, via: Option<(usize, usize)>) {
        let plan = self.plan;
        if let Some((from, bond)) = via {
            self.bond_symbol(bond, from, atom);
        }
        self.graph.atoms()[atom].write(&mut self.text);
        self.order.push(atom);

        let mut closings = plan[atom].ring_close.clone();
        closings.sort_by_key(|&(partner, bond)| (self.rank[partner], bond));
        let mut freed = Vec::with_capacity(closings.len());
        for &(_, bond) in &closings {
            let d = self.digit_of[bond];
            push_digit(&mut self.text, d);
            freed.push(d);
        }
        for &(partner, bond) in &plan[atom].ring_open {
            let d = (1..100u8).find(|&d| !self.in_use[d as usize]).expect("more than 99 open rings");
            self.in_use[d as usize] = true;
            self.digit_of[bond] = d;
            self.bond_symbol(bond, atom, partner);
            push_digit(&mut self.text, d);
        }
        for d in freed {
            self.in_use[d as usize] = false;
        }

        let children = &plan[atom].children;
        for (k, &(child, bond)) in children.iter().enumerate() {
            let last = k + 1 == children.len();
            if !last {
                self.text.push('(');
            }
            self.emit(child, Some((atom, bond)));
            if !last {
                self.text.push(')');
            }
        }
    }

    fn bond_symbol(&mut self, bond: usize, a: usize, b: usize) {
        let atoms = self.graph.atoms();
        let both_aromatic = atoms[a].aromatic && atoms[b].aromatic;
        let sym = match self.graph.bonds()[bond].order {
            BondOrder::Single if both_aromatic => "-",
            BondOrder::Single => "",
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
            BondOrder::Aromatic if both_aromatic => "",
            BondOrder::Aromatic => ":",
        };
        self.text.push_str(sym);
    }
}

fn push_digit(out: &mut String, d: u8) {
    if d < 10 {
        out.push((b'0' + d) as char);
    } else {
        out.push('%');
        out.push_str(&format!("{d:02}"));
    }
}
