//! Canonical SMILES.
//!
//! Atom classes start from the attributed label plus degree and are refined
//! Morgan-style: each round re-ranks atoms by their own class and the sorted
//! multiset of `(neighbor class, bond order)` until the partition stops
//! splitting. Remaining ties are resolved by individualization-refinement:
//! every atom of the first tied class is tried in turn, each discrete ranking
//! is written depth-first (lowest rank first), and the lexicographically
//! smallest string wins. Leaves that reproduce the current best string yield
//! automorphisms, which prune sibling branches lying in the same orbit.
//!
//! The search is exact. A node budget guards against pathological symmetry;
//! past it the first branch of each remaining node is taken.

use super::graph::PolymerGraph;
use super::writer::write_dfs;

const NODE_BUDGET: usize = 250_000;

/// Canonical polymer-SMILES of `graph`. Two graphs get the same string iff
/// they are isomorphic as attributed graphs (stereo marks are not attributes).
pub fn write_canonical(graph: &PolymerGraph) -> String {
    canonical_form(graph).0
}

/// Canonical string together with the atom order it was written in.
pub(crate) fn canonical_form(graph: &PolymerGraph) -> (String, Vec<usize>) {
    let mut search = Search { graph, best: None, automorphisms: Vec::new(), nodes: 0, warned: false };
    let ranks = initial_ranks(graph);
    search.visit(ranks, &mut Vec::new());
    search.best.expect("search visits at least one leaf")
}

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<u32> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter().map(|k| sorted.binary_search(k).expect("key present") as u32).collect()
}

fn cell_count(ranks: &[u32]) -> usize {
    let mut r = ranks.to_vec();
    r.sort_unstable();
    r.dedup();
    r.len()
}

fn initial_ranks(graph: &PolymerGraph) -> Vec<u32> {
    let keys: Vec<_> = graph
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| (a.label(), graph.degree(i)))
        .collect();
    dense_ranks(&keys)
}

fn refine(graph: &PolymerGraph, mut ranks: Vec<u32>) -> Vec<u32> {
    let mut cells = cell_count(&ranks);
    loop {
        let keys: Vec<(u32, Vec<(u32, u8)>)> = (0..graph.atom_count())
            .map(|i| {
                let mut nbs: Vec<(u32, u8)> = graph
                    .neighbors(i)
                    .iter()
                    .map(|&(nb, b)| (ranks[nb], graph.bonds()[b].order.code()))
                    .collect();
                nbs.sort_unstable();
                (ranks[i], nbs)
            })
            .collect();
        let next = dense_ranks(&keys);
        let next_cells = cell_count(&next);
        if next_cells == cells {
            return ranks;
        }
        ranks = next;
        cells = next_cells;
    }
}

/// Writes the graph under a discrete ranking.
pub(crate) fn write_ranked(graph: &PolymerGraph, ranks: &[u32]) -> (String, Vec<usize>) {
    let start = (0..graph.atom_count()).min_by_key(|&i| ranks[i]).expect("non-empty graph");
    let adjacency: Vec<Vec<(usize, usize)>> = (0..graph.atom_count())
        .map(|i| {
            let mut nbs = graph.neighbors(i).to_vec();
            nbs.sort_by_key(|&(nb, _)| ranks[nb]);
            nbs
        })
        .collect();
    let w = write_dfs(graph, start, &adjacency);
    (w.text, w.order)
}

struct Search<'g> {
    graph: &'g PolymerGraph,
    best: Option<(String, Vec<usize>)>,
    automorphisms: Vec<Vec<usize>>,
    nodes: usize,
    warned: bool,
}

impl Search<'_> {
    fn visit(&mut self, ranks: Vec<u32>, path: &mut Vec<usize>) {
        self.nodes += 1;
        let ranks = refine(self.graph, ranks);
        let n = ranks.len();

        let mut counts = vec![0usize; n];
        for &r in &ranks {
            counts[r as usize] += 1;
        }
        let Some(target) = (0..n).find(|&r| counts[r] > 1) else {
            self.leaf(&ranks);
            return;
        };
        let cell: Vec<usize> = (0..n).filter(|&i| ranks[i] as usize == target).collect();

        let mut tried: Vec<usize> = Vec::new();
        for &v in &cell {
            if !tried.is_empty() && self.nodes > NODE_BUDGET {
                if !self.warned {
                    log::warn!("canonical search budget exhausted on a {n}-atom graph; output may not be canonical");
                    self.warned = true;
                }
                break;
            }
            if !tried.is_empty() && self.same_orbit(path, &tried, v) {
                continue;
            }
            tried.push(v);
            let keys: Vec<(u32, bool)> = (0..n).map(|i| (ranks[i], i != v)).collect();
            path.push(v);
            self.visit(dense_ranks(&keys), path);
            path.pop();
        }
    }

    fn leaf(&mut self, ranks: &[u32]) {
        let (text, order) = write_ranked(self.graph, ranks);
        match &self.best {
            Some((best, best_order)) if *best == text => {
                let mut perm = vec![0; order.len()];
                for (k, &a) in best_order.iter().enumerate() {
                    perm[a] = order[k];
                }
                if perm.iter().enumerate().any(|(i, &p)| i != p) {
                    self.automorphisms.push(perm);
                }
            }
            Some((best, _)) if *best < text => {}
            _ => self.best = Some((text, order)),
        }
    }

    /// Whether `v` shares an orbit with an already-explored sibling under the
    /// known automorphisms that fix `path` pointwise.
    fn same_orbit(&self, path: &[usize], tried: &[usize], v: usize) -> bool {
        let n = self.graph.atom_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for perm in &self.automorphisms {
            if path.iter().any(|&p| perm[p] != p) {
                continue;
            }
            for (i, &j) in perm.iter().enumerate() {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let rv = find(&mut parent, v);
        tried.iter().any(|&w| find(&mut parent, w) == rv)
    }
}
