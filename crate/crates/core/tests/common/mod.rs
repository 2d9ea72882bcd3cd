//! Oracles shared by several test targets.
#![allow(dead_code)]

use std::time::Instant;

use ndarray::Array2;
use polycl_core::encoder::{Dropout, EncoderParams};
use polycl_core::pretrain::contrastive_loss_and_grad;
use polycl_core::seed::rng_from;
use polycl_core::corpus::generate_polymers;
use polycl_core::smiles::{canonicalize, enumerate_random, parse, AtomLabel, BondOrder, PolymerGraph};
use rand::Rng;

pub const STEP: f64 = 1e-4;
pub const TOL: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps exact zeros comparable.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

pub fn random_ids(rng: &mut impl Rng, count: usize, vocab: usize, max_len: usize) -> Vec<Vec<u32>> {
    (0..count)
        .map(|_| {
            let len = rng.gen_range(3..=max_len);
            (0..len).map(|_| rng.gen_range(0..vocab as u32)).collect()
        })
        .collect()
}

/// Checks `per_tensor` coordinates of every tensor (all of them when the
/// tensor is smaller) and returns the worst relative error with its location.
pub fn check_pipeline(params: &EncoderParams, ids: &[Vec<u32>], drops: &[Option<Dropout>], tau: f64, per_tensor: usize, seed: u64) -> (f64, String) {
    let (_, grads) = contrastive_loss_and_grad(params, ids, drops, tau).unwrap();
    let loss = |p: &EncoderParams| contrastive_loss_and_grad(p, ids, drops, tau).unwrap().0;
    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    let analytic: Vec<Array2<f64>> = grads.tensors().into_iter().cloned().collect();
    let mut rng = rng_from(seed);
    let mut worst = (0.0, String::new());
    for (ti, name) in names.iter().enumerate() {
        let len = analytic[ti].len();
        let coords: Vec<usize> =
            if len <= per_tensor { (0..len).collect() } else { (0..per_tensor).map(|_| rng.gen_range(0..len)).collect() };
        for c in coords {
            let mut plus = params.clone();
            let mut minus = params.clone();
            plus.tensors_mut()[ti].as_slice_mut().unwrap()[c] += STEP;
            minus.tensors_mut()[ti].as_slice_mut().unwrap()[c] -= STEP;
            let num = (loss(&plus) - loss(&minus)) / (2.0 * STEP);
            let a = analytic[ti].as_slice().unwrap()[c];
            let e = rel_err(a, num);
            if e > worst.0 {
                worst = (e, format!("{name}[{c}] analytic {a:e} numeric {num:e}"));
            }
        }
    }
    worst
}

/// Backtracking search for a label-, degree-, and bond-order-preserving
/// bijection. Exhaustive: every consistent partial map is extended.
pub fn isomorphic(g: &PolymerGraph, h: &PolymerGraph) -> bool {
    let n = g.atom_count();
    if n != h.atom_count() || g.bonds().len() != h.bonds().len() {
        return false;
    }
    let label = |x: &PolymerGraph, i: usize| -> (AtomLabel, usize) { (x.atoms()[i].label(), x.degree(i)) };
    let mut gl: Vec<_> = (0..n).map(|i| label(g, i)).collect();
    let mut hl: Vec<_> = (0..n).map(|i| label(h, i)).collect();
    let (gs, hs) = (gl.clone(), hl.clone());
    gl.sort();
    hl.sort();
    if gl != hl {
        return false;
    }
    // Visit g's atoms in BFS order so each new atom has a mapped neighbor.
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        order.push(root);
        let mut head = order.len() - 1;
        while head < order.len() {
            let a = order[head];
            head += 1;
            for &(b, _) in g.neighbors(a) {
                if !seen[b] {
                    seen[b] = true;
                    order.push(b);
                }
            }
        }
    }
    let order_of = |x: &PolymerGraph, a: usize, b: usize| -> Option<BondOrder> { x.bond_between(a, b).map(|bd| bd.order) };
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];

    fn extend(
        k: usize,
        order: &[usize],
        map: &mut [usize],
        used: &mut [bool],
        ok: &dyn Fn(usize, usize, &[usize]) -> bool,
    ) -> bool {
        if k == order.len() {
            return true;
        }
        let a = order[k];
        for c in 0..used.len() {
            if !used[c] && ok(a, c, map) {
                map[a] = c;
                used[c] = true;
                if extend(k + 1, order, map, used, ok) {
                    return true;
                }
                used[c] = false;
                map[a] = usize::MAX;
            }
        }
        false
    }

    let ok = |a: usize, c: usize, map: &[usize]| -> bool {
        if gs[a] != hs[c] {
            return false;
        }
        (0..n).filter(|&b| map[b] != usize::MAX).all(|b| order_of(g, a, b) == order_of(h, c, map[b]))
    };
    extend(0, &order, &mut map, &mut used, &ok)
}

pub fn naive_alignment(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..a.nrows() {
        let na = a.row(i).dot(&a.row(i)).sqrt();
        let nb = b.row(i).dot(&b.row(i)).sqrt();
        let mut d2 = 0.0;
        for k in 0..a.ncols() {
            let d = a[[i, k]] / na - b[[i, k]] / nb;
            d2 += d * d;
        }
        total += d2;
    }
    total / a.nrows() as f64
}

pub fn naive_uniformity(x: &Array2<f64>) -> f64 {
    let n = x.nrows();
    let mut sum = 0.0;
    let mut count = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let ni = x.row(i).dot(&x.row(i)).sqrt();
            let nj = x.row(j).dot(&x.row(j)).sqrt();
            let mut d2 = 0.0;
            for k in 0..x.ncols() {
                let d = x[[i, k]] / ni - x[[j, k]] / nj;
                d2 += d * d;
            }
            sum += (-2.0 * d2).exp();
            count += 1.0;
        }
    }
    (sum / count).ln()
}

/// 200 generated polymers x 8 enumeration seeds must canonicalize back to
/// the anchor; for <= 12 heavy atoms, canonical equality must match the
/// brute-force oracle in both directions. Panics on any violation.
pub fn check_smiles_soundness() {
    let start = Instant::now();
    let corpus = generate_polymers(200, 2024);
    let graphs: Vec<PolymerGraph> = corpus.iter().map(|s| parse(s).unwrap()).collect();
    let canon: Vec<String> = corpus.iter().map(|s| canonicalize(s).unwrap()).collect();

    let mut checked = 0;
    for (k, g) in graphs.iter().enumerate() {
        for seed in 0..8u64 {
            let e = enumerate_random(g, seed * 7919 + k as u64);
            assert_eq!(canonicalize(&e).unwrap(), canon[k], "{} enumerated as {e}", corpus[k]);
            if g.heavy_atom_count() <= 12 {
                assert!(isomorphic(g, &parse(&e).unwrap()), "{} vs {e}", corpus[k]);
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 1600);

    // Small molecules: equal canonical strings exactly when isomorphic.
    let small: Vec<usize> = (0..graphs.len()).filter(|&i| graphs[i].heavy_atom_count() <= 12).collect();
    let mut same_formula = 0;
    for (x, &i) in small.iter().enumerate() {
        for &j in &small[x + 1..] {
            let iso = isomorphic(&graphs[i], &graphs[j]);
            assert_eq!(canon[i] == canon[j], iso, "{} / {}", corpus[i], corpus[j]);
            let mut li: Vec<_> = graphs[i].atoms().iter().map(|a| a.label()).collect();
            let mut lj: Vec<_> = graphs[j].atoms().iter().map(|a| a.label()).collect();
            li.sort();
            lj.sort();
            same_formula += (li == lj) as usize;
        }
    }
    assert!(small.len() > 50, "only {} small molecules", small.len());
    assert!(same_formula > 0, "no same-formula pairs exercised the oracle");
    assert!(start.elapsed().as_secs() < 60);
}
