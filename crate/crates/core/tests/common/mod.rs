// Independent reference implementations shared by the integration tests.
// None of these call into the library's algorithms beyond plain accessors.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use rand::Rng;
use treeweave::pairing::{Pairing, RootLinks, SlotCopy};
use treeweave::{PhysicalGraph, VirtualTree};

/// Exact node expansion by plain bitmask enumeration: for every subset in
/// increasing mask order, the boundary is recomputed from scratch as
/// `N(S) \ S` using neighbour masks. Returns the value and the
/// lexicographically smallest sorted minimizer.
pub fn expansion_oracle(g: &PhysicalGraph) -> (Ratio<u64>, Vec<usize>) {
    let n = g.num_vertices();
    assert!((2..=24).contains(&n));
    let nbr: Vec<u64> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(0u64, |m, &w| m | 1 << w))
        .collect();
    let mut best: Option<(Ratio<u64>, Vec<usize>)> = None;
    for mask in 1u64..(1 << n) {
        let size = mask.count_ones() as usize;
        if size > n / 2 {
            continue;
        }
        let mut reach = 0u64;
        for (v, &nb) in nbr.iter().enumerate() {
            if mask >> v & 1 == 1 {
                reach |= nb;
            }
        }
        let boundary = (reach & !mask).count_ones() as u64;
        let value = Ratio::new(boundary, size as u64);
        let members: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        let replace = match &best {
            None => true,
            Some((bv, bm)) => value < *bv || (value == *bv && members < *bm),
        };
        if replace {
            best = Some((value, members));
        }
    }
    best.unwrap()
}

/// Contraction by walking every tree edge and mapping both endpoints to
/// the owners of their copies, written against the raw pairing entries.
pub fn contraction_oracle(tree: &VirtualTree, pairing: &Pairing, links: RootLinks) -> BTreeSet<(u32, u32)> {
    let mut owners: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for (leaf, slot) in pairing.iter() {
        owners.entry(leaf.0).or_default().push(leaf.0);
        let counts = slot.copy == SlotCopy::Primary || links == RootLinks::Shared;
        if counts {
            owners.entry(slot.node.0).or_default().push(leaf.0);
        }
    }
    let mut edges = BTreeSet::new();
    for v in tree.in_order() {
        let Some(children) = tree.children(v) else { continue };
        for c in children {
            for &p in &owners[&v.0] {
                for &q in &owners[&c.0] {
                    if p != q {
                        edges.insert((p.min(q), p.max(q)));
                    }
                }
            }
        }
    }
    edges
}

pub fn labelled_edges(g: &PhysicalGraph) -> BTreeSet<(u32, u32)> {
    g.edges()
        .into_iter()
        .map(|(a, b)| {
            let (x, y) = (g.label(a), g.label(b));
            (x.min(y), x.max(y))
        })
        .collect()
}

/// A pairing as a matching: leaf → internal node, with root copies identified.
pub fn matching_key(p: &Pairing) -> Vec<(u32, u32)> {
    p.iter().map(|(l, s)| (l.0, s.node.0)).collect()
}

/// Erdős–Rényi G(n, p) over labels 0..n.
pub fn random_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> PhysicalGraph {
    let mut edges = Vec::new();
    for a in 0..n as u32 {
        for b in a + 1..n as u32 {
            if rng.random_bool(p) {
                edges.push((a, b));
            }
        }
    }
    PhysicalGraph::from_edges(0..n as u32, edges).unwrap()
}

pub fn chi_square(counts: &[u64], expected: f64) -> f64 {
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}

/// Two-pass mean and sample standard deviation.
pub fn two_pass(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mut mean = 0.0;
    for x in xs {
        mean += x;
    }
    mean /= n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let mut ss = 0.0;
    for x in xs {
        ss += (x - mean) * (x - mean);
    }
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Average ranks (ties share the mean rank).
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (ranks(xs), ranks(ys));
    let (mx, _) = two_pass(&rx);
    let (my, _) = two_pass(&ry);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
