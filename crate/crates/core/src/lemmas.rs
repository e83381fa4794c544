//! Executable checks of the boundary inequalities for complete trees.
//!
//! Each sweep counts how many instances it checked and how many violated
//! the inequality. All boundaries are node boundaries in the tree itself,
//! computed with [`PhysicalGraph::node_boundary`].

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::graph::{tree_as_graph, PhysicalGraph};
use crate::pairing::{slots_of, Pairing};
use crate::vtree::{VirtualNodeId, VirtualTree};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LemmaReport {
    pub name: String,
    pub leaves: usize,
    pub checked: u64,
    pub violations: u64,
}

impl LemmaReport {
    fn new(name: &str, leaves: usize) -> Self {
        Self {
            name: name.to_string(),
            leaves,
            checked: 0,
            violations: 0,
        }
    }

    fn record(&mut self, ok: bool) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct TreeView {
    tree: VirtualTree,
    graph: PhysicalGraph,
}

impl TreeView {
    fn new(tree: &VirtualTree) -> Self {
        Self {
            tree: tree.clone(),
            graph: tree_as_graph(tree),
        }
    }

    fn idx(&self, v: VirtualNodeId) -> usize {
        self.graph.index_of(v.0).expect("tree node is a graph vertex")
    }

    fn indices(&self, vs: impl IntoIterator<Item = VirtualNodeId>) -> BTreeSet<usize> {
        vs.into_iter().map(|v| self.idx(v)).collect()
    }

    fn boundary(&self, s: &BTreeSet<usize>) -> BTreeSet<usize> {
        self.graph.node_boundary(s).expect("indices come from the graph")
    }

    // connected components of the subgraph induced by s
    fn components(&self, s: &BTreeSet<usize>) -> usize {
        let mut seen = BTreeSet::new();
        let mut count = 0;
        for &start in s {
            if !seen.insert(start) {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &w in self.graph.neighbors(u) {
                    if s.contains(&w) && seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
        }
        count
    }
}

fn subsets<T: Copy>(items: &[T]) -> impl Iterator<Item = Vec<T>> + '_ {
    assert!(items.len() < 63, "exhaustive sweep over {} items", items.len());
    (0u64..(1u64 << items.len())).map(move |mask| {
        items
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &x)| x)
            .collect()
    })
}

/// Connected nonempty `S ⊆ I(V_T)`: `|∂S| ≥ |S| + 1`, and `≥ |S| + 2` when
/// the root is not in `S`.
pub fn lemma_connected_boundary(tree: &VirtualTree) -> LemmaReport {
    let view = TreeView::new(tree);
    let root = view.idx(tree.root());
    let mut report = LemmaReport::new("connected-internal-boundary", tree.num_leaves());
    for s in subsets(&tree.internals()) {
        let s = view.indices(s);
        if s.is_empty() || view.components(&s) != 1 {
            continue;
        }
        let need = s.len() + if s.contains(&root) { 1 } else { 2 };
        report.record(view.boundary(&s).len() >= need);
    }
    report
}

/// Nonempty `S ⊆ I(V_T) \ {root}` with `m` components: `|∂S| ≥ |S| + m + 1`.
pub fn lemma_general_boundary(tree: &VirtualTree) -> LemmaReport {
    let view = TreeView::new(tree);
    let internals: Vec<_> = tree.internals().into_iter().filter(|&v| v != tree.root()).collect();
    let mut report = LemmaReport::new("general-internal-boundary", tree.num_leaves());
    for s in subsets(&internals) {
        let s = view.indices(s);
        if s.is_empty() {
            continue;
        }
        let m = view.components(&s);
        report.record(view.boundary(&s).len() > s.len() + m);
    }
    report
}

/// For every subtree `X` and `S ⊆ I(V_X)`: `|∂S ∩ V_X| ≥ |S|`, and
/// `≥ |S| + 1` when `S` is nonempty.
pub fn corollary_subtree_boundary(tree: &VirtualTree) -> LemmaReport {
    let view = TreeView::new(tree);
    let mut report = LemmaReport::new("subtree-boundary", tree.num_leaves());
    for x in tree.in_order() {
        let members = tree.subtree(x);
        let vx = view.indices(members.iter().copied());
        let internals: Vec<_> = members.into_iter().filter(|&v| tree.is_internal(v)).collect();
        for s in subsets(&internals) {
            let s = view.indices(s);
            let inside = view.boundary(&s).intersection(&vx).count();
            let need = s.len() + usize::from(!s.is_empty());
            report.record(inside >= need);
        }
    }
    report
}

// For one leaf set and its images, checks every maximal S-occupied subtree
// X: 2·|∂Q ∩ V_X| ≥ |V_X \ Q| where Q = S ∪ Π(S).
fn check_occupied(
    view: &TreeView,
    s: &BTreeSet<VirtualNodeId>,
    images: impl IntoIterator<Item = VirtualNodeId>,
    report: &mut LemmaReport,
) {
    let q = view.indices(s.iter().copied().chain(images));
    let boundary = view.boundary(&q);
    for x in view
        .tree
        .maximal_occupied_subtrees(s)
        .expect("S is a set of leaves")
    {
        let vx = view.indices(x.members.iter().copied());
        let on_boundary = boundary.intersection(&vx).count();
        let holes = vx.difference(&q).count();
        report.record(2 * on_boundary >= holes);
    }
}

/// Occupied-subtree hole bound, exhaustively over every leaf set `S` with
/// `1 ≤ |S| < n/2` and every injective assignment of slots to `S` (which
/// covers every pairing restricted to `S`).
pub fn lemma_occupied_exhaustive(tree: &VirtualTree) -> LemmaReport {
    let view = TreeView::new(tree);
    let leaves = tree.leaves();
    let slots = slots_of(tree);
    let n = leaves.len();
    let mut report = LemmaReport::new("occupied-subtree-holes", n);
    for s in subsets(&leaves) {
        if s.is_empty() || 2 * s.len() >= n {
            continue;
        }
        let set: BTreeSet<_> = s.iter().copied().collect();
        for_each_injection(s.len(), slots.len(), &mut |choice| {
            check_occupied(&view, &set, choice.iter().map(|&i| slots[i].node), &mut report);
        });
    }
    report
}

fn for_each_injection(k: usize, n: usize, f: &mut impl FnMut(&[usize])) {
    fn go(k: usize, n: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                go(k, n, used, cur, f);
                cur.pop();
                used[i] = false;
            }
        }
    }
    go(k, n, &mut vec![false; n], &mut Vec::with_capacity(k), f);
}

/// Randomized version of [`lemma_occupied_exhaustive`]: each sample draws a
/// uniform pairing and a leaf set with `1 ≤ |S| < n/2`. Half of the sets are
/// unions of contiguous leaf runs, so that large occupied subtrees appear.
pub fn lemma_occupied_sampled<R: Rng + ?Sized>(tree: &VirtualTree, samples: usize, rng: &mut R) -> LemmaReport {
    let view = TreeView::new(tree);
    let leaves = tree.leaves();
    let n = leaves.len();
    let mut report = LemmaReport::new("occupied-subtree-holes", n);
    if n < 3 {
        return report;
    }
    for i in 0..samples {
        let size = rng.random_range(1..n.div_ceil(2));
        let mut set = BTreeSet::new();
        if i % 2 == 0 {
            let mut shuffled = leaves.clone();
            shuffled.shuffle(rng);
            set.extend(shuffled.into_iter().take(size));
        } else {
            while set.len() < size {
                let start = rng.random_range(0..n);
                let len = rng.random_range(1..=size - set.len());
                set.extend(leaves.iter().skip(start).take(len).copied());
            }
        }
        let pairing = Pairing::random(tree, rng);
        let images: Vec<_> = set.iter().map(|&l| pairing.get(l).expect("paired").node).collect();
        check_occupied(&view, &set, images, &mut report);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn small_sweeps_pass() {
        for n in [4, 8] {
            let t = VirtualTree::build_complete(n).unwrap();
            for r in [
                lemma_connected_boundary(&t),
                lemma_general_boundary(&t),
                corollary_subtree_boundary(&t),
                lemma_occupied_exhaustive(&t),
            ] {
                assert!(r.checked > 0, "{r:?}");
                assert!(r.passed(), "{r:?}");
            }
        }
    }

    #[test]
    fn sweep_counts_four_leaves() {
        let t = VirtualTree::build_complete(4).unwrap();
        // internals a - r - b form a path: connected subsets {a},{r},{b},{a,r},{r,b},{a,r,b}
        assert_eq!(lemma_connected_boundary(&t).checked, 6);
        // nonempty subsets of {a, b}
        assert_eq!(lemma_general_boundary(&t).checked, 3);
        // |S| = 1: 4 leaf choices × 4 slot choices, one singleton subtree each
        assert_eq!(lemma_occupied_exhaustive(&t).checked, 16);
    }

    #[test]
    fn injections_are_counted_correctly() {
        let mut count = 0;
        for_each_injection(3, 5, &mut |_| count += 1);
        assert_eq!(count, 60);
    }

    #[test]
    fn sampled_sweep_runs() {
        let t = VirtualTree::build_complete(16).unwrap();
        let r = lemma_occupied_sampled(&t, 200, &mut rng_from_seed(1));
        assert!(r.checked >= 200);
        assert!(r.passed());
    }
}
