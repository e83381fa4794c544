//! Simple undirected graphs, node boundaries and exact node expansion.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use num_rational::Ratio;

use crate::error::{domain, Error, Result};
use crate::vtree::VirtualTree;

/// Default vertex cap for [`PhysicalGraph::exact_node_expansion`].
pub const EXACT_EXPANSION_CAP: usize = 20;

/// Hard ceiling for exhaustive enumeration regardless of the caller's cap.
const ENUMERATION_LIMIT: usize = 30;

/// A simple undirected graph.
///
/// Vertices carry `u32` labels (physical or virtual node ids) kept in
/// ascending order; all set-valued operations work on dense vertex indices
/// `0..num_vertices()`, where index `i` is the `i`-th smallest label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhysicalGraph {
    labels: Vec<u32>,
    adj: Vec<Vec<usize>>,
}

/// Minimum node expansion and a set attaining it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpansionResult {
    /// `|∂S| / |S|` for the witness.
    pub value: Ratio<u64>,
    /// Minimizing set, as sorted vertex indices.
    pub witness: Vec<usize>,
    pub boundary_size: usize,
}

impl PhysicalGraph {
    /// Builds a graph from vertex labels and labelled edges. Duplicate labels
    /// merge, self-loops are dropped and parallel edges collapse.
    pub fn from_edges(
        labels: impl IntoIterator<Item = u32>,
        edges: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self> {
        let mut labels: Vec<u32> = labels.into_iter().collect();
        labels.sort_unstable();
        labels.dedup();
        let mut adj = vec![Vec::new(); labels.len()];
        for (a, b) in edges {
            let (Ok(i), Ok(j)) = (labels.binary_search(&a), labels.binary_search(&b)) else {
                return domain(format!("edge ({a}, {b}) uses an unknown vertex"));
            };
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { labels, adj })
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> u32 {
        self.labels[v]
    }

    pub fn index_of(&self, label: u32) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Edges as index pairs `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for (u, list) in self.adj.iter().enumerate() {
            out.extend(list.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    /// Debug dump: one `"u v"` line per edge, labels in decimal, `u < v`,
    /// lines sorted.
    pub fn edge_list(&self) -> String {
        let mut pairs: Vec<(u32, u32)> = self
            .edges()
            .into_iter()
            .map(|(u, v)| (self.labels[u], self.labels[v]))
            .collect();
        pairs.sort_unstable();
        let mut out = String::new();
        for (u, v) in pairs {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    /// Vertices outside `s` adjacent to at least one vertex of `s`.
    pub fn node_boundary(&self, s: &BTreeSet<usize>) -> Result<BTreeSet<usize>> {
        if let Some(&bad) = s.iter().find(|&&v| v >= self.num_vertices()) {
            return domain(format!("node_boundary: vertex {bad} is not in the graph"));
        }
        Ok(s.iter()
            .flat_map(|&u| self.adj[u].iter().copied())
            .filter(|v| !s.contains(v))
            .collect())
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.num_vertices();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut comp = Vec::new();
            while let Some(u) = queue.pop_front() {
                comp.push(u);
                for &v in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() == 1
    }

    /// Exact node expansion `min |∂S|/|S|` over nonempty `S` with
    /// `|S| <= ⌊n/2⌋`, by exhaustive enumeration.
    ///
    /// Subsets are visited in Gray-code order so each step flips one vertex
    /// and the boundary size is updated in `O(deg)`. Ties go to the
    /// lexicographically smallest sorted witness.
    pub fn exact_node_expansion(&self, max_vertices: usize) -> Result<ExpansionResult> {
        let n = self.num_vertices();
        let limit = max_vertices.min(ENUMERATION_LIMIT);
        if n > limit {
            return Err(Error::Capacity {
                size: n,
                limit,
                hint: "use the spectral lambda2 proxy for graphs this large",
            });
        }
        if n < 2 {
            return domain("node expansion needs at least two vertices");
        }
        let half = n / 2;
        let mut in_s: u32 = 0;
        let mut size = 0usize;
        let mut touching = vec![0u32; n];
        let mut boundary = 0usize;
        let mut best: Option<(usize, usize, u32)> = None;

        for i in 1u64..(1u64 << n) {
            let u = i.trailing_zeros() as usize;
            let bit = 1u32 << u;
            if in_s & bit == 0 {
                if touching[u] > 0 {
                    boundary -= 1;
                }
                in_s |= bit;
                size += 1;
                for &w in &self.adj[u] {
                    touching[w] += 1;
                    if touching[w] == 1 && in_s & (1 << w) == 0 {
                        boundary += 1;
                    }
                }
            } else {
                in_s &= !bit;
                size -= 1;
                for &w in &self.adj[u] {
                    touching[w] -= 1;
                    if touching[w] == 0 && in_s & (1 << w) == 0 {
                        boundary -= 1;
                    }
                }
                if touching[u] > 0 {
                    boundary += 1;
                }
            }
            if size == 0 || size > half {
                continue;
            }
            let better = match best {
                None => true,
                Some((bb, bs, bm)) => {
                    let lhs = boundary * bs;
                    let rhs = bb * size;
                    lhs < rhs || (lhs == rhs && lex_less(in_s, bm))
                }
            };
            if better {
                best = Some((boundary, size, in_s));
            }
        }

        let (b, s, mask) = best.expect("n >= 2 admits a singleton set");
        Ok(ExpansionResult {
            value: Ratio::new(b as u64, s as u64),
            witness: (0..n).filter(|&v| mask & (1 << v) != 0).collect(),
            boundary_size: b,
        })
    }
}

// Lexicographic order of the sorted element lists encoded by two masks.
fn lex_less(a: u32, b: u32) -> bool {
    if a == b {
        return false;
    }
    let d = (a ^ b).trailing_zeros();
    let above = |m: u32| d < 31 && (m >> (d + 1)) != 0;
    if a & (1 << d) != 0 {
        above(b)
    } else {
        !above(a)
    }
}

/// The tree itself as a graph over virtual node ids.
pub fn tree_as_graph(tree: &VirtualTree) -> PhysicalGraph {
    PhysicalGraph::from_edges(
        tree.in_order().into_iter().map(|v| v.0),
        tree.edges().into_iter().map(|(p, c)| (p.0, c.0)),
    )
    .expect("tree edges only join tree nodes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: u32, edges: &[(u32, u32)]) -> PhysicalGraph {
        PhysicalGraph::from_edges(0..n, edges.iter().copied()).unwrap()
    }

    #[test]
    fn boundary_basics() {
        let path = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(path.node_boundary(&[1].into()).unwrap(), [0, 2].into());
        assert!(path.node_boundary(&[0, 1, 2].into()).unwrap().is_empty());
        assert!(path.node_boundary(&[5].into()).is_err());
    }

    #[test]
    fn boundary_in_four_leaf_tree() {
        let t = VirtualTree::build_complete(4).unwrap();
        let g = tree_as_graph(&t);
        let a = t.children(t.root()).unwrap()[0];
        let s = [g.index_of(a.0).unwrap()].into();
        let b = g.node_boundary(&s).unwrap();
        let labels: BTreeSet<u32> = b.iter().map(|&i| g.label(i)).collect();
        let [l1, l2] = t.children(a).unwrap();
        assert_eq!(labels, [t.root().0, l1.0, l2.0].into());
    }

    #[test]
    fn from_edges_simplifies() {
        let g = graph(3, &[(0, 1), (1, 0), (1, 1), (1, 2)]);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert!(PhysicalGraph::from_edges(0..2, [(0, 7)]).is_err());
    }

    #[test]
    fn components() {
        assert!(graph(0, &[]).connected_components().is_empty());
        let g = graph(4, &[(0, 1), (2, 3)]);
        assert_eq!(g.connected_components(), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn tree_graph_shape() {
        let t = VirtualTree::build_complete(2).unwrap();
        let g = tree_as_graph(&t);
        assert_eq!((g.num_vertices(), g.num_edges()), (3, 2));
        for n in [4usize, 8, 32] {
            let t = VirtualTree::build_complete(n).unwrap();
            let g = tree_as_graph(&t);
            assert_eq!((g.num_vertices(), g.num_edges()), (2 * n - 1, 2 * n - 2));
            for v in t.in_order() {
                let d = g.degree(g.index_of(v.0).unwrap());
                let want = if t.is_leaf(v) {
                    1
                } else if v == t.root() {
                    2
                } else {
                    3
                };
                assert_eq!(d, want);
            }
        }
    }

    #[test]
    fn expansion_of_cycle_and_path() {
        let cycle = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let r = cycle.exact_node_expansion(EXACT_EXPANSION_CAP).unwrap();
        assert_eq!(r.value, Ratio::new(1, 1));
        assert_eq!(r.witness, vec![0, 1]);

        let path = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let r = path.exact_node_expansion(EXACT_EXPANSION_CAP).unwrap();
        assert_eq!(r.value, Ratio::new(1, 2));
        assert_eq!(r.witness, vec![0, 1]);
        assert_eq!(r.boundary_size, 1);
    }

    #[test]
    fn expansion_capacity_and_tiny_graphs() {
        let big = graph(21, &[]);
        assert!(matches!(
            big.exact_node_expansion(EXACT_EXPANSION_CAP),
            Err(Error::Capacity { size: 21, limit: 20, .. })
        ));
        assert!(graph(1, &[]).exact_node_expansion(20).is_err());
        // disconnected graphs have zero expansion
        let r = graph(4, &[(0, 1), (2, 3)]).exact_node_expansion(20).unwrap();
        assert_eq!(r.value, Ratio::new(0, 1));
        assert_eq!(r.witness, vec![0, 1]);
    }

    #[test]
    fn lex_order_on_masks() {
        // {0,1} < {0,1,2} < {0,2} < {1}
        let sets = [0b011u32, 0b111, 0b101, 0b010];
        for (i, &a) in sets.iter().enumerate() {
            for (j, &b) in sets.iter().enumerate() {
                assert_eq!(lex_less(a, b), i < j, "{a:b} vs {b:b}");
            }
        }
    }

    #[test]
    fn edge_list_format() {
        let g = PhysicalGraph::from_edges([10, 3, 7], [(10, 3), (7, 3)]).unwrap();
        assert_eq!(g.edge_list(), "3 7\n3 10\n");
    }
}
