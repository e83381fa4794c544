//! The virtual binary tree overlay.
//!
//! Every node is either a leaf or has exactly two children, and each node
//! caches the number of leaves below it. Node ids are allocated from a
//! counter and never reused, so an id names the same virtual node across
//! rotations, splices and the whole lifetime of a simulation run.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Stable identifier of a virtual node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VirtualNodeId(pub u32);

impl VirtualNodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VirtualNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Node {
    parent: Option<VirtualNodeId>,
    children: Option<[VirtualNodeId; 2]>,
    leaf_count: u32,
}

/// A full binary tree of virtual nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VirtualTree {
    nodes: Vec<Option<Node>>,
    root: VirtualNodeId,
    live: usize,
}

/// A set of virtual nodes forming one subtree, e.g. a maximal S-occupied
/// subtree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubtreeSet {
    pub root: VirtualNodeId,
    pub members: BTreeSet<VirtualNodeId>,
}

impl VirtualTree {
    /// Complete binary tree with `num_leaves` leaves. Ids are assigned in
    /// heap order: the root is 0 and node `i` has children `2i+1`, `2i+2`.
    pub fn build_complete(num_leaves: usize) -> Result<Self> {
        if num_leaves < 2 || !num_leaves.is_power_of_two() {
            return domain(format!(
                "complete tree needs a power-of-two leaf count >= 2, got {num_leaves}"
            ));
        }
        if num_leaves > (u32::MAX as usize) / 4 {
            return domain(format!("leaf count {num_leaves} too large"));
        }
        let total = 2 * num_leaves - 1;
        let internals = num_leaves - 1;
        let mut nodes = Vec::with_capacity(total);
        for i in 0..total {
            let parent = (i > 0).then(|| VirtualNodeId(((i - 1) / 2) as u32));
            let children = (i < internals)
                .then(|| [VirtualNodeId((2 * i + 1) as u32), VirtualNodeId((2 * i + 2) as u32)]);
            nodes.push(Some(Node {
                parent,
                children,
                leaf_count: 0,
            }));
        }
        for i in (0..total).rev() {
            let count = match nodes[i].as_ref().and_then(|n| n.children) {
                None => 1,
                Some([l, r]) => {
                    nodes[l.index()].as_ref().map_or(0, |n| n.leaf_count)
                        + nodes[r.index()].as_ref().map_or(0, |n| n.leaf_count)
                }
            };
            if let Some(n) = nodes[i].as_mut() {
                n.leaf_count = count;
            }
        }
        Ok(Self {
            nodes,
            root: VirtualNodeId(0),
            live: total,
        })
    }

    fn node(&self, id: VirtualNodeId) -> &Node {
        self.nodes[id.index()]
            .as_ref()
            .unwrap_or_else(|| panic!("{id} is not in the tree"))
    }

    fn node_mut(&mut self, id: VirtualNodeId) -> &mut Node {
        self.nodes[id.index()]
            .as_mut()
            .unwrap_or_else(|| panic!("{id} is not in the tree"))
    }

    fn alloc(&mut self, node: Node) -> VirtualNodeId {
        let id = VirtualNodeId(self.nodes.len() as u32);
        self.nodes.push(Some(node));
        self.live += 1;
        id
    }

    pub fn root(&self) -> VirtualNodeId {
        self.root
    }

    /// Number of live virtual nodes.
    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    /// One past the largest id ever allocated in this tree.
    pub fn id_bound(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.node(self.root).leaf_count as usize
    }

    pub fn num_internals(&self) -> usize {
        self.live - self.num_leaves()
    }

    pub fn contains(&self, id: VirtualNodeId) -> bool {
        self.nodes.get(id.index()).is_some_and(Option::is_some)
    }

    pub fn is_leaf(&self, id: VirtualNodeId) -> bool {
        self.contains(id) && self.node(id).children.is_none()
    }

    pub fn is_internal(&self, id: VirtualNodeId) -> bool {
        self.contains(id) && self.node(id).children.is_some()
    }

    pub fn parent(&self, id: VirtualNodeId) -> Option<VirtualNodeId> {
        self.node(id).parent
    }

    pub fn children(&self, id: VirtualNodeId) -> Option<[VirtualNodeId; 2]> {
        self.node(id).children
    }

    pub fn leaf_count(&self, id: VirtualNodeId) -> usize {
        self.node(id).leaf_count as usize
    }

    /// All live nodes in in-order (left subtree, node, right subtree).
    pub fn in_order(&self) -> Vec<VirtualNodeId> {
        let mut out = Vec::with_capacity(self.live);
        let mut stack = Vec::new();
        let mut cur = Some(self.root);
        while cur.is_some() || !stack.is_empty() {
            while let Some(id) = cur {
                stack.push(id);
                cur = self.node(id).children.map(|[l, _]| l);
            }
            let Some(id) = stack.pop() else { break };
            out.push(id);
            cur = self.node(id).children.map(|[_, r]| r);
        }
        out
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<VirtualNodeId> {
        self.in_order().into_iter().filter(|&v| self.is_leaf(v)).collect()
    }

    /// Internal nodes in in-order.
    pub fn internals(&self) -> Vec<VirtualNodeId> {
        self.in_order()
            .into_iter()
            .filter(|&v| self.is_internal(v))
            .collect()
    }

    /// Tree edges as (parent, child) pairs, in pre-order.
    pub fn edges(&self) -> Vec<(VirtualNodeId, VirtualNodeId)> {
        let mut out = Vec::with_capacity(self.live.saturating_sub(1));
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            if let Some([l, r]) = self.node(v).children {
                out.push((v, l));
                out.push((v, r));
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }

    pub fn depth(&self, id: VirtualNodeId) -> usize {
        let mut d = 0;
        let mut cur = id;
        while let Some(p) = self.node(cur).parent {
            d += 1;
            cur = p;
        }
        d
    }

    /// Depth of every live node, indexed by id (dead slots hold 0).
    pub fn depths(&self) -> Vec<usize> {
        let mut out = vec![0; self.nodes.len()];
        let mut stack = vec![(self.root, 0usize)];
        while let Some((v, d)) = stack.pop() {
            out[v.index()] = d;
            if let Some([l, r]) = self.node(v).children {
                stack.push((l, d + 1));
                stack.push((r, d + 1));
            }
        }
        out
    }

    /// Height (longest downward path to a leaf) of every live node,
    /// indexed by id. Leaves have height 0.
    pub fn heights(&self) -> Vec<usize> {
        let mut out = vec![0; self.nodes.len()];
        // reverse pre-order visits children before parents
        let mut order = Vec::with_capacity(self.live);
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            if let Some([l, r]) = self.node(v).children {
                stack.push(l);
                stack.push(r);
            }
        }
        for &v in order.iter().rev() {
            if let Some([l, r]) = self.node(v).children {
                out[v.index()] = 1 + out[l.index()].max(out[r.index()]);
            }
        }
        out
    }

    pub fn height(&self) -> usize {
        self.heights()[self.root.index()]
    }

    /// (min, max) depth over all leaves.
    pub fn leaf_depth_range(&self) -> (usize, usize) {
        let depths = self.depths();
        self.leaves()
            .into_iter()
            .map(|l| depths[l.index()])
            .fold((usize::MAX, 0), |(lo, hi), d| (lo.min(d), hi.max(d)))
    }

    pub fn is_ancestor_or_self(&self, anc: VirtualNodeId, mut v: VirtualNodeId) -> bool {
        loop {
            if v == anc {
                return true;
            }
            match self.node(v).parent {
                Some(p) => v = p,
                None => return false,
            }
        }
    }

    /// Lowest common ancestor of two live nodes.
    pub fn lca(&self, a: VirtualNodeId, b: VirtualNodeId) -> VirtualNodeId {
        let (mut a, mut b) = (a, b);
        let (mut da, mut db) = (self.depth(a), self.depth(b));
        while da > db {
            a = self.node(a).parent.expect("depth > 0 has a parent");
            da -= 1;
        }
        while db > da {
            b = self.node(b).parent.expect("depth > 0 has a parent");
            db -= 1;
        }
        while a != b {
            a = self.node(a).parent.expect("distinct nodes below the root");
            b = self.node(b).parent.expect("distinct nodes below the root");
        }
        a
    }

    /// All nodes of the subtree rooted at `id`, in pre-order.
    pub fn subtree(&self, id: VirtualNodeId) -> Vec<VirtualNodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(v) = stack.pop() {
            out.push(v);
            if let Some([l, r]) = self.node(v).children {
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }

    /// Draws a leaf by descending from the root, choosing each child with
    /// probability proportional to its leaf count. The result is uniform
    /// over all leaves regardless of shape.
    pub fn sample_leaf<R: Rng + ?Sized>(&self, rng: &mut R) -> VirtualNodeId {
        self.sample_leaf_with_hops(rng).0
    }

    /// As [`Self::sample_leaf`], also returning the number of tree edges
    /// the probe token travelled on the way down.
    pub fn sample_leaf_with_hops<R: Rng + ?Sized>(&self, rng: &mut R) -> (VirtualNodeId, usize) {
        let mut cur = self.root;
        let mut hops = 0;
        while let Some([l, r]) = self.node(cur).children {
            let total = self.node(cur).leaf_count;
            let left = self.node(l).leaf_count;
            cur = if rng.random_range(0..total) < left { l } else { r };
            hops += 1;
        }
        (cur, hops)
    }

    fn replace_child(&mut self, parent: Option<VirtualNodeId>, old: VirtualNodeId, new: VirtualNodeId) {
        match parent {
            None => self.root = new,
            Some(p) => {
                let ch = self.node_mut(p).children.as_mut().expect("parent is internal");
                if ch[0] == old {
                    ch[0] = new;
                } else {
                    debug_assert_eq!(ch[1], old);
                    ch[1] = new;
                }
            }
        }
    }

    fn add_to_ancestors(&mut self, start: Option<VirtualNodeId>, delta: i64) {
        let mut cur = start;
        while let Some(v) = cur {
            let n = self.node_mut(v);
            n.leaf_count = (n.leaf_count as i64 + delta) as u32;
            cur = n.parent;
        }
    }

    /// Joins one leaf and one internal node at `at_leaf`: a fresh internal
    /// node takes the leaf's position, with the old leaf as its left child
    /// and a fresh leaf as its right child. Returns `(new_leaf, new_internal)`.
    pub fn insert_pair(&mut self, at_leaf: VirtualNodeId) -> Result<(VirtualNodeId, VirtualNodeId)> {
        if !self.is_leaf(at_leaf) {
            return domain(format!("insert_pair: {at_leaf} is not a leaf"));
        }
        let parent = self.node(at_leaf).parent;
        let internal = self.alloc(Node {
            parent,
            children: None,
            leaf_count: 2,
        });
        let leaf = self.alloc(Node {
            parent: Some(internal),
            children: None,
            leaf_count: 1,
        });
        self.node_mut(internal).children = Some([at_leaf, leaf]);
        self.node_mut(at_leaf).parent = Some(internal);
        self.replace_child(parent, at_leaf, internal);
        self.add_to_ancestors(parent, 1);
        Ok((leaf, internal))
    }

    /// Shrinks the tree by one leaf and one internal node. A deepest leaf
    /// (`leaf` itself when it is one of the deepest, otherwise the leftmost
    /// deepest) is deleted together with its parent, and its sibling takes
    /// the parent's place. Returns `(removed_leaf, removed_internal)`.
    pub fn remove_pair(&mut self, leaf: VirtualNodeId) -> Result<(VirtualNodeId, VirtualNodeId)> {
        if !self.is_leaf(leaf) {
            return domain(format!("remove_pair: {leaf} is not a leaf"));
        }
        if self.num_leaves() <= 2 {
            return domain("remove_pair: tree is already down to a single pair");
        }
        let depths = self.depths();
        let leaves = self.leaves();
        let max_depth = leaves.iter().map(|l| depths[l.index()]).max().unwrap_or(0);
        let victim = if depths[leaf.index()] == max_depth {
            leaf
        } else {
            *leaves
                .iter()
                .find(|l| depths[l.index()] == max_depth)
                .expect("some leaf attains the maximum depth")
        };
        let parent = self.node(victim).parent.expect("tree has more than one node");
        let [l, r] = self.node(parent).children.expect("parent is internal");
        let sibling = if l == victim { r } else { l };
        let grand = self.node(parent).parent;
        self.node_mut(sibling).parent = grand;
        self.replace_child(grand, parent, sibling);
        self.add_to_ancestors(grand, -1);
        self.nodes[victim.index()] = None;
        self.nodes[parent.index()] = None;
        self.live -= 2;
        Ok((victim, parent))
    }

    // x(y(a, b), c) -> y(a, x(b, c))
    fn rotate_right(&mut self, x: VirtualNodeId) {
        let [y, c] = self.node(x).children.expect("rotate_right on a leaf");
        let [a, b] = self.node(y).children.expect("rotate_right needs an internal left child");
        let xp = self.node(x).parent;
        self.replace_child(xp, x, y);
        self.node_mut(y).parent = xp;
        self.node_mut(y).children = Some([a, x]);
        self.node_mut(x).parent = Some(y);
        self.node_mut(x).children = Some([b, c]);
        self.node_mut(b).parent = Some(x);
        self.node_mut(x).leaf_count = self.node(b).leaf_count + self.node(c).leaf_count;
        self.node_mut(y).leaf_count = self.node(a).leaf_count + self.node(x).leaf_count;
    }

    // x(a, y(b, c)) -> y(x(a, b), c)
    fn rotate_left(&mut self, x: VirtualNodeId) {
        let [a, y] = self.node(x).children.expect("rotate_left on a leaf");
        let [b, c] = self.node(y).children.expect("rotate_left needs an internal right child");
        let xp = self.node(x).parent;
        self.replace_child(xp, x, y);
        self.node_mut(y).parent = xp;
        self.node_mut(y).children = Some([x, c]);
        self.node_mut(x).parent = Some(y);
        self.node_mut(x).children = Some([a, b]);
        self.node_mut(b).parent = Some(x);
        self.node_mut(x).leaf_count = self.node(a).leaf_count + self.node(b).leaf_count;
        self.node_mut(y).leaf_count = self.node(x).leaf_count + self.node(c).leaf_count;
    }

    /// Restores leaf depths to within one of each other using rotations
    /// only, and returns how many rotations were applied. Trees that are
    /// already balanced are left untouched.
    ///
    /// The internal nodes are treated as a search tree whose external
    /// positions are the leaves: they are first rotated into a right vine
    /// and then compressed into a complete shape (Day-Stout-Warren).
    pub fn rebalance(&mut self) -> usize {
        let (lo, hi) = self.leaf_depth_range();
        if hi - lo <= 1 {
            return 0;
        }
        let mut rotations = 0;

        // tree -> vine: every internal node ends up with a leaf on its left
        let mut cur = Some(self.root);
        while let Some(x) = cur {
            let [l, r] = self.node(x).children.expect("vine walk stays on internals");
            if self.is_internal(l) {
                self.rotate_right(x);
                rotations += 1;
                cur = Some(l);
            } else {
                cur = self.is_internal(r).then_some(r);
            }
        }

        // vine -> complete tree
        let m = self.num_internals();
        let full = 1usize << (usize::BITS - 1 - (m + 1).leading_zeros());
        let extra = m + 1 - full;
        rotations += self.compress(extra);
        let mut size = m - extra;
        while size > 1 {
            size /= 2;
            rotations += self.compress(size);
        }
        rotations
    }

    // One DSW compression pass: left-rotate every other node along the
    // right spine, `count` times.
    fn compress(&mut self, count: usize) -> usize {
        let mut child = self.root;
        for i in 0..count {
            let [_, grand] = self.node(child).children.expect("spine node is internal");
            self.rotate_left(child);
            if i + 1 < count {
                child = self.node(grand).children.expect("spine continues")[1];
            }
        }
        count
    }

    /// Decomposes a leaf set `s` into its maximal S-occupied subtrees:
    /// subtrees whose leaves all lie in `s` and whose parent's subtree does
    /// not. Results are ordered by the in-order position of their roots.
    pub fn maximal_occupied_subtrees(&self, s: &BTreeSet<VirtualNodeId>) -> Result<Vec<SubtreeSet>> {
        if let Some(bad) = s.iter().find(|v| !self.is_leaf(**v)) {
            return domain(format!("maximal_occupied_subtrees: {bad} is not a leaf"));
        }
        if s.is_empty() {
            return Ok(Vec::new());
        }
        let mut occupied = vec![false; self.nodes.len()];
        let mut order = Vec::with_capacity(self.live);
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            if let Some([l, r]) = self.node(v).children {
                stack.push(l);
                stack.push(r);
            }
        }
        for &v in order.iter().rev() {
            occupied[v.index()] = match self.node(v).children {
                None => s.contains(&v),
                Some([l, r]) => occupied[l.index()] && occupied[r.index()],
            };
        }
        Ok(self
            .in_order()
            .into_iter()
            .filter(|&v| {
                occupied[v.index()] && self.node(v).parent.is_none_or(|p| !occupied[p.index()])
            })
            .map(|root| SubtreeSet {
                root,
                members: self.subtree(root).into_iter().collect(),
            })
            .collect())
    }

    /// Checks the structural invariants: parent/child links agree, every
    /// node has zero or two children, cached leaf counts are exact, and
    /// leaves outnumber internal nodes by one.
    pub fn audit(&self) -> Result<()> {
        if !self.contains(self.root) || self.node(self.root).parent.is_some() {
            return domain("audit: root missing or has a parent");
        }
        let mut seen = 0usize;
        let mut leaves = 0usize;
        let mut stack = vec![self.root];
        let mut order = Vec::new();
        while let Some(v) = stack.pop() {
            seen += 1;
            if seen > self.live {
                return domain("audit: cycle or stray node reachable from root");
            }
            order.push(v);
            match self.node(v).children {
                None => leaves += 1,
                Some([l, r]) => {
                    for c in [l, r] {
                        if !self.contains(c) {
                            return domain(format!("audit: {v} has dead child {c}"));
                        }
                        if self.node(c).parent != Some(v) {
                            return domain(format!("audit: {c} does not point back to {v}"));
                        }
                        stack.push(c);
                    }
                    if l == r {
                        return domain(format!("audit: {v} has a repeated child"));
                    }
                }
            }
        }
        if seen != self.live {
            return domain(format!("audit: {} live nodes but {seen} reachable", self.live));
        }
        if leaves != self.live - leaves + 1 {
            return domain(format!(
                "audit: {leaves} leaves vs {} internals",
                self.live - leaves
            ));
        }
        for &v in order.iter().rev() {
            let want = match self.node(v).children {
                None => 1,
                Some([l, r]) => self.node(l).leaf_count + self.node(r).leaf_count,
            };
            if self.node(v).leaf_count != want {
                return domain(format!(
                    "audit: {v} caches leaf_count {} but has {want}",
                    self.node(v).leaf_count
                ));
            }
        }
        Ok(())
    }
}
