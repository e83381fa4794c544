//! Leaf-to-internal pairings and their contraction into the physical graph.
//!
//! A full binary tree with `n` leaves has `n - 1` internal nodes. Counting
//! the root twice gives `n` internal slots, and a pairing is a bijection
//! from leaves onto those slots. Contracting every leaf with its slot
//! yields one physical node per leaf.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::graph::PhysicalGraph;
use crate::vtree::{VirtualNodeId, VirtualTree};

/// Which copy of an internal node a slot refers to. Only the root has a
/// duplicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SlotCopy {
    Primary,
    RootDuplicate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InternalSlot {
    pub node: VirtualNodeId,
    pub copy: SlotCopy,
}

impl InternalSlot {
    pub fn primary(node: VirtualNodeId) -> Self {
        Self {
            node,
            copy: SlotCopy::Primary,
        }
    }

    pub fn root_duplicate(node: VirtualNodeId) -> Self {
        Self {
            node,
            copy: SlotCopy::RootDuplicate,
        }
    }
}

impl fmt::Display for InternalSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.copy {
            SlotCopy::Primary => write!(f, "{}", self.node),
            SlotCopy::RootDuplicate => write!(f, "{}'", self.node),
        }
    }
}

/// Identifier of a physical node, which manages one leaf and one slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PhysicalNodeId(pub u32);

impl fmt::Display for PhysicalNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Bijection from leaves to internal slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pairing {
    map: BTreeMap<VirtualNodeId, InternalSlot>,
}

/// The slots of `tree` in in-order, with the root duplicate appended last.
pub fn slots_of(tree: &VirtualTree) -> Vec<InternalSlot> {
    let mut slots: Vec<_> = tree.internals().into_iter().map(InternalSlot::primary).collect();
    slots.push(InternalSlot::root_duplicate(tree.root()));
    slots
}

impl Pairing {
    /// Builds a pairing from explicit entries, without validating it
    /// against any tree. Use [`Pairing::audit`] for that.
    pub fn from_entries(entries: impl IntoIterator<Item = (VirtualNodeId, InternalSlot)>) -> Self {
        Self {
            map: entries.into_iter().collect(),
        }
    }

    /// Deterministic, maximally biased start: the i-th leaf in in-order is
    /// paired with the i-th slot in in-order, root duplicate last.
    pub fn canonical(tree: &VirtualTree) -> Self {
        Self {
            map: tree.leaves().into_iter().zip(slots_of(tree)).collect(),
        }
    }

    /// Uniform random bijection (Fisher-Yates over the slot list).
    pub fn random<R: Rng + ?Sized>(tree: &VirtualTree, rng: &mut R) -> Self {
        let mut slots = slots_of(tree);
        slots.shuffle(rng);
        Self {
            map: tree.leaves().into_iter().zip(slots).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, leaf: VirtualNodeId) -> Option<InternalSlot> {
        self.map.get(&leaf).copied()
    }

    /// Entries ordered by leaf id.
    pub fn iter(&self) -> impl Iterator<Item = (VirtualNodeId, InternalSlot)> + '_ {
        self.map.iter().map(|(&l, &s)| (l, s))
    }

    /// Leaf currently paired with `slot`. Linear scan.
    pub fn leaf_of(&self, slot: InternalSlot) -> Option<VirtualNodeId> {
        self.map.iter().find(|(_, &s)| s == slot).map(|(&l, _)| l)
    }

    pub(crate) fn set(&mut self, leaf: VirtualNodeId, slot: InternalSlot) {
        self.map.insert(leaf, slot);
    }

    pub(crate) fn remove(&mut self, leaf: VirtualNodeId) -> Option<InternalSlot> {
        self.map.remove(&leaf)
    }

    /// Exchanges the slots of two leaves.
    pub fn swap(&mut self, a: VirtualNodeId, b: VirtualNodeId) -> Result<()> {
        let (Some(sa), Some(sb)) = (self.get(a), self.get(b)) else {
            return domain(format!("swap: {a} or {b} is not paired"));
        };
        self.map.insert(a, sb);
        self.map.insert(b, sa);
        Ok(())
    }

    /// Value-returning form of [`Pairing::swap`].
    pub fn swapped(&self, a: VirtualNodeId, b: VirtualNodeId) -> Result<Self> {
        let mut out = self.clone();
        out.swap(a, b)?;
        Ok(out)
    }

    /// The matching with root copies identified: leaf -> internal node.
    pub fn matching(&self) -> Vec<(VirtualNodeId, VirtualNodeId)> {
        self.map.iter().map(|(&l, s)| (l, s.node)).collect()
    }

    /// Checks that this is a bijection from the leaves of `tree` onto its
    /// internal slots.
    pub fn audit(&self, tree: &VirtualTree) -> Result<()> {
        let leaves = tree.leaves();
        if self.map.len() != leaves.len() {
            return domain(format!(
                "pairing has {} entries for {} leaves",
                self.map.len(),
                leaves.len()
            ));
        }
        if let Some(l) = leaves.iter().find(|l| !self.map.contains_key(l)) {
            return domain(format!("leaf {l} is unpaired"));
        }
        let want: BTreeSet<_> = slots_of(tree).into_iter().collect();
        let got: BTreeSet<_> = self.map.values().copied().collect();
        if got.len() != self.map.len() {
            return domain("two leaves share a slot");
        }
        if got != want {
            return domain("pairing image differs from the tree's slot set");
        }
        Ok(())
    }
}

/// What the duplicate root slot is adjacent to in the contraction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootLinks {
    /// Both copies carry every root adjacency (each is adjacent to both
    /// root children). A root child's slot owner then sees two root owners
    /// and can reach degree 5.
    Shared,
    /// Only the primary copy carries root adjacencies; the duplicate's
    /// owner is attached through its leaf alone. Keeps every degree ≤ 4.
    #[default]
    PrimaryOnly,
}

impl fmt::Display for RootLinks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RootLinks::Shared => "shared",
            RootLinks::PrimaryOnly => "primary_only",
        })
    }
}

impl FromStr for RootLinks {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(RootLinks::Shared),
            "primary_only" => Ok(RootLinks::PrimaryOnly),
            other => domain(format!("unknown root link model {other:?}")),
        }
    }
}

/// Contracts every (leaf, slot) pair into one physical node, labelled by
/// the leaf's id, with the default [`RootLinks`].
pub fn contract(tree: &VirtualTree, pairing: &Pairing) -> Result<PhysicalGraph> {
    contract_using(tree, pairing, RootLinks::default())
}

pub fn contract_using(tree: &VirtualTree, pairing: &Pairing, links: RootLinks) -> Result<PhysicalGraph> {
    contract_with(tree, pairing, links, |leaf| PhysicalNodeId(leaf.0))
}

/// Contraction with caller-chosen labels for the physical nodes.
///
/// No edge joins the two root copies themselves. Self-loops vanish and
/// parallel edges collapse.
pub fn contract_with<F>(
    tree: &VirtualTree,
    pairing: &Pairing,
    links: RootLinks,
    mut label: F,
) -> Result<PhysicalGraph>
where
    F: FnMut(VirtualNodeId) -> PhysicalNodeId,
{
    pairing.audit(tree)?;
    let bound = tree.id_bound();
    // owners[v] lists the physical labels managing virtual node v
    let mut owners: Vec<[Option<u32>; 2]> = vec![[None, None]; bound];
    let mut labels = Vec::with_capacity(pairing.len());
    for (leaf, slot) in pairing.iter() {
        let p = label(leaf).0;
        labels.push(p);
        owners[leaf.index()][0] = Some(p);
        let cell = &mut owners[slot.node.index()];
        match slot.copy {
            SlotCopy::Primary => cell[0] = Some(p),
            SlotCopy::RootDuplicate => cell[1] = Some(p),
        }
    }
    let mut edges = Vec::with_capacity(2 * labels.len());
    for (parent, child) in tree.edges() {
        let c = owners[child.index()][0].expect("every child has a primary owner");
        let parent_owners = match links {
            RootLinks::Shared => &owners[parent.index()][..],
            RootLinks::PrimaryOnly => &owners[parent.index()][..1],
        };
        for &p in parent_owners.iter().flatten() {
            if p != c {
                edges.push((p.min(c), p.max(c)));
            }
        }
    }
    let graph = PhysicalGraph::from_edges(labels.iter().copied(), edges)?;
    if graph.num_vertices() != labels.len() {
        return domain("contract: label function is not injective");
    }
    Ok(graph)
}
