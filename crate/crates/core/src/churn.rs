//! Dynamic scenarios: joins, adversarial leaves, rebalancing and mixing.
//!
//! Each physical node manages exactly one leaf and one internal slot, and
//! the pairing is always the relation "same owner". Rounds are grouped in
//! cycles: join, leave, rebalance + mix, then mixing only. λ₂ of the
//! contracted graph is measured at the end of every round.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PhysicalGraph;
use crate::mixing::{mix_round, MixRoundStats};
use crate::pairing::{contract_with, InternalSlot, Pairing, PhysicalNodeId, RootLinks};
use crate::report::{round_sig9, Phase, RoundTrace};
use crate::rng::{rng_from_seed, run_seed};
use crate::spectral::{lambda2, DEFAULT_TOLERANCE};
use crate::vtree::{VirtualNodeId, VirtualTree};

/// Which physical node the adversary removes next.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adversary {
    /// Largest height metric, ties to the smallest id.
    #[default]
    HighestH,
    /// Uniformly random.
    Random,
    /// Smallest height metric, ties to the smallest id.
    LowestH,
}

impl fmt::Display for Adversary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Adversary::HighestH => "highest_h",
            Adversary::Random => "random",
            Adversary::LowestH => "lowest_h",
        })
    }
}

impl FromStr for Adversary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "highest_h" => Ok(Adversary::HighestH),
            "random" => Ok(Adversary::Random),
            "lowest_h" => Ok(Adversary::LowestH),
            other => Err(Error::Domain(format!("unknown adversary {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub initial_leaves: usize,
    pub total_rounds: usize,
    /// Joins and leaves per cycle, as a fraction of the initial population.
    pub churn_fraction: f64,
    pub cycle_length: usize,
    pub mix_rounds_per_balance_round: usize,
    pub seed: u64,
    pub runs: usize,
    pub adversary: Adversary,
    #[serde(default)]
    pub root_links: RootLinks,
    pub tolerance: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            initial_leaves: 512,
            total_rounds: 100,
            churn_fraction: 0.0,
            cycle_length: 7,
            mix_rounds_per_balance_round: 1,
            seed: 1,
            runs: 1,
            adversary: Adversary::HighestH,
            root_links: RootLinks::PrimaryOnly,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if self.initial_leaves < 2 || !self.initial_leaves.is_power_of_two() {
            return bad(format!("initial_leaves {} is not a power of two >= 2", self.initial_leaves));
        }
        if !(0.0..=1.0).contains(&self.churn_fraction) {
            return bad(format!("churn fraction {} outside [0, 1]", self.churn_fraction));
        }
        if self.total_rounds == 0 {
            return bad("total_rounds must be at least 1".into());
        }
        if self.cycle_length < 3 {
            return bad(format!("cycle length {} < 3", self.cycle_length));
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-2) {
            return bad(format!("tolerance {} outside (0, 1e-2]", self.tolerance));
        }
        Ok(())
    }

    /// Phase of a 1-based round.
    pub fn phase_of(&self, round: usize) -> Phase {
        match (round - 1) % self.cycle_length {
            0 => Phase::Join,
            1 => Phase::Leave,
            2 => Phase::BalanceMix,
            _ => Phase::Mix,
        }
    }

    /// Joins (and leaves) per cycle.
    pub fn churn_count(&self) -> usize {
        churn_count(self.churn_fraction, self.initial_leaves)
    }
}

fn churn_count(fraction: f64, initial: usize) -> usize {
    // the epsilon absorbs representation error such as 0.3 * 10 = 2.9999...
    (fraction * initial as f64 + 1e-9).floor() as usize
}

/// Who manages which virtual node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OwnershipMap {
    owner_of_leaf: BTreeMap<VirtualNodeId, PhysicalNodeId>,
    owner_of_slot: BTreeMap<InternalSlot, PhysicalNodeId>,
    leaf_of: BTreeMap<PhysicalNodeId, VirtualNodeId>,
}

impl OwnershipMap {
    pub fn owner_of_leaf(&self, leaf: VirtualNodeId) -> Option<PhysicalNodeId> {
        self.owner_of_leaf.get(&leaf).copied()
    }

    pub fn owner_of_slot(&self, slot: InternalSlot) -> Option<PhysicalNodeId> {
        self.owner_of_slot.get(&slot).copied()
    }

    pub fn leaf_of(&self, p: PhysicalNodeId) -> Option<VirtualNodeId> {
        self.leaf_of.get(&p).copied()
    }

    pub fn len(&self) -> usize {
        self.leaf_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaf_of.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = PhysicalNodeId> + '_ {
        self.leaf_of.keys().copied()
    }

    fn assign(&mut self, p: PhysicalNodeId, leaf: VirtualNodeId, slot: InternalSlot) {
        self.leaf_of.insert(p, leaf);
        self.owner_of_leaf.insert(leaf, p);
        self.owner_of_slot.insert(slot, p);
    }
}

/// Height of the smallest subtree holding both virtual nodes of a
/// physical node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HeightMetric(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationState {
    pub tree: VirtualTree,
    pub pairing: Pairing,
    pub ownership: OwnershipMap,
    pub round_index: usize,
    /// Contraction model used by [`SimulationState::graph`].
    pub root_links: RootLinks,
    initial_population: usize,
    next_physical: u32,
}

impl SimulationState {
    /// Wraps a tree and pairing; physical nodes are numbered 0.. in leaf
    /// in-order.
    pub fn new(tree: VirtualTree, pairing: Pairing) -> Result<Self> {
        pairing.audit(&tree)?;
        let mut ownership = OwnershipMap::default();
        let leaves = tree.leaves();
        for (i, &leaf) in leaves.iter().enumerate() {
            let slot = pairing.get(leaf).expect("audited pairing covers every leaf");
            ownership.assign(PhysicalNodeId(i as u32), leaf, slot);
        }
        Ok(Self {
            initial_population: leaves.len(),
            next_physical: leaves.len() as u32,
            tree,
            pairing,
            ownership,
            round_index: 0,
            root_links: RootLinks::default(),
        })
    }

    pub fn population(&self) -> usize {
        self.ownership.len()
    }

    pub fn initial_population(&self) -> usize {
        self.initial_population
    }

    pub fn physical_nodes(&self) -> Vec<PhysicalNodeId> {
        self.ownership.nodes().collect()
    }

    pub fn slot_of(&self, p: PhysicalNodeId) -> Option<InternalSlot> {
        self.ownership.leaf_of(p).and_then(|l| self.pairing.get(l))
    }

    /// The contracted physical graph, labelled by physical node id.
    pub fn graph(&self) -> Result<PhysicalGraph> {
        contract_with(&self.tree, &self.pairing, self.root_links, |leaf| {
            self.ownership
                .owner_of_leaf(leaf)
                .expect("every leaf has an owner")
        })
    }

    fn resync_slot_owners(&mut self) {
        let own = &mut self.ownership;
        own.owner_of_slot.clear();
        for (leaf, slot) in self.pairing.iter() {
            own.owner_of_slot.insert(slot, own.owner_of_leaf[&leaf]);
        }
    }

    /// One mixing round; slot ownership follows the swapped pairing.
    pub fn mix<R: Rng + ?Sized>(&mut self, rng: &mut R) -> MixRoundStats {
        let stats = mix_round(&self.tree, &mut self.pairing, rng);
        self.resync_slot_owners();
        stats
    }

    /// Rebalances the tree. Rotations may move the root role to another
    /// node; the duplicate root slot moves with it.
    pub fn balance(&mut self) -> usize {
        let old_root = self.tree.root();
        let rotations = self.tree.rebalance();
        let new_root = self.tree.root();
        if new_root != old_root {
            let dup = InternalSlot::root_duplicate(old_root);
            let leaf = self
                .pairing
                .leaf_of(dup)
                .expect("the duplicate root slot is always paired");
            self.pairing.set(leaf, InternalSlot::root_duplicate(new_root));
            self.resync_slot_owners();
        }
        rotations
    }

    /// Checks every joint invariant of tree, pairing and ownership.
    pub fn audit(&self) -> Result<()> {
        self.tree.audit()?;
        self.pairing.audit(&self.tree)?;
        let own = &self.ownership;
        let n = self.tree.num_leaves();
        if own.leaf_of.len() != n || own.owner_of_leaf.len() != n || own.owner_of_slot.len() != n {
            return Err(Error::Scenario(format!(
                "population mismatch: {} nodes, {} leaf owners, {} slot owners, {n} leaves",
                own.leaf_of.len(),
                own.owner_of_leaf.len(),
                own.owner_of_slot.len()
            )));
        }
        for (&p, &leaf) in &own.leaf_of {
            if own.owner_of_leaf.get(&leaf) != Some(&p) {
                return Err(Error::Scenario(format!("{p} and the owner of {leaf} disagree")));
            }
            let slot = self
                .pairing
                .get(leaf)
                .ok_or_else(|| Error::Scenario(format!("{leaf} has no slot")))?;
            if own.owner_of_slot.get(&slot) != Some(&p) {
                return Err(Error::Scenario(format!("{p} owns {leaf} but not its slot {slot}")));
            }
        }
        Ok(())
    }
}

/// Adds `⌊fraction · initial population⌋` physical nodes. Each one contacts
/// a uniform random leaf `u`, which is replaced by a new internal node whose
/// children are `u` and a new leaf; the newcomer manages both new nodes.
pub fn join_phase<R: Rng + ?Sized>(state: &mut SimulationState, fraction: f64, rng: &mut R) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Domain(format!("join fraction {fraction} outside [0, 1]")));
    }
    let count = churn_count(fraction, state.initial_population);
    for _ in 0..count {
        let contact = state.tree.sample_leaf(rng);
        let (leaf, internal) = state.tree.insert_pair(contact)?;
        let slot = InternalSlot::primary(internal);
        let p = PhysicalNodeId(state.next_physical);
        state.next_physical += 1;
        state.pairing.set(leaf, slot);
        state.ownership.assign(p, leaf, slot);
    }
    debug_assert!(state.audit().is_ok());
    Ok(count)
}

fn metric_with(
    state: &SimulationState,
    heights: &[usize],
    depths: &[usize],
    p: PhysicalNodeId,
) -> Result<HeightMetric> {
    let leaf = state
        .ownership
        .leaf_of(p)
        .ok_or_else(|| Error::Domain(format!("unknown physical node {p}")))?;
    let slot = state.pairing.get(leaf).expect("owned leaves are paired");
    let tree = &state.tree;
    let (mut a, mut b) = (leaf, slot.node);
    let (mut da, mut db) = (depths[a.index()], depths[b.index()]);
    while da > db {
        a = tree.parent(a).expect("depth > 0");
        da -= 1;
    }
    while db > da {
        b = tree.parent(b).expect("depth > 0");
        db -= 1;
    }
    while a != b {
        a = tree.parent(a).expect("below the root");
        b = tree.parent(b).expect("below the root");
    }
    Ok(HeightMetric(heights[a.index()]))
}

/// Height of the subtree rooted at the lowest common ancestor of `p`'s leaf
/// and `p`'s internal node (a duplicate root slot is the root).
pub fn h_metric(state: &SimulationState, p: PhysicalNodeId) -> Result<HeightMetric> {
    metric_with(state, &state.tree.heights(), &state.tree.depths(), p)
}

/// Removes `⌊fraction · initial population⌋` physical nodes, one at a time,
/// re-scoring after each departure.
///
/// A departure shrinks the tree by splicing out a deepest leaf `l_d` and its
/// parent `p_d`. The former owner of `l_d` takes over the leaver's leaf and
/// the former owner of `p_d` takes over the leaver's internal slot, so every
/// remaining node again manages one leaf and one slot.
pub fn leave_phase<R: Rng + ?Sized>(
    state: &mut SimulationState,
    fraction: f64,
    adversary: Adversary,
    rng: &mut R,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Domain(format!("leave fraction {fraction} outside [0, 1]")));
    }
    let count = churn_count(fraction, state.initial_population);
    if state.population() < count + 2 {
        return Err(Error::Scenario(format!(
            "{count} departures would leave {} physical nodes (minimum 2)",
            state.population() as isize - count as isize
        )));
    }
    for _ in 0..count {
        let leaver = pick_leaver(state, adversary, rng)?;
        depart(state, leaver)?;
        debug_assert!(state.audit().is_ok());
    }
    Ok(count)
}

fn pick_leaver<R: Rng + ?Sized>(state: &SimulationState, adversary: Adversary, rng: &mut R) -> Result<PhysicalNodeId> {
    let nodes = state.physical_nodes();
    if adversary == Adversary::Random {
        return Ok(nodes[rng.random_range(0..nodes.len())]);
    }
    let heights = state.tree.heights();
    let depths = state.tree.depths();
    let mut best: Option<(HeightMetric, PhysicalNodeId)> = None;
    // nodes are in ascending id order, so strict comparison keeps the
    // smallest id among ties
    for p in nodes {
        let h = metric_with(state, &heights, &depths, p)?;
        let better = match (best, adversary) {
            (None, _) => true,
            (Some((bh, _)), Adversary::HighestH) => h > bh,
            (Some((bh, _)), _) => h < bh,
        };
        if better {
            best = Some((h, p));
        }
    }
    Ok(best.expect("population is nonempty").1)
}

/// Removes one physical node and repairs ownership.
pub fn depart(state: &mut SimulationState, leaver: PhysicalNodeId) -> Result<()> {
    let own = &state.ownership;
    let leaf = own
        .leaf_of(leaver)
        .ok_or_else(|| Error::Domain(format!("unknown physical node {leaver}")))?;
    let slot = state.pairing.get(leaf).expect("owned leaves are paired");
    if state.population() <= 2 {
        return Err(Error::Scenario("cannot shrink below 2 physical nodes".into()));
    }

    let (gone_leaf, gone_internal) = state.tree.remove_pair(leaf)?;
    let gone_slot = InternalSlot::primary(gone_internal);
    debug_assert_ne!(gone_internal, state.tree.root());
    let own = &state.ownership;
    let a = own.owner_of_leaf(gone_leaf).expect("spliced leaf had an owner");
    let b = own.owner_of_slot(gone_slot).expect("spliced internal had an owner");
    let a_slot = state.pairing.get(gone_leaf).expect("spliced leaf was paired");
    let b_leaf = own.leaf_of(b).expect("owner has a leaf");

    let own = &mut state.ownership;
    own.leaf_of.remove(&leaver);
    own.owner_of_leaf.remove(&leaf);
    own.owner_of_slot.remove(&slot);
    own.owner_of_leaf.remove(&gone_leaf);
    own.owner_of_slot.remove(&gone_slot);
    state.pairing.remove(leaf);
    state.pairing.remove(gone_leaf);
    if b != leaver {
        state.pairing.remove(b_leaf);
    }

    let mut touched: Vec<(PhysicalNodeId, VirtualNodeId, InternalSlot)> = Vec::with_capacity(2);
    if a != leaver {
        let a_new_slot = if a == b { slot } else { a_slot };
        touched.push((a, leaf, a_new_slot));
    }
    if b != leaver && b != a {
        touched.push((b, b_leaf, slot));
    }
    for (p, l, s) in touched {
        state.pairing.set(l, s);
        state.ownership.assign(p, l, s);
    }
    Ok(())
}

/// Executes run `run` of `config` with an explicit seed.
pub fn run_with_seed(config: &ScenarioConfig, run: usize, seed: u64) -> Result<Vec<RoundTrace>> {
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    let tree = VirtualTree::build_complete(config.initial_leaves)?;
    let pairing = Pairing::random(&tree, &mut rng);
    let mut state = SimulationState::new(tree, pairing)?;
    state.root_links = config.root_links;
    let mut out = Vec::with_capacity(config.total_rounds);
    for round in 1..=config.total_rounds {
        state.round_index = round;
        let phase = config.phase_of(round);
        let mut swaps = 0;
        match phase {
            Phase::Join => {
                join_phase(&mut state, config.churn_fraction, &mut rng)?;
            }
            Phase::Leave => {
                leave_phase(&mut state, config.churn_fraction, config.adversary, &mut rng)?;
            }
            Phase::BalanceMix => {
                state.balance();
                for _ in 0..config.mix_rounds_per_balance_round {
                    swaps += state.mix(&mut rng).swaps;
                }
            }
            Phase::Mix => swaps += state.mix(&mut rng).swaps,
        }
        let report = lambda2(&state.graph()?, config.tolerance)?;
        out.push(RoundTrace {
            run,
            round,
            phase,
            population: state.population(),
            lambda2: round_sig9(report.lambda2),
            swaps,
            disconnected: report.disconnected,
        });
    }
    Ok(out)
}

/// Runs `config.runs` independent scenarios, at most `jobs` at a time.
/// Run `k` is seeded with [`run_seed`]`(config.seed, k)`; traces come back
/// ordered by run, then round, regardless of scheduling.
pub fn run_batch(config: &ScenarioConfig, jobs: usize) -> Result<Vec<RoundTrace>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Scenario(format!("thread pool: {e}")))?;
    let runs: Vec<Result<Vec<RoundTrace>>> = pool.install(|| {
        (0..config.runs)
            .into_par_iter()
            .map(|run| run_with_seed(config, run, run_seed(config.seed, run)))
            .collect()
    });
    let mut out = Vec::with_capacity(config.runs * config.total_rounds);
    for r in runs {
        out.extend(r?);
    }
    Ok(out)
}

/// Runs a single scenario seeded directly with `config.seed`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Vec<RoundTrace>> {
    run_with_seed(config, 0, config.seed)
}
