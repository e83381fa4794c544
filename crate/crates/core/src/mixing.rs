//! Synchronous matching-mixing rounds.
//!
//! One round: every leaf flips a fair coin to become active or passive;
//! every active leaf probes a uniform random leaf (by weighted descent from
//! the root) and sends it an exchange request; a passive leaf that receives
//! exactly one request accepts; each accepted pair swaps internal slots.
//! All randomness of a round is drawn before any swap is applied.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::pairing::{contract_using, Pairing, RootLinks};
use crate::spectral::lambda2;
use crate::vtree::{VirtualNodeId, VirtualTree};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixRoundStats {
    pub actives: usize,
    pub requests_sent: usize,
    pub accepted: usize,
    pub swaps: usize,
    /// Tree edges travelled by probe tokens on their way down.
    pub probe_hops: usize,
}

/// Random choices of one round, indexed by in-order leaf position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundDraws {
    pub leaves: Vec<VirtualNodeId>,
    pub active: Vec<bool>,
    /// Probe result for each active leaf, `None` for passive ones.
    pub targets: Vec<Option<VirtualNodeId>>,
    pub probe_hops: usize,
}

/// Draws coins for every leaf (in in-order), then one probe per active
/// leaf (same order).
pub fn draw_round<R: Rng + ?Sized>(tree: &VirtualTree, rng: &mut R) -> RoundDraws {
    let leaves = tree.leaves();
    let active: Vec<bool> = leaves.iter().map(|_| rng.random_bool(0.5)).collect();
    let mut probe_hops = 0;
    let targets = active
        .iter()
        .map(|&a| {
            a.then(|| {
                let (t, hops) = tree.sample_leaf_with_hops(rng);
                probe_hops += hops;
                t
            })
        })
        .collect();
    RoundDraws {
        leaves,
        active,
        targets,
        probe_hops,
    }
}

/// Agreed `(active, passive)` pairs for a set of draws, ordered by the
/// active leaf's position. Requests to active leaves (self-probes included)
/// are rejected, as is every request to a passive leaf that got more than
/// one.
pub fn resolve_round(draws: &RoundDraws) -> Vec<(VirtualNodeId, VirtualNodeId)> {
    let position: HashMap<VirtualNodeId, usize> =
        draws.leaves.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut received = vec![0u32; draws.leaves.len()];
    for t in draws.targets.iter().flatten() {
        if let Some(&i) = position.get(t) {
            received[i] += 1;
        }
    }
    draws
        .leaves
        .iter()
        .zip(&draws.targets)
        .filter_map(|(&from, t)| {
            let t = (*t)?;
            let i = *position.get(&t)?;
            (!draws.active[i] && received[i] == 1).then_some((from, t))
        })
        .collect()
}

/// Applies pre-drawn choices to `pairing`.
pub fn apply_draws(pairing: &mut Pairing, draws: &RoundDraws) -> Result<MixRoundStats> {
    let agreed = resolve_round(draws);
    for &(a, b) in &agreed {
        pairing.swap(a, b)?;
    }
    let actives = draws.active.iter().filter(|&&a| a).count();
    Ok(MixRoundStats {
        actives,
        requests_sent: draws.targets.iter().flatten().count(),
        accepted: agreed.len(),
        swaps: agreed.len(),
        probe_hops: draws.probe_hops,
    })
}

/// One synchronous mixing round.
pub fn mix_round<R: Rng + ?Sized>(tree: &VirtualTree, pairing: &mut Pairing, rng: &mut R) -> MixRoundStats {
    let draws = draw_round(tree, rng);
    let stats = apply_draws(pairing, &draws).expect("probes only return leaves of the tree");
    debug_assert!(pairing.audit(tree).is_ok());
    stats
}

pub fn run_mixing<R: Rng + ?Sized>(
    tree: &VirtualTree,
    pairing: &mut Pairing,
    rounds: usize,
    rng: &mut R,
) -> Vec<MixRoundStats> {
    (0..rounds).map(|_| mix_round(tree, pairing, rng)).collect()
}

/// One point of a convergence study: λ₂ of the contracted graph after
/// `round` mixing rounds (round 0 is the starting pairing).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub round: usize,
    pub lambda2: f64,
    pub swaps: usize,
    /// Leaves whose internal node differs from the canonical pairing's.
    pub displaced: usize,
}

/// Mixes a complete tree of `leaves` leaves from the canonical pairing for
/// `rounds` rounds, measuring λ₂ after each.
pub fn convergence_trace<R: Rng + ?Sized>(
    leaves: usize,
    rounds: usize,
    links: RootLinks,
    tolerance: f64,
    rng: &mut R,
) -> Result<Vec<ConvergencePoint>> {
    let tree = VirtualTree::build_complete(leaves)?;
    let start = Pairing::canonical(&tree);
    let mut pairing = start.clone();
    let mut out = Vec::with_capacity(rounds + 1);
    let mut swaps = 0;
    for round in 0..=rounds {
        if round > 0 {
            swaps = mix_round(&tree, &mut pairing, rng).swaps;
        }
        out.push(ConvergencePoint {
            round,
            lambda2: lambda2(&contract_using(&tree, &pairing, links)?, tolerance)?.lambda2,
            swaps,
            displaced: matching_distance(&start, &pairing)?,
        });
    }
    Ok(out)
}

/// Number of leaves mapped to different internal nodes. The two root
/// copies count as the same node.
pub fn matching_distance(p: &Pairing, q: &Pairing) -> Result<usize> {
    if p.len() != q.len() || p.iter().any(|(l, _)| q.get(l).is_none()) {
        return domain("matching_distance: pairings have different leaf sets");
    }
    Ok(p.iter()
        .filter(|&(l, s)| q.get(l).is_some_and(|t| t.node != s.node))
        .count())
}
