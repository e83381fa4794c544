//! Random tree virtualization.
//!
//! A tree overlay has one more leaf than internal nodes. Pair every leaf
//! with an internal node (counting the root twice), let one physical node
//! manage each pair, and the physical graph obtained by contracting the
//! pairs is an expander with constant node expansion when the pairing is
//! uniform. This crate builds and measures that construction:
//!
//! * [`vtree`] — the virtual binary tree: joins, splices, rotations,
//!   weighted leaf sampling, occupied-subtree decomposition.
//! * [`pairing`] — leaf/slot bijections and contraction into a
//!   [`graph::PhysicalGraph`].
//! * [`graph`] — node boundaries, components, exact node expansion.
//! * [`spectral`] — λ₂ of the Laplacian, iterative and dense.
//! * [`mixing`] — the synchronous swap protocol that drives any pairing
//!   toward the uniform one.
//! * [`churn`] — join / adversarial leave / rebalance scenarios.
//! * [`report`] — traces, statistics, CSV and JSON output.
//! * [`lemmas`] — exhaustive and sampled checks of the boundary bounds.

pub mod churn;
pub mod error;
pub mod graph;
pub mod lemmas;
pub mod mixing;
pub mod pairing;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod vtree;

pub use error::{Error, Result};
pub use graph::{ExpansionResult, PhysicalGraph};
pub use pairing::{InternalSlot, Pairing, PhysicalNodeId, SlotCopy};
pub use spectral::SpectralReport;
pub use vtree::{VirtualNodeId, VirtualTree};
