//! Query-driven community search over attributed graphs.
//!
//! The pipeline has two stages. [`extractor`] grows hop layers around the
//! query node and keeps the prefix with the lowest attribute-augmented
//! conductance, maintaining every counter incrementally ([`conductance`]).
//! [`refiner`] then edits that coarse candidate with a pair of learned
//! add/remove policies on top of a graph-convolution state [`encoder`].
//!
//! The crate is `no_std` and only needs `alloc`; file formats, timing and
//! the command-line driver live in the `commsearch` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod communities;
pub mod conductance;
pub mod encoder;
mod error;
pub mod extractor;
pub mod fixtures;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod refiner;
pub mod rng;
pub mod synthetic;


pub use communities::{split_communities, CommunitySet};
pub use conductance::{phi_a, phi_aug, phi_t, CommunityState};
pub use error::{Error, Result};
pub use extractor::{extract_candidate, extract_candidate_naive, ExtractionResult};
pub use graph::{AttributedGraph, MultigraphOracle, NodeId};
