//! Small reference graphs shared by tests, self-checks and benchmarks.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;

use crate::graph::{AttributedGraph, NodeId};
use crate::rng;

/// Attribute columns of [`figure_two`].
pub const CS: usize = 0;
pub const ML: usize = 1;
pub const DB: usize = 2;
pub const DM: usize = 3;
pub const IR: usize = 4;

/// Seven-node graph with five attributes used in the worked examples.
///
/// `v0` shares CS and ML with `v3` and CS with `v1`, `v5`, `v6`, giving it
/// attribute degree 5. Growing from `v0` absorbs `v1` then `v3`; with
/// `C = {v0, v1}` the counters are cut 6, vol 8, cut_a 7, vol_a 9 and
/// `att = [2, 1, 0, 0, 0]`.
pub fn figure_two() -> AttributedGraph {
    let edges = [
        (0, 1),
        (0, 3),
        (0, 5),
        (0, 6),
        (1, 3),
        (1, 2),
        (1, 4),
        (3, 2),
        (3, 4),
        (5, 6),
        (2, 4),
    ];
    let attrs = vec![
        vec![CS, ML],
        vec![CS],
        vec![DB, IR],
        vec![CS, ML],
        vec![DM, IR],
        vec![CS, DB],
        vec![CS, DM],
    ];
    AttributedGraph::new(7, edges, &attrs, 5).expect("fixture is well formed")
}

/// Erdős–Rényi graph with independent Bernoulli attribute bits.
pub fn random_graph(n: usize, p: f64, k: usize, density: f64, seed: u64) -> AttributedGraph {
    let mut rng = rng::stream(seed, "fixture-random-graph");
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let attrs: Vec<Vec<usize>> = (0..n)
        .map(|_| (0..k).filter(|_| rng.gen::<f64>() < density).collect())
        .collect();
    AttributedGraph::new(n, edges, &attrs, k).expect("generated ids are in range")
}

/// Two disjoint cliques of `size` nodes; clique `b` holds attribute `b` only.
pub fn two_cliques(size: usize) -> AttributedGraph {
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    for b in 0..2 {
        let base = b * size;
        for u in 0..size {
            for v in (u + 1)..size {
                edges.push((base + u, base + v));
            }
        }
    }
    let attrs: Vec<Vec<usize>> = (0..2 * size).map(|u| vec![u / size]).collect();
    AttributedGraph::new(2 * size, edges, &attrs, 2).expect("fixture is well formed")
}

/// Star with `leaves` leaves around node 0 and no attributes.
pub fn star(leaves: usize) -> AttributedGraph {
    let edges: Vec<(NodeId, NodeId)> = (1..=leaves).map(|v| (0, v)).collect();
    AttributedGraph::new(leaves + 1, edges, &vec![Vec::new(); leaves + 1], 1)
        .expect("fixture is well formed")
}
