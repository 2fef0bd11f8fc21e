//! Topology, attribute and attribute-augmented conductance.
//!
//! [`CommunityState`] carries the five counters (cut, vol, cut_a, vol_a and
//! the per-attribute member counts) that let a community grow or shrink one
//! node at a time in `O(d(u) + |F[u]|)`.

use alloc::vec;
use alloc::vec::Vec;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;

use crate::graph::{AttributedGraph, NodeId};
use crate::{rng, Error, Result};

/// `cut / min(vol_in, vol_out)`, or 1.0 when the smaller side has no volume.
#[inline]
pub fn ratio(cut: u64, vol_in: u64, vol_out: u64) -> f64 {
    let denom = vol_in.min(vol_out);
    if denom == 0 {
        1.0
    } else {
        cut as f64 / denom as f64
    }
}

/// `β·φ_t + (1−β)·φ_a`.
#[inline]
pub fn blend(phi_t: f64, phi_a: f64, beta: f64) -> f64 {
    beta * phi_t + (1.0 - beta) * phi_a
}

pub fn check_beta(beta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::Config("beta must lie in [0, 1]"))
    }
}

/// Dense membership mask for a node list. Ids must be in range.
pub fn membership(graph: &AttributedGraph, nodes: &[NodeId]) -> Result<Vec<bool>> {
    let mut mask = vec![false; graph.n()];
    for &u in nodes {
        graph.check_node(u)?;
        mask[u] = true;
    }
    Ok(mask)
}

fn topology_counts(graph: &AttributedGraph, mask: &[bool]) -> (u64, u64) {
    let mut cut = 0u64;
    let mut vol = 0u64;
    for u in (0..graph.n()).filter(|&u| mask[u]) {
        vol += graph.degree(u) as u64;
        cut += graph.neighbors(u).iter().filter(|&&v| !mask[v]).count() as u64;
    }
    (cut, vol)
}

fn attribute_counts(graph: &AttributedGraph, mask: &[bool]) -> (u64, u64) {
    let mut att = vec![0u64; graph.k()];
    let mut vol = 0u64;
    for u in (0..graph.n()).filter(|&u| mask[u]) {
        vol += graph.attribute_degree(u);
        for &f in graph.attributes(u) {
            att[f] += 1;
        }
    }
    // Each member's attribute edges into the community: F[u]·(att − F[u]).
    let internal: u64 = (0..graph.n())
        .filter(|&u| mask[u])
        .map(|u| graph.attributes(u).iter().map(|&f| att[f] - 1).sum::<u64>())
        .sum();
    (vol - internal, vol)
}

/// Topology-based conductance of `community`.
pub fn phi_t(graph: &AttributedGraph, community: &[NodeId]) -> Result<f64> {
    let mask = membership(graph, community)?;
    let (cut, vol) = topology_counts(graph, &mask);
    Ok(ratio(cut, vol, graph.total_volume() - vol))
}

/// Attribute-based conductance of `community`, computed from attribute
/// column counts without enumerating node pairs.
pub fn phi_a(graph: &AttributedGraph, community: &[NodeId]) -> Result<f64> {
    let mask = membership(graph, community)?;
    let (cut, vol) = attribute_counts(graph, &mask);
    Ok(ratio(cut, vol, graph.total_attribute_volume() - vol))
}

/// Attribute-augmented conductance `β·φ_t + (1−β)·φ_a`.
pub fn phi_aug(graph: &AttributedGraph, community: &[NodeId], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(blend(phi_t(graph, community)?, phi_a(graph, community)?, beta))
}

/// Incrementally maintained statistics of a community containing a query
/// node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityState {
    query: NodeId,
    mask: Vec<bool>,
    size: usize,
    cut: u64,
    vol: u64,
    cut_a: u64,
    vol_a: u64,
    att: Vec<u64>,
}

impl CommunityState {
    /// State for the singleton `{q}`.
    pub fn new(graph: &AttributedGraph, q: NodeId) -> Result<Self> {
        graph.check_node(q)?;
        let mut mask = vec![false; graph.n()];
        mask[q] = true;
        let mut att = vec![0u64; graph.k()];
        for &f in graph.attributes(q) {
            att[f] = 1;
        }
        let d = graph.degree(q) as u64;
        let da = graph.attribute_degree(q);
        Ok(CommunityState { query: q, mask, size: 1, cut: d, vol: d, cut_a: da, vol_a: da, att })
    }

    /// Counters recomputed from scratch for `members ∪ {q}`.
    ///
    /// Attribute cut is summed pair by pair, so this is `O(|C|·n·k)` and
    /// independent of the incremental update rules.
    pub fn recompute(graph: &AttributedGraph, q: NodeId, members: &[NodeId]) -> Result<Self> {
        graph.check_node(q)?;
        let mut mask = membership(graph, members)?;
        mask[q] = true;
        let inside: Vec<NodeId> = (0..graph.n()).filter(|&u| mask[u]).collect();
        let (cut, vol) = topology_counts(graph, &mask);
        let mut cut_a = 0u64;
        let mut vol_a = 0u64;
        let mut att = vec![0u64; graph.k()];
        for &u in &inside {
            vol_a += graph.attribute_degree(u);
            for &f in graph.attributes(u) {
                att[f] += 1;
            }
            for v in (0..graph.n()).filter(|&v| !mask[v]) {
                cut_a += graph.shared_attributes(u, v);
            }
        }
        Ok(CommunityState { query: q, size: inside.len(), mask, cut, vol, cut_a, vol_a, att })
    }

    /// Adds `u`. Cost `O(d(u) + |F[u]|)`.
    pub fn add(&mut self, graph: &AttributedGraph, u: NodeId) -> Result<()> {
        graph.check_node(u)?;
        if self.mask[u] {
            return Err(Error::Precondition("node is already a member"));
        }
        let inside = graph.neighbors(u).iter().filter(|&&v| self.mask[v]).count() as u64;
        let d = graph.degree(u) as u64;
        self.cut = self.cut + d - 2 * inside;
        self.vol += d;

        let da = graph.attribute_degree(u);
        let overlap = graph.attribute_overlap(u, &self.att);
        self.cut_a = self.cut_a + da - 2 * overlap;
        self.vol_a += da;
        for &f in graph.attributes(u) {
            self.att[f] += 1;
        }
        self.mask[u] = true;
        self.size += 1;
        Ok(())
    }

    /// Removes `u`; the exact inverse of [`add`](Self::add).
    pub fn remove(&mut self, graph: &AttributedGraph, u: NodeId) -> Result<()> {
        graph.check_node(u)?;
        if u == self.query {
            return Err(Error::ForbiddenRemoval(u));
        }
        if !self.mask[u] {
            return Err(Error::Precondition("node is not a member"));
        }
        self.mask[u] = false;
        self.size -= 1;
        for &f in graph.attributes(u) {
            self.att[f] -= 1;
        }
        let inside = graph.neighbors(u).iter().filter(|&&v| self.mask[v]).count() as u64;
        let d = graph.degree(u) as u64;
        self.cut = self.cut + 2 * inside - d;
        self.vol -= d;

        let da = graph.attribute_degree(u);
        let overlap = graph.attribute_overlap(u, &self.att);
        self.cut_a = self.cut_a + 2 * overlap - da;
        self.vol_a -= da;
        Ok(())
    }

    /// Topology-based conductance from the counters.
    pub fn phi_t(&self, graph: &AttributedGraph) -> f64 {
        ratio(self.cut, self.vol, graph.total_volume() - self.vol)
    }

    /// Attribute-based conductance from the counters.
    pub fn phi_a(&self, graph: &AttributedGraph) -> f64 {
        ratio(self.cut_a, self.vol_a, graph.total_attribute_volume() - self.vol_a)
    }

    /// Attribute-augmented conductance from the counters.
    pub fn phi(&self, graph: &AttributedGraph, beta: f64) -> f64 {
        blend(self.phi_t(graph), self.phi_a(graph), beta)
    }

    pub fn query(&self) -> NodeId {
        self.query
    }

    #[inline]
    pub fn contains(&self, u: NodeId) -> bool {
        self.mask[u]
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Members in increasing id order.
    pub fn members(&self) -> Vec<NodeId> {
        (0..self.mask.len()).filter(|&u| self.mask[u]).collect()
    }

    pub fn cut(&self) -> u64 {
        self.cut
    }

    pub fn volume(&self) -> u64 {
        self.vol
    }

    pub fn attribute_cut(&self) -> u64 {
        self.cut_a
    }

    pub fn attribute_volume(&self) -> u64 {
        self.vol_a
    }

    /// `att[f]`: members holding attribute `f`.
    pub fn attribute_counts(&self) -> &[u64] {
        &self.att
    }
}

/// Which one-step walk [`escape_probability`] simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkMode {
    /// `P = D⁻¹A`.
    Topology,
    /// `Pᵃ_uv = F[u]·F[v]ᵀ / d_a(u)`.
    Attribute,
}

/// One-step random walker over the edge or attribute-edge multigraph.
pub struct Walker<'g> {
    graph: &'g AttributedGraph,
    holders: Vec<Vec<NodeId>>,
}

impl<'g> Walker<'g> {
    pub fn new(graph: &'g AttributedGraph) -> Self {
        Walker { graph, holders: graph.attribute_holders() }
    }

    /// Weight of `u` in the stationary-like start distribution.
    pub fn weight(&self, u: NodeId, mode: WalkMode) -> u64 {
        match mode {
            WalkMode::Topology => self.graph.degree(u) as u64,
            WalkMode::Attribute => self.graph.attribute_degree(u),
        }
    }

    /// Samples one transition from `u`; `None` if `u` has no outgoing mass.
    pub fn step(&self, u: NodeId, mode: WalkMode, rng: &mut rng::Rng) -> Option<NodeId> {
        match mode {
            WalkMode::Topology => {
                let nbrs = self.graph.neighbors(u);
                if nbrs.is_empty() {
                    None
                } else {
                    Some(nbrs[rng.gen_range(0..nbrs.len())])
                }
            }
            WalkMode::Attribute => {
                // Pick an attribute f of u with weight (holders(f) − 1), then a
                // uniform other holder: Pr(v) = Σ_f 1/d_a(u) = F[u]·F[v]ᵀ/d_a(u).
                let da = self.graph.attribute_degree(u);
                if da == 0 {
                    return None;
                }
                let mut pick = rng.gen_range(0..da);
                for &f in self.graph.attributes(u) {
                    let others = self.holders[f].len() as u64 - 1;
                    if pick < others {
                        let holders = &self.holders[f];
                        let own = holders.binary_search(&u).expect("u holds f");
                        let mut j = rng.gen_range(0..holders.len() - 1);
                        if j >= own {
                            j += 1;
                        }
                        return Some(holders[j]);
                    }
                    pick -= others;
                }
                unreachable!("attribute degree equals the sum of holder counts")
            }
        }
    }
}

/// Monte-Carlo escape estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeEstimate {
    /// `max(from_inside, from_outside)`.
    pub estimate: f64,
    /// Binomial standard error of the side that attains the maximum.
    pub stderr: f64,
    /// Estimated `Pr(w₁ ∈ C̄ | w₀ ∈ C)`.
    pub from_inside: f64,
    /// Estimated `Pr(w₁ ∈ C | w₀ ∈ C̄)`.
    pub from_outside: f64,
}

/// Estimates the one-step escape probability of `community`, with the
/// start node drawn proportionally to (attribute) degree on each side.
///
/// Both directions use `trials` walks. The exact value of the maximum
/// equals `φ_t` (topology) or `φ_a` (attribute).
pub fn escape_probability(
    graph: &AttributedGraph,
    community: &[NodeId],
    mode: WalkMode,
    trials: usize,
    seed: u64,
) -> Result<EscapeEstimate> {
    if trials == 0 {
        return Err(Error::Config("trials must be positive"));
    }
    let mask = membership(graph, community)?;
    let walker = Walker::new(graph);
    let mut rng = rng::stream(seed, "escape-probability");

    let mut side = |inside: bool| -> Result<f64> {
        let nodes: Vec<NodeId> = (0..graph.n()).filter(|&u| mask[u] == inside).collect();
        let weights: Vec<u64> = nodes.iter().map(|&u| walker.weight(u, mode)).collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|_| Error::Degenerate("a side of the cut has zero volume"))?;
        let mut escaped = 0usize;
        for _ in 0..trials {
            let start = nodes[dist.sample(&mut rng)];
            let next = walker.step(start, mode, &mut rng).expect("positive weight has a successor");
            if mask[next] != inside {
                escaped += 1;
            }
        }
        Ok(escaped as f64 / trials as f64)
    };
    let from_inside = side(true)?;
    let from_outside = side(false)?;
    let p = from_inside.max(from_outside);
    Ok(EscapeEstimate {
        estimate: p,
        stderr: libm::sqrt(p * (1.0 - p) / trials as f64),
        from_inside,
        from_outside,
    })
}
