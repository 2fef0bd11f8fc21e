//! Attributed graph storage and attribute-edge kernels.
//!
//! Adjacency and attribute rows are both kept in compressed sparse row form
//! with sorted rows. Attribute degrees are computed once at construction
//! from attribute column sums, which avoids ever touching node pairs.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub type NodeId = usize;

/// Node-count ceiling for [`MultigraphOracle::materialize`] unless the
/// caller passes its own.
pub const DEFAULT_ORACLE_GUARD: usize = 2000;

/// Immutable undirected simple graph with binary node attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    attr_offsets: Vec<usize>,
    attr_ids: Vec<usize>,
    k: usize,
    column_sums: Vec<u64>,
    attr_degree: Vec<u64>,
    vol_a_total: u64,
}

/// What normalization dropped while building a graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub self_loops: usize,
    pub duplicate_edges: usize,
    pub duplicate_attributes: usize,
}

impl AttributedGraph {
    /// Builds a graph over nodes `0..n`.
    ///
    /// Edges may be given in either direction; self-loops and repeats are
    /// dropped and counted in the report. `attrs[u]` lists the attribute
    /// columns node `u` possesses, each `< k`.
    pub fn build<I>(n: usize, edges: I, attrs: &[Vec<usize>], k: usize) -> Result<(Self, BuildReport)>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        if attrs.len() != n {
            return Err(Error::Shape { expected: n, found: attrs.len() });
        }
        let mut report = BuildReport::default();

        let mut pairs: Vec<(NodeId, NodeId)> = Vec::new();
        for (u, v) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::Bounds { what: "node", index: x, limit: n });
                }
            }
            if u == v {
                report.self_loops += 1;
                continue;
            }
            pairs.push((u, v));
            pairs.push((v, u));
        }
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        report.duplicate_edges = (before - pairs.len()) / 2;

        let mut offsets = vec![0usize; n + 1];
        for &(u, _) in &pairs {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets: Vec<NodeId> = pairs.iter().map(|&(_, v)| v).collect();

        let mut attr_offsets = Vec::with_capacity(n + 1);
        let mut attr_ids = Vec::new();
        attr_offsets.push(0);
        for row in attrs {
            let start = attr_ids.len();
            for &f in row {
                if f >= k {
                    return Err(Error::Bounds { what: "attribute", index: f, limit: k });
                }
                attr_ids.push(f);
            }
            let slot = &mut attr_ids[start..];
            slot.sort_unstable();
            let mut w = 0;
            for r in 0..slot.len() {
                if r == 0 || slot[r] != slot[w - 1] {
                    slot[w] = slot[r];
                    w += 1;
                }
            }
            report.duplicate_attributes += slot.len() - w;
            attr_ids.truncate(start + w);
            attr_offsets.push(attr_ids.len());
        }

        let mut graph = AttributedGraph {
            offsets,
            targets,
            attr_offsets,
            attr_ids,
            k,
            column_sums: Vec::new(),
            attr_degree: Vec::new(),
            vol_a_total: 0,
        };
        graph.column_sums = graph.compute_column_sums();
        graph.attr_degree = attribute_degrees(&graph);
        graph.vol_a_total = graph.attr_degree.iter().sum();
        Ok((graph, report))
    }

    /// [`build`](Self::build) without the normalization report.
    pub fn new<I>(n: usize, edges: I, attrs: &[Vec<usize>], k: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        Self::build(n, edges, attrs, k).map(|(g, _)| g)
    }

    fn compute_column_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.k];
        for &f in &self.attr_ids {
            sums[f] += 1;
        }
        sums
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    #[inline]
    pub fn m(&self) -> usize {
        self.targets.len() / 2
    }

    /// Attribute dimension.
    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    #[inline]
    pub fn degree(&self, u: NodeId) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    /// Sorted attribute columns set for `u`.
    #[inline]
    pub fn attributes(&self, u: NodeId) -> &[usize] {
        &self.attr_ids[self.attr_offsets[u]..self.attr_offsets[u + 1]]
    }

    #[inline]
    pub fn attribute_degree(&self, u: NodeId) -> u64 {
        self.attr_degree[u]
    }

    pub fn attribute_degree_vector(&self) -> &[u64] {
        &self.attr_degree
    }

    /// Number of nodes holding attribute `f`.
    #[inline]
    pub fn attribute_count(&self, f: usize) -> u64 {
        self.column_sums[f]
    }

    /// Sum of all degrees, `2m`.
    #[inline]
    pub fn total_volume(&self) -> u64 {
        self.targets.len() as u64
    }

    /// Sum of all attribute degrees.
    #[inline]
    pub fn total_attribute_volume(&self) -> u64 {
        self.vol_a_total
    }

    pub fn is_adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn contains(&self, u: NodeId) -> bool {
        u < self.n()
    }

    pub(crate) fn check_node(&self, u: NodeId) -> Result<()> {
        if u < self.n() {
            Ok(())
        } else {
            Err(Error::Bounds { what: "node", index: u, limit: self.n() })
        }
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n()).flat_map(move |u| {
            self.neighbors(u).iter().copied().filter(move |&v| u < v).map(move |v| (u, v))
        })
    }

    /// `F[u]·F[v]ᵀ`: number of attributes the two nodes share.
    pub fn shared_attributes(&self, u: NodeId, v: NodeId) -> u64 {
        sorted_intersection_len(self.attributes(u), self.attributes(v))
    }

    /// `F[u]·attᵀ`, where `att[f]` counts community members holding `f`.
    ///
    /// For a community not containing `u` this is the number of attribute
    /// edges between `u` and the community.
    pub fn attribute_overlap(&self, u: NodeId, att: &[u64]) -> u64 {
        self.attributes(u).iter().map(|&f| att[f]).sum()
    }

    /// Attribute-walk transition probability `F[u]·F[v]ᵀ / d_a(u)`.
    ///
    /// Zero when `u` has no attribute edges or `u == v`.
    pub fn attribute_transition_probability(&self, u: NodeId, v: NodeId) -> f64 {
        let da = self.attr_degree[u];
        if da == 0 || u == v {
            return 0.0;
        }
        self.shared_attributes(u, v) as f64 / da as f64
    }

    /// Inverted attribute index: for each column, the sorted holders.
    pub fn attribute_holders(&self) -> Vec<Vec<NodeId>> {
        let mut holders: Vec<Vec<NodeId>> = self
            .column_sums
            .iter()
            .map(|&c| Vec::with_capacity(c as usize))
            .collect();
        for u in 0..self.n() {
            for &f in self.attributes(u) {
                holders[f].push(u);
            }
        }
        holders
    }
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> u64 {
    let (mut i, mut j, mut count) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Attribute degree of every node via column sums:
/// `d_a(u) = Σ_{f ∈ F[u]} (colsum[f] − 1)`.
///
/// One pass over the attribute rows builds the column sums and a second
/// pass dots each row with them, so the cost is linear in the number of
/// nonzero attribute entries.
pub fn attribute_degrees(graph: &AttributedGraph) -> Vec<u64> {
    let colsum = graph.compute_column_sums();
    (0..graph.n())
        .map(|u| graph.attributes(u).iter().map(|&f| colsum[f] - 1).sum())
        .collect()
}

/// Explicit attribute multigraph: for every unordered pair, the number of
/// attributes the pair shares.
///
/// Quadratic in `n`; used as an independent reference for the incremental
/// machinery and as the naive extractor's backing store.
#[derive(Debug, Clone, PartialEq)]
pub struct MultigraphOracle {
    n: usize,
    pairs: BTreeMap<(NodeId, NodeId), u64>,
    incident: Vec<u64>,
}

impl MultigraphOracle {
    /// Materializes all pair counts. Refuses graphs with more than
    /// `guard` nodes.
    pub fn materialize(graph: &AttributedGraph, guard: usize) -> Result<Self> {
        let n = graph.n();
        if n > guard {
            return Err(Error::TooLarge { n, guard });
        }
        let mut pairs = BTreeMap::new();
        let mut incident = vec![0u64; n];
        for u in 0..n {
            for v in (u + 1)..n {
                let c = graph.shared_attributes(u, v);
                if c > 0 {
                    pairs.insert((u, v), c);
                    incident[u] += c;
                    incident[v] += c;
                }
            }
        }
        Ok(MultigraphOracle { n, pairs, incident })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of attribute edges between `u` and `v` (symmetric).
    pub fn count(&self, u: NodeId, v: NodeId) -> u64 {
        let key = if u < v { (u, v) } else { (v, u) };
        self.pairs.get(&key).copied().unwrap_or(0)
    }

    /// Sum of pair counts incident to `u`.
    pub fn incident_count(&self, u: NodeId) -> u64 {
        self.incident[u]
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs with a nonzero count, `u < v`.
    pub fn pairs(&self) -> impl Iterator<Item = ((NodeId, NodeId), u64)> + '_ {
        self.pairs.iter().map(|(&k, &c)| (k, c))
    }

    /// Attribute edges crossing the boundary of `members`.
    pub fn cut(&self, members: &[bool]) -> u64 {
        self.pairs
            .iter()
            .filter(|(&(u, v), _)| members[u] != members[v])
            .map(|(_, &c)| c)
            .sum()
    }

    /// Attribute volume of `members`.
    pub fn volume(&self, members: &[bool]) -> u64 {
        (0..self.n).filter(|&u| members[u]).map(|u| self.incident[u]).sum()
    }

    /// Attribute-based conductance of `members`, recomputed from the pairs.
    pub fn phi_a(&self, members: &[bool]) -> f64 {
        let vol_in = self.volume(members);
        let vol_total: u64 = self.incident.iter().sum();
        crate::conductance::ratio(self.cut(members), vol_in, vol_total - vol_in)
    }
}
