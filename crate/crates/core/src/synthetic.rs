//! Attributed planted-partition generator.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;

use crate::communities::CommunitySet;
use crate::graph::{AttributedGraph, NodeId};
use crate::{rng, Error, Result};

/// Parameters of a planted-partition graph with block-aligned attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub blocks: usize,
    pub block_size: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub k: usize,
    pub attrs_per_block: usize,
    /// Independent flip probability applied to every attribute bit.
    pub attr_noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.block_size == 0 {
            return Err(Error::Config("blocks and block_size must be positive"));
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return Err(Error::Config("edge probabilities must satisfy 0 <= p_out < p_in <= 1"));
        }
        if !(0.0..=0.5).contains(&self.attr_noise) {
            return Err(Error::Config("attr_noise must lie in [0, 0.5]"));
        }
        if self.k < self.blocks * self.attrs_per_block {
            return Err(Error::Config("k must be at least blocks * attrs_per_block"));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.blocks * self.block_size
    }

    /// Expected number of edges and its binomial variance.
    pub fn edge_moments(&self) -> (f64, f64) {
        let s = self.block_size as f64;
        let b = self.blocks as f64;
        let n_in = b * s * (s - 1.0) / 2.0;
        let n_out = b * (b - 1.0) / 2.0 * s * s;
        let mean = n_in * self.p_in + n_out * self.p_out;
        let var = n_in * self.p_in * (1.0 - self.p_in) + n_out * self.p_out * (1.0 - self.p_out);
        (mean, var)
    }
}

/// Calls `emit` with the positions in `0..total` that succeed in
/// independent Bernoulli(`p`) trials, skipping geometrically between hits.
fn bernoulli_positions(total: u64, p: f64, rng: &mut rng::Rng, mut emit: impl FnMut(u64)) {
    if p <= 0.0 || total == 0 {
        return;
    }
    if p >= 1.0 {
        (0..total).for_each(emit);
        return;
    }
    let log_q = libm::log(1.0 - p);
    let mut pos: u64 = 0;
    loop {
        let u: f64 = rng.gen();
        let skip = libm::floor(libm::log(1.0 - u) / log_q);
        if skip >= (total - pos) as f64 {
            return;
        }
        pos += skip as u64;
        emit(pos);
        pos += 1;
        if pos >= total {
            return;
        }
    }
}

/// Generates the graph and its planted blocks. Node `u` belongs to block
/// `u / block_size`; block `b` owns attribute columns
/// `b·attrs_per_block .. (b+1)·attrs_per_block`.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<(AttributedGraph, CommunitySet)> {
    spec.validate()?;
    let s = spec.block_size;
    let n = spec.n();
    let mut rng = rng::stream(spec.seed, "synthetic-edges");
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();

    for b in 0..spec.blocks {
        let base = b * s;
        // Row-major walk over the upper triangle; positions arrive increasing.
        let (mut row, mut row_start) = (0usize, 0u64);
        let total = (s as u64) * (s as u64 - 1) / 2;
        bernoulli_positions(total, spec.p_in, &mut rng, |pos| {
            while pos >= row_start + (s - 1 - row) as u64 {
                row_start += (s - 1 - row) as u64;
                row += 1;
            }
            let col = row + 1 + (pos - row_start) as usize;
            edges.push((base + row, base + col));
        });
    }
    for a in 0..spec.blocks {
        for b in (a + 1)..spec.blocks {
            bernoulli_positions((s * s) as u64, spec.p_out, &mut rng, |pos| {
                let (i, j) = ((pos / s as u64) as usize, (pos % s as u64) as usize);
                edges.push((a * s + i, b * s + j));
            });
        }
    }

    let mut rng = rng::stream(spec.seed, "synthetic-attributes");
    let mut attrs: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut row = vec![false; spec.k];
    for u in 0..n {
        let block = u / s;
        row.iter_mut().for_each(|x| *x = false);
        row[block * spec.attrs_per_block..(block + 1) * spec.attrs_per_block].fill(true);
        if spec.attr_noise > 0.0 {
            for bit in row.iter_mut() {
                if rng.gen::<f64>() < spec.attr_noise {
                    *bit = !*bit;
                }
            }
        }
        attrs.push((0..spec.k).filter(|&f| row[f]).collect());
    }

    let graph = AttributedGraph::new(n, edges, &attrs, spec.k)?;
    let blocks = (0..spec.blocks).map(|b| (b * s..(b + 1) * s).collect()).collect();
    let truth = CommunitySet::new(blocks, n)?;
    Ok((graph, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductance::{phi_a, phi_aug, phi_t};

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            blocks: 2,
            block_size: 4,
            p_in: 1.0,
            p_out: 0.0,
            k: 4,
            attrs_per_block: 2,
            attr_noise: 0.0,
            seed: 1,
        }
    }

    #[test]
    fn two_clean_cliques() {
        let (g, truth) = gen_synthetic(&spec()).unwrap();
        assert_eq!(g.n(), 8);
        assert_eq!(g.m(), 12);
        for block in truth.iter() {
            assert_eq!(phi_t(&g, block).unwrap(), 0.0);
            assert_eq!(phi_a(&g, block).unwrap(), 0.0);
            for beta in [0.0, 0.2, 0.7, 1.0] {
                assert_eq!(phi_aug(&g, block, beta).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn edge_count_within_three_sigma() {
        let spec = SyntheticSpec {
            blocks: 4,
            block_size: 25,
            p_in: 0.3,
            p_out: 0.02,
            k: 16,
            attrs_per_block: 4,
            attr_noise: 0.05,
            seed: 7,
        };
        // 4·C(25,2)·0.3 + C(4,2)·625·0.02 = 360 + 75
        let (mean, var) = spec.edge_moments();
        assert!((mean - 435.0).abs() < 1e-9);
        let (g, _) = gen_synthetic(&spec).unwrap();
        assert!((g.m() as f64 - mean).abs() <= 3.0 * var.sqrt(), "m = {}", g.m());
    }

    #[test]
    fn geometric_skipping_is_unbiased() {
        let mut rng = rng::seeded(3);
        let mut hits = 0u64;
        let total = 200_000u64;
        bernoulli_positions(total, 0.1, &mut rng, |_| hits += 1);
        let sd = (total as f64 * 0.1 * 0.9).sqrt();
        assert!((hits as f64 - 20_000.0).abs() < 4.0 * sd);
    }

    #[test]
    fn deterministic_and_validated() {
        let mut s = spec();
        s.p_in = 0.5;
        s.p_out = 0.1;
        s.attr_noise = 0.2;
        assert_eq!(gen_synthetic(&s).unwrap(), gen_synthetic(&s).unwrap());
        s.k = 3;
        assert!(matches!(gen_synthetic(&s), Err(Error::Config(_))));
        let mut s = spec();
        s.p_out = 1.0;
        assert!(gen_synthetic(&s).is_err());
        let mut s = spec();
        s.attr_noise = 0.6;
        assert!(gen_synthetic(&s).is_err());
    }
}
