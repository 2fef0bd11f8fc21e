//! Ground-truth community sets and train/validation/test splitting.

use alloc::vec::Vec;
use rand::seq::SliceRandom;

use crate::graph::NodeId;
use crate::{rng, Error, Result};

/// Communities as sorted, duplicate-free node lists. Never contains an
/// empty community.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommunitySet {
    communities: Vec<Vec<NodeId>>,
}

impl CommunitySet {
    /// Normalizes each community to a sorted set. Fails on an id `>= n`
    /// or an empty community.
    pub fn new(communities: Vec<Vec<NodeId>>, n: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(communities.len());
        for mut c in communities {
            if c.is_empty() {
                return Err(Error::Precondition("communities must be nonempty"));
            }
            if let Some(&bad) = c.iter().find(|&&u| u >= n) {
                return Err(Error::Bounds { what: "node", index: bad, limit: n });
            }
            c.sort_unstable();
            c.dedup();
            out.push(c);
        }
        Ok(CommunitySet { communities: out })
    }

    pub fn len(&self) -> usize {
        self.communities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.communities.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&[NodeId]> {
        self.communities.get(i).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[NodeId]> {
        self.communities.iter().map(Vec::as_slice)
    }

    /// For every node, the indices of the communities containing it.
    pub fn memberships(&self, n: usize) -> Vec<Vec<usize>> {
        let mut by_node = alloc::vec![Vec::new(); n];
        for (i, c) in self.communities.iter().enumerate() {
            for &u in c {
                by_node[u].push(i);
            }
        }
        by_node
    }
}

/// Seeded shuffle followed by a proportional split. Train and validation
/// sizes are rounded down; the remainder goes to test.
pub fn split_communities(
    set: &CommunitySet,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(CommunitySet, CommunitySet, CommunitySet)> {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| !r.is_finite() || *r < 0.0) || a + b + c <= 0.0 {
        return Err(Error::Config("split ratios must be nonnegative with a positive sum"));
    }
    let nonzero = [a, b, c].iter().filter(|r| **r > 0.0).count();
    if set.len() < nonzero {
        return Err(Error::Config("fewer communities than requested splits"));
    }
    let total = a + b + c;
    let len = set.len();
    let n_train = libm::floor(len as f64 * a / total) as usize;
    let n_val = libm::floor(len as f64 * b / total) as usize;

    let mut shuffled = set.communities.clone();
    shuffled.shuffle(&mut rng::stream(seed, "split-communities"));
    let test = shuffled.split_off(n_train + n_val);
    let val = shuffled.split_off(n_train);
    Ok((
        CommunitySet { communities: shuffled },
        CommunitySet { communities: val },
        CommunitySet { communities: test },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn singletons(count: usize) -> CommunitySet {
        CommunitySet::new((0..count).map(|i| vec![i]).collect(), count).unwrap()
    }

    #[test]
    fn normalizes_and_validates() {
        let set = CommunitySet::new(vec![vec![0, 1, 2], vec![4, 3], vec![1, 0, 0]], 5).unwrap();
        assert_eq!(set.get(1), Some(&[3, 4][..]));
        assert_eq!(set.get(2), Some(&[0, 1][..]));
        assert!(matches!(CommunitySet::new(vec![vec![5]], 5), Err(Error::Bounds { .. })));
        assert!(CommunitySet::new(vec![vec![]], 5).is_err());
        assert!(CommunitySet::new(vec![], 5).unwrap().is_empty());
    }

    #[test]
    fn five_one_four() {
        let (tr, va, te) = split_communities(&singletons(10), (5.0, 1.0, 4.0), 3).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (5, 1, 4));
    }

    #[test]
    fn single_community_all_train() {
        let (tr, va, te) = split_communities(&singletons(1), (1.0, 0.0, 0.0), 3).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (1, 0, 0));
    }

    #[test]
    fn deterministic_per_seed() {
        let set = singletons(7);
        assert_eq!(
            split_communities(&set, (5.0, 1.0, 4.0), 11).unwrap(),
            split_communities(&set, (5.0, 1.0, 4.0), 11).unwrap()
        );
    }

    #[test]
    fn too_few_communities() {
        assert!(split_communities(&singletons(2), (5.0, 1.0, 4.0), 1).is_err());
        assert!(split_communities(&singletons(2), (-1.0, 1.0, 4.0), 1).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(count in 3usize..40, a in 0.1f64..5.0, b in 0.1f64..5.0, c in 0.1f64..5.0, seed in 0u64..100) {
            let set = singletons(count);
            let (tr, va, te) = split_communities(&set, (a, b, c), seed).unwrap();
            let mut all: Vec<Vec<NodeId>> = tr.iter().chain(va.iter()).chain(te.iter()).map(|c| c.to_vec()).collect();
            all.sort();
            prop_assert_eq!(all.len(), count);
            prop_assert_eq!(all, (0..count).map(|i| vec![i]).collect::<Vec<_>>());
        }
    }
}
