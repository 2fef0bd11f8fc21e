//! Overlap metrics between a predicted community and a ground-truth one.

use crate::graph::NodeId;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub f1: f64,
    pub nmi: f64,
    pub jac: f64,
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * libm::log(p)
        })
        .sum()
}

/// F1, NMI and Jaccard of `pred` against `truth` over `n` nodes.
///
/// Inputs are sorted, duplicate-free id lists. NMI compares the binary
/// partitions `{pred, V∖pred}` and `{truth, V∖truth}` with natural-log
/// mutual information over the arithmetic mean of the two entropies.
pub fn score_community(pred: &[NodeId], truth: &[NodeId], n: usize) -> Result<Scores> {
    if pred.is_empty() || truth.is_empty() {
        return Err(Error::Precondition("communities must be nonempty"));
    }
    for &u in pred.iter().chain(truth) {
        if u >= n {
            return Err(Error::Bounds { what: "node", index: u, limit: n });
        }
    }
    let both = intersection(pred, truth) as f64;
    let (p, t, nf) = (pred.len() as f64, truth.len() as f64, n as f64);

    let f1 = if both == 0.0 {
        0.0
    } else {
        let precision = both / p;
        let recall = both / t;
        2.0 * precision * recall / (precision + recall)
    };
    let jac = both / (p + t - both);

    let nmi = if pred == truth {
        1.0
    } else {
        let h_pred = entropy(&[p, nf - p], nf);
        let h_truth = entropy(&[t, nf - t], nf);
        if h_pred == 0.0 || h_truth == 0.0 {
            0.0
        } else {
            let cells = [
                (both, p, t),
                (p - both, p, nf - t),
                (t - both, nf - p, t),
                (nf - p - t + both, nf - p, nf - t),
            ];
            let mi: f64 = cells
                .iter()
                .filter(|(c, _, _)| *c > 0.0)
                .map(|&(c, row, col)| (c / nf) * libm::log(c * nf / (row * col)))
                .sum();
            (mi / (0.5 * (h_pred + h_truth))).clamp(0.0, 1.0)
        }
    };
    Ok(Scores { f1, nmi, jac })
}

fn intersection(a: &[NodeId], b: &[NodeId]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            i += 1;
        } else if a[i] > b[j] {
            j += 1;
        } else {
            c += 1;
            i += 1;
            j += 1;
        }
    }
    c
}

/// F1 only, for reward shaping inside the refiner.
pub fn f1_from_counts(overlap: usize, pred: usize, truth: usize) -> f64 {
    if overlap == 0 || pred == 0 || truth == 0 {
        0.0
    } else {
        2.0 * overlap as f64 / (pred + truth) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    /// Mutual information from the full joint distribution of two label
    /// vectors, independent of the contingency shortcut above.
    fn nmi_direct(pred: &[NodeId], truth: &[NodeId], n: usize) -> f64 {
        let x: Vec<usize> = (0..n).map(|u| pred.contains(&u) as usize).collect();
        let y: Vec<usize> = (0..n).map(|u| truth.contains(&u) as usize).collect();
        let mut joint = [[0.0f64; 2]; 2];
        for u in 0..n {
            joint[x[u]][y[u]] += 1.0 / n as f64;
        }
        let px = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
        let py = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
        let h = |p: [f64; 2]| -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>();
        let mut mi = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                if joint[a][b] > 0.0 {
                    mi += joint[a][b] * (joint[a][b] / (px[a] * py[b])).ln();
                }
            }
        }
        mi / ((h(px) + h(py)) / 2.0)
    }

    #[test]
    fn identical_sets() {
        let s = score_community(&[1, 2, 3], &[1, 2, 3], 10).unwrap();
        assert_eq!((s.f1, s.nmi, s.jac), (1.0, 1.0, 1.0));
    }

    #[test]
    fn disjoint_sets() {
        let s = score_community(&[0, 1, 2, 3], &[4, 5, 6, 7], 20).unwrap();
        assert_eq!((s.f1, s.jac), (0.0, 0.0));
        let direct = nmi_direct(&[0, 1, 2, 3], &[4, 5, 6, 7], 20);
        assert!((s.nmi - direct).abs() < 1e-12);
        // Disjoint indicators are still weakly dependent at finite n.
        assert!(s.nmi > 0.1 && s.nmi < 0.11);
    }

    #[test]
    fn half_overlap() {
        let s = score_community(&[0, 1, 2, 3], &[2, 3, 4, 5], 20).unwrap();
        assert!((s.f1 - 0.5).abs() < 1e-15);
        assert!((s.jac - 2.0 / 6.0).abs() < 1e-15);
        assert!((s.nmi - nmi_direct(&[0, 1, 2, 3], &[2, 3, 4, 5], 20)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_partition_scores_zero_nmi() {
        let all: Vec<NodeId> = (0..5).collect();
        let s = score_community(&all, &[0, 1], 5).unwrap();
        assert_eq!(s.nmi, 0.0);
        assert_eq!(score_community(&all, &all, 5).unwrap().nmi, 1.0);
    }

    #[test]
    fn rejects_empty_and_out_of_range() {
        assert!(score_community(&[], &[1], 3).is_err());
        assert!(score_community(&[1], &[], 3).is_err());
        assert!(score_community(&[3], &[1], 3).is_err());
    }

    fn subset(mask: &[bool], n: usize) -> Vec<NodeId> {
        (0..n).filter(|&u| mask[u]).collect()
    }

    proptest! {
        #[test]
        fn metric_properties(n in 2usize..30, a in proptest::collection::vec(any::<bool>(), 30), b in proptest::collection::vec(any::<bool>(), 30)) {
            let pred = subset(&a, n);
            let truth = subset(&b, n);
            prop_assume!(!pred.is_empty() && !truth.is_empty());
            let s = score_community(&pred, &truth, n).unwrap();
            let r = score_community(&truth, &pred, n).unwrap();
            prop_assert!((s.jac - r.jac).abs() < 1e-15);
            prop_assert!((s.nmi - r.nmi).abs() < 1e-12);
            for v in [s.f1, s.nmi, s.jac] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let overlap = intersection(&pred, &truth);
            prop_assert_eq!(s.f1 == 0.0, overlap == 0);
            prop_assert_eq!(s.f1 == 1.0, pred == truth);
            prop_assert!((s.f1 - f1_from_counts(overlap, pred.len(), truth.len())).abs() < 1e-12);
            if pred != truth && (1..n).contains(&pred.len()) && (1..n).contains(&truth.len()) {
                prop_assert!((s.nmi - nmi_direct(&pred, &truth, n)).abs() < 1e-9);
            }
        }
    }
}
