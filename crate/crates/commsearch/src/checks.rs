//! Self-check suites run by `oracle-check`. Each suite compares a fast or
//! analytic path against an independent reference on seeded inputs.

use std::fmt;

use commsearch_core::conductance::{escape_probability, WalkMode};
use commsearch_core::encoder::{grad_check, EncoderModel, LossParams, TrainingBatch};
use commsearch_core::graph::DEFAULT_ORACLE_GUARD;
use commsearch_core::refiner::{compute_advantages, ppo_grad_check, rollout_episode, Mode, PolicyModel, RefineConfig};
use commsearch_core::synthetic::{gen_synthetic, SyntheticSpec};
use commsearch_core::{
    extract_candidate, extract_candidate_naive, fixtures, phi_a, phi_t, rng, AttributedGraph, CommunityState,
    NodeId, Result,
};
use rand::Rng as _;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Worst observed discrepancy, in the suite's own unit.
    pub worst: f64,
    pub detail: String,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

impl fmt::Display for SuiteOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{status}] {}: {} cases, {} failures, worst {:.3e} ({})",
            self.name, self.cases, self.failures, self.worst, self.detail
        )
    }
}

/// Attributed planted-partition graph with roughly `n` nodes.
pub fn sbm(n: usize, k: usize, seed: u64) -> Result<AttributedGraph> {
    let blocks = (n / 25).clamp(2, 16);
    let block_size = (n / blocks).max(2);
    let attrs_per_block = (k / blocks).max(1);
    let spec = SyntheticSpec {
        blocks,
        block_size,
        p_in: (8.0 / block_size as f64).min(0.9),
        p_out: 1.0 / (blocks * block_size) as f64,
        k: k.max(blocks * attrs_per_block),
        attrs_per_block,
        attr_noise: 0.1,
        seed,
    };
    Ok(gen_synthetic(&spec)?.0)
}

/// Fast and naive extraction agree on `graphs` seeded graphs of at most
/// `max_n` nodes: same community, Φ within 1e-12, identical hop traces.
pub fn ace_vs_nac(graphs: usize, max_n: usize, queries: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = rng::stream(seed, "check-ace-nac");
    let (mut cases, mut failures, mut worst) = (0, 0, 0.0f64);
    for i in 0..graphs {
        let n = rng.gen_range(max_n.min(20)..=max_n);
        let k = rng.gen_range(2..=32);
        let beta = [0.0, 0.2, 0.5, 1.0][i % 4];
        let g = if i % 2 == 0 {
            sbm(n, k, rng.gen())?
        } else {
            fixtures::random_graph(n, rng.gen_range(2.0..6.0) / n as f64, k, rng.gen_range(0.05..0.3), rng.gen())
        };
        for _ in 0..queries {
            let q = rng.gen_range(0..g.n());
            let fast = extract_candidate(&g, q, beta, None)?;
            let slow = extract_candidate_naive(&g, q, beta, DEFAULT_ORACLE_GUARD)?;
            let gap = (fast.phi - slow.phi).abs();
            worst = worst.max(gap);
            cases += 1;
            let traces_agree = fast.trace.len() == slow.trace.len()
                && fast.trace.iter().zip(&slow.trace).all(|(a, b)| a.frontier == b.frontier && (a.phi - b.phi).abs() <= 1e-12);
            if fast.community != slow.community || gap > 1e-12 || !traces_agree {
                failures += 1;
            }
        }
    }
    Ok(SuiteOutcome {
        name: "ace-vs-nac",
        cases,
        failures,
        worst,
        detail: format!("{graphs} graphs, n <= {max_n}, |dPhi| tolerance 1e-12"),
    })
}

/// Random interleaved adds and removes on a size-`n` graph; every
/// `every` operations all five counters are compared with a from-scratch
/// recomputation.
pub fn incremental_vs_scratch(n: usize, ops: usize, every: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = rng::stream(seed, "check-incremental");
    let g = sbm(n, 24, rng.gen())?;
    let q = rng.gen_range(0..g.n());
    let mut state = CommunityState::new(&g, q)?;
    let mut members: Vec<NodeId> = vec![q];
    let (mut cases, mut failures, mut worst) = (0, 0, 0.0f64);
    for op in 1..=ops {
        let grow = members.len() == 1 || rng.gen_bool(0.55);
        if grow && members.len() < g.n() {
            let u = loop {
                let u = rng.gen_range(0..g.n());
                if !state.contains(u) {
                    break u;
                }
            };
            state.add(&g, u)?;
            members.push(u);
        } else if members.len() > 1 {
            let i = rng.gen_range(1..members.len());
            let u = members.swap_remove(i);
            state.remove(&g, u)?;
        }
        if op % every == 0 {
            cases += 1;
            let fresh = CommunityState::recompute(&g, q, &members)?;
            let diffs = [
                state.cut().abs_diff(fresh.cut()),
                state.volume().abs_diff(fresh.volume()),
                state.attribute_cut().abs_diff(fresh.attribute_cut()),
                state.attribute_volume().abs_diff(fresh.attribute_volume()),
                state.attribute_counts().iter().zip(fresh.attribute_counts()).map(|(a, b)| a.abs_diff(*b)).sum(),
            ];
            let total: u64 = diffs.iter().sum();
            worst = worst.max(total as f64);
            if total != 0 || state.mask() != fresh.mask() {
                failures += 1;
            }
        }
    }
    Ok(SuiteOutcome {
        name: "incremental-vs-scratch",
        cases,
        failures,
        worst,
        detail: format!("{ops} operations, n = {}, exact integer counters", g.n()),
    })
}

/// Monte-Carlo escape probability against the closed-form conductance in
/// both walk modes; a case fails beyond `sigmas` standard errors.
pub fn escape_semantics(graphs: usize, max_n: usize, trials: usize, sigmas: f64, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = rng::stream(seed, "check-escape");
    let (mut cases, mut failures, mut worst) = (0, 0, 0.0f64);
    let mut built = 0;
    while built < graphs {
        let n = rng.gen_range(8..=max_n.max(8));
        let g = fixtures::random_graph(n, 0.3, 6, 0.4, rng.gen());
        let community: Vec<NodeId> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
        let exact = [(WalkMode::Topology, phi_t(&g, &community)?), (WalkMode::Attribute, phi_a(&g, &community)?)];
        let estimates: Vec<_> = exact
            .iter()
            .map(|&(mode, _)| escape_probability(&g, &community, mode, trials, rng.gen()))
            .collect();
        // Resample graphs where a side has no (attribute) volume.
        if estimates.iter().any(|e| e.is_err()) {
            continue;
        }
        built += 1;
        for ((_, phi), est) in exact.iter().zip(estimates) {
            let est = est?;
            cases += 1;
            // Standard error of the exact value keeps the test well posed
            // when the estimate happens to sit at 0 or 1.
            let se = (phi * (1.0 - phi) / trials as f64).sqrt().max(est.stderr);
            let z = if se > 0.0 { (est.estimate - phi).abs() / se } else if est.estimate == *phi { 0.0 } else { f64::INFINITY };
            worst = worst.max(z);
            if z > sigmas {
                failures += 1;
            }
        }
    }
    Ok(SuiteOutcome {
        name: "escape-probability",
        cases,
        failures,
        worst,
        detail: format!("{graphs} graphs, n <= {max_n}, {trials} trials, limit {sigmas} standard errors"),
    })
}

/// Analytic against central-difference gradients for the encoder loss
/// and the clipped surrogate, on tiny seeded models.
pub fn gradients(models: usize, tolerance: f64, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = rng::stream(seed, "check-gradients");
    let (mut cases, mut failures, mut worst) = (0, 0, 0.0f64);
    let params = LossParams { alpha: 0.5, gamma1: 0.9, gamma2: 0.5 };
    for _ in 0..models {
        let g = fixtures::random_graph(9, 0.35, 4, 0.5, rng.gen());
        let model = EncoderModel::new(4, 4, 3, 0.0, rng.gen())?;
        let indicator: Vec<bool> = (0..9).map(|u| u < 4).collect();
        let batch = TrainingBatch {
            positive_pairs: g.edges().take(5).collect(),
            negative_pairs: vec![(0, 8), (1, 7), (2, 6)],
            triplets: vec![(0, 1, 7), (2, 3, 8), (1, 2, 6)],
        };
        let err = grad_check(&model, &g, &indicator, &batch, &params, 1e-5)?;
        worst = worst.max(err);
        cases += 1;
        failures += usize::from(err >= tolerance);

        let spec = SyntheticSpec {
            blocks: 2,
            block_size: 12,
            p_in: 0.4,
            p_out: 0.05,
            k: 6,
            attrs_per_block: 3,
            attr_noise: 0.1,
            seed: rng.gen(),
        };
        let (g, truth) = gen_synthetic(&spec)?;
        let cfg = RefineConfig { max_steps: Some(6), ..Default::default() };
        let encoder = EncoderModel::new(g.k(), 6, 4, 0.0, rng.gen())?;
        let policy = PolicyModel::new(cfg.context.dim(4), 5, rng.gen())?;
        let c = truth.get(0).expect("two blocks");
        let q = c[rng.gen_range(0..c.len())];
        let coarse = extract_candidate(&g, q, cfg.beta, None)?.community;
        let mode = Mode::Train { epsilon: 0.3 };
        let mut t = rollout_episode(&g, q, &coarse, &encoder, &policy, &cfg, mode, Some(c), &mut rng)?.trajectory;
        compute_advantages(&mut t, 0.9);
        if t.decisions.is_empty() {
            continue;
        }
        let err = ppo_grad_check(&policy, &t, cfg.clip, 1e-5);
        worst = worst.max(err);
        cases += 1;
        failures += usize::from(err >= tolerance);
    }
    Ok(SuiteOutcome {
        name: "gradients",
        cases,
        failures,
        worst,
        detail: format!("encoder loss and PPO surrogate, relative tolerance {tolerance:e}"),
    })
}

/// All suites at the sizes `oracle-check` uses.
pub fn run_all(size: usize, seed: u64) -> Result<Vec<SuiteOutcome>> {
    Ok(vec![
        ace_vs_nac(10, size, 3, seed)?,
        incremental_vs_scratch(size, 10_000, 100, seed)?,
        escape_semantics(5, 30, 100_000, 4.0, seed)?,
        gradients(3, 1e-4, seed)?,
    ])
}
