//! Reinforcement-learning refinement of a coarse candidate community.
//!
//! The state is the encoder's output with the indicator channel set to the
//! current members, restricted to `C ∪ ∂C`. Two heads score candidates:
//! the add head over the boundary plus a virtual stop node `s_a`, the
//! remove head over `C ∖ {q}` plus `s_r`. Each step applies the add choice
//! and then the remove choice; a branch that picks its virtual node stops
//! acting. Training uses a clipped PPO surrogate on one trajectory per
//! episode with ε-greedy exploration annealed across episodes.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;

use crate::communities::CommunitySet;
use crate::conductance::{check_beta, CommunityState};
use crate::encoder::{cosine_distance, EncoderModel};
use crate::extractor::extract_candidate;
use crate::graph::{AttributedGraph, NodeId};
use crate::linalg::{axpy, Matrix};
use crate::metrics::f1_from_counts;
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Scalar-output two-layer perceptron, `ReLU(x·W₁ + b₁)·w₂ + b₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Mlp {
    fn zeros(input: usize, hidden: usize) -> Self {
        Mlp { w1: Matrix::zeros(input, hidden), b1: vec![0.0; hidden], w2: vec![0.0; hidden], b2: 0.0 }
    }

    fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let limit = libm::sqrt(6.0 / (hidden + 1) as f64);
        Mlp {
            w1: Matrix::glorot(input, hidden, rng),
            b1: (0..hidden).map(|_| rng.gen_range(-0.01..0.01)).collect(),
            w2: (0..hidden).map(|_| rng.gen_range(-limit..limit)).collect(),
            b2: 0.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.b1.clone();
        self.w1.accumulate_vec_mul(x, &mut z);
        z
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let z = self.hidden(x);
        z.iter().zip(&self.w2).map(|(&a, &w)| a.max(0.0) * w).sum::<f64>() + self.b2
    }

    /// Adds `upstream · ∂score(x)/∂θ` into `grad`.
    fn accumulate_grad(&self, x: &[f64], upstream: f64, grad: &mut Mlp) {
        if upstream == 0.0 {
            return;
        }
        let z = self.hidden(x);
        grad.b2 += upstream;
        let mut dz = vec![0.0; z.len()];
        for j in 0..z.len() {
            if z[j] > 0.0 {
                grad.w2[j] += upstream * z[j];
                dz[j] = upstream * self.w2[j];
            }
        }
        axpy(1.0, &dz, &mut grad.b1);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(xi, &dz, grad.w1.row_mut(i));
            }
        }
    }

    fn slices(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), &self.b1, &self.w2, core::slice::from_ref(&self.b2)]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [self.w1.as_mut_slice(), &mut self.b1, &mut self.w2, core::slice::from_mut(&mut self.b2)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Add,
    Remove,
}

/// Add head `f_φ`, remove head `f_ψ`, and the fixed features of the two
/// virtual termination nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    pub add_head: Mlp,
    pub remove_head: Mlp,
    pub stop_add: Vec<f64>,
    pub stop_remove: Vec<f64>,
    pub seed: u64,
}

/// Gradient with respect to both heads.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrad {
    pub add_head: Mlp,
    pub remove_head: Mlp,
}

impl PolicyModel {
    pub fn new(dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        if dim == 0 || hidden == 0 {
            return Err(Error::Config("policy widths must be positive"));
        }
        let mut rng = rng::stream(seed, "policy-init");
        let add_head = Mlp::init(dim, hidden, &mut rng);
        let remove_head = Mlp::init(dim, hidden, &mut rng);
        let stop_add = (0..dim).map(|_| rng.gen_range(-0.1..=0.1)).collect();
        let stop_remove = (0..dim).map(|_| rng.gen_range(-0.1..=0.1)).collect();
        Ok(PolicyModel { add_head, remove_head, stop_add, stop_remove, seed })
    }

    /// State-encoding width both heads accept.
    pub fn dim(&self) -> usize {
        self.add_head.input_dim()
    }

    pub fn head(&self, branch: Branch) -> &Mlp {
        match branch {
            Branch::Add => &self.add_head,
            Branch::Remove => &self.remove_head,
        }
    }

    pub fn stop_features(&self, branch: Branch) -> &[f64] {
        match branch {
            Branch::Add => &self.stop_add,
            Branch::Remove => &self.stop_remove,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for head in [&self.add_head, &self.remove_head] {
            let h = head.hidden_dim();
            if head.input_dim() != d || head.b1.len() != h || head.w2.len() != h {
                return Err(Error::Shape { expected: h, found: head.w2.len() });
            }
        }
        for s in [&self.stop_add, &self.stop_remove] {
            if s.len() != d {
                return Err(Error::Shape { expected: d, found: s.len() });
            }
        }
        let finite = self.parameters().iter().all(|s| s.iter().all(|x| x.is_finite()))
            && self.stop_add.iter().chain(&self.stop_remove).all(|x| x.is_finite());
        if !finite {
            return Err(Error::Degenerate("non-finite policy weight"));
        }
        Ok(())
    }

    /// Trainable weights of both heads in a fixed order.
    pub fn parameters(&self) -> Vec<&[f64]> {
        self.add_head.slices().into_iter().chain(self.remove_head.slices()).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let PolicyModel { add_head, remove_head, .. } = self;
        add_head.slices_mut().into_iter().chain(remove_head.slices_mut()).collect()
    }

    fn zero_grad(&self) -> PolicyGrad {
        let (d, h) = (self.dim(), self.add_head.hidden_dim());
        PolicyGrad { add_head: Mlp::zeros(d, h), remove_head: Mlp::zeros(d, self.remove_head.hidden_dim()) }
    }

    /// `θ ← θ + lr·g` (gradient ascent).
    pub fn ascend(&mut self, grad: &PolicyGrad, lr: f64) {
        for (p, g) in self.parameters_mut().into_iter().zip(grad.slices()) {
            axpy(lr, g, p);
        }
    }
}

impl PolicyGrad {
    fn slices(&self) -> Vec<&[f64]> {
        self.add_head.slices().into_iter().chain(self.remove_head.slices()).collect()
    }

    fn scaled(mut self, factor: f64) -> Self {
        for head in [&mut self.add_head, &mut self.remove_head] {
            for s in head.slices_mut() {
                s.iter_mut().for_each(|x| *x *= factor);
            }
        }
        self
    }
}

/// Reward source for the refinement MDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// F1 against the episode's ground truth, plus ±1 label rewards.
    LabeledF1,
    /// Negative attribute-augmented conductance; no labels needed.
    NegativePhi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub beta: f64,
    pub episodes: usize,
    pub gamma: f64,
    pub clip: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Step cap per episode; `2·|C_coa| + 20` when `None`.
    pub max_steps: Option<usize>,
    pub objective: Objective,
    pub lr: f64,
    pub ppo_epochs: usize,
    pub hidden: usize,
    pub context: StateContext,
    pub optimizer: Optimizer,
    /// Global gradient-norm cap per PPO step; `None` disables it.
    pub max_grad_norm: Option<f64>,
    /// Hop limit for the coarse extraction used during training.
    pub max_hop: Option<usize>,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            beta: 0.2,
            episodes: 2000,
            gamma: 0.5,
            clip: 0.2,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            max_steps: None,
            objective: Objective::LabeledF1,
            lr: 0.003,
            ppo_epochs: 4,
            hidden: 32,
            context: StateContext::Anchored,
            optimizer: Optimizer::adam(),
            max_grad_norm: Some(1.0),
            max_hop: None,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        if self.episodes == 0 {
            return Err(Error::Config("episode count must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config("discount must lie in [0, 1]"));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::Config("clip range must lie in (0, 1)"));
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.epsilon_start) || !unit.contains(&self.epsilon_end) {
            return Err(Error::Config("exploration rates must lie in [0, 1]"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("learning rate must be finite and nonnegative"));
        }
        if self.hidden == 0 {
            return Err(Error::Config("policy widths must be positive"));
        }
        if self.max_grad_norm.is_some_and(|c| c.is_nan() || c <= 0.0) {
            return Err(Error::Config("gradient-norm cap must be positive"));
        }
        Ok(())
    }

    /// Linear anneal from `epsilon_start` at episode 0 to `epsilon_end` at
    /// episode `episodes − 1`.
    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.episodes <= 1 {
            return self.epsilon_start;
        }
        let t = episode.min(self.episodes - 1) as f64 / (self.episodes - 1) as f64;
        self.epsilon_start - (self.epsilon_start - self.epsilon_end) * t
    }
}

/// Non-members adjacent to a member, sorted.
pub fn boundary(graph: &AttributedGraph, state: &CommunityState) -> Vec<NodeId> {
    let mask = state.mask();
    let mut out: Vec<NodeId> = state
        .members()
        .into_iter()
        .flat_map(|u| graph.neighbors(u).iter().copied())
        .filter(|&v| !mask[v])
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Encoded state rows for `C ∪ ∂C`.
#[derive(Debug, Clone)]
pub struct StateFeatures {
    /// Sorted ids covered by `rows`.
    pub nodes: Vec<NodeId>,
    pub boundary: Vec<NodeId>,
    pub rows: Matrix,
}

impl StateFeatures {
    pub fn get(&self, u: NodeId) -> Option<&[f64]> {
        self.nodes.binary_search(&u).ok().map(|i| self.rows.row(i))
    }
}

/// What each state row carries besides the node's own encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateContext {
    /// The encoder row of the node only.
    Local,
    /// The encoder row followed by its cosine similarity to the mean
    /// member row and to the query's row.
    Anchored,
}

impl StateContext {
    /// Width of a state row for an encoder with output width `out`.
    pub fn dim(self, out: usize) -> usize {
        match self {
            StateContext::Local => out,
            StateContext::Anchored => out + 2,
        }
    }
}

/// Runs the encoder with the indicator channel set to the members of
/// `state` and keeps the rows of `C ∪ ∂C`, extended per `context`.
pub fn state_features(
    graph: &AttributedGraph,
    state: &CommunityState,
    encoder: &EncoderModel,
    context: StateContext,
) -> Result<StateFeatures> {
    let boundary = boundary(graph, state);
    let mut nodes = state.members();
    nodes.extend_from_slice(&boundary);
    nodes.sort_unstable();
    let local = encoder.encode_rows(graph, state.mask(), &nodes)?;
    if context == StateContext::Local {
        return Ok(StateFeatures { nodes, boundary, rows: local });
    }
    let out = local.cols();
    let query_row = nodes.binary_search(&state.query()).expect("query is a member");
    let mut mean = vec![0.0; out];
    for (i, &u) in nodes.iter().enumerate() {
        if state.contains(u) {
            axpy(1.0 / state.len() as f64, local.row(i), &mut mean);
        }
    }
    let mut rows = Matrix::zeros(nodes.len(), context.dim(out));
    for i in 0..nodes.len() {
        let row = rows.row_mut(i);
        row[..out].copy_from_slice(local.row(i));
        row[out] = 1.0 - cosine_distance(local.row(i), &mean);
        row[out + 1] = 1.0 - cosine_distance(local.row(i), local.row(query_row));
    }
    Ok(StateFeatures { nodes, boundary, rows })
}

/// Either a real node or the branch's virtual termination node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Node(NodeId),
    Terminate,
}

/// Candidates of one branch with their scores; the virtual node is last.
#[derive(Debug, Clone)]
pub struct ActionSet {
    pub branch: Branch,
    pub candidates: Vec<NodeId>,
    /// One row per candidate, then the virtual node's features.
    pub features: Matrix,
    pub scores: Vec<f64>,
}

impl ActionSet {
    fn build(policy: &PolicyModel, branch: Branch, candidates: Vec<NodeId>, feats: &StateFeatures) -> Self {
        let dim = policy.dim();
        let mut features = Matrix::zeros(candidates.len() + 1, dim);
        for (i, &u) in candidates.iter().enumerate() {
            features.row_mut(i).copy_from_slice(feats.get(u).expect("candidate has features"));
        }
        features.row_mut(candidates.len()).copy_from_slice(policy.stop_features(branch));
        let scores = score_rows(policy.head(branch), &features);
        ActionSet { branch, candidates, features, scores }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn choice(&self, index: usize) -> Choice {
        self.candidates.get(index).map_or(Choice::Terminate, |&u| Choice::Node(u))
    }

    /// Highest score; ties go to the earliest (smallest id), so the
    /// virtual node loses every tie.
    pub fn greedy(&self) -> usize {
        let mut best = 0;
        for i in 1..self.scores.len() {
            if self.scores[i] > self.scores[best] {
                best = i;
            }
        }
        best
    }

    pub fn probabilities(&self) -> Vec<f64> {
        softmax(&self.scores)
    }
}

fn score_rows(head: &Mlp, features: &Matrix) -> Vec<f64> {
    (0..features.rows()).map(|i| head.score(features.row(i))).collect()
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|&s| libm::exp(s - max)).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

fn log_softmax_at(scores: &[f64], index: usize) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = scores.iter().map(|&s| libm::exp(s - max)).sum();
    scores[index] - max - libm::log(total)
}

/// Scores both branches: the add side over `∂C ∪ {s_a}`, the remove side
/// over `(C ∖ {q}) ∪ {s_r}`.
pub fn score_actions(policy: &PolicyModel, feats: &StateFeatures, state: &CommunityState) -> (ActionSet, ActionSet) {
    let removable: Vec<NodeId> = feats
        .nodes
        .iter()
        .copied()
        .filter(|&u| state.contains(u) && u != state.query())
        .collect();
    (
        ActionSet::build(policy, Branch::Add, feats.boundary.clone(), feats),
        ActionSet::build(policy, Branch::Remove, removable, feats),
    )
}

/// Which branches have terminated after a [`step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepFlags {
    pub add_terminated: bool,
    pub remove_terminated: bool,
}

/// Applies the add choice, then the remove choice.
pub fn step(graph: &AttributedGraph, state: &mut CommunityState, add: Choice, remove: Choice) -> Result<StepFlags> {
    if let Choice::Node(u) = add {
        state.add(graph, u)?;
    }
    if let Choice::Node(u) = remove {
        state.remove(graph, u)?;
    }
    Ok(StepFlags { add_terminated: add == Choice::Terminate, remove_terminated: remove == Choice::Terminate })
}

/// `r_label` for one real action: +1 for adding a true member or removing
/// a non-member, −1 otherwise.
pub fn label_reward(node: NodeId, branch: Branch, truth: &[bool]) -> f64 {
    let good = match branch {
        Branch::Add => truth[node],
        Branch::Remove => !truth[node],
    };
    if good {
        1.0
    } else {
        -1.0
    }
}

/// `obj_after − obj_before`, plus the label term when given.
pub fn reward(obj_before: f64, obj_after: f64, label: Option<(NodeId, Branch, &[bool])>) -> f64 {
    let delta = obj_after - obj_before;
    match label {
        Some((u, branch, truth)) => delta + label_reward(u, branch, truth),
        None => delta,
    }
}

/// One sampled choice and what the trainer needs to re-score it.
#[derive(Debug, Clone)]
pub struct Decision {
    pub branch: Branch,
    pub step: usize,
    pub candidates: Vec<NodeId>,
    pub features: Matrix,
    pub chosen: usize,
    /// Log-probability under the softmax policy that produced it.
    pub log_prob: f64,
    pub reward: f64,
    /// Return-to-go minus the trajectory mean; set by
    /// [`compute_advantages`].
    pub advantage: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub decisions: Vec<Decision>,
    pub steps: usize,
    /// Undiscounted sum of rewards.
    pub episode_return: f64,
    /// Decision index and objective change charged for nodes dropped at
    /// finalization, if any were.
    pub finalization: Option<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// ε-greedy over the softmax policy.
    Train { epsilon: f64 },
    /// Greedy choices, no exploration.
    Eval,
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub trajectory: Trajectory,
    /// Finalized community: `q`'s component in the final member set, sorted.
    pub community: Vec<NodeId>,
    /// Members before finalization.
    pub raw_size: usize,
}

/// Sorted connected component of `q` within `mask`.
pub fn component_of(graph: &AttributedGraph, q: NodeId, mask: &[bool]) -> Vec<NodeId> {
    let mut seen = vec![false; graph.n()];
    seen[q] = true;
    let mut out = vec![q];
    let mut head = 0;
    while head < out.len() {
        let u = out[head];
        head += 1;
        for &v in graph.neighbors(u) {
            if mask[v] && !seen[v] {
                seen[v] = true;
                out.push(v);
            }
        }
    }
    out.sort_unstable();
    out
}

struct Scorer<'a> {
    objective: Objective,
    beta: f64,
    truth: Option<(&'a [bool], usize)>,
    overlap: usize,
}

impl Scorer<'_> {
    fn value(&self, graph: &AttributedGraph, state: &CommunityState) -> f64 {
        match self.objective {
            Objective::NegativePhi => -state.phi(graph, self.beta),
            Objective::LabeledF1 => match self.truth {
                Some((_, size)) => f1_from_counts(self.overlap, state.len(), size),
                None => 0.0,
            },
        }
    }

    fn labels(&self) -> Option<&[bool]> {
        match self.objective {
            Objective::LabeledF1 => self.truth.map(|t| t.0),
            Objective::NegativePhi => None,
        }
    }

    fn track(&mut self, u: NodeId, added: bool) {
        if let Some((mask, _)) = self.truth {
            if mask[u] {
                if added {
                    self.overlap += 1;
                } else {
                    self.overlap -= 1;
                }
            }
        }
    }
}

fn pick(set: &ActionSet, mode: Mode, rng: &mut Rng) -> usize {
    match mode {
        Mode::Eval => set.greedy(),
        Mode::Train { epsilon } => {
            if rng.gen::<f64>() < epsilon {
                return rng.gen_range(0..set.len());
            }
            let probs = set.probabilities();
            let mut r = rng.gen::<f64>();
            for (i, p) in probs.iter().enumerate() {
                if r < *p {
                    return i;
                }
                r -= p;
            }
            probs.len() - 1
        }
    }
}

/// Runs one episode from `coarse` (which must contain `q`).
///
/// `truth` is the ground-truth community, used by the labeled objective.
#[allow(clippy::too_many_arguments)]
pub fn rollout_episode(
    graph: &AttributedGraph,
    q: NodeId,
    coarse: &[NodeId],
    encoder: &EncoderModel,
    policy: &PolicyModel,
    cfg: &RefineConfig,
    mode: Mode,
    truth: Option<&[NodeId]>,
    rng: &mut Rng,
) -> Result<Rollout> {
    graph.check_node(q)?;
    if !coarse.contains(&q) {
        return Err(Error::Precondition("coarse community must contain the query node"));
    }
    let dim = cfg.context.dim(encoder.output_dim());
    if policy.dim() != dim {
        return Err(Error::Shape { expected: dim, found: policy.dim() });
    }
    let mut state = CommunityState::recompute(graph, q, coarse)?;
    let truth_mask = match truth {
        Some(t) => Some(crate::conductance::membership(graph, t)?),
        None => None,
    };
    let mut scorer = Scorer {
        objective: cfg.objective,
        beta: cfg.beta,
        truth: truth_mask.as_deref().map(|m| (m, truth.map_or(0, |t| t.len()))),
        overlap: 0,
    };
    if let Some((mask, _)) = scorer.truth {
        scorer.overlap = state.members().into_iter().filter(|&u| mask[u]).count();
    }

    let max_steps = cfg.max_steps.unwrap_or(2 * state.len() + 20);
    let mut trajectory = Trajectory::default();
    let (mut add_live, mut remove_live) = (true, true);
    while (add_live || remove_live) && trajectory.steps < max_steps {
        let feats = state_features(graph, &state, encoder, cfg.context)?;
        let (adds, removes) = score_actions(policy, &feats, &state);
        let t = trajectory.steps;
        trajectory.steps += 1;

        let mut acts: Vec<ActionSet> = Vec::with_capacity(2);
        if add_live {
            acts.push(adds);
        }
        if remove_live {
            acts.push(removes);
        }
        // Both choices are made on the same state before either is applied.
        let chosen: Vec<usize> = acts.iter().map(|a| pick(a, mode, rng)).collect();
        for (set, index) in acts.into_iter().zip(chosen) {
            let before = scorer.value(graph, &state);
            let choice = set.choice(index);
            let reward = match choice {
                Choice::Terminate => {
                    match set.branch {
                        Branch::Add => add_live = false,
                        Branch::Remove => remove_live = false,
                    }
                    0.0
                }
                Choice::Node(u) => {
                    match set.branch {
                        Branch::Add => step(graph, &mut state, choice, Choice::Terminate)?,
                        Branch::Remove => step(graph, &mut state, Choice::Terminate, choice)?,
                    };
                    scorer.track(u, set.branch == Branch::Add);
                    let after = scorer.value(graph, &state);
                    reward(before, after, scorer.labels().map(|m| (u, set.branch, m)))
                }
            };
            trajectory.episode_return += reward;
            trajectory.decisions.push(Decision {
                branch: set.branch,
                step: t,
                log_prob: log_softmax_at(&set.scores, index),
                candidates: set.candidates,
                features: set.features,
                chosen: index,
                reward,
                advantage: 0.0,
            });
        }
    }
    let raw_size = state.len();
    let community = component_of(graph, q, state.mask());
    if community.len() < raw_size {
        // Nodes cut off from q are dropped at finalization; the objective
        // change this causes is charged to the last removal, the only action
        // that can disconnect.
        let before = scorer.value(graph, &state);
        let final_state = CommunityState::recompute(graph, q, &community)?;
        if let Some((mask, _)) = scorer.truth {
            scorer.overlap = community.iter().filter(|&&u| mask[u]).count();
        }
        let delta = scorer.value(graph, &final_state) - before;
        let last = trajectory.decisions.iter().rposition(|d| d.branch == Branch::Remove);
        if let Some(i) = last {
            trajectory.decisions[i].reward += delta;
            trajectory.episode_return += delta;
            trajectory.finalization = Some((i, delta));
        }
    }
    Ok(Rollout { trajectory, community, raw_size })
}

/// Per-branch discounted return-to-go, minus its mean over the trajectory.
pub fn compute_advantages(trajectory: &mut Trajectory, gamma: f64) {
    let n = trajectory.decisions.len();
    if n == 0 {
        return;
    }
    let mut returns = vec![0.0; n];
    for branch in [Branch::Add, Branch::Remove] {
        let mut running = 0.0;
        let mut last_step = None;
        for i in (0..n).rev() {
            let d = &trajectory.decisions[i];
            if d.branch != branch {
                continue;
            }
            if let Some(s) = last_step {
                running *= libm::pow(gamma, (s - d.step) as f64);
            }
            running += d.reward;
            returns[i] = running;
            last_step = Some(d.step);
        }
    }
    let mean = returns.iter().sum::<f64>() / n as f64;
    for (d, g) in trajectory.decisions.iter_mut().zip(returns) {
        d.advantage = g - mean;
    }
}

/// Clipped surrogate for one decision given the new log-probability.
/// Returns the term and whether the unclipped branch was selected.
pub fn clipped_term(ratio: f64, advantage: f64, clip: f64) -> (f64, bool) {
    let plain = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if plain <= clipped {
        (plain, true)
    } else {
        (clipped, false)
    }
}

fn policy_head_mut(grad: &mut PolicyGrad, branch: Branch) -> &mut Mlp {
    match branch {
        Branch::Add => &mut grad.add_head,
        Branch::Remove => &mut grad.remove_head,
    }
}

/// Mean clipped surrogate over the trajectory and its gradient with
/// respect to both heads.
pub fn ppo_objective(policy: &PolicyModel, trajectory: &Trajectory, clip: f64) -> (f64, PolicyGrad) {
    let mut grad = policy.zero_grad();
    let n = trajectory.decisions.len();
    if n == 0 {
        return (0.0, grad);
    }
    let mut total = 0.0;
    for d in &trajectory.decisions {
        let head = policy.head(d.branch);
        let scores = score_rows(head, &d.features);
        let log_prob = log_softmax_at(&scores, d.chosen);
        let ratio = libm::exp(log_prob - d.log_prob);
        let (term, active) = clipped_term(ratio, d.advantage, clip);
        total += term;
        if !active || d.advantage == 0.0 {
            continue;
        }
        // ∂(r·A)/∂s_j = r·A·(1[j = a] − p_j)
        let coef = ratio * d.advantage / n as f64;
        let probs = softmax(&scores);
        let g = policy_head_mut(&mut grad, d.branch);
        for (j, p) in probs.iter().enumerate() {
            let indicator = if j == d.chosen { 1.0 } else { 0.0 };
            head.accumulate_grad(d.features.row(j), coef * (indicator - p), g);
        }
    }
    (total / n as f64, grad)
}

/// Step rule for policy updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// `θ ← θ + lr·g`.
    Sgd,
    /// Bias-corrected first and second moment estimates.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment buffers carried across [`ppo_update`] calls.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    pub fn new(policy: &PolicyModel, kind: Optimizer) -> Self {
        let n = policy.parameters().iter().map(|s| s.len()).sum();
        OptimizerState { kind, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn ascend(&mut self, policy: &mut PolicyModel, grad: &PolicyGrad, lr: f64) {
        let Optimizer::Adam { beta1, beta2, eps } = self.kind else {
            policy.ascend(grad, lr);
            return;
        };
        self.t += 1;
        let c1 = 1.0 - libm::pow(beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(beta2, self.t as f64);
        let mut i = 0;
        for (p, g) in policy.parameters_mut().into_iter().zip(grad.slices()) {
            for (x, &gx) in p.iter_mut().zip(g) {
                self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * gx;
                self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * gx * gx;
                *x += lr * (self.m[i] / c1) / (libm::sqrt(self.v[i] / c2) + eps);
                i += 1;
            }
        }
    }
}

/// `ppo_epochs` rounds of gradient ascent on the clipped surrogate.
/// Advantages must already be filled in.
pub fn ppo_update(policy: &mut PolicyModel, trajectory: &Trajectory, cfg: &RefineConfig, opt: &mut OptimizerState) {
    if trajectory.decisions.is_empty() || cfg.lr == 0.0 {
        return;
    }
    for _ in 0..cfg.ppo_epochs {
        let (_, grad) = ppo_objective(policy, trajectory, cfg.clip);
        let norm = libm::sqrt(grad.slices().iter().flat_map(|s| s.iter()).map(|x| x * x).sum::<f64>());
        let scale = match cfg.max_grad_norm {
            Some(cap) if norm > cap => cap / norm,
            _ => 1.0,
        };
        let grad = if scale < 1.0 { grad.scaled(scale) } else { grad };
        opt.ascend(policy, &grad, cfg.lr);
    }
}

/// Largest relative disagreement between the analytic surrogate gradient
/// and central differences with step `eps`.
pub fn ppo_grad_check(policy: &PolicyModel, trajectory: &Trajectory, clip: f64, eps: f64) -> f64 {
    let (_, grad) = ppo_objective(policy, trajectory, clip);
    let analytic: Vec<f64> = grad
        .add_head
        .slices()
        .into_iter()
        .chain(grad.remove_head.slices())
        .flatten()
        .copied()
        .collect();
    let mut probe = policy.clone();
    let lens: Vec<usize> = probe.parameters().iter().map(|s| s.len()).collect();
    let mut worst = 0.0f64;
    let mut index = 0;
    for (s, len) in lens.into_iter().enumerate() {
        for j in 0..len {
            let original = probe.parameters_mut()[s][j];
            probe.parameters_mut()[s][j] = original + eps;
            let up = ppo_objective(&probe, trajectory, clip).0;
            probe.parameters_mut()[s][j] = original - eps;
            let down = ppo_objective(&probe, trajectory, clip).0;
            probe.parameters_mut()[s][j] = original;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[index];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
            index += 1;
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct TrainedPolicy {
    pub policy: PolicyModel,
    /// Undiscounted return of every training episode.
    pub returns: Vec<f64>,
}

/// Offline training: one ε-greedy trajectory and one PPO update per
/// episode, each starting from the coarse candidate of a random member of a
/// random training community.
pub fn train_refiner(
    graph: &AttributedGraph,
    train: &CommunitySet,
    encoder: &EncoderModel,
    cfg: &RefineConfig,
    seed: u64,
) -> Result<TrainedPolicy> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training community set is empty"));
    }
    let mut policy = PolicyModel::new(cfg.context.dim(encoder.output_dim()), cfg.hidden, seed)?;
    let mut opt = OptimizerState::new(&policy, cfg.optimizer);
    let mut rng = rng::stream(seed, "refiner-train");
    let mut returns = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        let truth = train.get(rng.gen_range(0..train.len())).expect("index in range");
        let q = truth[rng.gen_range(0..truth.len())];
        let coarse = extract_candidate(graph, q, cfg.beta, cfg.max_hop)?.community;
        let mode = Mode::Train { epsilon: cfg.epsilon(episode) };
        let mut rollout = rollout_episode(graph, q, &coarse, encoder, &policy, cfg, mode, Some(truth), &mut rng)?;
        compute_advantages(&mut rollout.trajectory, cfg.gamma);
        ppo_update(&mut policy, &rollout.trajectory, cfg, &mut opt);
        returns.push(rollout.trajectory.episode_return);
    }
    policy.validate()?;
    Ok(TrainedPolicy { policy, returns })
}

/// Online refinement: a greedy rollout from `coarse`, finalized to `q`'s
/// connected component.
pub fn refine(
    graph: &AttributedGraph,
    q: NodeId,
    coarse: &[NodeId],
    encoder: &EncoderModel,
    policy: &PolicyModel,
    cfg: &RefineConfig,
) -> Result<Vec<NodeId>> {
    // Eval mode never draws from the generator.
    let mut rng = rng::seeded(0);
    Ok(rollout_episode(graph, q, coarse, encoder, policy, cfg, Mode::Eval, None, &mut rng)?.community)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::metrics::score_community;
    use crate::synthetic::{gen_synthetic, SyntheticSpec};

    fn blocks(blocks: usize, seed: u64) -> (AttributedGraph, CommunitySet) {
        gen_synthetic(&SyntheticSpec {
            blocks,
            block_size: 12,
            p_in: 0.4,
            p_out: 0.05,
            k: 3 * blocks,
            attrs_per_block: 3,
            attr_noise: 0.1,
            seed,
        })
        .unwrap()
    }

    const CTX: StateContext = StateContext::Anchored;

    fn models(g: &AttributedGraph, seed: u64) -> (EncoderModel, PolicyModel) {
        let enc = EncoderModel::new(g.k(), 6, 4, 0.0, seed).unwrap();
        let pol = PolicyModel::new(CTX.dim(4), 5, seed).unwrap();
        (enc, pol)
    }

    #[test]
    fn features_cover_members_and_boundary() {
        let (g, truth) = blocks(2, 3);
        let (enc, _) = models(&g, 1);
        let all: Vec<NodeId> = (0..g.n()).collect();
        let full = CommunityState::recompute(&g, 0, &all).unwrap();
        let f = state_features(&g, &full, &enc, CTX).unwrap();
        assert!(f.boundary.is_empty());
        assert_eq!(f.nodes, all);

        let block = truth.get(0).unwrap();
        let state = CommunityState::recompute(&g, block[0], block).unwrap();
        let f = state_features(&g, &state, &enc, CTX).unwrap();
        let brute: Vec<NodeId> = (0..g.n())
            .filter(|&v| !block.contains(&v) && block.iter().any(|&u| g.is_adjacent(u, v)))
            .collect();
        assert_eq!(f.boundary, brute);
        let full_rows = enc.encode(&g, state.mask(), None).unwrap();
        let mut mean = vec![0.0; 4];
        for &u in block {
            axpy(1.0 / block.len() as f64, full_rows.row(u), &mut mean);
        }
        let cos = |a: &[f64], b: &[f64]| {
            let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 { 0.0 } else { d / (na * nb) }
        };
        for &u in &f.nodes {
            let a = f.get(u).unwrap();
            assert!(a[..4].iter().zip(full_rows.row(u)).all(|(x, y)| (x - y).abs() < 1e-12));
            assert!((a[4] - cos(full_rows.row(u), &mean)).abs() < 1e-9);
            assert!((a[5] - cos(full_rows.row(u), full_rows.row(block[0]))).abs() < 1e-9);
        }
        let local = state_features(&g, &state, &enc, StateContext::Local).unwrap();
        assert_eq!(local.rows.cols(), 4);
        assert_eq!(local.nodes, f.nodes);
    }

    #[test]
    fn isolated_query_features() {
        let attrs = vec![vec![0], vec![1], vec![0]];
        let g = AttributedGraph::new(3, [(0, 1)], &attrs, 2).unwrap();
        let (enc, pol) = models(&g, 2);
        let state = CommunityState::new(&g, 2).unwrap();
        let f = state_features(&g, &state, &enc, CTX).unwrap();
        assert_eq!(f.nodes, vec![2]);
        let (adds, removes) = score_actions(&pol, &f, &state);
        assert!(adds.candidates.is_empty() && removes.candidates.is_empty());
        assert_eq!(adds.choice(adds.greedy()), Choice::Terminate);
    }

    fn constant_heads(pol: &mut PolicyModel, b: f64) {
        for head in [&mut pol.add_head, &mut pol.remove_head] {
            let (d, h) = (head.input_dim(), head.hidden_dim());
            *head = Mlp::zeros(d, h);
            head.b2 = b;
        }
    }

    #[test]
    fn ties_go_to_smallest_real_node() {
        let (g, truth) = blocks(2, 4);
        let (enc, mut pol) = models(&g, 3);
        constant_heads(&mut pol, 0.25);
        let block = truth.get(1).unwrap();
        let state = CommunityState::recompute(&g, block[3], block).unwrap();
        let f = state_features(&g, &state, &enc, CTX).unwrap();
        let (adds, removes) = score_actions(&pol, &f, &state);
        assert!(adds.scores.iter().chain(&removes.scores).all(|&s| s == 0.25));
        assert_eq!(adds.choice(adds.greedy()), Choice::Node(f.boundary[0]));
        let smallest_removable = *block.iter().find(|&&u| u != block[3]).unwrap();
        assert_eq!(removes.choice(removes.greedy()), Choice::Node(smallest_removable));
        assert!(!removes.candidates.contains(&block[3]));
        for set in [&adds, &removes] {
            assert!((set.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scores_match_dense_forward() {
        let (g, truth) = blocks(2, 5);
        let (enc, pol) = models(&g, 7);
        let block = truth.get(0).unwrap();
        let state = CommunityState::recompute(&g, block[0], &block[..6]).unwrap();
        let f = state_features(&g, &state, &enc, CTX).unwrap();
        let (adds, _) = score_actions(&pol, &f, &state);
        let h = &pol.add_head;
        let dense = |x: &[f64]| {
            let mut s = h.b2;
            for j in 0..h.hidden_dim() {
                let mut z = h.b1[j];
                for (i, xi) in x.iter().enumerate() {
                    z += xi * h.w1.get(i, j);
                }
                s += z.max(0.0) * h.w2[j];
            }
            s
        };
        for (i, &u) in adds.candidates.iter().enumerate() {
            assert!((adds.scores[i] - dense(f.get(u).unwrap())).abs() < 1e-12);
        }
        assert!((adds.scores.last().unwrap() - dense(&pol.stop_add)).abs() < 1e-12);
    }

    #[test]
    fn step_semantics() {
        let (g, _) = blocks(2, 6);
        let mut state = CommunityState::recompute(&g, 0, &[0, 1, 2]).unwrap();
        let before = state.clone();
        let flags = step(&g, &mut state, Choice::Terminate, Choice::Terminate).unwrap();
        assert!(flags.add_terminated && flags.remove_terminated);
        assert_eq!(state, before);
        step(&g, &mut state, Choice::Node(7), Choice::Node(7)).unwrap();
        assert_eq!(state, before);
        assert!(matches!(step(&g, &mut state, Choice::Terminate, Choice::Node(0)), Err(Error::ForbiddenRemoval(0))));
    }

    #[test]
    fn random_steps_track_recomputation() {
        let g = fixtures::random_graph(25, 0.2, 5, 0.3, 9);
        let mut rng = rng::seeded(4);
        let mut state = CommunityState::new(&g, 3).unwrap();
        for _ in 0..300 {
            let u = rng.gen_range(0..25);
            let add = if state.contains(u) { Choice::Terminate } else { Choice::Node(u) };
            let members = state.members();
            let v = members[rng.gen_range(0..members.len())];
            let remove = if v == 3 || add == Choice::Node(v) { Choice::Terminate } else { Choice::Node(v) };
            step(&g, &mut state, add, remove).unwrap();
            assert_eq!(state, CommunityState::recompute(&g, 3, &state.members()).unwrap());
        }
    }

    #[test]
    fn reward_cases() {
        let truth = [true, false, true];
        assert_eq!(reward(0.4, 0.4, None), 0.0);
        assert!((reward(0.2, 0.3, Some((0, Branch::Add, &truth))) - 1.1).abs() < 1e-12);
        assert_eq!(reward(0.5, 0.5, Some((2, Branch::Remove, &truth))), -1.0);
        assert_eq!(reward(0.5, 0.5, Some((1, Branch::Remove, &truth))), 1.0);
        assert_eq!(reward(0.5, 0.5, Some((1, Branch::Add, &truth))), -1.0);
    }

    #[test]
    fn stop_nodes_scored_highest_end_immediately() {
        let (g, truth) = blocks(2, 8);
        let (enc, mut pol) = models(&g, 9);
        for head in [&mut pol.add_head, &mut pol.remove_head] {
            let (d, h) = (head.input_dim(), head.hidden_dim());
            *head = Mlp::zeros(d, h);
            head.w1.set(0, 0, 1.0);
            head.w2[0] = 1.0;
        }
        pol.stop_add[0] = 1e6;
        pol.stop_remove[0] = 1e6;
        let block = truth.get(0).unwrap();
        let coarse = component_of(&g, block[0], &crate::conductance::membership(&g, block).unwrap());
        let cfg = RefineConfig::default();
        let mut rng = rng::seeded(1);
        let out = rollout_episode(&g, block[0], &coarse, &enc, &pol, &cfg, Mode::Eval, None, &mut rng).unwrap();
        assert_eq!(out.trajectory.steps, 1);
        assert_eq!(out.community, coarse);
    }

    #[test]
    fn greedy_rollouts_repeat_exactly() {
        let (g, truth) = blocks(3, 10);
        let (enc, pol) = models(&g, 11);
        let cfg = RefineConfig::default();
        let q = truth.get(2).unwrap()[0];
        let coarse = extract_candidate(&g, q, 0.2, None).unwrap().community;
        let run = || {
            let mut rng = rng::seeded(33);
            let mode = Mode::Train { epsilon: 0.0 };
            let r = rollout_episode(&g, q, &coarse, &enc, &pol, &cfg, mode, truth.get(2), &mut rng).unwrap();
            (r.community, r.trajectory.decisions.iter().map(|d| d.chosen).collect::<Vec<_>>())
        };
        assert_eq!(run(), run());
        assert_eq!(refine(&g, q, &coarse, &enc, &pol, &cfg).unwrap(), refine(&g, q, &coarse, &enc, &pol, &cfg).unwrap());
    }

    #[test]
    fn outputs_contain_query_and_are_connected() {
        let (g, truth) = blocks(3, 12);
        let cfg = RefineConfig::default();
        let mut rng = rng::seeded(2);
        for trial in 0..30u64 {
            let (enc, pol) = models(&g, trial);
            let c = truth.get(trial as usize % 3).unwrap();
            let q = c[trial as usize % c.len()];
            let coarse = extract_candidate(&g, q, 0.5, Some(2)).unwrap().community;
            let out = rollout_episode(&g, q, &coarse, &enc, &pol, &cfg, Mode::Train { epsilon: 0.7 }, Some(c), &mut rng)
                .unwrap()
                .community;
            assert!(out.contains(&q));
            let mask = crate::conductance::membership(&g, &out).unwrap();
            assert_eq!(component_of(&g, q, &mask), out);
        }
    }

    #[test]
    fn labeled_rewards_decompose() {
        let (g, truth) = blocks(2, 13);
        let (enc, pol) = models(&g, 14);
        let cfg = RefineConfig::default();
        let c = truth.get(0).unwrap();
        let q = c[1];
        let coarse = extract_candidate(&g, q, 0.2, None).unwrap().community;
        let mut rng = rng::seeded(8);
        let out = rollout_episode(&g, q, &coarse, &enc, &pol, &cfg, Mode::Train { epsilon: 0.5 }, Some(c), &mut rng).unwrap();
        let truth_mask = crate::conductance::membership(&g, c).unwrap();
        let mut members = coarse.clone();
        let f1 = |m: &Vec<NodeId>| {
            let mut s = m.clone();
            s.sort_unstable();
            score_community(&s, c, g.n()).unwrap().f1
        };
        for (i, d) in out.trajectory.decisions.iter().enumerate() {
            let before = f1(&members);
            let mut reward = d.reward;
            if let Some((j, delta)) = out.trajectory.finalization {
                if i == j {
                    reward -= delta;
                }
            }
            match d.candidates.get(d.chosen) {
                None => assert!(reward.abs() < 1e-12),
                Some(&u) => {
                    match d.branch {
                        Branch::Add => members.push(u),
                        Branch::Remove => members.retain(|&v| v != u),
                    }
                    let delta = f1(&members) - before;
                    let label = reward - delta;
                    assert!((label.abs() - 1.0).abs() < 1e-12);
                    assert_eq!(label > 0.0, label_reward(u, d.branch, &truth_mask) > 0.0);
                }
            }
        }
    }

    #[test]
    fn anneal_schedule() {
        let cfg = RefineConfig { episodes: 11, ..Default::default() };
        assert_eq!(cfg.epsilon(0), 1.0);
        assert!((cfg.epsilon(10) - 0.05).abs() < 1e-15);
        assert!((cfg.epsilon(5) - 0.525).abs() < 1e-15);
        assert!((0..10).all(|e| cfg.epsilon(e + 1) <= cfg.epsilon(e)));
        assert_eq!(RefineConfig { episodes: 1, ..Default::default() }.epsilon(0), 1.0);
    }

    fn sample_trajectory(seed: u64) -> (PolicyModel, Trajectory) {
        let (g, truth) = blocks(2, seed);
        let (enc, pol) = models(&g, seed);
        let c = truth.get(0).unwrap();
        let coarse = extract_candidate(&g, c[0], 0.2, None).unwrap().community;
        let cfg = RefineConfig { max_steps: Some(6), ..Default::default() };
        let mut rng = rng::seeded(seed);
        let mut t = rollout_episode(&g, c[0], &coarse, &enc, &pol, &cfg, Mode::Train { epsilon: 0.3 }, Some(c), &mut rng)
            .unwrap()
            .trajectory;
        compute_advantages(&mut t, 0.9);
        (pol, t)
    }

    #[test]
    fn advantages_are_centered() {
        let (_, t) = sample_trajectory(15);
        let mean = t.decisions.iter().map(|d| d.advantage).sum::<f64>() / t.decisions.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn returns_to_go_by_hand() {
        let d = |branch, step, reward| Decision {
            branch,
            step,
            candidates: Vec::new(),
            features: Matrix::zeros(1, 1),
            chosen: 0,
            log_prob: 0.0,
            reward,
            advantage: 0.0,
        };
        let mut t = Trajectory {
            decisions: vec![d(Branch::Add, 0, 1.0), d(Branch::Remove, 0, 2.0), d(Branch::Add, 1, 3.0)],
            ..Default::default()
        };
        compute_advantages(&mut t, 0.5);
        // Returns: add 1 + 0.5·3 = 2.5, remove 2, add 3; mean 2.5.
        let adv: Vec<f64> = t.decisions.iter().map(|d| d.advantage).collect();
        assert_eq!(adv, vec![0.0, -0.5, 0.5]);
    }

    #[test]
    fn clip_algebra() {
        assert_eq!(clipped_term(1.0, 2.0, 0.2), (2.0, true));
        assert!(!clipped_term(1.4, 1.0, 0.2).1);
        assert!((clipped_term(1.4, 1.0, 0.2).0 - 1.2).abs() < 1e-15);
        assert!(!clipped_term(0.5, -1.0, 0.2).1);
        for &(r, a) in &[(0.3, 1.0), (1.7, -2.0), (1.1, 0.5), (0.9, -0.5)] {
            let expect = f64::min(r * a, f64::clamp(r, 0.8, 1.2) * a);
            assert_eq!(clipped_term(r, a, 0.2).0, expect);
        }
    }

    #[test]
    fn ratio_one_objective_is_mean_advantage() {
        let (pol, t) = sample_trajectory(16);
        let (obj, _) = ppo_objective(&pol, &t, 0.2);
        assert!(obj.abs() < 1e-12, "centered advantages average to zero, got {obj}");
    }

    #[test]
    fn saturated_clip_has_zero_gradient() {
        let (pol, mut t) = sample_trajectory(17);
        for d in t.decisions.iter_mut() {
            d.advantage = 1.0;
            d.log_prob -= libm::log(1.4);
        }
        let (obj, grad) = ppo_objective(&pol, &t, 0.2);
        assert!((obj - 1.2).abs() < 1e-9);
        assert!(grad.add_head.slices().iter().chain(&grad.remove_head.slices()).all(|s| s.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        let (pol, t) = sample_trajectory(18);
        assert!(t.decisions.len() >= 2);
        assert!(ppo_grad_check(&pol, &t, 0.2, 1e-5) < 1e-4);
    }

    #[test]
    fn training_endpoints() {
        let (g, truth) = blocks(2, 19);
        let (enc, _) = models(&g, 20);
        let one = RefineConfig { episodes: 1, ..Default::default() };
        let trained = train_refiner(&g, &truth, &enc, &one, 4).unwrap();
        assert_eq!(trained.returns.len(), 1);
        let frozen = RefineConfig { episodes: 5, lr: 0.0, hidden: 5, ..Default::default() };
        let trained = train_refiner(&g, &truth, &enc, &frozen, 4).unwrap();
        assert_eq!(trained.policy, PolicyModel::new(CTX.dim(4), 5, 4).unwrap());
        assert!(matches!(
            train_refiner(&g, &truth, &enc, &RefineConfig { gamma: 1.5, ..Default::default() }, 4),
            Err(Error::Config(_))
        ));
        assert!(matches!(train_refiner(&g, &CommunitySet::default(), &enc, &one, 4), Err(Error::Config(_))));
    }
}
