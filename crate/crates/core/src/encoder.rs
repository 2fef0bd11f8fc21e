//! Community-aware state encoder.
//!
//! A two-layer graph convolution
//!
//! ```text
//! h'_u = Dr(ReLU(h_u·W_s + Σ_{v∈N(u)} h_v·W / √((d(u)+1)(d(v)+1)) + b))
//! ```
//!
//! over input rows `[F[u] ∥ indicator(u)]`. It is trained with a cosine
//! contrastive loss on edges/non-edges plus a triplet loss on community
//! members, `L = L_T + α·L_C`. Gradients are derived by hand and checked
//! against central differences by [`grad_check`].

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;

use crate::communities::CommunitySet;
use crate::graph::{AttributedGraph, NodeId};
use crate::linalg::{axpy, dot, norm, Matrix};
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Weights of one convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `in × out`, applied to the node's own row.
    pub self_weight: Matrix,
    /// `in × out`, applied to normalized neighbor rows.
    pub neighbor_weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(input: usize, output: usize) -> Self {
        Layer {
            self_weight: Matrix::zeros(input, output),
            neighbor_weight: Matrix::zeros(input, output),
            bias: vec![0.0; output],
        }
    }

    fn glorot(input: usize, output: usize, rng: &mut Rng) -> Self {
        Layer {
            self_weight: Matrix::glorot(input, output, rng),
            neighbor_weight: Matrix::glorot(input, output, rng),
            // Small nonzero biases keep featureless nodes off the ReLU kink.
            bias: (0..output).map(|_| rng.gen_range(-0.01..0.01)).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.self_weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.self_weight.cols()
    }

    fn slices(&self) -> [&[f64]; 3] {
        [self.self_weight.as_slice(), self.neighbor_weight.as_slice(), &self.bias]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 3] {
        [self.self_weight.as_mut_slice(), self.neighbor_weight.as_mut_slice(), &mut self.bias]
    }
}

/// Two-layer encoder; input width is `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub layers: [Layer; 2],
    pub dropout: f64,
    pub seed: u64,
}

/// Gradient of a scalar loss with respect to every encoder weight.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrad {
    pub layers: [Layer; 2],
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    indicator: Vec<bool>,
    pub pre1: Matrix,
    pub hidden: Matrix,
    pub pre2: Matrix,
    pub output: Matrix,
    masks: Option<[Matrix; 2]>,
}

fn norm_coefficients(graph: &AttributedGraph) -> Vec<f64> {
    (0..graph.n()).map(|u| 1.0 / libm::sqrt((graph.degree(u) + 1) as f64)).collect()
}

/// `Σ_{f∈F[u]} W[f] (+ W[k] if indicated)` into `out`.
fn sparse_input_mul(graph: &AttributedGraph, indicator: &[bool], w: &Matrix, u: NodeId, out: &mut [f64]) {
    for &f in graph.attributes(u) {
        axpy(1.0, w.row(f), out);
    }
    if indicator[u] {
        axpy(1.0, w.row(graph.k()), out);
    }
}

/// `out[u] = Σ_{v∈N(u)} c_uv · src[v]` with symmetric normalization.
fn propagate(graph: &AttributedGraph, coef: &[f64], src: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(src.rows(), src.cols());
    for u in 0..graph.n() {
        let row = out.row_mut(u);
        for &v in graph.neighbors(u) {
            axpy(coef[u] * coef[v], src.row(v), row);
        }
    }
    out
}

/// Inverted dropout: each entry is kept with probability `1 − rate` and
/// scaled by `1 / (1 − rate)`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> Matrix {
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    Matrix::from_vec(rows, cols, data)
}

fn activate(pre: &Matrix, mask: Option<&Matrix>) -> Matrix {
    let mut h = pre.clone();
    for (i, x) in h.as_mut_slice().iter_mut().enumerate() {
        *x = x.max(0.0);
        if let Some(m) = mask {
            *x *= m.as_slice()[i];
        }
    }
    h
}

/// Backprop through `mask ⊙ ReLU(pre)`.
fn activation_grad(pre: &Matrix, mask: Option<&Matrix>, upstream: &Matrix) -> Matrix {
    let mut d = upstream.clone();
    for (i, x) in d.as_mut_slice().iter_mut().enumerate() {
        if pre.as_slice()[i] <= 0.0 {
            *x = 0.0;
        } else if let Some(m) = mask {
            *x *= m.as_slice()[i];
        }
    }
    d
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        axpy(1.0, m.row(i), &mut out);
    }
    out
}

impl EncoderModel {
    /// Glorot-initialized model for a graph with `k` attributes.
    pub fn new(k: usize, hidden: usize, out: usize, dropout: f64, seed: u64) -> Result<Self> {
        if hidden == 0 || out == 0 {
            return Err(Error::Config("encoder widths must be positive"));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)"));
        }
        let mut rng = rng::stream(seed, "encoder-init");
        let first = Layer::glorot(k + 1, hidden, &mut rng);
        let second = Layer::glorot(hidden, out, &mut rng);
        Ok(EncoderModel { layers: [first, second], dropout, seed })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers[0].output_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[1].output_dim()
    }

    /// Dimension agreement and finiteness of every weight.
    pub fn validate(&self) -> Result<()> {
        for layer in &self.layers {
            let (i, o) = (layer.input_dim(), layer.output_dim());
            if layer.neighbor_weight.rows() != i || layer.neighbor_weight.cols() != o {
                return Err(Error::Shape { expected: i * o, found: layer.neighbor_weight.as_slice().len() });
            }
            if layer.bias.len() != o {
                return Err(Error::Shape { expected: o, found: layer.bias.len() });
            }
        }
        if self.layers[1].input_dim() != self.hidden_dim() {
            return Err(Error::Shape { expected: self.hidden_dim(), found: self.layers[1].input_dim() });
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)"));
        }
        if !self.parameters().iter().all(|s| s.iter().all(|x| x.is_finite())) {
            return Err(Error::Degenerate("non-finite encoder weight"));
        }
        Ok(())
    }

    fn check_input(&self, graph: &AttributedGraph, indicator: &[bool]) -> Result<()> {
        if indicator.len() != graph.n() {
            return Err(Error::Shape { expected: graph.n(), found: indicator.len() });
        }
        if self.input_dim() != graph.k() + 1 {
            return Err(Error::Shape { expected: graph.k() + 1, found: self.input_dim() });
        }
        Ok(())
    }

    /// Full forward pass. Dropout is applied only when `dropout_rng` is
    /// given (training mode).
    pub fn forward(&self, graph: &AttributedGraph, indicator: &[bool], dropout_rng: Option<&mut Rng>) -> Result<Forward> {
        self.check_input(graph, indicator)?;
        let n = graph.n();
        let coef = norm_coefficients(graph);
        let [l1, l2] = &self.layers;

        let mut own = Matrix::zeros(n, self.hidden_dim());
        let mut msg = Matrix::zeros(n, self.hidden_dim());
        for u in 0..n {
            sparse_input_mul(graph, indicator, &l1.self_weight, u, own.row_mut(u));
            sparse_input_mul(graph, indicator, &l1.neighbor_weight, u, msg.row_mut(u));
        }
        let mut pre1 = propagate(graph, &coef, &msg);
        for u in 0..n {
            let row = pre1.row_mut(u);
            axpy(1.0, own.row(u), row);
            axpy(1.0, &l1.bias, row);
        }

        let masks = match dropout_rng {
            Some(rng) if self.dropout > 0.0 => Some([
                dropout_mask(n, self.hidden_dim(), self.dropout, rng),
                dropout_mask(n, self.output_dim(), self.dropout, rng),
            ]),
            _ => None,
        };
        let hidden = activate(&pre1, masks.as_ref().map(|m| &m[0]));

        let own = hidden.matmul(&l2.self_weight);
        let mut pre2 = propagate(graph, &coef, &hidden.matmul(&l2.neighbor_weight));
        for u in 0..n {
            let row = pre2.row_mut(u);
            axpy(1.0, own.row(u), row);
            axpy(1.0, &l2.bias, row);
        }
        let output = activate(&pre2, masks.as_ref().map(|m| &m[1]));
        Ok(Forward { indicator: indicator.to_vec(), pre1, hidden, pre2, output, masks })
    }

    /// Node embeddings, `n × out`.
    pub fn encode(&self, graph: &AttributedGraph, indicator: &[bool], dropout_rng: Option<&mut Rng>) -> Result<Matrix> {
        Ok(self.forward(graph, indicator, dropout_rng)?.output)
    }

    /// Evaluation-mode embeddings of `rows` only, computed from their
    /// two-hop neighborhood. Row `i` of the result belongs to `rows[i]`.
    pub fn encode_rows(&self, graph: &AttributedGraph, indicator: &[bool], rows: &[NodeId]) -> Result<Matrix> {
        self.check_input(graph, indicator)?;
        let n = graph.n();
        let k = graph.k();
        let [l1, l2] = &self.layers;
        let coef = |u: NodeId| 1.0 / libm::sqrt((graph.degree(u) + 1) as f64);

        // Layer-1 activations are needed on rows ∪ N(rows).
        let mut slot = vec![usize::MAX; n];
        let mut first: Vec<NodeId> = Vec::new();
        for &u in rows {
            graph.check_node(u)?;
            for v in core::iter::once(u).chain(graph.neighbors(u).iter().copied()) {
                if slot[v] == usize::MAX {
                    slot[v] = first.len();
                    first.push(v);
                }
            }
        }

        let mut hidden = Matrix::zeros(first.len(), self.hidden_dim());
        let mut agg = vec![0.0; k + 1];
        for (i, &u) in first.iter().enumerate() {
            agg.iter_mut().for_each(|x| *x = 0.0);
            let cu = coef(u);
            for &v in graph.neighbors(u) {
                let c = cu * coef(v);
                for &f in graph.attributes(v) {
                    agg[f] += c;
                }
                if indicator[v] {
                    agg[k] += c;
                }
            }
            let row = hidden.row_mut(i);
            row.copy_from_slice(&l1.bias);
            sparse_input_mul(graph, indicator, &l1.self_weight, u, row);
            l1.neighbor_weight.accumulate_vec_mul(&agg, row);
            row.iter_mut().for_each(|x| *x = x.max(0.0));
        }

        let mut out = Matrix::zeros(rows.len(), self.output_dim());
        let mut agg = vec![0.0; self.hidden_dim()];
        for (i, &u) in rows.iter().enumerate() {
            agg.iter_mut().for_each(|x| *x = 0.0);
            let cu = coef(u);
            for &v in graph.neighbors(u) {
                axpy(cu * coef(v), hidden.row(slot[v]), &mut agg);
            }
            let row = out.row_mut(i);
            row.copy_from_slice(&l2.bias);
            l2.self_weight.accumulate_vec_mul(hidden.row(slot[u]), row);
            l2.neighbor_weight.accumulate_vec_mul(&agg, row);
            row.iter_mut().for_each(|x| *x = x.max(0.0));
        }
        Ok(out)
    }

    /// Gradient of a loss given its gradient with respect to the output
    /// embeddings.
    pub fn backward(&self, graph: &AttributedGraph, fwd: &Forward, d_output: &Matrix) -> EncoderGrad {
        let coef = norm_coefficients(graph);
        let [l1, l2] = &self.layers;
        let masks = fwd.masks.as_ref();
        let k = graph.k();

        let d_pre2 = activation_grad(&fwd.pre2, masks.map(|m| &m[1]), d_output);
        let spread2 = propagate(graph, &coef, &d_pre2);
        let g2 = Layer {
            self_weight: fwd.hidden.transpose_matmul(&d_pre2),
            neighbor_weight: fwd.hidden.transpose_matmul(&spread2),
            bias: column_sums(&d_pre2),
        };

        let mut d_hidden = d_pre2.matmul_transpose(&l2.self_weight);
        let via_neighbors = spread2.matmul_transpose(&l2.neighbor_weight);
        axpy(1.0, via_neighbors.as_slice(), d_hidden.as_mut_slice());

        let d_pre1 = activation_grad(&fwd.pre1, masks.map(|m| &m[0]), &d_hidden);
        let spread1 = propagate(graph, &coef, &d_pre1);
        let mut g1 = Layer::zeros(l1.input_dim(), l1.output_dim());
        for u in 0..graph.n() {
            let cols = graph.attributes(u).iter().copied().chain(fwd.indicator[u].then_some(k));
            for f in cols {
                axpy(1.0, d_pre1.row(u), g1.self_weight.row_mut(f));
                axpy(1.0, spread1.row(u), g1.neighbor_weight.row_mut(f));
            }
        }
        g1.bias = column_sums(&d_pre1);
        EncoderGrad { layers: [g1, g2] }
    }

    /// Every weight slice in a fixed order.
    pub fn parameters(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.slices()).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.slices_mut()).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|s| s.len()).sum()
    }

    /// `θ ← θ − lr·∇`.
    pub fn apply_gradient(&mut self, grad: &EncoderGrad, lr: f64) {
        let grads: Vec<&[f64]> = grad.layers.iter().flat_map(|l| l.slices()).collect();
        for (p, g) in self.parameters_mut().into_iter().zip(grads) {
            axpy(-lr, g, p);
        }
    }
}

/// `1 − cos(a, b)`; 1.0 when either vector is zero.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - dot(a, b) / (na * nb)
}

/// Adds `scale · ∂δ(a,b)/∂a` to `da` and likewise for `b`.
fn cosine_distance_grad(a: &[f64], b: &[f64], scale: f64, da: &mut [f64], db: &mut [f64]) {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return;
    }
    let cos = dot(a, b) / (na * nb);
    // ∂cos/∂a = b/(|a||b|) − cos·a/|a|²; δ = 1 − cos.
    for i in 0..a.len() {
        da[i] -= scale * (b[i] / (na * nb) - cos * a[i] / (na * na));
        db[i] -= scale * (a[i] / (na * nb) - cos * b[i] / (nb * nb));
    }
}

/// Sampled pairs and triplets for one training step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingBatch {
    pub positive_pairs: Vec<(NodeId, NodeId)>,
    pub negative_pairs: Vec<(NodeId, NodeId)>,
    /// `(q, q₊, q₋)`: `q₊` shares a community with `q`, `q₋` shares none.
    pub triplets: Vec<(NodeId, NodeId, NodeId)>,
}

/// Contrastive loss: `Σ_pos δ + Σ_neg max(0, γ₁ − δ)`.
pub fn loss_contrastive(emb: &Matrix, batch: &TrainingBatch, gamma1: f64) -> f64 {
    let pos: f64 = batch
        .positive_pairs
        .iter()
        .map(|&(u, v)| cosine_distance(emb.row(u), emb.row(v)))
        .sum();
    let neg: f64 = batch
        .negative_pairs
        .iter()
        .map(|&(u, v)| (gamma1 - cosine_distance(emb.row(u), emb.row(v))).max(0.0))
        .sum();
    pos + neg
}

/// Triplet loss: `Σ max(δ(q,q₊) − δ(q,q₋) + γ₂, 0)`.
pub fn loss_triplet(emb: &Matrix, triplets: &[(NodeId, NodeId, NodeId)], gamma2: f64) -> f64 {
    triplets
        .iter()
        .map(|&(q, p, n)| {
            let d = cosine_distance(emb.row(q), emb.row(p)) - cosine_distance(emb.row(q), emb.row(n));
            (d + gamma2).max(0.0)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub contrastive: f64,
    pub triplet: f64,
    /// `triplet + α·contrastive`.
    pub total: f64,
}

/// Margins and blend of the aggregate loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    pub alpha: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

fn add_pair_grad(emb: &Matrix, u: NodeId, v: NodeId, scale: f64, grad: &mut Matrix) {
    let cols = emb.cols();
    let mut du = vec![0.0; cols];
    let mut dv = vec![0.0; cols];
    cosine_distance_grad(emb.row(u), emb.row(v), scale, &mut du, &mut dv);
    axpy(1.0, &du, grad.row_mut(u));
    axpy(1.0, &dv, grad.row_mut(v));
}

/// Evaluates `L_T + α·L_C` and, if `grad` is given, accumulates the
/// gradient of `w_t·L_T + α·w_c·L_C` with respect to the embeddings.
/// With `α = 0` the contrastive term is never evaluated.
pub fn aggregate_loss(
    emb: &Matrix,
    batch: &TrainingBatch,
    params: &LossParams,
    weights: (f64, f64),
    mut grad: Option<&mut Matrix>,
) -> LossParts {
    let (w_t, w_c) = weights;
    let mut triplet = 0.0;
    for &(q, p, n) in &batch.triplets {
        let d = cosine_distance(emb.row(q), emb.row(p)) - cosine_distance(emb.row(q), emb.row(n)) + params.gamma2;
        if d > 0.0 {
            triplet += d;
            if let Some(g) = grad.as_deref_mut() {
                add_pair_grad(emb, q, p, w_t, g);
                add_pair_grad(emb, q, n, -w_t, g);
            }
        }
    }
    let mut contrastive = 0.0;
    if params.alpha != 0.0 {
        let scale = params.alpha * w_c;
        for &(u, v) in &batch.positive_pairs {
            contrastive += cosine_distance(emb.row(u), emb.row(v));
            if let Some(g) = grad.as_deref_mut() {
                add_pair_grad(emb, u, v, scale, g);
            }
        }
        for &(u, v) in &batch.negative_pairs {
            let h = params.gamma1 - cosine_distance(emb.row(u), emb.row(v));
            if h > 0.0 {
                contrastive += h;
                if let Some(g) = grad.as_deref_mut() {
                    add_pair_grad(emb, u, v, -scale, g);
                }
            }
        }
    }
    LossParts { contrastive, triplet, total: triplet + params.alpha * contrastive }
}

/// Hyper-parameters of [`pretrain_encoder`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub hidden: usize,
    pub out: usize,
    pub dropout: f64,
    pub lr: f64,
    pub epochs: usize,
    pub loss: LossParams,
    pub triplets_per_community: usize,
    /// Upper bound on positive pairs per epoch; all edges when `None`.
    pub max_positive_pairs: Option<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            hidden: 64,
            out: 64,
            dropout: 0.3,
            lr: 0.01,
            epochs: 200,
            loss: LossParams { alpha: 0.5, gamma1: 0.5, gamma2: 0.5 },
            triplets_per_community: 16,
            max_positive_pairs: None,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.out == 0 {
            return Err(Error::Config("encoder widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("learning rate must be finite and nonnegative"));
        }
        if !(self.loss.alpha >= 0.0 && self.loss.alpha.is_finite()) {
            return Err(Error::Config("alpha must be finite and nonnegative"));
        }
        if !(self.loss.gamma1 > 0.0 && self.loss.gamma2 > 0.0) {
            return Err(Error::Config("margins must be positive"));
        }
        Ok(())
    }
}

/// Draws a batch: edges as positives (optionally capped), an equal number
/// of uniformly sampled non-edges, and per-community triplets.
pub fn sample_batch(
    graph: &AttributedGraph,
    train: &CommunitySet,
    memberships: &[Vec<usize>],
    cfg: &EncoderConfig,
    rng: &mut Rng,
) -> TrainingBatch {
    let n = graph.n();
    let mut batch = TrainingBatch::default();
    let edges: Vec<(NodeId, NodeId)> = graph.edges().collect();
    match cfg.max_positive_pairs {
        Some(cap) if cap < edges.len() => {
            batch.positive_pairs = (0..cap).map(|_| edges[rng.gen_range(0..edges.len())]).collect();
        }
        _ => batch.positive_pairs = edges,
    }
    let max_edges = n.saturating_mul(n.saturating_sub(1)) / 2;
    if n >= 2 && graph.m() < max_edges {
        let wanted = batch.positive_pairs.len().max(1);
        let mut attempts = 0;
        while batch.negative_pairs.len() < wanted && attempts < 20 * wanted {
            attempts += 1;
            let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if u != v && !graph.is_adjacent(u, v) {
                batch.negative_pairs.push((u, v));
            }
        }
    }
    for (ci, c) in train.iter().enumerate() {
        if c.len() < 2 {
            continue;
        }
        for _ in 0..cfg.triplets_per_community {
            let q = c[rng.gen_range(0..c.len())];
            let mut pos = c[rng.gen_range(0..c.len() - 1)];
            if pos == q {
                pos = c[c.len() - 1];
            }
            let shares = |v: NodeId| memberships[v].iter().any(|m| memberships[q].contains(m));
            let negative = (0..64).map(|_| rng.gen_range(0..n)).find(|&v| !shares(v));
            if let Some(neg) = negative {
                debug_assert!(memberships[q].contains(&ci));
                batch.triplets.push((q, pos, neg));
            }
        }
    }
    batch
}

/// Trained encoder with its per-epoch losses.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub model: EncoderModel,
    pub history: Vec<LossParts>,
}

/// Trains the encoder by plain gradient descent on the batch-mean loss.
///
/// Each epoch resamples a batch and sets the indicator channel to the
/// members of one randomly chosen training community, so the embeddings
/// learn to depend on community membership.
pub fn pretrain_encoder(graph: &AttributedGraph, train: &CommunitySet, cfg: &EncoderConfig, seed: u64) -> Result<Pretrained> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training community set is empty"));
    }
    let mut model = EncoderModel::new(graph.k(), cfg.hidden, cfg.out, cfg.dropout, seed)?;
    let memberships = train.memberships(graph.n());
    let mut rng = rng::stream(seed, "encoder-train");
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        let batch = sample_batch(graph, train, &memberships, cfg, &mut rng);
        let focus = train.get(rng.gen_range(0..train.len())).expect("index in range");
        let mut indicator = vec![false; graph.n()];
        focus.iter().for_each(|&u| indicator[u] = true);

        let fwd = model.forward(graph, &indicator, Some(&mut rng))?;
        let mut d_out = Matrix::zeros(graph.n(), model.output_dim());
        let w_t = 1.0 / batch.triplets.len().max(1) as f64;
        let w_c = 1.0 / (batch.positive_pairs.len() + batch.negative_pairs.len()).max(1) as f64;
        let parts = aggregate_loss(&fwd.output, &batch, &cfg.loss, (w_t, w_c), Some(&mut d_out));
        let grad = model.backward(graph, &fwd, &d_out);
        model.apply_gradient(&grad, cfg.lr);
        history.push(parts);
    }
    model.validate()?;
    Ok(Pretrained { model, history })
}

/// Largest relative disagreement between the analytic gradient of
/// `L_T + α·L_C` and central differences with step `eps`, dropout off.
///
/// Relative error is `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check(
    model: &EncoderModel,
    graph: &AttributedGraph,
    indicator: &[bool],
    batch: &TrainingBatch,
    params: &LossParams,
    eps: f64,
) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(Error::Config("finite-difference step must lie in [1e-6, 1e-3]"));
    }
    let fwd = model.forward(graph, indicator, None)?;
    let mut d_out = Matrix::zeros(graph.n(), model.output_dim());
    aggregate_loss(&fwd.output, batch, params, (1.0, 1.0), Some(&mut d_out));
    let grad = model.backward(graph, &fwd, &d_out);
    let analytic: Vec<f64> = grad.layers.iter().flat_map(|l| l.slices()).flatten().copied().collect();

    let loss_at = |m: &EncoderModel| -> Result<f64> {
        let out = m.encode(graph, indicator, None)?;
        Ok(aggregate_loss(&out, batch, params, (1.0, 1.0), None).total)
    };
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut index = 0;
    let slices = probe.parameters().iter().map(|s| s.len()).collect::<Vec<_>>();
    for (s, len) in slices.into_iter().enumerate() {
        for j in 0..len {
            let original = probe.parameters_mut()[s][j];
            probe.parameters_mut()[s][j] = original + eps;
            let up = loss_at(&probe)?;
            probe.parameters_mut()[s][j] = original - eps;
            let down = loss_at(&probe)?;
            probe.parameters_mut()[s][j] = original;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[index];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            index += 1;
        }
    }
    Ok(worst)
}
