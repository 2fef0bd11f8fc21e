//! End-to-end evaluation: one seeded query per test community, coarse
//! extraction, optional refinement, and per-query plus aggregate scores.

use std::fmt::Write as _;
use std::thread;
use std::time::{Duration, Instant};

use commsearch_core::encoder::EncoderModel;
use commsearch_core::metrics::{score_community, Scores};
use commsearch_core::refiner::{refine, PolicyModel, RefineConfig};
use commsearch_core::{extract_candidate, rng, AttributedGraph, CommunitySet, Error, NodeId, Result};
use rand::Rng as _;

/// Trained models used for the refinement stage.
#[derive(Debug, Clone, Copy)]
pub struct Models<'a> {
    pub encoder: &'a EncoderModel,
    pub policy: &'a PolicyModel,
}

/// Output of the two-stage pipeline for one query node.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub coarse: Vec<NodeId>,
    pub phi: f64,
    /// Refined community; equals `coarse` when no models were given.
    pub community: Vec<NodeId>,
    pub wall_extract: Duration,
    pub wall_refine: Duration,
}

/// Extracts the coarse candidate around `q` and refines it when `models`
/// are given.
pub fn run_query(graph: &AttributedGraph, q: NodeId, models: Option<Models<'_>>, cfg: &RefineConfig) -> Result<QueryOutcome> {
    let t0 = Instant::now();
    let extraction = extract_candidate(graph, q, cfg.beta, cfg.max_hop)?;
    let wall_extract = t0.elapsed();
    let t1 = Instant::now();
    let community = match models {
        Some(m) => refine(graph, q, &extraction.community, m.encoder, m.policy, cfg)?,
        None => extraction.community.clone(),
    };
    let wall_refine = t1.elapsed();
    Ok(QueryOutcome { coarse: extraction.community, phi: extraction.phi, community, wall_extract, wall_refine })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    /// Index of the test community the query was drawn from.
    pub community: usize,
    pub query: NodeId,
    pub truth_size: usize,
    pub coarse_size: usize,
    pub pred_size: usize,
    pub coarse: Scores,
    pub refined: Scores,
    pub wall_extract: Duration,
    pub wall_refine: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary { mean: f64::NAN, median: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 { sorted[mid] } else { (sorted[mid - 1] + sorted[mid]) / 2.0 };
        Summary { mean, median }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub records: Vec<QueryRecord>,
    pub refined: bool,
}

/// Metric columns of the summary, in output order.
type Metric = fn(&QueryRecord) -> f64;

const METRICS: [(&str, Metric); 6] = [
    ("f1", |r| r.refined.f1),
    ("nmi", |r| r.refined.nmi),
    ("jac", |r| r.refined.jac),
    ("coarse_f1", |r| r.coarse.f1),
    ("coarse_nmi", |r| r.coarse.nmi),
    ("coarse_jac", |r| r.coarse.jac),
];

impl EvalReport {
    pub fn summary(&self, metric: Metric) -> Summary {
        Summary::of(&self.records.iter().map(metric).collect::<Vec<_>>())
    }

    pub fn f1(&self) -> Summary {
        self.summary(|r| r.refined.f1)
    }

    pub fn coarse_f1(&self) -> Summary {
        self.summary(|r| r.coarse.f1)
    }

    /// One `key=value` record per query, then one per metric. Wall-clock
    /// fields are prefixed `wall_` and omitted when `wall` is false.
    pub fn to_lines(&self, wall: bool) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = write!(
                out,
                "record=query community={} query={} truth_size={} coarse_size={} pred_size={} \
                 coarse_f1={:.6} coarse_nmi={:.6} coarse_jac={:.6} f1={:.6} nmi={:.6} jac={:.6}",
                r.community,
                r.query,
                r.truth_size,
                r.coarse_size,
                r.pred_size,
                r.coarse.f1,
                r.coarse.nmi,
                r.coarse.jac,
                r.refined.f1,
                r.refined.nmi,
                r.refined.jac,
            );
            if wall {
                let _ = write!(
                    out,
                    " wall_extract_us={} wall_refine_us={}",
                    r.wall_extract.as_micros(),
                    r.wall_refine.as_micros()
                );
            }
            out.push('\n');
        }
        for (name, metric) in METRICS {
            let s = self.summary(metric);
            let _ = writeln!(
                out,
                "record=summary metric={name} count={} mean={:.6} median={:.6}",
                self.records.len(),
                s.mean,
                s.median
            );
        }
        out
    }

    /// Human-readable aggregate table.
    pub fn table(&self) -> String {
        let mut out = format!("{} queries, refinement {}\n", self.records.len(), if self.refined { "on" } else { "off" });
        let _ = writeln!(out, "{:<12} {:>8} {:>8}", "metric", "mean", "median");
        for (name, metric) in METRICS {
            let s = self.summary(metric);
            let _ = writeln!(out, "{name:<12} {:>8.4} {:>8.4}", s.mean, s.median);
        }
        out
    }
}

fn evaluate_one(
    graph: &AttributedGraph,
    models: Option<Models<'_>>,
    cfg: &RefineConfig,
    (community, query, truth): (usize, NodeId, &[NodeId]),
) -> Result<QueryRecord> {
    let out = run_query(graph, query, models, cfg)?;
    let n = graph.n();
    Ok(QueryRecord {
        community,
        query,
        truth_size: truth.len(),
        coarse_size: out.coarse.len(),
        pred_size: out.community.len(),
        coarse: score_community(&out.coarse, truth, n)?,
        refined: score_community(&out.community, truth, n)?,
        wall_extract: out.wall_extract,
        wall_refine: out.wall_refine,
    })
}

/// Evaluates the pipeline on `test`: one member of every community is
/// drawn as the query from the `eval-queries` stream of `seed`. Queries are
/// spread over up to `jobs` worker threads; the report keeps community
/// order regardless.
pub fn evaluate(
    graph: &AttributedGraph,
    models: Option<Models<'_>>,
    test: &CommunitySet,
    cfg: &RefineConfig,
    seed: u64,
    jobs: usize,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Config("test community set is empty"));
    }
    cfg.validate()?;
    let mut rng = rng::stream(seed, "eval-queries");
    let tasks: Vec<(usize, NodeId, &[NodeId])> =
        test.iter().enumerate().map(|(i, c)| (i, c[rng.gen_range(0..c.len())], c)).collect();

    let jobs = jobs.clamp(1, tasks.len());
    let records = if jobs == 1 {
        tasks.iter().map(|&t| evaluate_one(graph, models, cfg, t)).collect::<Result<Vec<_>>>()?
    } else {
        let chunk = tasks.len().div_ceil(jobs);
        let parts: Vec<Result<Vec<QueryRecord>>> = thread::scope(|s| {
            let handles: Vec<_> = tasks
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(|&t| evaluate_one(graph, models, cfg, t)).collect()))
                .collect();
            handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
        });
        let mut records = Vec::with_capacity(tasks.len());
        for part in parts {
            records.extend(part?);
        }
        records
    };
    Ok(EvalReport { records, refined: models.is_some() })
}
