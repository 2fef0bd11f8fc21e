//! Command-line driver.
//!
//! Exit status: 0 on success, 1 for runtime and data errors, 2 for usage
//! and configuration errors. Failures print one `error: ...` line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::{env, fs};

use clap::{Args, Parser, Subcommand, ValueEnum};
use commsearch::checks;
use commsearch::eval::{evaluate, run_query, Models};
use commsearch::io::{self, Dataset, FormatError};
use commsearch::persist::{self, ModelError, PolicyFile};
use commsearch_core::encoder::{pretrain_encoder, EncoderConfig, LossParams, LossParts};
use commsearch_core::refiner::{train_refiner, Objective, RefineConfig, StateContext};
use commsearch_core::synthetic::{gen_synthetic, SyntheticSpec};
use commsearch_core::{conductance, extract_candidate, split_communities, CommunitySet, NodeId};

const DEFAULT_SEED: u64 = 1;
const SEED_VAR: &str = "NCSAC_SEED";

#[derive(Parser)]
#[command(name = "commsearch", version, about = "Query-driven community search on attributed graphs")]
struct Cli {
    /// Master seed; falls back to $NCSAC_SEED, then 1.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key=value file whose entries act as flags placed before the
    /// explicit ones.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic planted-partition dataset.
    #[command(args_override_self = true)]
    Gen(GenArgs),
    /// Print the coarse candidate community of one query node.
    #[command(args_override_self = true)]
    Extract(ExtractArgs),
    /// Train the state encoder and write it to a model file.
    #[command(args_override_self = true)]
    Pretrain(PretrainArgs),
    /// Train the add/remove policy and write it to a model file.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Run extraction and refinement for one query node.
    #[command(args_override_self = true)]
    Query(QueryArgs),
    /// Score the pipeline on the test split of a community file.
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Run the oracle self-check suites.
    #[command(args_override_self = true)]
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list file.
    #[arg(long)]
    graph: PathBuf,
    /// Attribute file.
    #[arg(long)]
    attrs: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    /// Ground-truth community file.
    #[arg(long)]
    communities: PathBuf,
    /// Train:validation:test proportions.
    #[arg(long, default_value = "5:1:4", value_parser = parse_ratios)]
    split: (f64, f64, f64),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 25)]
    block_size: usize,
    #[arg(long, default_value_t = 0.3)]
    p_in: f64,
    #[arg(long, default_value_t = 0.05)]
    p_out: f64,
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long, default_value_t = 4)]
    attrs_per_block: usize,
    #[arg(long, default_value_t = 0.1)]
    attr_noise: f64,
    /// Output edge list.
    #[arg(long)]
    graph: PathBuf,
    /// Output attribute file.
    #[arg(long)]
    attrs: PathBuf,
    /// Output community file (the planted blocks).
    #[arg(long)]
    communities: PathBuf,
}

#[derive(Args)]
struct ExtractOpts {
    /// Weight of topology in the augmented conductance.
    #[arg(long, default_value_t = 0.2)]
    beta: f64,
    /// Deepest hop layer to scan; 0 scans the whole component.
    #[arg(long, default_value_t = 6)]
    max_hop: usize,
}

impl ExtractOpts {
    fn hop_cap(&self) -> Option<usize> {
        (self.max_hop > 0).then_some(self.max_hop)
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// File id of the query node.
    #[arg(long)]
    query: u64,
    #[command(flatten)]
    opts: ExtractOpts,
}

#[derive(Args)]
struct PretrainArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Model file to write.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    /// Embedding width.
    #[arg(long, default_value_t = 64)]
    embedding: usize,
    #[arg(long, default_value_t = 0.3)]
    dropout: f64,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Weight of the contrastive term.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Contrastive margin.
    #[arg(long, default_value_t = 0.5)]
    gamma1: f64,
    /// Triplet margin.
    #[arg(long, default_value_t = 0.5)]
    gamma2: f64,
    #[arg(long, default_value_t = 16)]
    triplets: usize,
    /// Cap on positive pairs per epoch.
    #[arg(long)]
    max_pairs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ContextArg {
    Local,
    Anchored,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    LabeledF1,
    NegativePhi,
}

#[derive(Args)]
struct RolloutOpts {
    #[command(flatten)]
    extract: ExtractOpts,
    /// Step cap per episode.
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Encoder model file.
    #[arg(long)]
    encoder: PathBuf,
    /// Policy model file to write.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    rollout: RolloutOpts,
    /// Training episodes.
    #[arg(long, default_value_t = 2000)]
    episodes: usize,
    /// Discount factor.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 0.2)]
    clip: f64,
    #[arg(long, default_value_t = 0.003)]
    lr: f64,
    #[arg(long, default_value_t = 1.0)]
    epsilon_start: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon_end: f64,
    #[arg(long, default_value_t = 4)]
    ppo_epochs: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, value_enum, default_value_t = ContextArg::Anchored)]
    context: ContextArg,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::LabeledF1)]
    objective: ObjectiveArg,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    encoder: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    /// File id of the query node.
    #[arg(long)]
    query: u64,
    #[command(flatten)]
    rollout: RolloutOpts,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Encoder model file; omit together with --policy to score the
    /// coarse candidates alone.
    #[arg(long, requires = "policy")]
    encoder: Option<PathBuf>,
    #[arg(long, requires = "encoder")]
    policy: Option<PathBuf>,
    /// Line-delimited report file; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    rollout: RolloutOpts,
}

#[derive(Args)]
struct OracleArgs {
    /// Node count of the check graphs.
    #[arg(long, default_value_t = 200)]
    size: usize,
}

/// A failure with its exit status.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<commsearch_core::Error> for Failure {
    fn from(e: commsearch_core::Error) -> Self {
        match e {
            commsearch_core::Error::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Core(inner) => inner.into(),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn parse_ratios(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("invalid ratio {p:?}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err("expected three ratios such as 5:1:4".into()),
    }
}

/// Prints a line to stdout, ignoring a closed pipe.
fn say(line: String) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

fn one_line(text: &str) -> String {
    let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
    line.trim().trim_start_matches("error: ").to_string()
}

/// Splices the entries of the `--config` file in right after the
/// subcommand name, so explicit flags given later take precedence.
fn with_config(args: Vec<OsString>) -> Outcome<Vec<OsString>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = fs::read_to_string(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let mut extra = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Failure::Usage(format!("{}:{}: expected key=value", path.display(), n + 1)));
        };
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        if key == "config" {
            return Err(Failure::Usage(format!("{}:{}: nested config files are not supported", path.display(), n + 1)));
        }
        match value {
            "false" => {}
            "true" => extra.push(OsString::from(format!("--{key}"))),
            _ => extra.push(OsString::from(format!("--{key}={value}"))),
        }
    }
    let names = ["gen", "extract", "pretrain", "train", "query", "evaluate", "oracle-check"];
    let at = args.iter().skip(1).position(|a| names.contains(&a.to_string_lossy().as_ref()));
    let Some(at) = at else { return Ok(args) };
    let mut out = args;
    let tail = out.split_off(at + 2);
    out.extend(extra);
    out.extend(tail);
    Ok(out)
}

fn resolve_seed(flag: Option<u64>) -> Outcome<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().map_err(|_| Failure::Usage(format!("{SEED_VAR}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn load_graph(args: &GraphArgs) -> Outcome<Dataset> {
    let data = io::load_graph(&args.graph, &args.attrs)?;
    let r = data.report;
    if r.self_loops + r.duplicate_edges > 0 {
        eprintln!("note: dropped {} self-loops and {} duplicate edges", r.self_loops, r.duplicate_edges);
    }
    Ok(data)
}

fn query_node(data: &Dataset, id: u64) -> Outcome<NodeId> {
    data.node(id).ok_or_else(|| Failure::Usage(format!("query node {id} is not in the graph")))
}

/// Training split of the community file, per `--split` and the seed.
fn split(data: &Dataset, args: &SplitArgs, seed: u64) -> Outcome<(CommunitySet, CommunitySet, CommunitySet)> {
    let set = io::load_communities(&args.communities, data)?;
    if set.is_empty() {
        return Err(Failure::Usage(format!("{}: no communities", args.communities.display())));
    }
    Ok(split_communities(&set, args.split, seed)?)
}

fn check_split(ratios: (f64, f64, f64)) -> Outcome {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| !r.is_finite() || *r < 0.0) || a + b + c <= 0.0 {
        return Err(Failure::Usage("split ratios must be nonnegative with a positive sum".into()));
    }
    Ok(())
}

fn refine_config(r: &RolloutOpts) -> RefineConfig {
    RefineConfig { beta: r.extract.beta, max_hop: r.extract.hop_cap(), max_steps: r.max_steps, ..Default::default() }
}

fn join(data: &Dataset, nodes: &[NodeId]) -> String {
    io::join(&data.file_ids(nodes))
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn cmd_gen(a: GenArgs, seed: u64) -> Outcome {
    let spec = SyntheticSpec {
        blocks: a.blocks,
        block_size: a.block_size,
        p_in: a.p_in,
        p_out: a.p_out,
        k: a.k,
        attrs_per_block: a.attrs_per_block,
        attr_noise: a.attr_noise,
        seed,
    };
    spec.validate()?;
    let (graph, truth) = gen_synthetic(&spec)?;
    let data = Dataset::from_graph(graph);
    io::save_graph(&data, &a.graph, &a.attrs)?;
    io::save_communities(&truth, &data, &a.communities)?;
    say(format!("n={} m={} k={} communities={}", data.graph.n(), data.graph.m(), data.graph.k(), truth.len()));
    Ok(())
}

fn cmd_extract(a: ExtractArgs) -> Outcome {
    conductance::check_beta(a.opts.beta)?;
    let data = load_graph(&a.graph)?;
    let q = query_node(&data, a.query)?;
    let r = extract_candidate(&data.graph, q, a.opts.beta, a.opts.hop_cap())?;
    say(format!("community: {}", join(&data, &r.community)));
    say(format!("size: {}", r.community.len()));
    say(format!("phi: {:.12}", r.phi));
    say(format!("best_hop: {}", r.best_hop));
    for h in &r.trace {
        say(format!("hop={} frontier={} phi={:.12}", h.hop, h.frontier, h.phi));
    }
    Ok(())
}

fn cmd_pretrain(a: PretrainArgs, seed: u64) -> Outcome {
    let cfg = EncoderConfig {
        hidden: a.hidden,
        out: a.embedding,
        dropout: a.dropout,
        lr: a.lr,
        epochs: a.epochs,
        loss: LossParams { alpha: a.alpha, gamma1: a.gamma1, gamma2: a.gamma2 },
        triplets_per_community: a.triplets,
        max_positive_pairs: a.max_pairs,
    };
    cfg.validate()?;
    check_split(a.split.split)?;
    let data = load_graph(&a.graph)?;
    let (train, _, _) = split(&data, &a.split, seed)?;
    let trained = pretrain_encoder(&data.graph, &train, &cfg, seed)?;
    persist::save_encoder(&trained.model, &a.output)?;
    let h = &trained.history;
    let w = h.len().min(10);
    let mean = |s: &[LossParts]| s.iter().map(|p| p.total).sum::<f64>() / s.len().max(1) as f64;
    say(format!("epochs={} loss_first{w}={:.6} loss_last{w}={:.6}", h.len(), mean(&h[..w]), mean(&h[h.len() - w..])));
    Ok(())
}

fn cmd_train(a: TrainArgs, seed: u64) -> Outcome {
    let cfg = RefineConfig {
        episodes: a.episodes,
        gamma: a.gamma,
        clip: a.clip,
        lr: a.lr,
        epsilon_start: a.epsilon_start,
        epsilon_end: a.epsilon_end,
        ppo_epochs: a.ppo_epochs,
        hidden: a.hidden,
        context: match a.context {
            ContextArg::Local => StateContext::Local,
            ContextArg::Anchored => StateContext::Anchored,
        },
        objective: match a.objective {
            ObjectiveArg::LabeledF1 => Objective::LabeledF1,
            ObjectiveArg::NegativePhi => Objective::NegativePhi,
        },
        ..refine_config(&a.rollout)
    };
    cfg.validate()?;
    check_split(a.split.split)?;
    let data = load_graph(&a.graph)?;
    let encoder = persist::load_encoder(&a.encoder)?;
    let (train, _, _) = split(&data, &a.split, seed)?;
    let trained = train_refiner(&data.graph, &train, &encoder, &cfg, seed)?;
    persist::save_policy(&PolicyFile { policy: trained.policy, context: cfg.context }, &a.output)?;
    let r = &trained.returns;
    let w = r.len().min(50);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    say(format!("episodes={} return_first{w}={:.6} return_last{w}={:.6}", r.len(), mean(&r[..w]), mean(&r[r.len() - w..])));
    Ok(())
}

fn load_models(encoder: &Path, policy: &Path) -> Outcome<(commsearch_core::encoder::EncoderModel, PolicyFile)> {
    Ok((persist::load_encoder(encoder)?, persist::load_policy(policy)?))
}

fn cmd_query(a: QueryArgs) -> Outcome {
    let cfg = refine_config(&a.rollout);
    cfg.validate()?;
    let data = load_graph(&a.graph)?;
    let q = query_node(&data, a.query)?;
    let (encoder, policy) = load_models(&a.encoder, &a.policy)?;
    let cfg = RefineConfig { context: policy.context, ..cfg };
    let models = Models { encoder: &encoder, policy: &policy.policy };
    let out = run_query(&data.graph, q, Some(models), &cfg)?;
    say(format!("community: {}", join(&data, &out.community)));
    say(format!("size: {}", out.community.len()));
    say(format!("coarse: {}", join(&data, &out.coarse)));
    say(format!("coarse_phi: {:.12}", out.phi));
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs, seed: u64) -> Outcome {
    let cfg = refine_config(&a.rollout);
    cfg.validate()?;
    check_split(a.split.split)?;
    if a.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let data = load_graph(&a.graph)?;
    let (_, _, test) = split(&data, &a.split, seed)?;
    let loaded = match (&a.encoder, &a.policy) {
        (Some(e), Some(p)) => Some(load_models(e, p)?),
        _ => None,
    };
    let cfg = match &loaded {
        Some((_, p)) => RefineConfig { context: p.context, ..cfg },
        None => cfg,
    };
    let models = loaded.as_ref().map(|(e, p)| Models { encoder: e, policy: &p.policy });
    let report = evaluate(&data.graph, models, &test, &cfg, seed, a.jobs)?;
    let mut lines = String::new();
    let _ = writeln!(lines, "# wall_ fields are timings and vary between runs");
    lines.push_str(&report.to_lines(true));
    match &a.report {
        Some(path) => {
            write_file(path, &lines)?;
            say(report.table().trim_end().to_string());
        }
        None => say(lines.trim_end().to_string()),
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs, seed: u64) -> Outcome {
    if a.size < 20 {
        return Err(Failure::Usage("--size must be at least 20".into()));
    }
    let outcomes = checks::run_all(a.size, seed)?;
    for o in &outcomes {
        say(format!("{o}"));
    }
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} oracle suite(s) failed")));
    }
    Ok(())
}

fn run() -> Outcome {
    let args = with_config(env::args_os().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(Failure::Usage(one_line(&e.to_string()))),
    };
    let seed = resolve_seed(cli.seed)?;
    match cli.command {
        Command::Gen(a) => cmd_gen(a, seed),
        Command::Extract(a) => cmd_extract(a),
        Command::Pretrain(a) => cmd_pretrain(a, seed),
        Command::Train(a) => cmd_train(a, seed),
        Command::Query(a) => cmd_query(a),
        Command::Evaluate(a) => cmd_evaluate(a, seed),
        Command::OracleCheck(a) => cmd_oracle(a, seed),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
