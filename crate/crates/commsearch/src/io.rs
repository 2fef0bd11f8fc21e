//! Text formats for graphs and community sets.
//!
//! Edge file: one `u v` pair per line. Attribute file: an optional
//! `k=<int>` header, then `u a1 a2 ...` per node. Community file: one
//! community per line. Ids are decimal and whitespace-separated; blank lines
//! and lines starting with `#` are skipped everywhere.
//!
//! File ids are compacted to `0..n` in first-seen order, reading the
//! attribute file before the edge file. Nodes listed only in the edge file
//! get an empty attribute row.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use commsearch_core::graph::BuildReport;
use commsearch_core::{AttributedGraph, CommunitySet, NodeId};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{}:{line}: attribute {index} out of range (k={k})", path.display())]
    AttributeBounds { path: PathBuf, line: usize, index: usize, k: usize },
    #[error("{}:{line}: node {id} is not in the graph", path.display())]
    UnknownNode { path: PathBuf, line: usize, id: u64 },
    #[error(transparent)]
    Core(#[from] commsearch_core::Error),
}

/// A graph together with the file ids of its nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: AttributedGraph,
    /// `ids[u]` is the id node `u` carried on disk.
    pub ids: Vec<u64>,
    index: HashMap<u64, NodeId>,
    /// Self-loops and repeats dropped while building.
    pub report: BuildReport,
}

impl Dataset {
    /// Wraps a graph whose file ids equal its node ids.
    pub fn from_graph(graph: AttributedGraph) -> Self {
        let ids: Vec<u64> = (0..graph.n() as u64).collect();
        let index = ids.iter().enumerate().map(|(u, &id)| (id, u)).collect();
        Dataset { graph, ids, index, report: BuildReport::default() }
    }

    /// Node carrying file id `id`.
    pub fn node(&self, id: u64) -> Option<NodeId> {
        self.index.get(&id).copied()
    }

    /// File ids of `nodes`, in the same order.
    pub fn file_ids(&self, nodes: &[NodeId]) -> Vec<u64> {
        nodes.iter().map(|&u| self.ids[u]).collect()
    }
}

fn read(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.to_owned(), source })
}

fn write(path: &Path, text: &str) -> Result<(), FormatError> {
    fs::write(path, text).map_err(|source| FormatError::Io { path: path.to_owned(), source })
}

/// Numbered, trimmed content lines (1-based), without blanks and comments.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_fields<'a>(path: &'a Path, line: usize, text: &'a str) -> impl Iterator<Item = Result<u64, FormatError>> + 'a {
    text.split_whitespace().map(move |tok| {
        tok.parse::<u64>().map_err(|_| FormatError::Parse {
            path: path.to_owned(),
            line,
            msg: format!("expected a nonnegative integer, found {tok:?}"),
        })
    })
}

struct Compactor {
    ids: Vec<u64>,
    index: HashMap<u64, NodeId>,
}

impl Compactor {
    fn intern(&mut self, id: u64) -> NodeId {
        *self.index.entry(id).or_insert_with(|| {
            self.ids.push(id);
            self.ids.len() - 1
        })
    }
}

/// Parses a graph from the contents of an edge file and an attribute file.
/// The paths only label diagnostics.
pub fn parse_graph(edge_path: &Path, edges: &str, attr_path: &Path, attrs: &str) -> Result<Dataset, FormatError> {
    let mut ids = Compactor { ids: Vec::new(), index: HashMap::new() };
    let mut header_k: Option<usize> = None;
    let mut rows: Vec<(usize, NodeId, Vec<usize>)> = Vec::new();

    for (line, text) in content_lines(attrs) {
        if let Some(value) = text.strip_prefix("k=") {
            if header_k.is_some() || !rows.is_empty() {
                return Err(FormatError::Parse {
                    path: attr_path.to_owned(),
                    line,
                    msg: "the k=<int> header must be the first line".into(),
                });
            }
            let k = value.trim().parse::<usize>().map_err(|_| FormatError::Parse {
                path: attr_path.to_owned(),
                line,
                msg: format!("invalid header {text:?}"),
            })?;
            header_k = Some(k);
            continue;
        }
        let mut fields = parse_fields(attr_path, line, text);
        let id = fields.next().expect("content lines are nonempty")?;
        let u = ids.intern(id);
        let list = fields.map(|f| f.map(|a| a as usize)).collect::<Result<Vec<_>, _>>()?;
        rows.push((line, u, list));
    }

    let mut pairs = Vec::new();
    for (line, text) in content_lines(edges) {
        let fields = parse_fields(edge_path, line, text).collect::<Result<Vec<_>, _>>()?;
        let [a, b] = fields[..] else {
            return Err(FormatError::Parse {
                path: edge_path.to_owned(),
                line,
                msg: format!("expected 2 node ids, found {}", fields.len()),
            });
        };
        pairs.push((ids.intern(a), ids.intern(b)));
    }

    let n = ids.ids.len();
    let k = match header_k {
        Some(k) => k,
        None => rows.iter().flat_map(|(_, _, l)| l.iter().map(|&a| a + 1)).max().unwrap_or(0),
    };
    let mut attr_rows = vec![Vec::new(); n];
    for (line, u, list) in rows {
        if let Some(&bad) = list.iter().find(|&&a| a >= k) {
            return Err(FormatError::AttributeBounds { path: attr_path.to_owned(), line, index: bad, k });
        }
        attr_rows[u].extend(list);
    }
    let (graph, report) = AttributedGraph::build(n, pairs, &attr_rows, k)?;
    Ok(Dataset { graph, ids: ids.ids, index: ids.index, report })
}

pub fn load_graph(edge_path: &Path, attr_path: &Path) -> Result<Dataset, FormatError> {
    let edges = read(edge_path)?;
    let attrs = read(attr_path)?;
    parse_graph(edge_path, &edges, attr_path, &attrs)
}

/// Serialized edge and attribute files of `data`. Every node gets an
/// attribute line, so a reload reproduces the node order exactly.
pub fn format_graph(data: &Dataset) -> (String, String) {
    let g = &data.graph;
    let mut edges = String::new();
    for (u, v) in g.edges() {
        let _ = writeln!(edges, "{} {}", data.ids[u], data.ids[v]);
    }
    let mut attrs = format!("k={}\n", g.k());
    for u in 0..g.n() {
        let _ = write!(attrs, "{}", data.ids[u]);
        for a in g.attributes(u) {
            let _ = write!(attrs, " {a}");
        }
        attrs.push('\n');
    }
    (edges, attrs)
}

pub fn save_graph(data: &Dataset, edge_path: &Path, attr_path: &Path) -> Result<(), FormatError> {
    let (edges, attrs) = format_graph(data);
    write(edge_path, &edges)?;
    write(attr_path, &attrs)
}

/// Parses a community file against `data`'s id space. Repeated ids within
/// a line collapse.
pub fn parse_communities(path: &Path, text: &str, data: &Dataset) -> Result<CommunitySet, FormatError> {
    let mut communities = Vec::new();
    for (line, text) in content_lines(text) {
        let mut c = Vec::new();
        for id in parse_fields(path, line, text) {
            let id = id?;
            let u = data.node(id).ok_or(FormatError::UnknownNode { path: path.to_owned(), line, id })?;
            c.push(u);
        }
        communities.push(c);
    }
    Ok(CommunitySet::new(communities, data.graph.n())?)
}

pub fn load_communities(path: &Path, data: &Dataset) -> Result<CommunitySet, FormatError> {
    parse_communities(path, &read(path)?, data)
}

pub fn format_communities(set: &CommunitySet, data: &Dataset) -> String {
    let mut out = String::new();
    for c in set.iter() {
        out.push_str(&join(&data.file_ids(c)));
        out.push('\n');
    }
    out
}

pub fn save_communities(set: &CommunitySet, data: &Dataset, path: &Path) -> Result<(), FormatError> {
    write(path, &format_communities(set, data))
}

/// Space-separated rendering of an id list.
pub fn join(ids: &[u64]) -> String {
    let mut out = String::new();
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{id}");
    }
    out
}
