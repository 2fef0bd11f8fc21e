use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Failures raised by the algorithmic core.
///
/// `Config` and `Bounds` are caller mistakes (bad parameters or ids);
/// the rest describe inputs the algorithms cannot work with.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates its documented range.
    Config(&'static str),
    /// A node or attribute id is outside the graph.
    Bounds { what: &'static str, index: usize, limit: usize },
    /// An operation's precondition on the community state does not hold.
    Precondition(&'static str),
    /// Removing the query node was requested.
    ForbiddenRemoval(usize),
    /// An oracle was asked to materialize more than its guard allows.
    TooLarge { n: usize, guard: usize },
    /// Input for which the quantity is undefined (e.g. a zero-volume side).
    Degenerate(&'static str),
    /// Matrix or vector dimensions disagree.
    Shape { expected: usize, found: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Bounds { what, index, limit } => {
                write!(f, "{what} {index} out of range (limit {limit})")
            }
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::ForbiddenRemoval(q) => write!(f, "query node {q} cannot be removed"),
            Error::TooLarge { n, guard } => {
                write!(f, "graph with {n} nodes exceeds oracle guard of {guard}")
            }
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Error::Shape { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
        }
    }
}

impl core::error::Error for Error {}
