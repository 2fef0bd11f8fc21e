//! File formats, model persistence, the evaluation protocol and oracle
//! self-checks around [`commsearch_core`]. The `commsearch` binary wires
//! them into subcommands.

pub mod checks;
pub mod eval;
pub mod io;
pub mod persist;

pub use commsearch_core as core;
