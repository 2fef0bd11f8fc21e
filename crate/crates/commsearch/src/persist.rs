//! Binary container for trained encoder and policy weights.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `b"CSMODEL\0"`                    |
//! | 8      | 4    | format version, `u32` (currently 1)     |
//! | 12     | 4    | kind, `u32`: 1 encoder, 2 policy        |
//! | 16     | 32   | four `u64` dimensions (see below)       |
//! | 48     | 8    | dropout rate, `f64` (0 for policies)    |
//! | 56     | 8    | initialization seed, `u64`              |
//! | 64     | 8    | payload length in values, `u64`         |
//! | 72     | 8·len| payload, `f64` values                   |
//!
//! Encoder dimensions are `[input, hidden, output, 0]`, where `input` is
//! the attribute count plus one. The payload holds, per layer, the self
//! weight, the neighbor weight (both row-major, `in × out`) and the bias.
//!
//! Policy dimensions are `[state width, hidden, context, 0]` with context
//! 0 for `Local` and 1 for `Anchored`. The payload holds the add head, then
//! the remove head (each `W₁` row-major, `b₁`, `w₂`, `b₂`), then the add and
//! remove termination vectors.

use std::fs;
use std::path::{Path, PathBuf};

use commsearch_core::encoder::{EncoderModel, Layer};
use commsearch_core::linalg::Matrix;
use commsearch_core::refiner::{Mlp, PolicyModel, StateContext};
use thiserror::Error;

pub const MAGIC: [u8; 8] = *b"CSMODEL\0";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 72;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Encoder = 1,
    Policy = 2,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {msg}", path.display())]
    Invalid { path: PathBuf, msg: String },
}

/// A policy and the state context it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile {
    pub policy: PolicyModel,
    pub context: StateContext,
}

struct Header {
    kind: u32,
    dims: [u64; 4],
    dropout: f64,
    seed: u64,
}

fn encode(header: &Header, payload: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * payload.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&header.kind.to_le_bytes());
    for d in header.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&header.dropout.to_le_bytes());
    out.extend_from_slice(&header.seed.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    for x in payload {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"))
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

fn decode(bytes: &[u8], kind: ModelKind) -> Result<(Header, Vec<f64>), String> {
    if bytes.len() < HEADER_LEN || bytes[..8] != MAGIC {
        return Err("not a model file".into());
    }
    let version = u32_at(bytes, 8);
    if version != VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let found = u32_at(bytes, 12);
    if found != kind as u32 {
        return Err(format!("expected a {kind:?} model, found kind {found}"));
    }
    let dims = [u64_at(bytes, 16), u64_at(bytes, 24), u64_at(bytes, 32), u64_at(bytes, 40)];
    let dropout = f64::from_bits(u64_at(bytes, 48));
    let seed = u64_at(bytes, 56);
    let len = u64_at(bytes, 64);
    let body = &bytes[HEADER_LEN..];
    if body.len() as u64 != len.saturating_mul(8) {
        return Err(format!("payload holds {} bytes, header announces {len} values", body.len()));
    }
    let payload = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok((Header { kind: found, dims, dropout, seed }, payload))
}

/// Sequential reader over the payload.
struct Cursor<'a> {
    data: &'a [f64],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, len: usize) -> Result<Vec<f64>, String> {
        let end = self.at.checked_add(len).filter(|&e| e <= self.data.len()).ok_or("payload is too short")?;
        let out = self.data[self.at..end].to_vec();
        self.at = end;
        Ok(out)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix, String> {
        let len = rows.checked_mul(cols).ok_or("dimensions overflow")?;
        Ok(Matrix::from_vec(rows, cols, self.take(len)?))
    }

    fn finish(self) -> Result<(), String> {
        if self.at == self.data.len() {
            Ok(())
        } else {
            Err("payload is longer than the dimensions imply".into())
        }
    }
}

fn dim(d: u64) -> Result<usize, String> {
    usize::try_from(d).ok().filter(|&d| d > 0 && d < (1 << 32)).ok_or_else(|| format!("invalid dimension {d}"))
}

pub fn encoder_to_bytes(model: &EncoderModel) -> Vec<u8> {
    let dims = [model.input_dim() as u64, model.hidden_dim() as u64, model.output_dim() as u64, 0];
    let header = Header { kind: ModelKind::Encoder as u32, dims, dropout: model.dropout, seed: model.seed };
    let payload: Vec<f64> = model.parameters().into_iter().flatten().copied().collect();
    encode(&header, &payload)
}

pub fn encoder_from_bytes(bytes: &[u8]) -> Result<EncoderModel, String> {
    let (h, payload) = decode(bytes, ModelKind::Encoder)?;
    let (input, hidden, out) = (dim(h.dims[0])?, dim(h.dims[1])?, dim(h.dims[2])?);
    let mut cur = Cursor { data: &payload, at: 0 };
    let mut layer = |i: usize, o: usize| -> Result<Layer, String> {
        Ok(Layer { self_weight: cur.matrix(i, o)?, neighbor_weight: cur.matrix(i, o)?, bias: cur.take(o)? })
    };
    let layers = [layer(input, hidden)?, layer(hidden, out)?];
    cur.finish()?;
    let model = EncoderModel { layers, dropout: h.dropout, seed: h.seed };
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

fn push_mlp(out: &mut Vec<f64>, mlp: &Mlp) {
    out.extend_from_slice(mlp.w1.as_slice());
    out.extend_from_slice(&mlp.b1);
    out.extend_from_slice(&mlp.w2);
    out.push(mlp.b2);
}

pub fn policy_to_bytes(file: &PolicyFile) -> Vec<u8> {
    let p = &file.policy;
    let context = match file.context {
        StateContext::Local => 0,
        StateContext::Anchored => 1,
    };
    let dims = [p.dim() as u64, p.add_head.hidden_dim() as u64, context, 0];
    let header = Header { kind: ModelKind::Policy as u32, dims, dropout: 0.0, seed: p.seed };
    let mut payload = Vec::new();
    push_mlp(&mut payload, &p.add_head);
    push_mlp(&mut payload, &p.remove_head);
    payload.extend_from_slice(&p.stop_add);
    payload.extend_from_slice(&p.stop_remove);
    encode(&header, &payload)
}

pub fn policy_from_bytes(bytes: &[u8]) -> Result<PolicyFile, String> {
    let (h, payload) = decode(bytes, ModelKind::Policy)?;
    let (d, hidden) = (dim(h.dims[0])?, dim(h.dims[1])?);
    let context = match h.dims[2] {
        0 => StateContext::Local,
        1 => StateContext::Anchored,
        c => return Err(format!("unknown state context {c}")),
    };
    let mut cur = Cursor { data: &payload, at: 0 };
    let mut mlp = || -> Result<Mlp, String> {
        Ok(Mlp { w1: cur.matrix(d, hidden)?, b1: cur.take(hidden)?, w2: cur.take(hidden)?, b2: cur.take(1)?[0] })
    };
    let add_head = mlp()?;
    let remove_head = mlp()?;
    let stop_add = cur.take(d)?;
    let stop_remove = cur.take(d)?;
    cur.finish()?;
    let policy = PolicyModel { add_head, remove_head, stop_add, stop_remove, seed: h.seed };
    policy.validate().map_err(|e| e.to_string())?;
    Ok(PolicyFile { policy, context })
}

fn read(path: &Path) -> Result<Vec<u8>, ModelError> {
    fs::read(path).map_err(|source| ModelError::Io { path: path.to_owned(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ModelError> {
    fs::write(path, bytes).map_err(|source| ModelError::Io { path: path.to_owned(), source })
}

fn invalid(path: &Path) -> impl FnOnce(String) -> ModelError + '_ {
    move |msg| ModelError::Invalid { path: path.to_owned(), msg }
}

pub fn save_encoder(model: &EncoderModel, path: &Path) -> Result<(), ModelError> {
    write(path, &encoder_to_bytes(model))
}

pub fn load_encoder(path: &Path) -> Result<EncoderModel, ModelError> {
    encoder_from_bytes(&read(path)?).map_err(invalid(path))
}

pub fn save_policy(file: &PolicyFile, path: &Path) -> Result<(), ModelError> {
    write(path, &policy_to_bytes(file))
}

pub fn load_policy(path: &Path) -> Result<PolicyFile, ModelError> {
    policy_from_bytes(&read(path)?).map_err(invalid(path))
}
