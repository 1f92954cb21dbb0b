//! Wire protocol for serving a model from another process.
//!
//! The engine side and the model side exchange line-delimited JSON messages
//! over a byte stream (TCP here). Frames are shipped incrementally — each
//! read carries only the rows since the previous read, base64-encoded — so a
//! message log replays into the exact feature matrix. The remote side owns
//! all decoder state: `decode` extends a speculative chain from its tip,
//! `commit` makes the first `n` speculative states permanent, and `rollback`
//! discards whatever is still speculative, which is how the engine's revert
//! to the last committed token after a premature end-of-sequence reaches the
//! remote process.
//!
//! A connection starts with a handshake carrying the protocol version and a
//! vocabulary hash; either mismatch is a rejection. One utterance is active
//! per session, sessions are named by the client, and messages within a
//! session are strictly request-response.

mod client;
mod server;

pub use client::RemoteModel;
pub use server::{serve, serve_listener, spawn_server};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

/// Every message that can cross the wire, in both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Handshake {
        version: u32,
        vocab_hash: String,
    },
    HandshakeAck {
        version: u32,
        vocab_hash: String,
    },
    /// Append `count` feature rows (base64 of row-major f32 LE bytes) to the
    /// session's source buffer and re-encode it.
    Read {
        session: String,
        count: usize,
        frames: String,
    },
    ReadAck {
        session: String,
        frames_total: usize,
        enc_len: usize,
    },
    /// Advance the speculative chain by one predicted token.
    Decode {
        session: String,
        prev_token: usize,
    },
    Token {
        session: String,
        token: usize,
        score: f32,
    },
    /// Make the first `n` speculative states permanent.
    Commit {
        session: String,
        n: usize,
    },
    /// Discard all uncommitted speculative states.
    Rollback {
        session: String,
    },
    End {
        session: String,
    },
    Ok {
        session: String,
    },
    Error {
        code: String,
        message: String,
    },
}

pub(crate) fn write_message(w: &mut impl std::io::Write, msg: &Message) -> Result<()> {
    let line = serde_json::to_string(msg)
        .map_err(|e| Error::Transport(format!("failed to serialize message: {e}")))?;
    w.write_all(line.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|e| Error::Transport(format!("write failed: {e}")))
}

/// Read one message line. `None` means the peer closed the stream cleanly.
pub(crate) fn read_message(r: &mut impl std::io::BufRead) -> Result<Option<Message>> {
    let mut line = String::new();
    let n = r.read_line(&mut line).map_err(|e| {
        if e.kind() == std::io::ErrorKind::WouldBlock || e.kind() == std::io::ErrorKind::TimedOut {
            Error::Transport("timed out waiting for a message".into())
        } else {
            Error::Transport(format!("read failed: {e}"))
        }
    })?;
    if n == 0 {
        return Ok(None);
    }
    let msg = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Transport(format!("malformed message: {e}")))?;
    Ok(Some(msg))
}

pub(crate) fn encode_frames(rows: ndarray::ArrayView2<'_, f32>) -> String {
    use base64::Engine as _;
    let mut bytes = Vec::with_capacity(rows.len() * 4);
    for v in rows.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub(crate) fn decode_frames(data: &str, rows: usize, cols: usize) -> Result<ndarray::Array2<f32>> {
    use base64::Engine as _;
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(data)
        .map_err(|e| Error::Transport(format!("invalid frame payload: {e}")))?;
    if bytes.len() != rows * cols * 4 {
        return Err(Error::Transport(format!(
            "frame payload carries {} bytes, expected {} for {rows}x{cols}",
            bytes.len(),
            rows * cols * 4
        )));
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    ndarray::Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| Error::Transport(e.to_string()))
}
