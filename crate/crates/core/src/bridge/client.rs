//! Engine-side of the bridge: a [`Model`] implementation that forwards every
//! call to a remote process.

use std::cell::RefCell;
use std::io::BufReader;
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use ndarray::ArrayView2;

use super::{encode_frames, read_message, write_message, Message, PROTOCOL_VERSION};
use crate::error::{Error, Result};
use crate::model::{Model, Prediction};
use crate::types::{TokenId, Vocabulary};

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Opaque handle to an encoding held by the remote side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RemoteEncoding {
    /// Prefix length this encoding covers.
    pub frames: usize,
    /// Encoder positions reported by the remote.
    pub enc_len: usize,
}

/// Position in the remote decoder-state chain: number of tokens decoded
/// since the start of the utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RemoteState {
    position: usize,
}

struct ActiveSession {
    id: String,
    frames_sent: usize,
    /// Chain positions the remote knows about.
    committed: usize,
    tip: usize,
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_session: u64,
    session: Option<ActiveSession>,
}

impl Connection {
    fn exchange(&mut self, msg: &Message) -> Result<Message> {
        write_message(&mut self.writer, msg)?;
        match read_message(&mut self.reader)? {
            Some(Message::Error { code, message }) => Err(Error::Protocol { code, message }),
            Some(reply) => Ok(reply),
            None => Err(Error::Transport(
                "server closed the connection mid-session".into(),
            )),
        }
    }
}

/// A model served by another process. One utterance is decoded at a time;
/// each `init_decoder_state` call ends the previous session and opens the
/// next one. Transport failures surface as [`Error::Transport`], failures
/// reported by the remote model as [`Error::Protocol`].
pub struct RemoteModel {
    vocab: Vocabulary,
    feature_dim: usize,
    conn: RefCell<Connection>,
}

impl RemoteModel {
    /// Connect, handshake, and verify that the remote serves `vocab`.
    pub fn connect(
        addr: impl ToSocketAddrs,
        vocab: Vocabulary,
        feature_dim: usize,
    ) -> Result<Self> {
        let stream = TcpStream::connect(addr)
            .map_err(|e| Error::Transport(format!("connect failed: {e}")))?;
        stream
            .set_read_timeout(Some(DEFAULT_TIMEOUT))
            .and_then(|_| stream.set_write_timeout(Some(DEFAULT_TIMEOUT)))
            .map_err(|e| Error::Transport(e.to_string()))?;
        let writer = stream
            .try_clone()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let mut conn = Connection {
            reader: BufReader::new(stream),
            writer,
            next_session: 0,
            session: None,
        };

        let hello = Message::Handshake {
            version: PROTOCOL_VERSION,
            vocab_hash: vocab.content_hash(),
        };
        match conn.exchange(&hello) {
            Ok(Message::HandshakeAck { version, .. }) if version == PROTOCOL_VERSION => {}
            Ok(other) => {
                return Err(Error::Handshake(format!(
                    "unexpected handshake reply: {other:?}"
                )))
            }
            Err(Error::Protocol { code, message }) => {
                return Err(Error::Handshake(format!("{code}: {message}")))
            }
            Err(e) => return Err(e),
        }

        Ok(Self {
            vocab,
            feature_dim,
            conn: RefCell::new(conn),
        })
    }

    /// Close the active session, if any.
    pub fn end_session(&self) -> Result<()> {
        let mut conn = self.conn.borrow_mut();
        if let Some(session) = conn.session.take() {
            conn.exchange(&Message::End {
                session: session.id,
            })?;
        }
        Ok(())
    }
}

impl Drop for RemoteModel {
    fn drop(&mut self) {
        let _ = self.end_session();
    }
}

impl Model for RemoteModel {
    type Enc = RemoteEncoding;
    type State = RemoteState;

    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn init_decoder_state(&self) -> Result<RemoteState> {
        let mut conn = self.conn.borrow_mut();
        if let Some(session) = conn.session.take() {
            conn.exchange(&Message::End {
                session: session.id,
            })?;
        }
        let id = format!("s{}", conn.next_session);
        conn.next_session += 1;
        conn.session = Some(ActiveSession {
            id,
            frames_sent: 0,
            committed: 0,
            tip: 0,
        });
        Ok(RemoteState { position: 0 })
    }

    fn encode(&self, prefix: ArrayView2<'_, f32>) -> Result<RemoteEncoding> {
        if prefix.ncols() != self.feature_dim {
            return Err(Error::Config(format!(
                "features have dimension {}, remote model expects {}",
                prefix.ncols(),
                self.feature_dim
            )));
        }
        let mut conn = self.conn.borrow_mut();
        let session = conn
            .session
            .as_ref()
            .ok_or_else(|| Error::State("encode without an active session".into()))?;
        let (id, sent) = (session.id.clone(), session.frames_sent);
        if prefix.nrows() < sent {
            return Err(Error::State(format!(
                "prefix shrank from {sent} to {} frames",
                prefix.nrows()
            )));
        }
        let delta = prefix.slice(ndarray::s![sent.., ..]);
        let msg = Message::Read {
            session: id,
            count: delta.nrows(),
            frames: encode_frames(delta),
        };
        match conn.exchange(&msg)? {
            Message::ReadAck {
                frames_total,
                enc_len,
                ..
            } => {
                if frames_total != prefix.nrows() {
                    return Err(Error::Transport(format!(
                        "remote tracked {frames_total} frames, client sent {}",
                        prefix.nrows()
                    )));
                }
                let session = conn.session.as_mut().expect("session checked above");
                session.frames_sent = frames_total;
                Ok(RemoteEncoding {
                    frames: frames_total,
                    enc_len,
                })
            }
            other => Err(Error::Transport(format!(
                "expected read ack, got {other:?}"
            ))),
        }
    }

    fn encoding_len(&self, enc: &RemoteEncoding) -> usize {
        enc.enc_len
    }

    fn decode_step(
        &self,
        _enc: &RemoteEncoding,
        state: &RemoteState,
        prev_token: TokenId,
    ) -> Result<Prediction<RemoteState>> {
        let mut conn = self.conn.borrow_mut();
        let session = conn
            .session
            .as_ref()
            .ok_or_else(|| Error::State("decode without an active session".into()))?;
        let id = session.id.clone();
        let (committed, tip) = (session.committed, session.tip);
        let pos = state.position;
        if pos > tip || pos < committed {
            return Err(Error::State(format!(
                "state at position {pos} is outside the live chain ({committed}..={tip})"
            )));
        }

        // The engine only ever resumes from the last committed token, so a
        // decode from below the tip means: make everything up to `pos`
        // permanent, then drop the speculative tail.
        if pos < tip {
            if pos > committed {
                conn.exchange(&Message::Commit {
                    session: id.clone(),
                    n: pos - committed,
                })?;
                conn.session.as_mut().expect("active").committed = pos;
            }
            conn.exchange(&Message::Rollback {
                session: id.clone(),
            })?;
            conn.session.as_mut().expect("active").tip = pos;
        }

        match conn.exchange(&Message::Decode {
            session: id,
            prev_token,
        })? {
            Message::Token { token, score, .. } => {
                let session = conn.session.as_mut().expect("active");
                session.tip = pos + 1;
                Ok(Prediction {
                    state: RemoteState { position: pos + 1 },
                    token,
                    score,
                })
            }
            other => Err(Error::Transport(format!("expected a token, got {other:?}"))),
        }
    }
}
