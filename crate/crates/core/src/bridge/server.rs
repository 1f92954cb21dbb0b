//! Model-side of the bridge: hosts a model behind a TCP listener.

use std::collections::HashMap;
use std::io::BufReader;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;

use ndarray::Array2;

use super::{decode_frames, read_message, write_message, Message, PROTOCOL_VERSION};
use crate::error::{Error, Result};
use crate::model::Model;

/// One utterance being decoded on behalf of a client.
struct ServerSession<M: Model> {
    frames: Option<Array2<f32>>,
    encoding: Option<M::Enc>,
    /// State of the last committed token (starts as the zero state).
    committed: M::State,
    /// States produced beyond `committed`, oldest first.
    speculative: Vec<M::State>,
}

impl<M: Model> ServerSession<M> {
    fn new(model: &M) -> Result<Self> {
        Ok(Self {
            frames: None,
            encoding: None,
            committed: model.init_decoder_state()?,
            speculative: Vec::new(),
        })
    }
}

/// Serve `model` on `addr`, blocking forever. Each connection gets its own
/// thread; sessions live inside their connection.
pub fn serve<M>(model: Arc<M>, addr: impl ToSocketAddrs) -> Result<()>
where
    M: Model + Send + Sync + 'static,
    M::Enc: Send,
    M::State: Send,
{
    let listener =
        TcpListener::bind(addr).map_err(|e| Error::Transport(format!("failed to bind: {e}")))?;
    serve_listener(model, listener)
}

/// Bind an ephemeral port, serve in a background thread, and report the
/// bound address. Used by tests and the loopback setup.
pub fn spawn_server<M>(model: Arc<M>) -> Result<SocketAddr>
where
    M: Model + Send + Sync + 'static,
    M::Enc: Send,
    M::State: Send,
{
    let listener = TcpListener::bind("127.0.0.1:0")
        .map_err(|e| Error::Transport(format!("failed to bind: {e}")))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Error::Transport(e.to_string()))?;
    std::thread::spawn(move || {
        let _ = serve_listener(model, listener);
    });
    Ok(addr)
}

/// Serve on an already-bound listener, blocking forever.
pub fn serve_listener<M>(model: Arc<M>, listener: TcpListener) -> Result<()>
where
    M: Model + Send + Sync + 'static,
    M::Enc: Send,
    M::State: Send,
{
    loop {
        let (stream, _) = listener
            .accept()
            .map_err(|e| Error::Transport(format!("accept failed: {e}")))?;
        let model = Arc::clone(&model);
        std::thread::spawn(move || {
            let _ = handle_connection(&*model, stream);
        });
    }
}

fn handle_connection<M: Model>(model: &M, stream: TcpStream) -> Result<()> {
    let mut writer = stream
        .try_clone()
        .map_err(|e| Error::Transport(e.to_string()))?;
    let mut reader = BufReader::new(stream);

    // Handshake first; anything else is a rejection.
    match read_message(&mut reader)? {
        Some(Message::Handshake {
            version,
            vocab_hash,
        }) => {
            if version != PROTOCOL_VERSION {
                let reply = Message::Error {
                    code: "version_mismatch".into(),
                    message: format!(
                        "server speaks version {PROTOCOL_VERSION}, client sent {version}"
                    ),
                };
                write_message(&mut writer, &reply)?;
                return Ok(());
            }
            let local_hash = model.vocabulary().content_hash();
            if vocab_hash != local_hash {
                let reply = Message::Error {
                    code: "vocab_mismatch".into(),
                    message: "vocabulary hash does not match the served model".into(),
                };
                write_message(&mut writer, &reply)?;
                return Ok(());
            }
            write_message(
                &mut writer,
                &Message::HandshakeAck {
                    version: PROTOCOL_VERSION,
                    vocab_hash: local_hash,
                },
            )?;
        }
        _ => {
            let reply = Message::Error {
                code: "bad_handshake".into(),
                message: "expected a handshake message".into(),
            };
            write_message(&mut writer, &reply)?;
            return Ok(());
        }
    }

    let mut sessions: HashMap<String, ServerSession<M>> = HashMap::new();
    while let Some(msg) = read_message(&mut reader)? {
        let reply = handle_message(model, &mut sessions, msg);
        write_message(&mut writer, &reply)?;
    }
    Ok(())
}

fn handle_message<M: Model>(
    model: &M,
    sessions: &mut HashMap<String, ServerSession<M>>,
    msg: Message,
) -> Message {
    match handle_message_inner(model, sessions, msg) {
        Ok(reply) => reply,
        Err(e) => Message::Error {
            code: error_code(&e).into(),
            message: e.to_string(),
        },
    }
}

fn error_code(e: &Error) -> &'static str {
    match e {
        Error::State(_) | Error::Config(_) | Error::Argument(_) => "model_error",
        _ => "internal_error",
    }
}

fn handle_message_inner<M: Model>(
    model: &M,
    sessions: &mut HashMap<String, ServerSession<M>>,
    msg: Message,
) -> Result<Message> {
    match msg {
        Message::Read {
            session,
            count,
            frames,
        } => {
            if !sessions.contains_key(&session) {
                sessions.insert(session.clone(), ServerSession::new(model)?);
            }
            let entry = sessions.get_mut(&session).expect("just inserted");
            let delta = decode_frames(&frames, count, model.feature_dim())?;
            let all = match entry.frames.take() {
                None => delta,
                Some(existing) => {
                    ndarray::concatenate(ndarray::Axis(0), &[existing.view(), delta.view()])
                        .map_err(|e| Error::Transport(e.to_string()))?
                }
            };
            let encoding = model.encode(all.view())?;
            let frames_total = all.nrows();
            let enc_len = model.encoding_len(&encoding);
            entry.frames = Some(all);
            entry.encoding = Some(encoding);
            Ok(Message::ReadAck {
                session,
                frames_total,
                enc_len,
            })
        }
        Message::Decode {
            session,
            prev_token,
        } => {
            let entry = lookup(sessions, &session)?;
            let encoding = entry
                .encoding
                .as_ref()
                .ok_or_else(|| Error::State("decode before any source frames were read".into()))?;
            let base = entry.speculative.last().unwrap_or(&entry.committed);
            let pred = model.decode_step(encoding, base, prev_token)?;
            entry.speculative.push(pred.state);
            Ok(Message::Token {
                session,
                token: pred.token,
                score: pred.score,
            })
        }
        Message::Commit { session, n } => {
            let entry = lookup(sessions, &session)?;
            if n > entry.speculative.len() {
                return Err(Error::State(format!(
                    "cannot commit {n} states, only {} are speculative",
                    entry.speculative.len()
                )));
            }
            let mut rest = entry.speculative.split_off(n);
            std::mem::swap(&mut entry.speculative, &mut rest);
            if let Some(state) = rest.into_iter().last() {
                entry.committed = state;
            }
            Ok(Message::Ok { session })
        }
        Message::Rollback { session } => {
            let entry = lookup(sessions, &session)?;
            entry.speculative.clear();
            Ok(Message::Ok { session })
        }
        Message::End { session } => {
            sessions.remove(&session);
            Ok(Message::Ok { session })
        }
        other => Err(Error::Transport(format!(
            "unexpected message in session phase: {other:?}"
        ))),
    }
}

fn lookup<'a, M: Model>(
    sessions: &'a mut HashMap<String, ServerSession<M>>,
    session: &str,
) -> Result<&'a mut ServerSession<M>> {
    sessions
        .get_mut(session)
        .ok_or_else(|| Error::State(format!("unknown session {session:?}")))
}
