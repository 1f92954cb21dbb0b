//! Simultaneous decoding engine and latency-evaluation toolkit.
//!
//! Takes any offline-trained attention encoder-decoder and runs it in
//! streaming mode under a deterministic read/write policy: wait `k` source
//! frames, then per decoding step read `s` more frames, re-encode the prefix,
//! and emit up to `N` tokens. The companion metrics measure how far the
//! emitted words lag behind an ideal translator that would need no source
//! context, and the harness sweeps `(k, s, N)` grids into BLEU/latency
//! tables.
//!
//! Modules:
//! - [`types`]: features, vocabularies, policies, hypotheses, traces
//! - [`policy`]: the deterministic read schedule
//! - [`model`]: the model interface plus an in-process seeded toy model
//! - [`engine`]: the online decoding loop and the offline greedy baseline
//! - [`tokenization`]: char/BPE token handling and word-boundary merging
//! - [`metrics`]: average lagging variants and corpus BLEU
//! - [`bridge`]: wire protocol for serving a model from another process
//! - [`harness`]: synthetic corpora, sweeps, and trace re-scoring

pub mod bridge;
pub mod engine;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod policy;
pub mod sstf;
pub mod tokenization;
pub mod types;

pub use engine::{offline_greedy, online_decode, OnlineResult, StopReason};
pub use error::{Error, Result};
pub use model::{Model, Prediction, ToyDims, ToyModel};
pub use policy::Schedule;
pub use types::{
    validate_trace, AudioFeatures, DecodingTrace, EngineConfig, Granularity, Hypothesis,
    PolicyConfig, TokenId, TraceStep, Vocabulary,
};

#[cfg(test)]
pub(crate) mod testutil;
