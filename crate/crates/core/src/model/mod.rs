//! The model interface the decoding engine drives, plus a miniature
//! seeded-weight encoder-decoder that implements it in process.
//!
//! The engine only ever needs three things from a model: encode a source
//! prefix, start a fresh decoder state, and advance that state by one
//! greedily-predicted token. Anything that can do those — the in-process toy
//! model here, or a remote process behind the bridge — can be driven through
//! an identical decoding loop.

mod sstm;
mod toy;

pub use sstm::{read_tensors, write_tensors, NamedTensor};
pub use toy::{generate_toy_model, load_weights, save_weights, ToyDims, ToyModel};

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::Result;
use crate::types::{TokenId, Vocabulary};

/// Encoder output over a source prefix.
///
/// `hidden` has one row per encoder position; the two convolution-pool
/// blocks subsample time by a factor of four, so there are
/// `ceil(source_frames_consumed / 4)` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStates {
    pub hidden: Array2<f32>,
    pub source_frames_consumed: usize,
}

impl EncoderStates {
    /// Number of encoder positions `H`.
    pub fn len(&self) -> usize {
        self.hidden.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.hidden.nrows() == 0
    }
}

/// Hidden and cell vectors of one recurrent decoder layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub hidden: Array1<f32>,
    pub cell: Array1<f32>,
}

/// Full decoder state: one [`LayerState`] per layer plus the attention
/// context computed when the state was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub layers: Vec<LayerState>,
    pub context: Array1<f32>,
}

/// Result of advancing the decoder by one token.
#[derive(Debug, Clone)]
pub struct Prediction<S> {
    /// Decoder state after consuming the predicted token.
    pub state: S,
    /// Greedily selected token (argmax, ties broken toward the lowest id).
    pub token: TokenId,
    /// Score of the selected token.
    pub score: f32,
}

/// Interface between the decoding engine and any concrete model.
///
/// Lifecycle contract: the engine starts each utterance with one
/// `init_decoder_state` call, then alternates `encode` (over a
/// non-decreasing prefix of the same source) and `decode_step` calls until
/// the utterance ends. A state passed to `decode_step` is always either the
/// most recently returned one or an earlier state from the same utterance
/// (the engine reverts to the last committed token after discarding a
/// premature end-of-sequence prediction).
pub trait Model {
    type Enc;
    type State;

    fn vocabulary(&self) -> &Vocabulary;

    /// Feature dimension the model expects.
    fn feature_dim(&self) -> usize;

    /// Fresh zero state; begins a new utterance.
    fn init_decoder_state(&self) -> Result<Self::State>;

    /// Encode a source prefix. Bidirectional context means states may change
    /// whenever the prefix grows, which is why the engine re-encodes.
    fn encode(&self, prefix: ArrayView2<'_, f32>) -> Result<Self::Enc>;

    /// Number of encoder positions in an encoding.
    fn encoding_len(&self, enc: &Self::Enc) -> usize;

    /// Advance the decoder by one token conditioned on `prev_token`.
    fn decode_step(
        &self,
        enc: &Self::Enc,
        state: &Self::State,
        prev_token: TokenId,
    ) -> Result<Prediction<Self::State>>;
}

/// Argmax with ties broken toward the lowest token id.
pub fn predict(scores: &[f32]) -> Option<(TokenId, f32)> {
    let mut best: Option<(TokenId, f32)> = None;
    for (id, &s) in scores.iter().enumerate() {
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((id, s)),
        }
    }
    best
}
