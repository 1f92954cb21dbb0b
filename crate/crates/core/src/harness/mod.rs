//! Evaluation harness: synthetic corpora, sweep runs, and trace re-scoring.

mod gen;
mod manifest;
mod sweep;

pub use gen::{
    gen_synthetic, load_vocab, save_vocab, toy_bpe_vocab, toy_char_vocab, GenConfig, GenOutput,
};
pub use manifest::{Manifest, ManifestEntry};
pub use sweep::{run_sweep, score_traces, ModelSource, RowLabel, SweepGrid, SweepRow, SweepTable};
