//! Shared fixtures for the benchmark targets.

use ndarray::Array2;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simulst::model::{generate_toy_model, ToyDims, ToyModel};
use simulst::types::{
    AudioFeatures, DecodingTrace, Granularity, TraceStep, Vocabulary, DEFAULT_FRAME_MS,
};

pub fn bench_vocab() -> Vocabulary {
    let mut tokens: Vec<String> = vec!["<s>".into(), "</s>".into(), " ".into()];
    for c in 'a'..='j' {
        tokens.push(c.to_string());
    }
    Vocabulary::new(tokens, 0, 1, Granularity::Char).expect("static vocabulary")
}

pub fn bench_model() -> ToyModel {
    generate_toy_model(42, ToyDims::default(), bench_vocab()).expect("toy model")
}

pub fn bench_features(seed: u64, frames: usize) -> AudioFeatures {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = Array2::from_shape_fn((frames, 16), |_| {
        let unit = (rng.next_u32() >> 8) as f32 / (1u32 << 24) as f32;
        2.0 * unit - 1.0
    });
    AudioFeatures::new(data, DEFAULT_FRAME_MS).expect("valid features")
}

/// Schedule-shaped trace with `w_t = 2` everywhere.
pub fn bench_trace(k: usize, stride: usize, src_len: usize) -> DecodingTrace {
    let mut steps = Vec::new();
    let mut t = 1;
    loop {
        let frames_read = (k + (t - 1) * stride).min(src_len);
        steps.push(TraceStep {
            step: t,
            frames_read,
            emitted: vec![3, 4],
        });
        if frames_read == src_len {
            break;
        }
        t += 1;
    }
    DecodingTrace::new(steps, src_len, DEFAULT_FRAME_MS)
}

/// Deterministic word-pool sentences for BLEU benchmarks.
pub fn bench_corpus(n: usize) -> (Vec<String>, Vec<String>) {
    let pool = ["da", "ne", "lo", "mi", "ra", "to", "ka", "su"];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sentence = |rng: &mut ChaCha8Rng| {
        let len = 5 + (rng.next_u32() as usize) % 15;
        (0..len)
            .map(|_| pool[(rng.next_u32() as usize) % pool.len()])
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for _ in 0..n {
        refs.push(sentence(&mut rng));
        hyps.push(sentence(&mut rng));
    }
    (hyps, refs)
}
