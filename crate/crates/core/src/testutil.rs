//! Shared fixtures for unit tests.

use ndarray::Array2;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::{AudioFeatures, Granularity, Vocabulary, DEFAULT_FRAME_MS};

/// Small char vocabulary: bos, eos, space, letters a..j.
pub fn char_vocab() -> Vocabulary {
    let mut tokens: Vec<String> = vec!["<s>".into(), "</s>".into(), " ".into()];
    for c in 'a'..='j' {
        tokens.push(c.to_string());
    }
    Vocabulary::new(tokens, 0, 1, Granularity::Char).unwrap()
}

pub fn uniform_pm1(rng: &mut ChaCha8Rng) -> f32 {
    let unit = (rng.next_u32() >> 8) as f32 / (1u32 << 24) as f32;
    2.0 * unit - 1.0
}

/// Deterministic random feature matrix in [-1, 1].
pub fn random_features(seed: u64, t: usize, d: usize) -> AudioFeatures {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = Array2::from_shape_fn((t, d), |_| uniform_pm1(&mut rng));
    AudioFeatures::new(frames, DEFAULT_FRAME_MS).unwrap()
}
