//! Synthetic corpus generation.
//!
//! A generated corpus is a seeded toy model plus random feature files whose
//! references are the model's own offline greedy outputs, detokenized. That
//! construction makes the offline-equivalent configuration score BLEU 100 by
//! definition. Draws whose offline output detokenizes to fewer than
//! `min_ref_words` words are redrawn (bounded), because downstream metrics
//! need usable references: word-level lagging is undefined on an empty
//! reference, and corpus BLEU needs sentences long enough to carry 4-grams.
//!
//! Untrained models tend to repeat a single token, so reference word counts
//! hinge on which token an utterance settles on. Redrawing the features
//! resamples that per utterance; when a model settles on a word-internal
//! token for every input, no redraw helps, and generation deterministically
//! moves to the next model seed instead. The seed actually used is embedded
//! in the weight file and reported in the output.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{Manifest, ManifestEntry};
use crate::engine::offline_greedy;
use crate::error::{Error, Result};
use crate::model::{generate_toy_model, save_weights, ToyDims, ToyModel};
use crate::sstf;
use crate::tokenization::{BpeModel, Tokenizer, CONTINUATION};
use crate::types::{AudioFeatures, Granularity, Vocabulary, DEFAULT_FRAME_MS};

/// Default char vocabulary: bos, eos, space, letters a..j.
pub fn toy_char_vocab() -> Vocabulary {
    let mut tokens: Vec<String> = vec!["<s>".into(), "</s>".into(), " ".into()];
    for c in 'a'..='j' {
        tokens.push(c.to_string());
    }
    Vocabulary::new(tokens, 0, 1, Granularity::Char).expect("static vocabulary")
}

/// Default BPE vocabulary over the letters a..f with a small merge list;
/// every unit exists both word-finally and with the continuation marker.
pub fn toy_bpe_vocab() -> (Vocabulary, BpeModel) {
    let merges = vec![
        ("a".to_string(), "b".to_string()),
        ("c".to_string(), "d".to_string()),
        ("ab".to_string(), "cd".to_string()),
        ("e".to_string(), "f".to_string()),
    ];
    let mut tokens: Vec<String> = vec!["<s>".into(), "</s>".into()];
    for unit in ["a", "b", "c", "d", "e", "f", "ab", "cd", "abcd", "ef"] {
        tokens.push(unit.to_string());
        tokens.push(format!("{unit}{CONTINUATION}"));
    }
    let vocab = Vocabulary::new(tokens, 0, 1, Granularity::Bpe).expect("static vocabulary");
    (vocab, BpeModel::new(merges))
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    pub n_utts: usize,
    /// Inclusive frame-count range for each utterance.
    pub len_range: (usize, usize),
    pub granularity: Granularity,
    pub frame_ms: f64,
    pub dims: ToyDims,
    /// Length cap used when producing the reference outputs.
    pub max_length_ratio: f64,
    /// Redraw an utterance until its reference has at least this many words.
    pub min_ref_words: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_utts: 20,
            len_range: (240, 400),
            granularity: Granularity::Bpe,
            frame_ms: DEFAULT_FRAME_MS,
            dims: ToyDims::default(),
            max_length_ratio: 1.0,
            min_ref_words: 4,
        }
    }
}

/// Feature redraws per utterance before a model seed is declared degenerate.
const MAX_DRAWS: usize = 64;

/// Consecutive model seeds tried before generation gives up entirely.
const MAX_MODEL_SEEDS: u64 = 32;

/// Files produced by [`gen_synthetic`].
#[derive(Debug, Clone)]
pub struct GenOutput {
    pub manifest_path: PathBuf,
    pub weights_path: PathBuf,
    pub vocab_path: PathBuf,
    pub merges_path: Option<PathBuf>,
    pub model: ToyModel,
    pub manifest: Manifest,
    /// Seed the model was actually built from; larger than the requested
    /// seed when earlier candidates produced unusable references.
    pub model_seed: u64,
}

/// Generate a corpus under `out_dir`: toy weights (`model.sstm`), vocabulary
/// (`vocab.json`), merge list for BPE vocabularies (`merges.txt`), feature
/// files (`feats/*.sstf`), and the manifest (`manifest.jsonl`). The same
/// config always reproduces byte-identical files.
pub fn gen_synthetic(cfg: &GenConfig, out_dir: impl AsRef<Path>) -> Result<GenOutput> {
    if cfg.n_utts < 1 {
        return Err(Error::Argument("n_utts must be >= 1".into()));
    }
    let (lo, hi) = cfg.len_range;
    if lo < 1 || hi < lo {
        return Err(Error::Argument(format!(
            "invalid length range ({lo}, {hi})"
        )));
    }
    let out_dir = out_dir.as_ref();
    let feats_dir = out_dir.join("feats");
    std::fs::create_dir_all(&feats_dir)
        .map_err(|e| Error::io(feats_dir.display().to_string(), e))?;

    let (vocab, bpe) = match cfg.granularity {
        Granularity::Char => (toy_char_vocab(), None),
        Granularity::Bpe => {
            let (vocab, bpe) = toy_bpe_vocab();
            (vocab, Some(bpe))
        }
    };
    let tokenizer = Tokenizer::new(vocab.clone(), bpe.clone())?;

    let (model, model_seed, utterances) = (0..MAX_MODEL_SEEDS)
        .find_map(|attempt| {
            let model_seed = cfg.seed.wrapping_add(attempt);
            let model = generate_toy_model(model_seed, cfg.dims, vocab.clone()).ok()?;
            draw_corpus(&model, &tokenizer, cfg).map(|utts| (model, model_seed, utts))
        })
        .ok_or_else(|| {
            Error::Argument(format!(
                "no model seed in {}..{} produced references with >= {} words; \
                 lower min_ref_words or widen len_range",
                cfg.seed,
                cfg.seed.wrapping_add(MAX_MODEL_SEEDS),
                cfg.min_ref_words
            ))
        })?;

    let weights_path = out_dir.join("model.sstm");
    save_weights(&model, &weights_path)?;
    let vocab_path = out_dir.join("vocab.json");
    save_vocab(&vocab, &vocab_path)?;
    let merges_path = match &bpe {
        Some(bpe) => {
            let path = out_dir.join("merges.txt");
            bpe.write_file(&path)?;
            Some(path)
        }
        None => None,
    };

    let mut entries = Vec::with_capacity(cfg.n_utts);
    for (i, (features, reference)) in utterances.into_iter().enumerate() {
        let id = format!("utt{i:04}");
        let rel = format!("feats/{id}.sstf");
        sstf::write_features(out_dir.join(&rel), &features)?;
        entries.push(ManifestEntry {
            id,
            features: rel,
            reference,
        });
    }

    let manifest = Manifest::new(cfg.frame_ms, entries, out_dir.to_path_buf())?;
    let manifest_path = out_dir.join("manifest.jsonl");
    manifest.save(&manifest_path)?;
    Ok(GenOutput {
        manifest_path,
        weights_path,
        vocab_path,
        merges_path,
        model,
        manifest,
        model_seed,
    })
}

/// Draw the whole corpus for one candidate model, or give up if any
/// utterance cannot meet the word floor within its draw budget.
fn draw_corpus(
    model: &ToyModel,
    tokenizer: &Tokenizer,
    cfg: &GenConfig,
) -> Option<Vec<(AudioFeatures, String)>> {
    let (lo, hi) = cfg.len_range;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed());
    let mut utterances = Vec::with_capacity(cfg.n_utts);
    for _ in 0..cfg.n_utts {
        let mut found = None;
        for _ in 0..MAX_DRAWS {
            let t = lo + (rng.next_u32() as usize) % (hi - lo + 1);
            let frames = Array2::from_shape_fn((t, cfg.dims.feat_dim), |_| {
                let unit = (rng.next_u32() >> 8) as f32 / (1u32 << 24) as f32;
                2.0 * unit - 1.0
            });
            let features = AudioFeatures::new(frames, cfg.frame_ms).ok()?;
            let hyp = offline_greedy(model, &features, cfg.max_length_ratio).ok()?;
            if hyp.is_empty() {
                continue;
            }
            let reference = tokenizer.detokenize(&hyp.token_ids).ok()?;
            if reference.split_whitespace().count() < cfg.min_ref_words.max(1) {
                continue;
            }
            found = Some((features, reference));
            break;
        }
        utterances.push(found?);
    }
    Some(utterances)
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
    bos_id: usize,
    eos_id: usize,
    granularity: Granularity,
}

pub fn save_vocab(vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
    let display = path.as_ref().display().to_string();
    let file = VocabFile {
        tokens: vocab.tokens().to_vec(),
        bos_id: vocab.bos_id(),
        eos_id: vocab.eos_id(),
        granularity: vocab.granularity(),
    };
    let body =
        serde_json::to_string_pretty(&file).map_err(|e| Error::format(&display, e.to_string()))?;
    std::fs::write(path, body).map_err(|e| Error::io(&display, e))
}

pub fn load_vocab(path: impl AsRef<Path>) -> Result<Vocabulary> {
    let display = path.as_ref().display().to_string();
    let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&display, e))?;
    let file: VocabFile =
        serde_json::from_str(&body).map_err(|e| Error::format(&display, e.to_string()))?;
    Vocabulary::new(file.tokens, file.bos_id, file.eos_id, file.granularity)
        .map_err(|e| Error::format(&display, e.to_string()))
}
