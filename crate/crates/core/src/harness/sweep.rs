//! Policy sweeps and trace re-scoring.
//!
//! One sweep decodes the whole corpus once per `(k, s, N)` combination,
//! scores corpus BLEU against the manifest references and the mean
//! per-utterance lagging, and assembles a table sorted by latency, with an
//! offline greedy row appended as the quality ceiling. Decoding and scoring
//! are decoupled: a sweep can persist its traces and `score_traces` will
//! rebuild the identical table from disk, optionally under a different
//! lagging variant.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use super::manifest::Manifest;
use crate::bridge::RemoteModel;
use crate::engine::{
    offline_greedy_full, online_decode, read_trace_records, write_trace_records, OnlineResult,
    StopReason, TraceRecord,
};
use crate::error::{Error, Result};
use crate::metrics::{corpus_bleu, utterance_al_ms, AlVariant};
use crate::model::ToyModel;
use crate::sstf;
use crate::tokenization::{CharWordDelay, Tokenizer};
use crate::types::{AudioFeatures, EngineConfig, PolicyConfig, TraceStep, Vocabulary};

/// Where decoded tokens come from.
pub enum ModelSource {
    InProcess(Arc<ToyModel>),
    /// Dial a bridge server for every utterance; sessions are independent.
    Remote {
        addr: String,
        vocab: Vocabulary,
        feature_dim: usize,
    },
}

/// The swept parameter lists plus scoring settings.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub wait_k: Vec<usize>,
    pub stride: Vec<usize>,
    pub write_size: Vec<usize>,
    pub al_variant: AlVariant,
    pub char_delay: CharWordDelay,
    pub include_offline: bool,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.wait_k.is_empty() || self.stride.is_empty() || self.write_size.is_empty() {
            return Err(Error::Argument(
                "sweep grid lists must all be non-empty".into(),
            ));
        }
        Ok(())
    }

    /// All `(k, s, N)` combinations in grid order.
    pub fn configs(&self) -> Vec<PolicyConfig> {
        let mut out = Vec::new();
        for &k in &self.wait_k {
            for &s in &self.stride {
                for &n in &self.write_size {
                    out.push(PolicyConfig {
                        wait_k: k,
                        stride: s,
                        write_size: n,
                    });
                }
            }
        }
        out
    }
}

/// Which configuration a table row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowLabel {
    Policy(PolicyConfig),
    Offline,
}

impl RowLabel {
    /// Stem used for this row's trace file.
    pub fn file_stem(&self) -> String {
        match self {
            RowLabel::Policy(p) => format!("k{}_s{}_N{}", p.wait_k, p.stride, p.write_size),
            RowLabel::Offline => "offline".into(),
        }
    }

    /// Inverse of [`RowLabel::file_stem`].
    pub fn parse_stem(stem: &str) -> Option<RowLabel> {
        if stem == "offline" {
            return Some(RowLabel::Offline);
        }
        let rest = stem.strip_prefix('k')?;
        let (k, rest) = rest.split_once("_s")?;
        let (s, n) = rest.split_once("_N")?;
        Some(RowLabel::Policy(PolicyConfig {
            wait_k: k.parse().ok()?,
            stride: s.parse().ok()?,
            write_size: n.parse().ok()?,
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub label: RowLabel,
    pub bleu: f64,
    pub al_ms: f64,
}

/// Rows sorted by lagging ascending, offline row last.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub al_variant: AlVariant,
}

impl SweepTable {
    /// Tab-separated table with columns k, s, N, bleu, al_ms.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("k\ts\tN\tbleu\tal_ms\n");
        for row in &self.rows {
            match row.label {
                RowLabel::Policy(p) => {
                    out.push_str(&format!(
                        "{}\t{}\t{}\t{:.2}\t{:.2}\n",
                        p.wait_k, p.stride, p.write_size, row.bleu, row.al_ms
                    ));
                }
                RowLabel::Offline => {
                    out.push_str(&format!(
                        "offline\t-\t-\t{:.2}\t{:.2}\n",
                        row.bleu, row.al_ms
                    ));
                }
            }
        }
        out
    }

    /// `(al_ms, bleu)` points for latency-quality curves, same row order as
    /// the table.
    pub fn plot_data(&self) -> String {
        let mut out = String::from("al_ms\tbleu\n");
        for row in &self.rows {
            out.push_str(&format!("{:.2}\t{:.2}\n", row.al_ms, row.bleu));
        }
        out
    }

    /// One structured record per row: k, s, N, bleu, al_ms, al_variant.
    /// The offline row carries nulls for the policy fields.
    pub fn to_report_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let (k, s, n) = match row.label {
                RowLabel::Policy(p) => (Some(p.wait_k), Some(p.stride), Some(p.write_size)),
                RowLabel::Offline => (None, None, None),
            };
            let record = serde_json::json!({
                "k": k,
                "s": s,
                "N": n,
                "bleu": row.bleu,
                "al_ms": row.al_ms,
                "al_variant": self.al_variant.to_string(),
            });
            out.push_str(&record.to_string());
            out.push('\n');
        }
        out
    }

    pub fn offline_row(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| matches!(r.label, RowLabel::Offline))
    }

    pub fn policy_row(&self, policy: PolicyConfig) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.label == RowLabel::Policy(policy))
    }
}

fn decode_utterance(
    source: &ModelSource,
    features: &AudioFeatures,
    cfg: &EngineConfig,
) -> Result<OnlineResult> {
    match source {
        ModelSource::InProcess(model) => online_decode(model.as_ref(), features, cfg),
        ModelSource::Remote {
            addr,
            vocab,
            feature_dim,
        } => {
            let remote = RemoteModel::connect(addr.as_str(), vocab.clone(), *feature_dim)?;
            let result = online_decode(&remote, features, cfg)?;
            remote.end_session()?;
            Ok(result)
        }
    }
}

fn offline_utterance(
    source: &ModelSource,
    features: &AudioFeatures,
    max_length_ratio: f64,
) -> Result<(crate::types::Hypothesis, StopReason)> {
    match source {
        ModelSource::InProcess(model) => {
            offline_greedy_full(model.as_ref(), features, max_length_ratio)
        }
        ModelSource::Remote {
            addr,
            vocab,
            feature_dim,
        } => {
            let remote = RemoteModel::connect(addr.as_str(), vocab.clone(), *feature_dim)?;
            let result = offline_greedy_full(&remote, features, max_length_ratio)?;
            remote.end_session()?;
            Ok(result)
        }
    }
}

fn load_corpus(manifest: &Manifest) -> Result<Vec<AudioFeatures>> {
    manifest
        .entries()
        .iter()
        .map(|e| sstf::read_features(manifest.features_path(e)))
        .collect()
}

fn decode_config(
    source: &ModelSource,
    manifest: &Manifest,
    corpus: &[AudioFeatures],
    cfg: &EngineConfig,
) -> Result<Vec<TraceRecord>> {
    manifest
        .entries()
        .par_iter()
        .zip(corpus.par_iter())
        .map(|(entry, features)| {
            decode_utterance(source, features, cfg)
                .map(|result| TraceRecord::from_result(&entry.id, &result))
                .map_err(|e| Error::Utterance {
                    id: entry.id.clone(),
                    source: Box::new(e),
                })
        })
        .collect()
}

fn offline_records(
    source: &ModelSource,
    manifest: &Manifest,
    corpus: &[AudioFeatures],
    max_length_ratio: f64,
) -> Result<Vec<TraceRecord>> {
    manifest
        .entries()
        .par_iter()
        .zip(corpus.par_iter())
        .map(|(entry, features)| {
            let (hypothesis, stop_reason) = offline_utterance(source, features, max_length_ratio)
                .map_err(|e| Error::Utterance {
                id: entry.id.clone(),
                source: Box::new(e),
            })?;
            // Offline decoding reads everything before writing anything: a
            // single step with the full source consumed.
            Ok(TraceRecord {
                id: entry.id.clone(),
                src_len: features.num_frames(),
                frame_ms: features.frame_ms(),
                steps: vec![TraceStep {
                    step: 1,
                    frames_read: features.num_frames(),
                    emitted: hypothesis.token_ids,
                }],
                stop_reason,
            })
        })
        .collect()
}

/// Score a set of per-utterance records: corpus BLEU of the detokenized
/// hypotheses against the manifest references, and the unweighted mean of
/// per-utterance lagging in milliseconds.
fn score_records(
    records: &[TraceRecord],
    manifest: &Manifest,
    tokenizer: &Tokenizer,
    variant: AlVariant,
    char_delay: CharWordDelay,
) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::Argument("no trace records to score".into()));
    }
    let mut hypotheses = Vec::with_capacity(records.len());
    let mut references = Vec::with_capacity(records.len());
    let mut al_sum = 0.0;
    for record in records {
        let entry = manifest.entry(&record.id).ok_or_else(|| {
            Error::Manifest(format!("trace id {:?} is not in the manifest", record.id))
        })?;
        let trace = record.trace();
        let hypothesis = trace.hypothesis();
        let text = tokenizer.detokenize(&hypothesis.token_ids)?;
        let ended_with_eos = record.stop_reason == StopReason::EosAfterFullRead;
        let al = utterance_al_ms(
            &trace,
            ended_with_eos,
            tokenizer,
            &entry.reference,
            variant,
            char_delay,
        )
        .map_err(|e| Error::Utterance {
            id: record.id.clone(),
            source: Box::new(e),
        })?;
        al_sum += al;
        hypotheses.push(text);
        references.push(entry.reference.clone());
    }
    let bleu = corpus_bleu(&hypotheses, &references)?;
    Ok((bleu, al_sum / records.len() as f64))
}

fn sorted_table(mut rows: Vec<SweepRow>, al_variant: AlVariant) -> SweepTable {
    rows.sort_by(|a, b| {
        let rank = |r: &SweepRow| matches!(r.label, RowLabel::Offline) as u8;
        rank(a).cmp(&rank(b)).then_with(|| {
            a.al_ms.total_cmp(&b.al_ms).then_with(|| {
                let key = |r: &SweepRow| match r.label {
                    RowLabel::Policy(p) => (p.wait_k, p.stride, p.write_size),
                    RowLabel::Offline => (usize::MAX, usize::MAX, usize::MAX),
                };
                key(a).cmp(&key(b))
            })
        })
    });
    SweepTable { rows, al_variant }
}

/// Decode and score every grid combination (plus the offline baseline row),
/// writing one trace file per row into `traces_dir` when given. Rows come
/// back sorted by lagging ascending with the offline row last. Utterances
/// within a configuration decode in parallel; any failure aborts the sweep
/// naming the failing utterance.
pub fn run_sweep(
    source: &ModelSource,
    manifest: &Manifest,
    tokenizer: &Tokenizer,
    grid: &SweepGrid,
    max_length_ratio: f64,
    traces_dir: Option<&Path>,
) -> Result<SweepTable> {
    grid.validate()?;
    if let Some(dir) = traces_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    let corpus = load_corpus(manifest)?;

    let mut rows = Vec::new();
    for policy in grid.configs() {
        let cfg = EngineConfig::new(max_length_ratio, policy)?;
        let records = decode_config(source, manifest, &corpus, &cfg)?;
        let label = RowLabel::Policy(policy);
        if let Some(dir) = traces_dir {
            write_trace_records(dir.join(format!("{}.jsonl", label.file_stem())), &records)?;
        }
        let (bleu, al_ms) = score_records(
            &records,
            manifest,
            tokenizer,
            grid.al_variant,
            grid.char_delay,
        )?;
        rows.push(SweepRow { label, bleu, al_ms });
    }

    if grid.include_offline {
        let records = offline_records(source, manifest, &corpus, max_length_ratio)?;
        if let Some(dir) = traces_dir {
            write_trace_records(
                dir.join(format!("{}.jsonl", RowLabel::Offline.file_stem())),
                &records,
            )?;
        }
        let (bleu, al_ms) = score_records(
            &records,
            manifest,
            tokenizer,
            grid.al_variant,
            grid.char_delay,
        )?;
        rows.push(SweepRow {
            label: RowLabel::Offline,
            bleu,
            al_ms,
        });
    }

    Ok(sorted_table(rows, grid.al_variant))
}

/// Re-score the trace files a sweep wrote (`k{k}_s{s}_N{n}.jsonl` and
/// `offline.jsonl`) without decoding anything. On the files a sweep
/// produced, the resulting table is identical to the sweep's.
pub fn score_traces(
    traces_dir: impl AsRef<Path>,
    manifest: &Manifest,
    tokenizer: &Tokenizer,
    variant: AlVariant,
    char_delay: CharWordDelay,
) -> Result<SweepTable> {
    let dir = traces_dir.as_ref();
    let display = dir.display().to_string();
    let mut stems: Vec<(RowLabel, std::path::PathBuf)> = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(&display, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&display, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let label = RowLabel::parse_stem(&stem).ok_or_else(|| Error::Format {
            path: path.display().to_string(),
            message: format!("trace file name {stem:?} does not encode a configuration"),
        })?;
        stems.push((label, path));
    }
    if stems.is_empty() {
        return Err(Error::Argument(format!(
            "no trace files found under {display}"
        )));
    }

    let mut rows = Vec::new();
    for (label, path) in stems {
        let records = read_trace_records(&path)?;
        let (bleu, al_ms) = score_records(&records, manifest, tokenizer, variant, char_delay)?;
        rows.push(SweepRow { label, bleu, al_ms });
    }
    Ok(sorted_table(rows, variant))
}
