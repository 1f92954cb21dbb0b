//! Latency metrics and corpus BLEU.
//!
//! Average lagging measures how much source material the system had consumed
//! when it produced each output unit, relative to an ideal translator that
//! would need no waiting: for a trace it is the mean of
//! `g(t) - (t-1)/gamma` over steps `t` up to the cut-off step, where `gamma`
//! is an output-per-source rate. The token-weighted form multiplies each
//! term by the tokens written at that step and still divides by the step
//! count (implemented exactly as stated, asymmetry and all). The word-level
//! form applies the same sum to per-word delays in milliseconds, with
//! `gamma` taken either from the hypothesis length or, in the adaptive
//! variant, from the reference length — the adaptive rate is the standard
//! mitigation for the negative values the original metric tends to produce
//! on speech input; values are never clamped here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenization::{CharWordDelay, Tokenizer};
use crate::types::{DecodingTrace, TokenId};

/// Cut-off step: first recorded step with the whole source read, or the full
/// step count when the trace stopped before saturating.
fn cutoff_index(trace: &DecodingTrace) -> usize {
    trace
        .steps
        .iter()
        .position(|s| s.frames_read == trace.src_len)
        .map(|p| p + 1)
        .unwrap_or(trace.steps.len())
}

/// Average lagging over a trace in frames, one term per step:
/// `(1/tau) * sum_{t<=tau} [g(t) - (t-1)/gamma]` with
/// `gamma = target_len / |X|`. Multiply by `frame_ms` for milliseconds.
pub fn al_original(trace: &DecodingTrace, target_len: usize) -> Result<f64> {
    al_over_steps(trace, target_len, |_| 1.0)
}

/// Token-weighted average lagging in frames: each step's term is scaled by
/// the number of tokens written there; steps with `w_t = 0` contribute 0.
pub fn al_weighted(trace: &DecodingTrace, target_len: usize) -> Result<f64> {
    al_over_steps(trace, target_len, |w| w as f64)
}

fn al_over_steps(
    trace: &DecodingTrace,
    target_len: usize,
    weight: impl Fn(usize) -> f64,
) -> Result<f64> {
    if trace.steps.is_empty() {
        return Err(Error::UndefinedMetric("trace has no steps".into()));
    }
    if target_len == 0 {
        return Err(Error::Argument(
            "target length must be >= 1 (gamma would be zero)".into(),
        ));
    }
    let gamma = target_len as f64 / trace.src_len as f64;
    let tau = cutoff_index(trace);
    let mut sum = 0.0;
    for (i, step) in trace.steps[..tau].iter().enumerate() {
        let lag = step.frames_read as f64 - i as f64 / gamma;
        sum += lag * weight(step.write_count());
    }
    Ok(sum / tau as f64)
}

/// Per-word delays in milliseconds for one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordDelaySequence {
    delays_ms: Vec<f64>,
    src_duration_ms: f64,
}

impl WordDelaySequence {
    pub fn new(delays_ms: Vec<f64>, src_duration_ms: f64) -> Result<Self> {
        if src_duration_ms.is_nan() || src_duration_ms <= 0.0 {
            return Err(Error::Argument(format!(
                "source duration must be positive, got {src_duration_ms}"
            )));
        }
        if delays_ms.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Argument("word delays must be non-decreasing".into()));
        }
        if let Some(bad) = delays_ms.iter().find(|&&d| d > src_duration_ms) {
            return Err(Error::Argument(format!(
                "word delay {bad} exceeds the source duration {src_duration_ms}"
            )));
        }
        Ok(Self {
            delays_ms,
            src_duration_ms,
        })
    }

    pub fn delays_ms(&self) -> &[f64] {
        &self.delays_ms
    }

    pub fn src_duration_ms(&self) -> f64 {
        self.src_duration_ms
    }

    pub fn word_count(&self) -> usize {
        self.delays_ms.len()
    }
}

/// Word-level average lagging in milliseconds with the rate taken from the
/// reference length: `gamma = ref_word_count / src_ms`. The cut-off is the
/// first word whose delay equals the source duration; when no delay reaches
/// it (possible after an early length-cap stop) all words count.
pub fn al_word_adaptive(words: &WordDelaySequence, ref_word_count: usize) -> Result<f64> {
    al_word_with_rate(words, ref_word_count)
}

/// Word-level average lagging with the rate taken from the hypothesis
/// itself, the non-adaptive behavior of the original metric.
pub fn al_word_hypothesis(words: &WordDelaySequence) -> Result<f64> {
    al_word_with_rate(words, words.word_count())
}

fn al_word_with_rate(words: &WordDelaySequence, rate_word_count: usize) -> Result<f64> {
    if words.delays_ms.is_empty() {
        return Err(Error::UndefinedMetric(
            "word delay sequence is empty".into(),
        ));
    }
    if rate_word_count == 0 {
        return Err(Error::Argument(
            "rate word count must be >= 1 (gamma would be zero)".into(),
        ));
    }
    let gamma = rate_word_count as f64 / words.src_duration_ms;
    let tau = words
        .delays_ms
        .iter()
        .position(|&d| d == words.src_duration_ms)
        .map(|p| p + 1)
        .unwrap_or(words.delays_ms.len());
    let sum: f64 = words.delays_ms[..tau]
        .iter()
        .enumerate()
        .map(|(i, &d)| d - i as f64 / gamma)
        .sum();
    Ok(sum / tau as f64)
}

/// Build the word delay sequence of a trace: each complete word's delay is
/// the source time read at its completing step. `ended_with_eos` marks
/// traces whose final step produced the end-of-sequence token, which is what
/// completes a trailing word.
pub fn word_delay_sequence(
    trace: &DecodingTrace,
    ended_with_eos: bool,
    tokenizer: &Tokenizer,
    char_delay: CharWordDelay,
) -> Result<WordDelaySequence> {
    let hypothesis = trace.hypothesis();
    let mut timed: Vec<(TokenId, usize)> = hypothesis.timed_tokens().collect();
    if ended_with_eos {
        if let Some(last) = trace.steps.last() {
            timed.push((tokenizer.vocab().eos_id(), last.step));
        }
    }
    let words = tokenizer.word_boundaries(&timed, char_delay)?;
    let mut delays = Vec::with_capacity(words.len());
    for (word, step) in &words {
        let entry = trace
            .steps
            .get(step - 1)
            .filter(|s| s.step == *step)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "word {word:?} completes at step {step}, which the trace does not contain"
                ))
            })?;
        delays.push(entry.frames_read as f64 * trace.frame_ms);
    }
    WordDelaySequence::new(delays, trace.src_duration_ms())
}

/// Which latency number a report column carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlVariant {
    /// Word-level, rate from the reference length.
    #[default]
    Adaptive,
    /// Word-level, rate from the hypothesis length.
    Original,
    /// Step-level mean lag, one term per step.
    TokenOriginal,
    /// Step-level lag with token-count weights.
    TokenWeighted,
}

impl std::fmt::Display for AlVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            AlVariant::Adaptive => "adaptive",
            AlVariant::Original => "original",
            AlVariant::TokenOriginal => "token_original",
            AlVariant::TokenWeighted => "token_weighted",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for AlVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(AlVariant::Adaptive),
            "original" => Ok(AlVariant::Original),
            "token_original" => Ok(AlVariant::TokenOriginal),
            "token_weighted" => Ok(AlVariant::TokenWeighted),
            other => Err(Error::Argument(format!(
                "unknown AL variant {other:?} (expected adaptive, original, token_original, token_weighted)"
            ))),
        }
    }
}

/// Average lagging of one utterance in milliseconds under the chosen
/// variant. `reference` is only consulted by the adaptive variant.
pub fn utterance_al_ms(
    trace: &DecodingTrace,
    ended_with_eos: bool,
    tokenizer: &Tokenizer,
    reference: &str,
    variant: AlVariant,
    char_delay: CharWordDelay,
) -> Result<f64> {
    match variant {
        AlVariant::Adaptive => {
            let words = word_delay_sequence(trace, ended_with_eos, tokenizer, char_delay)?;
            let ref_words = reference.split_whitespace().count();
            if ref_words == 0 {
                return Err(Error::UndefinedMetric("reference has no words".into()));
            }
            al_word_adaptive(&words, ref_words)
        }
        AlVariant::Original => {
            let words = word_delay_sequence(trace, ended_with_eos, tokenizer, char_delay)?;
            al_word_hypothesis(&words)
        }
        AlVariant::TokenOriginal => Ok(al_original(trace, trace.output_len())? * trace.frame_ms),
        AlVariant::TokenWeighted => Ok(al_weighted(trace, trace.output_len())? * trace.frame_ms),
    }
}

const MAX_NGRAM: usize = 4;

/// Corpus-level BLEU in percent: clipped 1..4-gram precisions accumulated
/// over the corpus, geometric mean, brevity penalty, whitespace
/// tokenization, single reference per hypothesis. No smoothing: any order
/// with zero matches gives 0.
pub fn corpus_bleu(hypotheses: &[String], references: &[String]) -> Result<f64> {
    if hypotheses.is_empty() {
        return Err(Error::Argument("empty corpus".into()));
    }
    if hypotheses.len() != references.len() {
        return Err(Error::Argument(format!(
            "{} hypotheses vs {} references",
            hypotheses.len(),
            references.len()
        )));
    }

    let mut correct = [0u64; MAX_NGRAM];
    let mut total = [0u64; MAX_NGRAM];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;

    for (hyp, reference) in hypotheses.iter().zip(references) {
        let hyp_words: Vec<&str> = hyp.split_whitespace().collect();
        let ref_words: Vec<&str> = reference.split_whitespace().collect();
        hyp_len += hyp_words.len() as u64;
        ref_len += ref_words.len() as u64;

        for n in 1..=MAX_NGRAM {
            if hyp_words.len() < n {
                continue;
            }
            let mut ref_counts: std::collections::HashMap<&[&str], u64> =
                std::collections::HashMap::new();
            if ref_words.len() >= n {
                for gram in ref_words.windows(n) {
                    *ref_counts.entry(gram).or_default() += 1;
                }
            }
            let mut hyp_counts: std::collections::HashMap<&[&str], u64> =
                std::collections::HashMap::new();
            for gram in hyp_words.windows(n) {
                *hyp_counts.entry(gram).or_default() += 1;
            }
            for (gram, count) in &hyp_counts {
                total[n - 1] += count;
                let clip = ref_counts.get(gram).copied().unwrap_or(0);
                correct[n - 1] += (*count).min(clip);
            }
        }
    }

    if hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 0..MAX_NGRAM {
        if correct[n] == 0 || total[n] == 0 {
            return Ok(0.0);
        }
        log_sum += (correct[n] as f64 / total[n] as f64).ln();
    }
    let brevity_penalty = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * brevity_penalty * (log_sum / MAX_NGRAM as f64).exp())
}
