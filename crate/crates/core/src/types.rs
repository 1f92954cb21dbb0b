//! Shared domain types: source features, vocabularies, policies, hypotheses,
//! and decoding traces.
//!
//! Everything here is immutable after construction and safe to share across
//! threads. The decoding trace is the ground truth all latency metrics are
//! computed from.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into a [`Vocabulary`].
pub type TokenId = usize;

/// Source feature sequence: `T` frames of `D`-dimensional features plus the
/// duration of one frame in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFeatures {
    frames: Array2<f32>,
    frame_ms: f64,
}

/// Default frame duration: one frame per 10 ms of audio.
pub const DEFAULT_FRAME_MS: f64 = 10.0;

impl AudioFeatures {
    /// Build a feature sequence, validating shape and finiteness.
    pub fn new(frames: Array2<f32>, frame_ms: f64) -> Result<Self> {
        if frames.nrows() == 0 || frames.ncols() == 0 {
            return Err(Error::Argument(format!(
                "feature matrix must be non-empty, got {}x{}",
                frames.nrows(),
                frames.ncols()
            )));
        }
        if frame_ms <= 0.0 || !frame_ms.is_finite() || frame_ms.is_nan() {
            return Err(Error::Argument(format!(
                "frame_ms must be a positive finite number, got {frame_ms}"
            )));
        }
        if let Some(bad) = frames.iter().find(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "feature values must be finite, found {bad}"
            )));
        }
        Ok(Self { frames, frame_ms })
    }

    /// Number of frames `T`.
    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    /// Feature dimension `D`.
    pub fn feature_dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn frame_ms(&self) -> f64 {
        self.frame_ms
    }

    /// Total duration of the utterance in milliseconds.
    pub fn duration_ms(&self) -> f64 {
        self.num_frames() as f64 * self.frame_ms
    }

    pub fn frames(&self) -> &Array2<f32> {
        &self.frames
    }

    /// View of the first `n` frames. `n` is clamped to `T`.
    pub fn prefix(&self, n: usize) -> ndarray::ArrayView2<'_, f32> {
        let n = n.min(self.num_frames());
        self.frames.slice(ndarray::s![..n, ..])
    }
}

/// Output token granularity of a vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Char,
    Bpe,
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Granularity::Char => write!(f, "char"),
            Granularity::Bpe => write!(f, "bpe"),
        }
    }
}

/// Ordered token inventory with designated begin/end-of-sequence entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    bos_id: TokenId,
    eos_id: TokenId,
    granularity: Granularity,
}

impl Vocabulary {
    pub fn new(
        tokens: Vec<String>,
        bos_id: TokenId,
        eos_id: TokenId,
        granularity: Granularity,
    ) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Argument("vocabulary must be non-empty".into()));
        }
        if bos_id >= tokens.len() || eos_id >= tokens.len() {
            return Err(Error::Argument(format!(
                "bos/eos ids ({bos_id}, {eos_id}) out of range for {} tokens",
                tokens.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for t in &tokens {
            if !seen.insert(t.as_str()) {
                return Err(Error::Argument(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self {
            tokens,
            bos_id,
            eos_id,
            granularity,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn bos_id(&self) -> TokenId {
        self.bos_id
    }

    pub fn eos_id(&self) -> TokenId {
        self.eos_id
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn id_of(&self, token: &str) -> Option<TokenId> {
        self.tokens.iter().position(|t| t == token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Stable content hash used by the bridge handshake to make sure both
    /// sides agree on the token inventory.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(self.granularity.to_string().as_bytes());
        hasher.update([0u8]);
        hasher.update(self.bos_id.to_le_bytes());
        hasher.update(self.eos_id.to_le_bytes());
        for t in &self.tokens {
            hasher.update(t.as_bytes());
            hasher.update([0u8]);
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// The deterministic read/write schedule parameters: wait `k` frames before
/// the first write, read `stride` more frames per step, emit at most
/// `write_size` tokens per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Frames read before the first decoding step (`k`).
    pub wait_k: usize,
    /// Frames consumed per subsequent decoding step (`s`).
    pub stride: usize,
    /// Maximum tokens written per decoding step (`N`).
    pub write_size: usize,
}

impl PolicyConfig {
    pub fn new(wait_k: usize, stride: usize, write_size: usize) -> Result<Self> {
        let cfg = Self {
            wait_k,
            stride,
            write_size,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.wait_k < 1 || self.stride < 1 || self.write_size < 1 {
            return Err(Error::Argument(format!(
                "policy parameters must all be >= 1, got k={}, s={}, N={}",
                self.wait_k, self.stride, self.write_size
            )));
        }
        Ok(())
    }
}

/// Engine settings: the policy plus the output-length stop threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Output length cap as a ratio of the full-source encoder length.
    pub max_length_ratio: f64,
    pub policy: PolicyConfig,
}

impl EngineConfig {
    pub fn new(max_length_ratio: f64, policy: PolicyConfig) -> Result<Self> {
        if max_length_ratio.is_nan() || max_length_ratio <= 0.0 || !max_length_ratio.is_finite() {
            return Err(Error::Argument(format!(
                "max_length_ratio must be positive and finite, got {max_length_ratio}"
            )));
        }
        policy.validate()?;
        Ok(Self {
            max_length_ratio,
            policy,
        })
    }
}

/// An emitted token sequence together with the decoding step each token was
/// committed at. Content tokens only; the end-of-sequence symbol is never
/// part of a hypothesis produced by the engine.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub token_ids: Vec<TokenId>,
    pub emitted_at_step: Vec<usize>,
}

impl Hypothesis {
    pub fn new(token_ids: Vec<TokenId>, emitted_at_step: Vec<usize>) -> Result<Self> {
        let hyp = Self {
            token_ids,
            emitted_at_step,
        };
        hyp.validate(None)?;
        Ok(hyp)
    }

    /// Check the structural invariants. When `eos_id` is given, an
    /// end-of-sequence token is only legal as the final element.
    pub fn validate(&self, eos_id: Option<TokenId>) -> Result<()> {
        if self.token_ids.len() != self.emitted_at_step.len() {
            return Err(Error::Argument(format!(
                "hypothesis has {} tokens but {} step indices",
                self.token_ids.len(),
                self.emitted_at_step.len()
            )));
        }
        if self.emitted_at_step.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Argument(
                "emission steps must be non-decreasing".into(),
            ));
        }
        if let Some(eos) = eos_id {
            if let Some(pos) = self.token_ids.iter().position(|&t| t == eos) {
                if pos + 1 != self.token_ids.len() {
                    return Err(Error::Argument(format!(
                        "eos at position {pos} is not the final element"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Token ids paired with their emission steps.
    pub fn timed_tokens(&self) -> impl Iterator<Item = (TokenId, usize)> + '_ {
        self.token_ids
            .iter()
            .copied()
            .zip(self.emitted_at_step.iter().copied())
    }
}

/// One decoding step of a trace: the step index `t`, the frames read `g(t)`,
/// and the tokens committed at this step (`w_t` is their count).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    /// 1-based step index `t`.
    pub step: usize,
    /// Source frames read when this step decoded, `g(t)`.
    pub frames_read: usize,
    /// Token ids committed at this step; `w_t` = `emitted.len()`.
    pub emitted: Vec<TokenId>,
}

impl TraceStep {
    pub fn write_count(&self) -> usize {
        self.emitted.len()
    }
}

/// Per-utterance record of what the policy read and what the decoder wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingTrace {
    pub steps: Vec<TraceStep>,
    /// Source length `|X|` in frames.
    pub src_len: usize,
    pub frame_ms: f64,
}

impl DecodingTrace {
    pub fn new(steps: Vec<TraceStep>, src_len: usize, frame_ms: f64) -> Self {
        Self {
            steps,
            src_len,
            frame_ms,
        }
    }

    /// Total number of committed tokens, `sum(w_t) = |Y|`.
    pub fn output_len(&self) -> usize {
        self.steps.iter().map(TraceStep::write_count).sum()
    }

    /// Source duration `|X| * frame_ms` in milliseconds.
    pub fn src_duration_ms(&self) -> f64 {
        self.src_len as f64 * self.frame_ms
    }

    /// Rebuild the hypothesis recorded in this trace.
    pub fn hypothesis(&self) -> Hypothesis {
        let mut token_ids = Vec::new();
        let mut emitted_at_step = Vec::new();
        for s in &self.steps {
            for &tok in &s.emitted {
                token_ids.push(tok);
                emitted_at_step.push(s.step);
            }
        }
        Hypothesis {
            token_ids,
            emitted_at_step,
        }
    }

    /// Running output counts `q(t)` after each recorded step.
    pub fn cumulative_writes(&self) -> Vec<usize> {
        let mut acc = 0;
        self.steps
            .iter()
            .map(|s| {
                acc += s.write_count();
                acc
            })
            .collect()
    }
}

/// A single violated trace invariant. Violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceViolation {
    Empty,
    /// Step indices are not 1, 2, 3, ... in order.
    BadStepIndex {
        position: usize,
        step: usize,
    },
    /// `g(t)` does not match the deterministic schedule.
    FramesMismatch {
        step: usize,
        expected: usize,
        actual: usize,
    },
    /// More tokens written at a step than the policy allows.
    WriteOverflow {
        step: usize,
        wrote: usize,
        limit: usize,
    },
}

impl std::fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TraceViolation::Empty => write!(f, "trace is empty"),
            TraceViolation::BadStepIndex { position, step } => {
                write!(f, "step at position {position} has index {step}")
            }
            TraceViolation::FramesMismatch {
                step,
                expected,
                actual,
            } => write!(f, "g({step}) != {expected} (got {actual})"),
            TraceViolation::WriteOverflow { step, wrote, limit } => {
                write!(f, "w_{step} > N (wrote {wrote}, N={limit})")
            }
        }
    }
}

/// Check a trace against the deterministic schedule of its policy.
///
/// Returns every violated invariant; an empty list means the trace conforms
/// to `g(t) = min(k + (t-1)*s, |X|)` with `0 <= w_t <= N`.
pub fn validate_trace(trace: &DecodingTrace, policy: &PolicyConfig) -> Vec<TraceViolation> {
    let mut violations = Vec::new();
    if trace.steps.is_empty() {
        violations.push(TraceViolation::Empty);
        return violations;
    }
    for (i, step) in trace.steps.iter().enumerate() {
        let t = i + 1;
        if step.step != t {
            violations.push(TraceViolation::BadStepIndex {
                position: i,
                step: step.step,
            });
            continue;
        }
        let expected = policy
            .wait_k
            .saturating_add((t - 1).saturating_mul(policy.stride))
            .min(trace.src_len);
        if step.frames_read != expected {
            violations.push(TraceViolation::FramesMismatch {
                step: t,
                expected,
                actual: step.frames_read,
            });
        }
        if step.write_count() > policy.write_size {
            violations.push(TraceViolation::WriteOverflow {
                step: t,
                wrote: step.write_count(),
                limit: policy.write_size,
            });
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn trace(g: &[usize], w: &[usize], src_len: usize) -> DecodingTrace {
        let steps = g
            .iter()
            .zip(w)
            .enumerate()
            .map(|(i, (&frames_read, &wt))| TraceStep {
                step: i + 1,
                frames_read,
                emitted: vec![0; wt],
            })
            .collect();
        DecodingTrace::new(steps, src_len, DEFAULT_FRAME_MS)
    }

    #[test]
    fn conforming_trace_is_ok() {
        let t = trace(&[100, 110, 120], &[1, 1, 1], 150);
        let policy = PolicyConfig::new(100, 10, 3).unwrap();
        assert!(validate_trace(&t, &policy).is_empty());
    }

    #[test]
    fn schedule_mismatch_is_reported() {
        let t = trace(&[100, 105], &[1, 1], 150);
        let policy = PolicyConfig::new(100, 10, 3).unwrap();
        let violations = validate_trace(&t, &policy);
        assert_eq!(
            violations,
            vec![TraceViolation::FramesMismatch {
                step: 2,
                expected: 110,
                actual: 105
            }]
        );
        assert_eq!(violations[0].to_string(), "g(2) != 110 (got 105)");
    }

    #[test]
    fn write_overflow_is_reported() {
        let t = trace(&[100, 110], &[1, 4], 150);
        let policy = PolicyConfig::new(100, 10, 3).unwrap();
        let violations = validate_trace(&t, &policy);
        assert_eq!(
            violations,
            vec![TraceViolation::WriteOverflow {
                step: 2,
                wrote: 4,
                limit: 3
            }]
        );
    }

    #[test]
    fn empty_trace_is_a_violation() {
        let t = DecodingTrace::new(vec![], 10, DEFAULT_FRAME_MS);
        let policy = PolicyConfig::new(1, 1, 1).unwrap();
        assert_eq!(validate_trace(&t, &policy), vec![TraceViolation::Empty]);
    }

    #[test]
    fn cumulative_writes_match_output_len() {
        let t = trace(&[4, 6, 8, 10], &[2, 0, 1, 3], 10);
        let q = t.cumulative_writes();
        assert_eq!(q, vec![2, 2, 3, 6]);
        assert!(q.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*q.last().unwrap(), t.output_len());
        assert_eq!(t.hypothesis().len(), t.output_len());
    }

    #[test]
    fn saturated_prefix_stays_saturated() {
        // g saturates at |X| and the schedule keeps it there.
        let policy = PolicyConfig::new(4, 2, 1).unwrap();
        let t = trace(&[4, 6, 8, 10, 10, 10], &[1; 6], 10);
        assert!(validate_trace(&t, &policy).is_empty());
    }

    #[test]
    fn audio_features_validation() {
        assert!(AudioFeatures::new(arr2(&[[0.0f32, 1.0]]), 10.0).is_ok());
        assert!(AudioFeatures::new(arr2(&[[f32::NAN, 1.0]]), 10.0).is_err());
        assert!(AudioFeatures::new(arr2(&[[1.0f32]]), 0.0).is_err());
        assert!(AudioFeatures::new(Array2::zeros((0, 4)), 10.0).is_err());
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_bad_ids() {
        let toks = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(Vocabulary::new(toks(&["a", "a"]), 0, 1, Granularity::Char).is_err());
        assert!(Vocabulary::new(toks(&["a", "b"]), 0, 2, Granularity::Char).is_err());
        let v = Vocabulary::new(toks(&["<s>", "</s>", "a"]), 0, 1, Granularity::Char).unwrap();
        assert_eq!(v.id_of("a"), Some(2));
        assert_eq!(v.token(1), Some("</s>"));
    }

    #[test]
    fn hypothesis_invariants() {
        assert!(Hypothesis::new(vec![1, 2], vec![1, 1]).is_ok());
        assert!(Hypothesis::new(vec![1, 2], vec![2, 1]).is_err());
        assert!(Hypothesis::new(vec![1], vec![1, 2]).is_err());
        let h = Hypothesis::new(vec![5, 1, 3], vec![1, 2, 3]).unwrap();
        assert!(h.validate(Some(1)).is_err()); // eos not final
        assert!(h.validate(Some(3)).is_ok()); // eos final
    }

    #[test]
    fn content_hash_is_stable_and_sensitive() {
        let toks = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let a = Vocabulary::new(toks(&["<s>", "</s>", "a"]), 0, 1, Granularity::Char).unwrap();
        let b = Vocabulary::new(toks(&["<s>", "</s>", "a"]), 0, 1, Granularity::Char).unwrap();
        let c = Vocabulary::new(toks(&["<s>", "</s>", "b"]), 0, 1, Granularity::Char).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
