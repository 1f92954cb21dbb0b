//! The online decoding loop and the offline greedy baseline.
//!
//! Per step `t` the engine reads up to `g(t) = min(k + (t-1)*s, |X|)` source
//! frames, re-encodes that prefix from scratch (bidirectional encoders make
//! earlier states depend on later frames), and greedily decodes at most `N`
//! tokens from the cached decoder state of the last committed token.
//!
//! End-of-sequence handling: if `</s>` is predicted while the source is only
//! partially read, the tokens preceding it stay committed (possibly none,
//! giving `w_t = 0`), the `</s>` and its decoder state are discarded, and
//! reading continues. A `</s>` predicted once the source is fully read ends
//! the utterance. Independently, the output is capped at
//! `floor(max_length_ratio * ceil(|X|/4))` content tokens, checked before
//! each emission; `</s>` never counts toward the cap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::policy::Schedule;
use crate::types::{AudioFeatures, DecodingTrace, EngineConfig, Hypothesis, TokenId, TraceStep};

/// Why a decoding session ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `</s>` was predicted after the whole source had been read.
    EosAfterFullRead,
    /// The output buffer reached the configured length cap.
    MaxLength,
}

/// Outcome of one online decoding session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineResult {
    pub hypothesis: Hypothesis,
    pub trace: DecodingTrace,
    pub stop_reason: StopReason,
}

/// Progress salvaged from a decoding session that failed mid-flight.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialDecode {
    pub hypothesis: Hypothesis,
    pub steps: Vec<TraceStep>,
    pub src_len: usize,
    pub frame_ms: f64,
}

/// Content-token cap: `floor(ratio * ceil(|X|/4))`.
pub fn max_output_tokens(max_length_ratio: f64, src_len: usize) -> usize {
    (max_length_ratio * src_len.div_ceil(4) as f64).floor() as usize
}

struct Session {
    token_ids: Vec<TokenId>,
    emitted_at_step: Vec<usize>,
    steps: Vec<TraceStep>,
    src_len: usize,
    frame_ms: f64,
}

impl Session {
    fn hypothesis(&self) -> Hypothesis {
        Hypothesis {
            token_ids: self.token_ids.clone(),
            emitted_at_step: self.emitted_at_step.clone(),
        }
    }

    /// Wrap a model failure, preserving everything committed so far plus the
    /// in-flight step.
    fn abort(mut self, in_flight: Option<TraceStep>, source: Error) -> Error {
        if let Some(step) = in_flight {
            self.steps.push(step);
        }
        Error::DecodeAborted {
            source: Box::new(source),
            partial: Box::new(PartialDecode {
                hypothesis: self.hypothesis(),
                steps: self.steps,
                src_len: self.src_len,
                frame_ms: self.frame_ms,
            }),
        }
    }

    fn finish(self, stop_reason: StopReason) -> OnlineResult {
        OnlineResult {
            hypothesis: self.hypothesis(),
            trace: DecodingTrace::new(self.steps, self.src_len, self.frame_ms),
            stop_reason,
        }
    }
}

/// Decode one utterance online under the deterministic schedule.
pub fn online_decode<M: Model>(
    model: &M,
    features: &AudioFeatures,
    cfg: &EngineConfig,
) -> Result<OnlineResult> {
    if features.feature_dim() != model.feature_dim() {
        return Err(Error::Config(format!(
            "features have dimension {}, model expects {}",
            features.feature_dim(),
            model.feature_dim()
        )));
    }
    cfg.policy.validate()?;
    let src_len = features.num_frames();
    let schedule = Schedule::new(cfg.policy, src_len)?;
    let max_tokens = max_output_tokens(cfg.max_length_ratio, src_len);
    let vocab = model.vocabulary();
    let (bos, eos) = (vocab.bos_id(), vocab.eos_id());

    let mut session = Session {
        token_ids: Vec::new(),
        emitted_at_step: Vec::new(),
        steps: Vec::new(),
        src_len,
        frame_ms: features.frame_ms(),
    };

    let mut state = match model.init_decoder_state() {
        Ok(s) => s,
        Err(e) => return Err(session.abort(None, e)),
    };
    let mut last_token = bos;
    // Cached encoding tagged with the prefix length it covers. Before
    // saturation the prefix grows every step, so this re-encodes; once
    // g(t) = |X| the same encoding is reused for the rest of the utterance.
    let mut encoding: Option<(usize, M::Enc)> = None;

    let mut t = 1;
    loop {
        let frames = schedule.frames_at_step(t)?;
        let mut in_flight = TraceStep {
            step: t,
            frames_read: frames,
            emitted: Vec::new(),
        };

        if !matches!(&encoding, Some((covered, _)) if *covered == frames) {
            let enc = match model.encode(features.prefix(frames)) {
                Ok(enc) => enc,
                Err(e) => return Err(session.abort(Some(in_flight), e)),
            };
            encoding = Some((frames, enc));
        }
        let enc = &encoding.as_ref().expect("encoding present").1;

        let mut stop = None;
        for _ in 0..cfg.policy.write_size {
            if session.token_ids.len() >= max_tokens {
                stop = Some(StopReason::MaxLength);
                break;
            }
            let pred = match model.decode_step(enc, &state, last_token) {
                Ok(p) => p,
                Err(e) => return Err(session.abort(Some(in_flight), e)),
            };
            if pred.token == eos {
                if frames == src_len {
                    stop = Some(StopReason::EosAfterFullRead);
                }
                // Early eos: discard the prediction and its state, keep the
                // state of the last committed token, read more source.
                break;
            }
            session.token_ids.push(pred.token);
            session.emitted_at_step.push(t);
            in_flight.emitted.push(pred.token);
            state = pred.state;
            last_token = pred.token;
        }
        // The cap can also be reached by filling the whole step.
        if stop.is_none() && session.token_ids.len() >= max_tokens {
            stop = Some(StopReason::MaxLength);
        }

        session.steps.push(in_flight);
        if let Some(reason) = stop {
            return Ok(session.finish(reason));
        }
        t += 1;
    }
}

/// Greedy decoding with the whole source available, the baseline the online
/// engine degenerates to when `k >= |X|`.
pub fn offline_greedy<M: Model>(
    model: &M,
    features: &AudioFeatures,
    max_length_ratio: f64,
) -> Result<Hypothesis> {
    offline_greedy_full(model, features, max_length_ratio).map(|(hyp, _)| hyp)
}

/// Offline greedy decoding, also reporting why it stopped.
pub fn offline_greedy_full<M: Model>(
    model: &M,
    features: &AudioFeatures,
    max_length_ratio: f64,
) -> Result<(Hypothesis, StopReason)> {
    if features.feature_dim() != model.feature_dim() {
        return Err(Error::Config(format!(
            "features have dimension {}, model expects {}",
            features.feature_dim(),
            model.feature_dim()
        )));
    }
    if max_length_ratio.is_nan() || max_length_ratio <= 0.0 {
        return Err(Error::Argument(format!(
            "max_length_ratio must be positive, got {max_length_ratio}"
        )));
    }
    let max_tokens = max_output_tokens(max_length_ratio, features.num_frames());
    let vocab = model.vocabulary();
    let (bos, eos) = (vocab.bos_id(), vocab.eos_id());

    let mut state = model.init_decoder_state()?;
    let enc = model.encode(features.prefix(features.num_frames()))?;
    let mut tokens = Vec::new();
    let stop = loop {
        if tokens.len() >= max_tokens {
            break StopReason::MaxLength;
        }
        let pred = model.decode_step(&enc, &state, *tokens.last().unwrap_or(&bos))?;
        if pred.token == eos {
            break StopReason::EosAfterFullRead;
        }
        tokens.push(pred.token);
        state = pred.state;
    };
    let emitted_at_step = vec![1; tokens.len()];
    Ok((
        Hypothesis {
            token_ids: tokens,
            emitted_at_step,
        },
        stop,
    ))
}

/// One line of a trace file: the utterance id plus the full decoding trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: String,
    pub src_len: usize,
    pub frame_ms: f64,
    pub steps: Vec<TraceStep>,
    pub stop_reason: StopReason,
}

impl TraceRecord {
    pub fn from_result(id: impl Into<String>, result: &OnlineResult) -> Self {
        Self {
            id: id.into(),
            src_len: result.trace.src_len,
            frame_ms: result.trace.frame_ms,
            steps: result.trace.steps.clone(),
            stop_reason: result.stop_reason,
        }
    }

    pub fn trace(&self) -> DecodingTrace {
        DecodingTrace::new(self.steps.clone(), self.src_len, self.frame_ms)
    }

    pub fn hypothesis(&self) -> Hypothesis {
        self.trace().hypothesis()
    }
}

/// Serialize trace records as line-delimited JSON.
pub fn write_trace_records(
    path: impl AsRef<std::path::Path>,
    records: &[TraceRecord],
) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| Error::io(&display, e))?;
    let mut w = std::io::BufWriter::new(file);
    for record in records {
        let line =
            serde_json::to_string(record).map_err(|e| Error::format(&display, e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(&display, e))?;
    }
    w.flush().map_err(|e| Error::io(&display, e))
}

pub fn read_trace_records(path: impl AsRef<std::path::Path>) -> Result<Vec<TraceRecord>> {
    use std::io::BufRead;
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
    let mut records = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&display, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(&display, format!("line {}: {e}", lineno + 1)))?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_toy_model, Model, Prediction, ToyDims};
    use crate::testutil::{char_vocab, random_features};
    use crate::types::{validate_trace, PolicyConfig, Vocabulary};
    use ndarray::ArrayView2;
    use std::cell::{Cell, RefCell};
    use std::collections::VecDeque;

    fn cfg(k: usize, s: usize, n: usize, ratio: f64) -> EngineConfig {
        EngineConfig::new(ratio, PolicyConfig::new(k, s, n).unwrap()).unwrap()
    }

    /// Plays back a fixed token script, ignoring the inputs. The decoder
    /// state is the list of tokens the engine has accepted, which makes
    /// state-reversion after a discarded eos observable.
    struct ScriptedModel {
        vocab: Vocabulary,
        script: RefCell<VecDeque<TokenId>>,
        states_seen: RefCell<Vec<Vec<TokenId>>>,
    }

    impl ScriptedModel {
        fn new(script: Vec<TokenId>) -> Self {
            Self {
                vocab: char_vocab(),
                script: RefCell::new(script.into()),
                states_seen: RefCell::new(Vec::new()),
            }
        }
    }

    impl Model for ScriptedModel {
        type Enc = usize;
        type State = Vec<TokenId>;

        fn vocabulary(&self) -> &Vocabulary {
            &self.vocab
        }

        fn feature_dim(&self) -> usize {
            16
        }

        fn init_decoder_state(&self) -> crate::error::Result<Vec<TokenId>> {
            Ok(Vec::new())
        }

        fn encode(&self, prefix: ArrayView2<'_, f32>) -> crate::error::Result<usize> {
            Ok(prefix.nrows())
        }

        fn encoding_len(&self, enc: &usize) -> usize {
            enc.div_ceil(4)
        }

        fn decode_step(
            &self,
            _enc: &usize,
            state: &Vec<TokenId>,
            _prev: TokenId,
        ) -> crate::error::Result<Prediction<Vec<TokenId>>> {
            self.states_seen.borrow_mut().push(state.clone());
            let token = self
                .script
                .borrow_mut()
                .pop_front()
                .expect("script exhausted");
            let mut next = state.clone();
            next.push(token);
            Ok(Prediction {
                state: next,
                token,
                score: 0.0,
            })
        }
    }

    /// Counts encode/decode calls while delegating to an inner model.
    struct CountingModel<'a, M> {
        inner: &'a M,
        encodes: Cell<usize>,
        decodes: Cell<usize>,
    }

    impl<'a, M> CountingModel<'a, M> {
        fn new(inner: &'a M) -> Self {
            Self {
                inner,
                encodes: Cell::new(0),
                decodes: Cell::new(0),
            }
        }
    }

    impl<M: Model> Model for CountingModel<'_, M> {
        type Enc = M::Enc;
        type State = M::State;

        fn vocabulary(&self) -> &Vocabulary {
            self.inner.vocabulary()
        }

        fn feature_dim(&self) -> usize {
            self.inner.feature_dim()
        }

        fn init_decoder_state(&self) -> crate::error::Result<M::State> {
            self.inner.init_decoder_state()
        }

        fn encode(&self, prefix: ArrayView2<'_, f32>) -> crate::error::Result<M::Enc> {
            self.encodes.set(self.encodes.get() + 1);
            self.inner.encode(prefix)
        }

        fn encoding_len(&self, enc: &M::Enc) -> usize {
            self.inner.encoding_len(enc)
        }

        fn decode_step(
            &self,
            enc: &M::Enc,
            state: &M::State,
            prev: TokenId,
        ) -> crate::error::Result<Prediction<M::State>> {
            self.decodes.set(self.decodes.get() + 1);
            self.inner.decode_step(enc, state, prev)
        }
    }

    /// Fails every decode after the first `ok` calls.
    struct FailingModel {
        vocab: Vocabulary,
        remaining: Cell<usize>,
    }

    impl Model for FailingModel {
        type Enc = ();
        type State = ();

        fn vocabulary(&self) -> &Vocabulary {
            &self.vocab
        }

        fn feature_dim(&self) -> usize {
            16
        }

        fn init_decoder_state(&self) -> crate::error::Result<()> {
            Ok(())
        }

        fn encode(&self, _prefix: ArrayView2<'_, f32>) -> crate::error::Result<()> {
            Ok(())
        }

        fn encoding_len(&self, _enc: &()) -> usize {
            0
        }

        fn decode_step(
            &self,
            _enc: &(),
            _state: &(),
            _prev: TokenId,
        ) -> crate::error::Result<Prediction<()>> {
            if self.remaining.get() == 0 {
                return Err(Error::Transport("connection closed".into()));
            }
            self.remaining.set(self.remaining.get() - 1);
            Ok(Prediction {
                state: (),
                token: 3,
                score: 0.0,
            })
        }
    }

    #[test]
    fn degenerate_schedule_equals_offline_greedy() {
        let model = generate_toy_model(42, ToyDims::default(), char_vocab()).unwrap();
        let x = random_features(1, 40, 16);
        let offline = offline_greedy(&model, &x, 1.0).unwrap();
        let online = online_decode(&model, &x, &cfg(40, 7, 2, 1.0)).unwrap();
        assert_eq!(online.hypothesis.token_ids, offline.token_ids);
        assert!(online.trace.steps.iter().all(|s| s.frames_read == 40));
    }

    #[test]
    fn early_eos_commits_nothing_and_reading_continues() {
        let eos = char_vocab().eos_id();
        let model = ScriptedModel::new(vec![eos, 3, eos, 4, eos]);
        let x = random_features(2, 8, 16);
        let result = online_decode(&model, &x, &cfg(4, 2, 2, 10.0)).unwrap();

        let w: Vec<usize> = result.trace.steps.iter().map(|s| s.write_count()).collect();
        assert_eq!(w, vec![0, 1, 1]);
        assert_eq!(result.hypothesis.token_ids, vec![3, 4]);
        assert_eq!(result.hypothesis.emitted_at_step, vec![2, 3]);
        assert_eq!(result.stop_reason, StopReason::EosAfterFullRead);

        // After the discarded eos at step 2, step 3 decodes from the state of
        // the last committed token, not from the state the eos produced.
        let states = model.states_seen.borrow();
        assert_eq!(states[3], vec![3]);
    }

    #[test]
    fn encoder_is_not_rerun_after_saturation() {
        let inner = generate_toy_model(42, ToyDims::default(), char_vocab()).unwrap();
        let model = CountingModel::new(&inner);
        let x = random_features(3, 40, 16);
        let engine_cfg = cfg(8, 4, 1, 1.0);
        let result = online_decode(&model, &x, &engine_cfg).unwrap();

        let cutoff = Schedule::new(engine_cfg.policy, 40).unwrap().cutoff_step();
        assert_eq!(model.encodes.get(), cutoff);
        assert!(result.trace.steps.len() >= cutoff);
    }

    #[test]
    fn max_length_threshold_caps_the_output() {
        assert_eq!(max_output_tokens(0.25, 40), 2);
        assert_eq!(max_output_tokens(1.0, 40), 10);

        // A model that never produces eos (script of plain tokens).
        let model = ScriptedModel::new(vec![3; 64]);
        let x = random_features(4, 40, 16);
        let result = online_decode(&model, &x, &cfg(100, 10, 2, 0.25)).unwrap();
        assert_eq!(result.stop_reason, StopReason::MaxLength);
        assert!(result.hypothesis.len() <= 2);
        assert_eq!(result.hypothesis.len(), 2);
    }

    #[test]
    fn eos_first_gives_empty_offline_hypothesis() {
        let eos = char_vocab().eos_id();
        let model = ScriptedModel::new(vec![eos]);
        let x = random_features(5, 40, 16);
        let hyp = offline_greedy(&model, &x, 1.0).unwrap();
        assert!(hyp.is_empty());
    }

    #[test]
    fn rerunning_is_bit_deterministic() {
        let model = generate_toy_model(42, ToyDims::default(), char_vocab()).unwrap();
        let x = random_features(6, 40, 16);
        let a = online_decode(&model, &x, &cfg(8, 4, 2, 1.0)).unwrap();
        let b = online_decode(&model, &x, &cfg(8, 4, 2, 1.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn produced_traces_validate_against_the_policy() {
        let model = generate_toy_model(42, ToyDims::default(), char_vocab()).unwrap();
        for (k, s, n) in [(8, 4, 2), (4, 2, 1), (100, 10, 3), (1, 1, 3)] {
            let x = random_features(7, 40, 16);
            let engine_cfg = cfg(k, s, n, 1.0);
            let result = online_decode(&model, &x, &engine_cfg).unwrap();
            let violations = validate_trace(&result.trace, &engine_cfg.policy);
            assert!(violations.is_empty(), "({k},{s},{n}): {violations:?}");
            assert_eq!(result.trace.output_len(), result.hypothesis.len());
        }
    }

    #[test]
    fn post_saturation_steps_emit_full_writes_until_the_stop() {
        let model = ScriptedModel::new(vec![3; 64]);
        let x = random_features(8, 40, 16);
        let result = online_decode(&model, &x, &cfg(4, 2, 3, 1.0)).unwrap();
        let sched = Schedule::new(PolicyConfig::new(4, 2, 3).unwrap(), 40).unwrap();
        let cutoff = sched.cutoff_step();
        let total = result.hypothesis.len();
        assert_eq!(total, 10); // floor(1.0 * ceil(40/4))
        let mut remaining = total
            - result
                .trace
                .steps
                .iter()
                .take_while(|s| s.step < cutoff)
                .map(TraceStep::write_count)
                .sum::<usize>();
        for step in result.trace.steps.iter().filter(|s| s.step >= cutoff) {
            assert_eq!(step.write_count(), remaining.min(3), "step {}", step.step);
            remaining -= step.write_count();
        }
    }

    #[test]
    fn model_failure_preserves_partial_progress() {
        let model = FailingModel {
            vocab: char_vocab(),
            remaining: Cell::new(3),
        };
        let x = random_features(9, 40, 16);
        match online_decode(&model, &x, &cfg(4, 2, 1, 1.0)) {
            Err(Error::DecodeAborted { partial, .. }) => {
                assert_eq!(partial.hypothesis.token_ids, vec![3, 3, 3]);
                assert_eq!(partial.steps.len(), 4);
                assert_eq!(partial.src_len, 40);
            }
            other => panic!("expected DecodeAborted, got {other:?}"),
        }
    }

    #[test]
    fn trace_records_roundtrip_as_jsonl() {
        let model = generate_toy_model(42, ToyDims::default(), char_vocab()).unwrap();
        let x = random_features(10, 40, 16);
        let result = online_decode(&model, &x, &cfg(8, 4, 2, 1.0)).unwrap();
        let record = TraceRecord::from_result("utt0", &result);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traces.jsonl");
        write_trace_records(&path, std::slice::from_ref(&record)).unwrap();
        let back = read_trace_records(&path).unwrap();
        assert_eq!(back, vec![record.clone()]);
        assert_eq!(record.hypothesis(), result.hypothesis);
        assert_eq!(record.trace(), result.trace);
    }
}
