//! Acceptance suite: one test per criterion, each printing a pass line.
//! Run with: cargo test -p simulst --test acceptance -- --nocapture

use std::sync::{Arc, OnceLock};

use ndarray::Array2;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use simulst::bridge::spawn_server;
use simulst::engine::{offline_greedy_full, StopReason, TraceRecord};
use simulst::harness::{
    gen_synthetic, run_sweep, GenConfig, GenOutput, ModelSource, RowLabel, SweepGrid,
};
use simulst::metrics::{
    al_original, al_weighted, al_word_adaptive, corpus_bleu, utterance_al_ms, AlVariant,
    WordDelaySequence,
};
use simulst::model::{generate_toy_model, DecoderState, LayerState, Model, ToyDims};
use simulst::sstf;
use simulst::tokenization::{BpeModel, CharWordDelay, Tokenizer, CONTINUATION};
use simulst::types::{
    AudioFeatures, DecodingTrace, Granularity, PolicyConfig, TokenId, TraceStep, Vocabulary,
    DEFAULT_FRAME_MS,
};
use simulst::{offline_greedy, online_decode, EngineConfig};

// ---------------------------------------------------------------------------
// shared fixtures
// ---------------------------------------------------------------------------

fn char_vocab() -> Vocabulary {
    let mut tokens: Vec<String> = vec!["<s>".into(), "</s>".into(), " ".into()];
    for c in 'a'..='j' {
        tokens.push(c.to_string());
    }
    Vocabulary::new(tokens, 0, 1, Granularity::Char).unwrap()
}

fn uniform_pm1(rng: &mut ChaCha8Rng) -> f32 {
    let unit = (rng.next_u32() >> 8) as f32 / (1u32 << 24) as f32;
    2.0 * unit - 1.0
}

fn random_features(seed: u64, t: usize, d: usize) -> AudioFeatures {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = Array2::from_shape_fn((t, d), |_| uniform_pm1(&mut rng));
    AudioFeatures::new(frames, DEFAULT_FRAME_MS).unwrap()
}

/// The corpus and sweep shared by the table-protocol and bridge criteria.
struct SweepFixture {
    _dir: tempfile::TempDir,
    out: GenOutput,
    tokenizer: Tokenizer,
    grid: SweepGrid,
    table: simulst::harness::SweepTable,
}

fn full_grid() -> SweepGrid {
    SweepGrid {
        wait_k: vec![100, 200],
        stride: vec![10, 20],
        write_size: vec![1, 2, 3],
        al_variant: AlVariant::Adaptive,
        char_delay: CharWordDelay::FollowingSeparator,
        include_offline: true,
    }
}

fn sweep_fixture() -> &'static SweepFixture {
    static FIXTURE: OnceLock<SweepFixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let out = gen_synthetic(&GenConfig::default(), dir.path()).unwrap();
        let bpe = out
            .merges_path
            .as_ref()
            .map(|p| BpeModel::from_file(p).unwrap());
        let tokenizer = Tokenizer::new(out.model.vocab().clone(), bpe).unwrap();
        let grid = full_grid();
        let source = ModelSource::InProcess(Arc::new(out.model.clone()));
        let table = run_sweep(&source, &out.manifest, &tokenizer, &grid, 1.0, None).unwrap();
        SweepFixture {
            _dir: dir,
            out,
            tokenizer,
            grid,
            table,
        }
    })
}

// ---------------------------------------------------------------------------
// 1. offline equivalence
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_offline_equivalence() {
    let dims = ToyDims {
        feat_dim: 8,
        conv_channels: (2, 2),
        enc_layers: 1,
        enc_width: 8,
        dec_layers: 2,
        dec_width: 8,
        attn_dim: 8,
        embed_dim: 8,
    };
    for i in 0..100u64 {
        let model = generate_toy_model(1000 + i, dims, char_vocab()).unwrap();
        let t = 20 + (i as usize * 7) % 41;
        let x = random_features(2000 + i, t, 8);
        let offline = offline_greedy(&model, &x, 1.0).unwrap();

        // Any k >= |X| must degenerate to the offline result.
        let k = t + (i as usize % 3) * 5;
        let policy = PolicyConfig::new(k, 1 + (i as usize % 4), 1 + (i as usize % 3)).unwrap();
        let cfg = EngineConfig::new(1.0, policy).unwrap();
        let online = online_decode(&model, &x, &cfg).unwrap();

        assert_eq!(
            online.hypothesis.token_ids, offline.token_ids,
            "model {i}: online(k={k} >= |X|={t}) diverged from offline"
        );
        assert!(online.trace.steps.iter().all(|s| s.frames_read == t));
    }
    println!("ACCEPTANCE 1 (offline equivalence, 100 random models): PASS");
}

// ---------------------------------------------------------------------------
// 2. metric oracle equivalence
// ---------------------------------------------------------------------------

fn oracle_step_al(g: &[usize], w: &[usize], src: usize, target: usize, weighted: bool) -> f64 {
    let gamma = target as f64 / src as f64;
    let mut tau = g.len();
    for (i, &gt) in g.iter().enumerate() {
        if gt == src {
            tau = i + 1;
            break;
        }
    }
    let mut total = 0.0;
    for t in 1..=tau {
        let term = g[t - 1] as f64 - (t - 1) as f64 / gamma;
        total += if weighted {
            term * w[t - 1] as f64
        } else {
            term
        };
    }
    total / tau as f64
}

fn oracle_word_al(delays: &[f64], src_ms: f64, rate_words: usize) -> f64 {
    let gamma = rate_words as f64 / src_ms;
    let mut tau = delays.len();
    for (i, &d) in delays.iter().enumerate() {
        if d == src_ms {
            tau = i + 1;
            break;
        }
    }
    let mut total = 0.0;
    for i in 1..=tau {
        total += delays[i - 1] - (i - 1) as f64 / gamma;
    }
    total / tau as f64
}

fn make_trace(g: &[usize], w: &[usize], src: usize) -> DecodingTrace {
    let steps = g
        .iter()
        .zip(w)
        .enumerate()
        .map(|(i, (&frames_read, &wt))| TraceStep {
            step: i + 1,
            frames_read,
            emitted: vec![2; wt],
        })
        .collect();
    DecodingTrace::new(steps, src, DEFAULT_FRAME_MS)
}

/// Schedule-shaped random trace; `unit_writes` forces w_t = 1 everywhere.
fn random_trace(rng: &mut ChaCha8Rng, unit_writes: bool) -> (Vec<usize>, Vec<usize>, usize) {
    let src = 2 + (rng.next_u32() as usize) % 300;
    let k = 1 + (rng.next_u32() as usize) % 150;
    let s = 1 + (rng.next_u32() as usize) % 30;
    let n = 1 + (rng.next_u32() as usize) % 4;
    let mut g = Vec::new();
    let mut t = 1usize;
    loop {
        let gt = (k + (t - 1) * s).min(src);
        g.push(gt);
        if gt == src {
            break;
        }
        t += 1;
    }
    // A quarter of traces stop before reading everything (length-cap stops),
    // exercising the all-steps fallback for the cut-off.
    if rng.next_u32().is_multiple_of(4) && g.len() > 1 {
        let cut = 1 + (rng.next_u32() as usize) % (g.len() - 1);
        g.truncate(cut);
    } else {
        for _ in 0..(rng.next_u32() % 4) {
            g.push(src);
        }
    }
    let w: Vec<usize> = g
        .iter()
        .map(|_| {
            if unit_writes {
                1
            } else {
                (rng.next_u32() as usize) % (n + 1)
            }
        })
        .collect();
    (g, w, src)
}

#[test]
fn criterion_2_metric_oracle_equivalence() {
    let rel_ok = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..1000 {
        let (g, w, src) = random_trace(&mut rng, false);
        let trace = make_trace(&g, &w, src);
        let target = 1 + (rng.next_u32() as usize) % 64;
        let got = al_original(&trace, target).unwrap();
        let want = oracle_step_al(&g, &w, src, target, false);
        assert!(rel_ok(got, want), "original: {got} vs {want}");
        let got = al_weighted(&trace, target).unwrap();
        let want = oracle_step_al(&g, &w, src, target, true);
        assert!(rel_ok(got, want), "weighted: {got} vs {want}");
    }

    for _ in 0..1000 {
        let src_ms = 100.0 + (rng.next_u32() % 5000) as f64;
        let n_words = 1 + (rng.next_u32() as usize) % 20;
        let mut delays: Vec<f64> = (0..n_words)
            .map(|_| (rng.next_u32() % 1_000_000) as f64 / 1_000_000.0 * src_ms)
            .collect();
        delays.sort_by(f64::total_cmp);
        // Some sequences saturate: the tail reads the whole source.
        if rng.next_u32() % 3 == 0 {
            let from = (rng.next_u32() as usize) % n_words;
            for d in delays.iter_mut().skip(from) {
                *d = src_ms;
            }
        }
        let rate = 1 + (rng.next_u32() as usize) % 30;
        let words = WordDelaySequence::new(delays.clone(), src_ms).unwrap();
        let got = al_word_adaptive(&words, rate).unwrap();
        let want = oracle_word_al(&delays, src_ms, rate);
        assert!(rel_ok(got, want), "word: {got} vs {want}");
    }

    // Worked values, reproduced exactly.
    let t = make_trace(&[4, 6, 8, 10], &[1, 1, 1, 2], 10);
    assert_eq!(al_original(&t, 5).unwrap(), 4.0);
    let t = make_trace(&[4, 6, 8, 10], &[2, 2, 2, 2], 10);
    assert_eq!(al_weighted(&t, 8).unwrap(), 10.25);

    println!("ACCEPTANCE 2 (metric oracles on 1000 random traces, worked values exact): PASS");
}

// ---------------------------------------------------------------------------
// 3. weighted form reduces to the original under unit writes
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_unit_weight_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for _ in 0..1000 {
        let (g, w, src) = random_trace(&mut rng, true);
        let trace = make_trace(&g, &w, src);
        let target = 1 + (rng.next_u32() as usize) % 64;
        assert_eq!(
            al_weighted(&trace, target).unwrap(),
            al_original(&trace, target).unwrap(),
        );
    }
    println!("ACCEPTANCE 3 (unit-weight reduction, exact on 1000 traces): PASS");
}

// ---------------------------------------------------------------------------
// 4. full-wait word-level lagging equals the source duration
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_offline_lagging_identity() {
    let dir = tempfile::tempdir().unwrap();
    // The lagging identity needs only non-empty references.
    let cfg = GenConfig {
        seed: 9,
        n_utts: 6,
        len_range: (40, 80),
        min_ref_words: 1,
        ..GenConfig::default()
    };
    let out = gen_synthetic(&cfg, dir.path()).unwrap();
    let bpe = out
        .merges_path
        .as_ref()
        .map(|p| BpeModel::from_file(p).unwrap());
    let tokenizer = Tokenizer::new(out.model.vocab().clone(), bpe).unwrap();

    for entry in out.manifest.entries() {
        let features = sstf::read_features(out.manifest.features_path(entry)).unwrap();

        // Offline decoding recorded as a single full-read step.
        let (hypothesis, stop_reason) =
            offline_greedy_full(&out.model, &features, cfg.max_length_ratio).unwrap();
        let record = TraceRecord {
            id: entry.id.clone(),
            src_len: features.num_frames(),
            frame_ms: features.frame_ms(),
            steps: vec![TraceStep {
                step: 1,
                frames_read: features.num_frames(),
                emitted: hypothesis.token_ids.clone(),
            }],
            stop_reason,
        };
        let al = utterance_al_ms(
            &record.trace(),
            record.stop_reason == StopReason::EosAfterFullRead,
            &tokenizer,
            &entry.reference,
            AlVariant::Adaptive,
            CharWordDelay::FollowingSeparator,
        )
        .unwrap();
        assert_eq!(
            al,
            features.duration_ms(),
            "offline record for {}",
            entry.id
        );

        // A degenerate online schedule (k >= |X|) gives the same identity.
        let policy = PolicyConfig::new(features.num_frames(), 10, 2).unwrap();
        let engine_cfg = EngineConfig::new(1.0, policy).unwrap();
        let result = online_decode(&out.model, &features, &engine_cfg).unwrap();
        let al = utterance_al_ms(
            &result.trace,
            result.stop_reason == StopReason::EosAfterFullRead,
            &tokenizer,
            &entry.reference,
            AlVariant::Adaptive,
            CharWordDelay::FollowingSeparator,
        )
        .unwrap();
        assert_eq!(
            al,
            features.duration_ms(),
            "full-wait trace for {}",
            entry.id
        );
    }
    println!("ACCEPTANCE 4 (full-wait adaptive lagging = source duration, exact): PASS");
}

// ---------------------------------------------------------------------------
// 5. table protocol reproduction
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_table_protocol() {
    let fixture = sweep_fixture();
    let table = &fixture.table;

    // 12 configurations plus the offline row, offline last.
    assert_eq!(table.rows.len(), 13);
    assert_eq!(table.rows.last().unwrap().label, RowLabel::Offline);

    // Rows sorted by lagging ascending.
    let als: Vec<f64> = table
        .rows
        .iter()
        .filter(|r| r.label != RowLabel::Offline)
        .map(|r| r.al_ms)
        .collect();
    assert!(als.windows(2).all(|w| w[0] <= w[1]), "{als:?}");

    // The offline-equivalent configuration scores BLEU 100 on a corpus whose
    // references are its own offline outputs.
    let offline = table.offline_row().unwrap();
    assert_eq!(offline.bleu, 100.0);
    for row in &table.rows {
        assert!(row.bleu <= offline.bleu, "{row:?}");
    }

    // Lagging is non-decreasing in k at fixed (s, N).
    for &s in &fixture.grid.stride {
        for &n in &fixture.grid.write_size {
            let al_at = |k: usize| {
                table
                    .policy_row(PolicyConfig::new(k, s, n).unwrap())
                    .unwrap()
                    .al_ms
            };
            assert!(
                al_at(100) <= al_at(200),
                "AL decreased in k at (s={s}, N={n}): {} vs {}",
                al_at(100),
                al_at(200)
            );
        }
    }

    // A wait larger than every utterance is the offline row in disguise:
    // BLEU 100 and mean lagging equal to the mean source duration.
    let max_frames = fixture
        .out
        .manifest
        .entries()
        .iter()
        .map(|e| {
            sstf::read_features(fixture.out.manifest.features_path(e))
                .unwrap()
                .num_frames()
        })
        .max()
        .unwrap();
    let source = ModelSource::InProcess(Arc::new(fixture.out.model.clone()));
    let degenerate = SweepGrid {
        wait_k: vec![max_frames],
        stride: vec![10],
        write_size: vec![2],
        include_offline: false,
        ..full_grid()
    };
    let degenerate_table = run_sweep(
        &source,
        &fixture.out.manifest,
        &fixture.tokenizer,
        &degenerate,
        1.0,
        None,
    )
    .unwrap();
    let row = &degenerate_table.rows[0];
    assert_eq!(row.bleu, 100.0);
    let mean_duration: f64 = fixture
        .out
        .manifest
        .entries()
        .iter()
        .map(|e| {
            sstf::read_features(fixture.out.manifest.features_path(e))
                .unwrap()
                .duration_ms()
        })
        .sum::<f64>()
        / fixture.out.manifest.entries().len() as f64;
    assert_eq!(row.al_ms, mean_duration);
    assert_eq!(offline.al_ms, mean_duration);

    println!("ACCEPTANCE 5 (12-config sweep + offline row, ordering and ceilings): PASS");
}

// ---------------------------------------------------------------------------
// 6. shape and normalization checks
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_shapes_and_normalization() {
    let model = generate_toy_model(42, ToyDims::default(), char_vocab()).unwrap();
    let x = random_features(64, 64, 16);
    for t in 1usize..=64 {
        let enc = model.encode(x.prefix(t)).unwrap();
        assert_eq!(enc.len(), t.div_ceil(4), "prefix {t}");
    }

    let enc = model.encode(x.prefix(64)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(65);
    for _ in 0..100 {
        let state = DecoderState {
            layers: (0..2)
                .map(|_| LayerState {
                    hidden: ndarray::Array1::from_shape_fn(16, |_| uniform_pm1(&mut rng)),
                    cell: ndarray::Array1::from_shape_fn(16, |_| uniform_pm1(&mut rng)),
                })
                .collect(),
            context: ndarray::Array1::zeros(32),
        };
        let weights = model.attention_weights(&enc, &state);
        assert!((weights.sum() - 1.0).abs() < 1e-6);
    }
    println!("ACCEPTANCE 6 (ceil(T/4) shapes, attention normalization): PASS");
}

// ---------------------------------------------------------------------------
// 7. word-merge correctness and round-trips
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_word_merging_and_roundtrip() {
    // Char fixture: a(t1) b(t1) ␠(t2) c(t3) </s>(t4).
    let char_tok = Tokenizer::new(char_vocab(), None).unwrap();
    let v = char_tok.vocab();
    let timed = vec![
        (v.id_of("a").unwrap(), 1),
        (v.id_of("b").unwrap(), 1),
        (v.id_of(" ").unwrap(), 2),
        (v.id_of("c").unwrap(), 3),
        (v.eos_id(), 4),
    ];
    let words = char_tok
        .word_boundaries(&timed, CharWordDelay::FollowingSeparator)
        .unwrap();
    assert_eq!(words, vec![("ab".to_string(), 2), ("c".to_string(), 4)]);

    // BPE fixture: Hel@@(t1) lo(t2) wor@@(t3) ld(t4).
    let mut tokens: Vec<String> = vec!["<s>".into(), "</s>".into()];
    for unit in ["Hel@@", "lo", "wor@@", "ld"] {
        tokens.push(unit.to_string());
    }
    let bpe_vocab = Vocabulary::new(tokens, 0, 1, Granularity::Bpe).unwrap();
    let bpe_tok = Tokenizer::new(bpe_vocab, Some(BpeModel::new(vec![]))).unwrap();
    let v = bpe_tok.vocab();
    let timed: Vec<(TokenId, usize)> = ["Hel@@", "lo", "wor@@", "ld"]
        .iter()
        .enumerate()
        .map(|(i, unit)| (v.id_of(unit).unwrap(), i + 1))
        .collect();
    let words = bpe_tok
        .word_boundaries(&timed, CharWordDelay::FollowingSeparator)
        .unwrap();
    assert_eq!(
        words,
        vec![("Hello".to_string(), 2), ("world".to_string(), 4)]
    );

    // Single word ending at eos completes at the eos step.
    let v = char_tok.vocab();
    let timed = vec![(v.id_of("d").unwrap(), 2), (v.eos_id(), 7)];
    let words = char_tok
        .word_boundaries(&timed, CharWordDelay::FollowingSeparator)
        .unwrap();
    assert_eq!(words, vec![("d".to_string(), 7)]);

    // Round-trips: 1000 random strings per granularity.
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let alphabet: Vec<char> = " abcdefghij".chars().collect();
    for _ in 0..1000 {
        let len = 1 + (rng.next_u32() as usize) % 24;
        let text: String = (0..len)
            .map(|_| alphabet[(rng.next_u32() as usize) % alphabet.len()])
            .collect();
        let ids = char_tok.tokenize(&text).unwrap();
        assert_eq!(char_tok.detokenize(&ids).unwrap(), text);
    }

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
    let vocab = Vocabulary::new(tokens, 0, 1, Granularity::Bpe).unwrap();
    let bpe_tok = Tokenizer::new(vocab, Some(BpeModel::new(merges))).unwrap();
    let letters: Vec<char> = "abcdef".chars().collect();
    for _ in 0..1000 {
        let n_words = 1 + (rng.next_u32() as usize) % 5;
        let text = (0..n_words)
            .map(|_| {
                let len = 1 + (rng.next_u32() as usize) % 7;
                (0..len)
                    .map(|_| letters[(rng.next_u32() as usize) % letters.len()])
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join(" ");
        let ids = bpe_tok.tokenize(&text).unwrap();
        assert_eq!(bpe_tok.detokenize(&ids).unwrap(), text);
    }

    println!("ACCEPTANCE 7 (word merging fixtures, 1000-string round-trips): PASS");
}

// ---------------------------------------------------------------------------
// 8. bridge transparency
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_bridge_transparency() {
    let fixture = sweep_fixture();
    let addr = spawn_server(Arc::new(fixture.out.model.clone())).unwrap();
    let source = ModelSource::Remote {
        addr: addr.to_string(),
        vocab: fixture.out.model.vocab().clone(),
        feature_dim: fixture.out.model.dims().feat_dim,
    };
    let remote_table = run_sweep(
        &source,
        &fixture.out.manifest,
        &fixture.tokenizer,
        &fixture.grid,
        1.0,
        None,
    )
    .unwrap();

    assert_eq!(remote_table, fixture.table);
    assert_eq!(remote_table.to_tsv(), fixture.table.to_tsv());
    assert_eq!(remote_table.plot_data(), fixture.table.plot_data());
    println!("ACCEPTANCE 8 (loopback sweep bit-identical to in-process): PASS");
}

// ---------------------------------------------------------------------------
// 9. BLEU sanity
// ---------------------------------------------------------------------------

/// Second, structurally different BLEU implementation: string-keyed n-gram
/// maps, product-then-root geometric mean.
fn oracle_bleu(hypotheses: &[String], references: &[String]) -> f64 {
    let mut correct = [0f64; 4];
    let mut total = [0f64; 4];
    let mut hyp_len = 0f64;
    let mut ref_len = 0f64;
    for (h, r) in hypotheses.iter().zip(references) {
        let hw: Vec<&str> = h.split_whitespace().collect();
        let rw: Vec<&str> = r.split_whitespace().collect();
        hyp_len += hw.len() as f64;
        ref_len += rw.len() as f64;
        for n in 1..=4usize {
            use std::collections::BTreeMap;
            let grams = |ws: &[&str]| -> BTreeMap<String, f64> {
                let mut m = BTreeMap::new();
                if ws.len() >= n {
                    for i in 0..=(ws.len() - n) {
                        *m.entry(ws[i..i + n].join("\u{1}")).or_insert(0.0) += 1.0;
                    }
                }
                m
            };
            let hg = grams(&hw);
            let rg = grams(&rw);
            for (gram, count) in hg {
                total[n - 1] += count;
                let clip = rg.get(&gram).copied().unwrap_or(0.0);
                correct[n - 1] += count.min(clip);
            }
        }
    }
    if hyp_len == 0.0 {
        return 0.0;
    }
    let mut product = 1.0f64;
    for n in 0..4 {
        if total[n] == 0.0 || correct[n] == 0.0 {
            return 0.0;
        }
        product *= correct[n] / total[n];
    }
    let bp = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len / hyp_len).exp()
    };
    100.0 * bp * product.powf(0.25)
}

#[test]
fn criterion_9_bleu_sanity() {
    let corpus: Vec<String> = vec![
        "the quick brown fox jumps over the lazy dog".into(),
        "one two three four five six".into(),
        "short one".into(),
    ];
    assert_eq!(corpus_bleu(&corpus, &corpus).unwrap(), 100.0);

    // 50 random pairs against the independent restatement.
    let pool = ["da", "ne", "lo", "mi", "ra", "to", "ka", "su", "ve", "or"];
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    let sentence = |rng: &mut ChaCha8Rng| -> String {
        let len = 3 + (rng.next_u32() as usize) % 10;
        (0..len)
            .map(|_| pool[(rng.next_u32() as usize) % pool.len()])
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for i in 0..50 {
        let r = sentence(&mut rng);
        let h = if i % 2 == 0 {
            // Perturbed copy: drop or duplicate one word.
            let mut words: Vec<&str> = r.split_whitespace().collect();
            let at = (rng.next_u32() as usize) % words.len();
            if rng.next_u32() % 2 == 0 && words.len() > 1 {
                words.remove(at);
            } else {
                let w = words[at];
                words.insert(at, w);
            }
            words.join(" ")
        } else {
            sentence(&mut rng)
        };
        hyps.push(h);
        refs.push(r);
    }
    let got = corpus_bleu(&hyps, &refs).unwrap();
    let want = oracle_bleu(&hyps, &refs);
    assert!((got - want).abs() <= 1e-6, "bleu {got} vs oracle {want}");
    assert!(got > 0.0, "perturbed copies should overlap");

    println!("ACCEPTANCE 9 (BLEU identity and oracle agreement): PASS");
}
