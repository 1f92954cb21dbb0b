//! Command-line front end: corpus generation, single runs, policy sweeps,
//! trace re-scoring, and a loopback model server.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use simulst::harness::{
    gen_synthetic, load_vocab, run_sweep, score_traces, GenConfig, ModelSource, SweepGrid,
    SweepTable,
};
use simulst::metrics::AlVariant;
use simulst::model::{load_weights, ToyDims};
use simulst::tokenization::{BpeModel, CharWordDelay, Tokenizer};
use simulst::types::Granularity;

#[derive(Parser)]
#[command(
    name = "simulst",
    about = "Streaming decoding and latency evaluation for offline-trained translation models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus plus a seeded toy model.
    Gen(GenArgs),
    /// Decode the corpus once at a single (k, s, N) configuration.
    Run(RunArgs),
    /// Decode the corpus over a (k, s, N) grid and emit the results table.
    Sweep(SweepArgs),
    /// Re-score stored trace files without decoding.
    Score(ScoreArgs),
    /// Serve a model over the bridge protocol (blocks until interrupted).
    Serve(ServeArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Directory the corpus is written into.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    utterances: usize,
    /// Inclusive frame-count range, e.g. 240,400.
    #[arg(long, default_value = "240,400", value_parser = parse_range)]
    len_range: (usize, usize),
    #[arg(long, default_value = "bpe", value_parser = parse_granularity)]
    granularity: Granularity,
    #[arg(long, default_value_t = 10.0)]
    frame_ms: f64,
    #[arg(long, default_value_t = 1.0)]
    max_length_ratio: f64,
    /// Redraw utterances until the reference has at least this many words.
    #[arg(long, default_value_t = 4)]
    min_ref_words: usize,
}

/// Flags shared by every command that loads a model and manifest.
#[derive(Args, Clone)]
struct CorpusArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// SSTM weight container of the toy model.
    #[arg(long)]
    weights: PathBuf,
    /// Vocabulary JSON written by `gen`.
    #[arg(long)]
    vocab: PathBuf,
    /// Merge list, required for BPE vocabularies.
    #[arg(long)]
    merges: Option<PathBuf>,
    /// Decode through a bridge server at this address instead of in-process.
    #[arg(long)]
    bridge: Option<String>,
}

#[derive(Args, Clone)]
struct ScoringArgs {
    #[arg(long, default_value_t = AlVariant::Adaptive)]
    al_variant: AlVariant,
    #[arg(long, default_value_t = CharWordDelay::FollowingSeparator)]
    char_delay: CharWordDelay,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Write the results table here (it always goes to stdout too).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write (al_ms, bleu) plot points here.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    /// Write structured score records (JSON lines) here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write one trace file per configuration into this directory.
    #[arg(long)]
    traces: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config with single-element k/s/N lists; exclusive with the flags.
    #[arg(long, conflicts_with_all = ["manifest", "weights", "vocab", "merges", "bridge", "wait_k", "stride", "write_size"])]
    config: Option<PathBuf>,
    #[command(flatten)]
    corpus: OptionalCorpusArgs,
    #[arg(short = 'k', long = "k")]
    wait_k: Option<usize>,
    #[arg(short = 's', long = "s")]
    stride: Option<usize>,
    #[arg(short = 'N', long = "N")]
    write_size: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    max_length_ratio: f64,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON file carrying every setting below; exclusive with the flags.
    #[arg(long, conflicts_with_all = ["manifest", "weights", "vocab", "merges", "bridge", "wait_k", "stride", "write_size"])]
    config: Option<PathBuf>,
    #[command(flatten)]
    corpus: OptionalCorpusArgs,
    /// Comma-separated k values, e.g. 100,200.
    #[arg(long = "k", value_delimiter = ',')]
    wait_k: Vec<usize>,
    /// Comma-separated s values.
    #[arg(long = "s", value_delimiter = ',')]
    stride: Vec<usize>,
    /// Comma-separated N values.
    #[arg(long = "N", value_delimiter = ',')]
    write_size: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    max_length_ratio: f64,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[command(flatten)]
    output: OutputArgs,
}

/// Same fields as [`CorpusArgs`] but optional, so `--config` can stand in.
#[derive(Args, Clone)]
struct OptionalCorpusArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    merges: Option<PathBuf>,
    #[arg(long)]
    bridge: Option<String>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory of trace files a sweep wrote.
    #[arg(long)]
    traces: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    merges: Option<PathBuf>,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write structured score records (JSON lines) here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7701")]
    addr: String,
}

/// Everything a sweep needs, as a single JSON document.
#[derive(Deserialize)]
struct SweepConfigFile {
    manifest: PathBuf,
    weights: PathBuf,
    vocab: PathBuf,
    #[serde(default)]
    merges: Option<PathBuf>,
    k: Vec<usize>,
    s: Vec<usize>,
    #[serde(rename = "N")]
    n: Vec<usize>,
    #[serde(default)]
    al_variant: AlVariant,
    #[serde(default)]
    char_delay: CharWordDelay,
    #[serde(default = "default_ratio")]
    max_length_ratio: f64,
    #[serde(default)]
    bridge: Option<String>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    plot_data: Option<PathBuf>,
    #[serde(default)]
    report: Option<PathBuf>,
    #[serde(default)]
    traces: Option<PathBuf>,
}

fn default_ratio() -> f64 {
    1.0
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| "expected LO,HI".to_string())?;
    let lo = lo.trim().parse().map_err(|e| format!("bad LO: {e}"))?;
    let hi = hi.trim().parse().map_err(|e| format!("bad HI: {e}"))?;
    Ok((lo, hi))
}

fn parse_granularity(s: &str) -> Result<Granularity, String> {
    match s {
        "char" => Ok(Granularity::Char),
        "bpe" => Ok(Granularity::Bpe),
        other => Err(format!("unknown granularity {other:?}")),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Score(args) => cmd_score(args),
        Command::Serve(args) => cmd_serve(args),
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let cfg = GenConfig {
        seed: args.seed,
        n_utts: args.utterances,
        len_range: args.len_range,
        granularity: args.granularity,
        frame_ms: args.frame_ms,
        dims: ToyDims::default(),
        max_length_ratio: args.max_length_ratio,
        min_ref_words: args.min_ref_words,
    };
    let out = gen_synthetic(&cfg, &args.out_dir).context("corpus generation failed")?;
    println!("manifest: {}", out.manifest_path.display());
    println!("weights:  {}", out.weights_path.display());
    println!("vocab:    {}", out.vocab_path.display());
    if let Some(merges) = &out.merges_path {
        println!("merges:   {}", merges.display());
    }
    println!("utterances: {}", out.manifest.entries().len());
    if out.model_seed != args.seed {
        println!(
            "model seed: {} (seeds {}..{} gave unusable references)",
            out.model_seed, args.seed, out.model_seed
        );
    }
    Ok(())
}

/// Build the tokenizer and model source out of the common flags.
fn open_corpus(args: &CorpusArgs) -> Result<(simulst::harness::Manifest, Tokenizer, ModelSource)> {
    let manifest = simulst::harness::Manifest::load(&args.manifest)
        .with_context(|| format!("loading manifest {}", args.manifest.display()))?;
    let vocab = load_vocab(&args.vocab)?;
    let bpe = match &args.merges {
        Some(path) => Some(BpeModel::from_file(path)?),
        None => None,
    };
    let tokenizer = Tokenizer::new(vocab.clone(), bpe)?;
    let source = match &args.bridge {
        Some(addr) => ModelSource::Remote {
            addr: addr.clone(),
            vocab,
            feature_dim: ToyDims::default().feat_dim,
        },
        None => {
            let model = load_weights(&args.weights, ToyDims::default(), vocab)
                .with_context(|| format!("loading weights {}", args.weights.display()))?;
            ModelSource::InProcess(Arc::new(model))
        }
    };
    Ok((manifest, tokenizer, source))
}

fn emit_table(
    table: &SweepTable,
    out: Option<&Path>,
    plot: Option<&Path>,
    report: Option<&Path>,
) -> Result<()> {
    let tsv = table.to_tsv();
    print!("{tsv}");
    if let Some(path) = out {
        std::fs::write(path, &tsv).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = plot {
        std::fs::write(path, table.plot_data())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = report {
        std::fs::write(path, table.to_report_jsonl())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    if let Some(config_path) = &args.config {
        let body = std::fs::read_to_string(config_path)
            .with_context(|| format!("reading {}", config_path.display()))?;
        let cfg: SweepConfigFile = serde_json::from_str(&body)
            .with_context(|| format!("parsing {}", config_path.display()))?;
        if cfg.k.len() != 1 || cfg.s.len() != 1 || cfg.n.len() != 1 {
            bail!("run takes exactly one configuration; use `sweep` for grids");
        }
        let corpus = CorpusArgs {
            manifest: cfg.manifest,
            weights: cfg.weights,
            vocab: cfg.vocab,
            merges: cfg.merges,
            bridge: cfg.bridge,
        };
        let (manifest, tokenizer, source) = open_corpus(&corpus)?;
        let grid = SweepGrid {
            wait_k: cfg.k,
            stride: cfg.s,
            write_size: cfg.n,
            al_variant: cfg.al_variant,
            char_delay: cfg.char_delay,
            include_offline: false,
        };
        let table = run_sweep(
            &source,
            &manifest,
            &tokenizer,
            &grid,
            cfg.max_length_ratio,
            cfg.traces.as_deref(),
        )?;
        return emit_table(
            &table,
            cfg.out.as_deref(),
            cfg.plot_data.as_deref(),
            cfg.report.as_deref(),
        );
    }

    let corpus = CorpusArgs {
        manifest: args
            .corpus
            .manifest
            .clone()
            .context("--manifest is required without --config")?,
        weights: args
            .corpus
            .weights
            .clone()
            .context("--weights is required without --config")?,
        vocab: args
            .corpus
            .vocab
            .clone()
            .context("--vocab is required without --config")?,
        merges: args.corpus.merges.clone(),
        bridge: args.corpus.bridge.clone(),
    };
    let (wait_k, stride, write_size) = match (args.wait_k, args.stride, args.write_size) {
        (Some(k), Some(s), Some(n)) => (k, s, n),
        _ => bail!("--k, --s and --N are required without --config"),
    };
    let (manifest, tokenizer, source) = open_corpus(&corpus)?;
    let grid = SweepGrid {
        wait_k: vec![wait_k],
        stride: vec![stride],
        write_size: vec![write_size],
        al_variant: args.scoring.al_variant,
        char_delay: args.scoring.char_delay,
        include_offline: false,
    };
    let table = run_sweep(
        &source,
        &manifest,
        &tokenizer,
        &grid,
        args.max_length_ratio,
        args.output.traces.as_deref(),
    )?;
    emit_table(
        &table,
        args.output.out.as_deref(),
        args.output.plot_data.as_deref(),
        args.output.report.as_deref(),
    )
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    if let Some(config_path) = &args.config {
        let body = std::fs::read_to_string(config_path)
            .with_context(|| format!("reading {}", config_path.display()))?;
        let cfg: SweepConfigFile = serde_json::from_str(&body)
            .with_context(|| format!("parsing {}", config_path.display()))?;
        let corpus = CorpusArgs {
            manifest: cfg.manifest,
            weights: cfg.weights,
            vocab: cfg.vocab,
            merges: cfg.merges,
            bridge: cfg.bridge,
        };
        let (manifest, tokenizer, source) = open_corpus(&corpus)?;
        let grid = SweepGrid {
            wait_k: cfg.k,
            stride: cfg.s,
            write_size: cfg.n,
            al_variant: cfg.al_variant,
            char_delay: cfg.char_delay,
            include_offline: true,
        };
        let table = run_sweep(
            &source,
            &manifest,
            &tokenizer,
            &grid,
            cfg.max_length_ratio,
            cfg.traces.as_deref(),
        )?;
        return emit_table(
            &table,
            cfg.out.as_deref(),
            cfg.plot_data.as_deref(),
            cfg.report.as_deref(),
        );
    }

    let corpus = CorpusArgs {
        manifest: args
            .corpus
            .manifest
            .clone()
            .context("--manifest is required without --config")?,
        weights: args
            .corpus
            .weights
            .clone()
            .context("--weights is required without --config")?,
        vocab: args
            .corpus
            .vocab
            .clone()
            .context("--vocab is required without --config")?,
        merges: args.corpus.merges.clone(),
        bridge: args.corpus.bridge.clone(),
    };
    if args.wait_k.is_empty() || args.stride.is_empty() || args.write_size.is_empty() {
        bail!("--k, --s and --N lists are required without --config");
    }
    let (manifest, tokenizer, source) = open_corpus(&corpus)?;
    let grid = SweepGrid {
        wait_k: args.wait_k,
        stride: args.stride,
        write_size: args.write_size,
        al_variant: args.scoring.al_variant,
        char_delay: args.scoring.char_delay,
        include_offline: true,
    };
    let table = run_sweep(
        &source,
        &manifest,
        &tokenizer,
        &grid,
        args.max_length_ratio,
        args.output.traces.as_deref(),
    )?;
    emit_table(
        &table,
        args.output.out.as_deref(),
        args.output.plot_data.as_deref(),
        args.output.report.as_deref(),
    )
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let manifest = simulst::harness::Manifest::load(&args.manifest)?;
    let vocab = load_vocab(&args.vocab)?;
    let bpe = match &args.merges {
        Some(path) => Some(BpeModel::from_file(path)?),
        None => None,
    };
    let tokenizer = Tokenizer::new(vocab, bpe)?;
    let table = score_traces(
        &args.traces,
        &manifest,
        &tokenizer,
        args.scoring.al_variant,
        args.scoring.char_delay,
    )?;
    emit_table(&table, args.out.as_deref(), None, args.report.as_deref())
}

fn cmd_serve(args: ServeArgs) -> Result<()> {
    let vocab = load_vocab(&args.vocab)?;
    let model = load_weights(&args.weights, ToyDims::default(), vocab)
        .with_context(|| format!("loading weights {}", args.weights.display()))?;
    let listener = std::net::TcpListener::bind(&args.addr)
        .with_context(|| format!("binding {}", args.addr))?;
    eprintln!("serving on {}", listener.local_addr()?);
    simulst::bridge::serve_listener(Arc::new(model), listener)?;
    Ok(())
}
