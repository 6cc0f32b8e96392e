//! Command-line surface: seven subcommands covering the whole pipeline
//! (process → train → encode → search → merge → mine-hn → eval).
//!
//! Exit codes: 0 success, 2 usage error, 1 runtime failure. Output
//! artifacts are staged to a sibling `.tmp` file and renamed into place on
//! success, so a nonzero exit never leaves a partial artifact behind.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use deskret_core::data::{
    tokenize_corpus_record, tokenize_query_record, tokenize_train_record, Schema,
};
use deskret_core::embed::EmbeddingShard;
use deskret_core::index::{self, Index, IndexSpec, SearchResult};
use deskret_core::metrics::{self, CorpusTextMap, QrelSet, Run};
use deskret_core::mining::{mine_hard_negatives, CorpusMap};
use deskret_core::model::{self, EncoderConfig, EncoderParams, Mode, Pooler, Side};
use deskret_core::optim::OptimizerKind;
use deskret_core::sharding::shard_range;
use deskret_core::tokenizer::{
    TokenizerConfig, DEFAULT_PASSAGE_MAX_LEN, DEFAULT_QUERY_MAX_LEN, DEFAULT_VOCAB_SIZE,
};
use deskret_core::trainer::{self, train, TrainConfig};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::embfile::{read_shard, write_shard};
use crate::error::{Error, Result};
use crate::globpat;
use crate::jsonl;
use crate::prefetch::PrefetchSource;
use crate::qrels;
use crate::runfile::{read_run, write_run};
use crate::store::{write_store, StoreKind, StoreRecord, StoreSource, TokenStore};

#[derive(Parser)]
#[command(
    name = "deskret",
    version,
    about = "Desk-scale dense retrieval: tokenize, train, encode, search, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tokenize a JSONL file into a token store
    Process(ProcessArgs),
    /// Train a bi-encoder on a training store
    Train(TrainArgs),
    /// Encode a corpus or query store into an embedding shard
    Encode(EncodeArgs),
    /// Search passage shards with an encoded query shard
    Search(SearchArgs),
    /// Merge per-shard run files into one run
    Merge(MergeArgs),
    /// Mine hard negatives from a run into augmented training data
    MineHn(MineHnArgs),
    /// Score a run file against relevance judgments
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Train,
    Corpus,
    Queries,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaArg {
    Ir,
    Qa,
}

impl From<SchemaArg> for Schema {
    fn from(s: SchemaArg) -> Schema {
        match s {
            SchemaArg::Ir => Schema::Ir,
            SchemaArg::Qa => Schema::Qa,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Tied,
    Dual,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolerArg {
    Mean,
    First,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Args)]
struct ProcessArgs {
    /// Input JSONL file
    #[arg(long)]
    input: PathBuf,
    /// Record kind contained in the input
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Training-data schema (qa validates and keeps answers)
    #[arg(long, value_enum, default_value = "ir")]
    schema: SchemaArg,
    /// Hashing-tokenizer vocabulary size (ids 0-2 are reserved)
    #[arg(long, default_value_t = DEFAULT_VOCAB_SIZE, value_parser = parse_vocab_size)]
    vocab_size: u32,
    /// Maximum query length in tokens
    #[arg(long, default_value_t = DEFAULT_QUERY_MAX_LEN, value_parser = parse_at_least_one)]
    query_max_len: usize,
    /// Maximum passage length in tokens (title and text combined)
    #[arg(long, default_value_t = DEFAULT_PASSAGE_MAX_LEN, value_parser = parse_at_least_one)]
    passage_max_len: usize,
    /// Output store file
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training store produced by `process --kind train`
    #[arg(long)]
    store: PathBuf,
    /// Weight sharing between the query and passage encoders
    #[arg(long, value_enum, default_value = "tied")]
    mode: ModeArg,
    /// Token-embedding pooling strategy
    #[arg(long, value_enum, default_value = "mean")]
    pooler: PoolerArg,
    /// Token embedding width
    #[arg(long, default_value_t = model::DEFAULT_D_EMBED, value_parser = parse_at_least_one)]
    d_embed: usize,
    /// Output embedding width
    #[arg(long, default_value_t = model::DEFAULT_D_OUT, value_parser = parse_at_least_one)]
    d_out: usize,
    /// Queries per training step
    #[arg(long, default_value_t = trainer::DEFAULT_BATCH_SIZE, value_parser = parse_at_least_one)]
    batch_size: usize,
    /// Passages per query (one positive plus n-1 negatives)
    #[arg(long, default_value_t = trainer::DEFAULT_N_PASSAGES, value_parser = parse_at_least_one)]
    n_passages: usize,
    /// Training epochs
    #[arg(long, default_value_t = trainer::DEFAULT_EPOCHS)]
    epochs: usize,
    /// Optimizer step size
    #[arg(long, default_value_t = deskret_core::optim::DEFAULT_LEARNING_RATE)]
    learning_rate: f64,
    /// Optimizer
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerArg,
    /// Softmax temperature for the contrastive loss
    #[arg(long, default_value_t = deskret_core::loss::DEFAULT_TEMPERATURE)]
    temperature: f64,
    /// Two-pass gradient caching (same result as plain training, less
    /// peak activation memory)
    #[arg(long)]
    grad_cache: bool,
    /// Chunk size for gradient caching; must divide batch-size
    #[arg(long, default_value_t = trainer::DEFAULT_BATCH_SIZE, value_parser = parse_at_least_one)]
    sub_batch_size: usize,
    /// Simulated cooperating workers sharing in-batch negatives; must
    /// divide batch-size
    #[arg(long, default_value_t = 1, value_parser = parse_at_least_one)]
    num_workers: usize,
    /// Master random seed (init, shuffling, negative resampling)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Load examples inline instead of through the background prefetcher
    #[arg(long)]
    no_prefetch: bool,
    /// Directory for model.ckpt and loss.csv
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    /// Trained model checkpoint
    #[arg(long)]
    checkpoint: PathBuf,
    /// Corpus or query store to encode (side inferred from store kind)
    #[arg(long)]
    store: PathBuf,
    /// Total number of shards the store is split into
    #[arg(long, default_value_t = 1, value_parser = parse_at_least_one)]
    num_shards: usize,
    /// Which shard this invocation encodes (0-based)
    #[arg(long, default_value_t = 0)]
    shard_index: usize,
    /// Output embedding shard file
    #[arg(long)]
    output: PathBuf,
}

fn parse_at_least_one(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        Ok(_) => Err("must be >= 1".into()),
        Err(_) => Err(format!("not a positive integer: {s}")),
    }
}

fn parse_vocab_size(s: &str) -> std::result::Result<u32, String> {
    match s.parse::<u32>() {
        Ok(v) if v >= 4 => Ok(v),
        Ok(_) => Err("must be >= 4 (ids 0-2 are reserved)".into()),
        Err(_) => Err(format!("not a positive integer: {s}")),
    }
}

fn parse_search_batch_size(s: &str) -> std::result::Result<i64, String> {
    let v: i64 = s.parse().map_err(|_| format!("not an integer: {s}"))?;
    if v == -1 || v >= 1 {
        Ok(v)
    } else {
        Err("must be -1 (all queries in one pass) or >= 1".into())
    }
}

#[derive(Args)]
struct SearchArgs {
    /// Encoded query shard
    #[arg(long)]
    queries: PathBuf,
    /// Passage shard file or glob pattern (wildcards in the file name)
    #[arg(long)]
    passages: String,
    /// Index to build: Flat | HNSW<M>[,ef=<efSearch>] | PQ<m>[x<nbits>]
    #[arg(long, default_value = "Flat")]
    index_spec: String,
    /// Hits retained per query
    #[arg(long, default_value_t = index::DEFAULT_DEPTH, value_parser = parse_at_least_one)]
    depth: usize,
    /// Queries per search call; -1 passes all queries in one call
    #[arg(long, default_value_t = index::DEFAULT_BATCH_SIZE, value_parser = parse_search_batch_size, allow_hyphen_values = true)]
    batch_size: i64,
    /// Master random seed (HNSW level draws, PQ k-means)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output run file
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct MergeArgs {
    /// Per-shard run files over the same queries
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Hits retained per query after merging
    #[arg(long, default_value_t = index::DEFAULT_DEPTH, value_parser = parse_at_least_one)]
    depth: usize,
    /// Output run file
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct MineHnArgs {
    /// Run file from a first-round retriever
    #[arg(long)]
    run: PathBuf,
    /// Original training JSONL
    #[arg(long)]
    train: PathBuf,
    /// Corpus JSONL supplying passage titles and texts
    #[arg(long)]
    corpus: PathBuf,
    /// Training-data schema; qa also filters answer-matching passages
    #[arg(long, value_enum, default_value = "ir")]
    schema: SchemaArg,
    /// Hits considered per query
    #[arg(long, default_value_t = index::DEFAULT_DEPTH, value_parser = parse_at_least_one)]
    depth: usize,
    /// Mined negatives appended per query
    #[arg(long, default_value_t = 4)]
    per_query: usize,
    /// Output training JSONL with augmented negatives
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Run file to score
    #[arg(long)]
    run: PathBuf,
    /// Relevance judgments: TSV query_id<TAB>docid (ir) or JSONL with
    /// answers (qa)
    #[arg(long)]
    qrels: PathBuf,
    /// Judgment schema
    #[arg(long, value_enum, default_value = "ir")]
    schema: SchemaArg,
    /// Corpus store with passage texts; required with --schema qa
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Cutoffs for accuracy (and recall in ir mode)
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20,100", value_parser = parse_at_least_one)]
    ks: Vec<usize>,
    /// Rank cutoff for MRR
    #[arg(long, default_value_t = 10, value_parser = parse_at_least_one)]
    mrr_cutoff: usize,
    /// Also write the metric report to a file
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Parse the command line and run it; returns the process exit code.
/// Usage errors (and --help/--version) exit directly from clap.
pub fn main_impl() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Process(a) => cmd_process(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Encode(a) => cmd_encode(a),
        Cmd::Search(a) => cmd_search(a),
        Cmd::Merge(a) => cmd_merge(a),
        Cmd::MineHn(a) => cmd_mine_hn(a),
        Cmd::Eval(a) => cmd_eval(a),
    }
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Write through a sibling temp file and rename into place, removing the
/// temp file on any failure.
fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&Path) -> Result<()>,
{
    let tmp = temp_path(path);
    let staged = write(&tmp).and_then(|()| std::fs::rename(&tmp, path).map_err(Error::Io));
    if staged.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    staged.map_err(|e| e.at_path(path))
}

fn cmd_process(a: ProcessArgs) -> Result<()> {
    let query_cfg = TokenizerConfig { vocab_size: a.vocab_size, max_len: a.query_max_len };
    let passage_cfg = TokenizerConfig { vocab_size: a.vocab_size, max_len: a.passage_max_len };
    let records: Vec<StoreRecord> = match a.kind {
        KindArg::Train => jsonl::read_train_records(&a.input, a.schema.into())?
            .iter()
            .map(|r| StoreRecord::Train(tokenize_train_record(r, query_cfg, passage_cfg)))
            .collect(),
        KindArg::Corpus => jsonl::read_corpus_records(&a.input)?
            .iter()
            .map(|r| StoreRecord::Corpus(tokenize_corpus_record(r, passage_cfg)))
            .collect(),
        KindArg::Queries => jsonl::read_query_records(&a.input)?
            .iter()
            .map(|r| StoreRecord::Query(tokenize_query_record(r, query_cfg)))
            .collect(),
    };
    let n = records.len();
    write_atomic(&a.output, |tmp| write_store(records, a.vocab_size, tmp))?;
    println!("processed {} records into {}", n, a.output.display());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = TrainConfig {
        batch_size: a.batch_size,
        n_passages: a.n_passages,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        optimizer: match a.optimizer {
            OptimizerArg::Adam => OptimizerKind::adam_default(),
            OptimizerArg::Sgd => OptimizerKind::Sgd,
        },
        temperature: a.temperature,
        grad_cache: a.grad_cache,
        sub_batch_size: a.sub_batch_size,
        num_workers: a.num_workers,
        seed: a.seed,
    };
    cfg.validate()?;

    let store = Arc::new(TokenStore::open(&a.store)?);
    if store.kind()? != Some(StoreKind::Train) {
        return Err(Error::Format(format!(
            "{} does not contain training records",
            a.store.display()
        )));
    }
    let ecfg = EncoderConfig {
        mode: match a.mode {
            ModeArg::Tied => Mode::Tied,
            ModeArg::Dual => Mode::Dual,
        },
        pooler: match a.pooler {
            PoolerArg::Mean => Pooler::Mean,
            PoolerArg::First => Pooler::FirstToken,
        },
        vocab_size: store.vocab_size(),
        d_embed: a.d_embed,
        d_out: a.d_out,
    };
    let mut params = EncoderParams::init(ecfg, a.seed);

    let log = if a.no_prefetch {
        let mut src = StoreSource::new(&store);
        train(&mut params, &mut src, &cfg)?
    } else {
        let mut src = PrefetchSource::new(Arc::clone(&store), &cfg);
        train(&mut params, &mut src, &cfg)?
    };
    for (epoch, mean) in trainer::epoch_means(&log).iter().enumerate() {
        eprintln!("epoch {epoch}: mean loss {mean:.6}");
    }

    std::fs::create_dir_all(&a.output_dir)?;
    let ckpt_path = a.output_dir.join("model.ckpt");
    let log_path = a.output_dir.join("loss.csv");
    write_atomic(&ckpt_path, |tmp| save_checkpoint(&params, tmp))?;
    let logged = write_atomic(&log_path, |tmp| {
        let mut out = std::io::BufWriter::new(std::fs::File::create(tmp)?);
        writeln!(out, "epoch,step,loss")?;
        for entry in &log {
            writeln!(out, "{},{},{}", entry.epoch, entry.step, entry.loss)?;
        }
        out.flush().map_err(Error::Io)
    });
    if logged.is_err() {
        // keep the artifact pair all-or-nothing
        let _ = std::fs::remove_file(&ckpt_path);
        return logged;
    }
    println!(
        "trained {} steps; wrote {} and {}",
        log.len(),
        ckpt_path.display(),
        log_path.display()
    );
    Ok(())
}

fn cmd_encode(a: EncodeArgs) -> Result<()> {
    let params = load_checkpoint(&a.checkpoint)?;
    let store = TokenStore::open(&a.store)?;
    if store.vocab_size() != params.cfg.vocab_size {
        return Err(Error::Format(format!(
            "store vocab size {} does not match checkpoint vocab size {}",
            store.vocab_size(),
            params.cfg.vocab_size
        )));
    }
    let (lo, hi) = shard_range(store.len(), a.num_shards, a.shard_index)?;
    let mut shard = EmbeddingShard::new(params.cfg.d_out);
    for i in lo..hi {
        match store.get(i)? {
            StoreRecord::Corpus(c) => {
                let row = model::encode(&params, &c.tokens, Side::Passage)?;
                shard.push_row(c.docid, &row)?;
            }
            StoreRecord::Query(q) => {
                let row = model::encode(&params, &q.tokens, Side::Query)?;
                shard.push_row(q.query_id, &row)?;
            }
            StoreRecord::Train(_) => {
                return Err(Error::Format(format!(
                    "{} contains training records; encode takes a corpus or query store",
                    a.store.display()
                )))
            }
        }
    }
    let rows = shard.rows();
    write_atomic(&a.output, |tmp| write_shard(&shard, tmp))?;
    println!(
        "encoded rows {lo}..{hi} ({rows} embeddings) into {}",
        a.output.display()
    );
    Ok(())
}

fn shard_queries(shard: &EmbeddingShard) -> Vec<Vec<f32>> {
    (0..shard.rows()).map(|r| shard.row(r).to_vec()).collect()
}

fn cmd_search(a: SearchArgs) -> Result<()> {
    let spec = IndexSpec::parse(&a.index_spec)?;
    let query_shard = read_shard(&a.queries)?;
    let mut passage_shards = Vec::new();
    for path in globpat::expand(&a.passages)? {
        passage_shards.push(read_shard(&path)?);
    }
    let index = Index::build(spec, &passage_shards, a.seed)?;
    let results = index.search(&shard_queries(&query_shard), a.depth, a.batch_size)?;
    let run: Run = query_shard.ids.iter().cloned().zip(results).collect();
    write_atomic(&a.output, |tmp| write_run(&run, tmp))?;
    println!(
        "searched {} queries over {} passages into {}",
        run.len(),
        index.len(),
        a.output.display()
    );
    Ok(())
}

fn cmd_merge(a: MergeArgs) -> Result<()> {
    let mut qids: Option<Vec<String>> = None;
    let mut per_shard: Vec<Vec<SearchResult>> = Vec::new();
    for path in &a.runs {
        let run = read_run(path)?;
        let ids: Vec<String> = run.iter().map(|(q, _)| q.clone()).collect();
        match &qids {
            None => qids = Some(ids),
            Some(expect) if *expect == ids => {}
            Some(_) => {
                return Err(Error::Format(format!(
                    "{} lists different queries than the first run file",
                    path.display()
                )))
            }
        }
        per_shard.push(run.into_iter().map(|(_, hits)| hits).collect());
    }
    let merged = deskret_core::index::merge_shard_results(&per_shard, a.depth)?;
    let run: Run = qids.unwrap_or_default().into_iter().zip(merged).collect();
    write_atomic(&a.output, |tmp| write_run(&run, tmp))?;
    println!(
        "merged {} run files into {}",
        a.runs.len(),
        a.output.display()
    );
    Ok(())
}

fn cmd_mine_hn(a: MineHnArgs) -> Result<()> {
    let run = read_run(&a.run)?;
    let records = jsonl::read_train_records(&a.train, a.schema.into())?;
    let mut corpus = CorpusMap::new();
    for rec in jsonl::read_corpus_records(&a.corpus)? {
        if corpus
            .insert(rec.docid.clone(), (rec.title, rec.text))
            .is_some()
        {
            return Err(Error::Format(format!(
                "duplicate docid {:?} in {}",
                rec.docid,
                a.corpus.display()
            )));
        }
    }
    let (augmented, missing) = mine_hard_negatives(&run, &records, &corpus, a.depth, a.per_query)?;
    write_atomic(&a.output, |tmp| jsonl::write_train_records(&augmented, tmp))?;
    if missing > 0 {
        eprintln!("warning: {missing} queries absent from the run passed through unchanged");
    }
    println!(
        "mined negatives for {} records into {}",
        augmented.len(),
        a.output.display()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let run = read_run(&a.run)?;
    let qrels: QrelSet = match a.schema {
        SchemaArg::Ir => qrels::read_ir_qrels(&a.qrels)?,
        SchemaArg::Qa => qrels::read_qa_qrels(&a.qrels)?,
    };
    let corpus_text: Option<CorpusTextMap> = match (a.schema, &a.corpus) {
        (SchemaArg::Qa, Some(path)) => {
            let store = TokenStore::open(path)?;
            let map: CorpusTextMap = store
                .decode_all_corpus()?
                .into_iter()
                .map(|c| (c.docid, c.raw_text))
                .collect();
            Some(map)
        }
        (SchemaArg::Qa, None) => {
            return Err(Error::Format(
                "--schema qa requires --corpus for answer matching".into(),
            ))
        }
        (SchemaArg::Ir, _) => None,
    };

    let mut ks = a.ks.clone();
    ks.sort_unstable();
    ks.dedup();
    let accuracy = metrics::topk_accuracy(&run, &qrels, corpus_text.as_ref(), &ks)?;
    let mrr = metrics::mrr_at(&run, &qrels, corpus_text.as_ref(), a.mrr_cutoff)?;
    let mut report = String::new();
    for (k, v) in &accuracy {
        report.push_str(&format!("accuracy@{k}\t{v:.6}\n"));
    }
    report.push_str(&format!("mrr@{}\t{mrr:.6}\n", a.mrr_cutoff));
    if !qrels.is_qa() {
        for &k in &ks {
            let r = metrics::recall_at(&run, &qrels, k)?;
            report.push_str(&format!("recall@{k}\t{r:.6}\n"));
        }
    }
    print!("{report}");
    if let Some(path) = &a.output {
        write_atomic(path, |tmp| {
            std::fs::write(tmp, &report).map_err(Error::Io)
        })?;
    }
    Ok(())
}
