use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use premsel::corpus::{filter_premises, load_blacklist, load_corpus, Corpus};
use premsel::encoder::EncoderModel;
use premsel::eval::{
    candidates_for, difficulty_report, error_report, generate_synthetic, recall_at_k, run_tasks, sweep_k,
    write_difficulty, write_errors, write_recall, write_sweep, MepoSelector, NeuralSelector, OracleSelector,
    RandomSelector, RecallOptions, Selector, SyntheticSpec,
};
use premsel::index::SnapshotCache;
use premsel::mepo::{extract_symbols, mepo_select, premise_symbols, MepoConfig};
use premsel::orchestrator::{parse_task_batch, TaskRecord, Variant};
use premsel::server::{resolve_addr, PremiseService, RetrievalClient, RetrieveRequest, SelectorKind, SnapshotUpload};
use premsel::trainer::{train, write_loss_curve, TrainConfig};

#[derive(Parser)]
#[command(name = "premsel", version, about = "Premise selection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the encoder on a corpus.
    Train(TrainArgs),
    /// Symbolic baseline selection for one state.
    Mepo(MepoArgs),
    /// Run the retrieval server.
    Serve(ServeArgs),
    /// Reference client.
    Client {
        #[command(subcommand)]
        command: ClientCommand,
    },
    /// Evaluation reports.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Write a synthetic corpus and task batch.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Names file; listed premises are dropped before use.
    #[arg(long)]
    blacklist: Option<PathBuf>,
}

impl CorpusArgs {
    fn load(&self) -> Result<Corpus> {
        let mut corpus = load_corpus(&self.corpus).with_context(|| format!("loading {}", self.corpus.display()))?;
        if let Some(b) = &self.blacklist {
            corpus.apply_blacklist(load_blacklist(b)?.iter());
        }
        Ok(filter_premises(&corpus))
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 3)]
    negatives: usize,
    #[arg(long, default_value_t = 0.05)]
    temperature: f64,
    #[arg(long, default_value_t = 2e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = premsel::encoder::DEFAULT_DIM)]
    dim: usize,
    /// Loss curve CSV; defaults to `<out>.loss.csv`.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

#[derive(Args)]
struct MepoArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// State id: theorem name, or `theorem:tactic_index`.
    #[arg(long)]
    goal: String,
    #[arg(long, default_value_t = 32)]
    k: usize,
    #[arg(long, default_value_t = 0.6)]
    p: f64,
    #[arg(long, default_value_t = 0.9)]
    c: f64,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    model: PathBuf,
    /// Bind address; falls back to $PREMSEL_ADDR, then 127.0.0.1:8765.
    #[arg(long)]
    addr: Option<String>,
    /// Directory for embedding snapshot files.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ClientCommand {
    /// Query the server for a corpus state.
    Retrieve(RetrieveArgs),
}

#[derive(Args)]
struct RetrieveArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Server base URL; defaults to http://<$PREMSEL_ADDR or 127.0.0.1:8765>.
    #[arg(long)]
    url: Option<String>,
    /// State id in the corpus.
    #[arg(long)]
    state: String,
    #[arg(long, default_value_t = 32)]
    k: usize,
    #[arg(long, value_enum, default_value_t = CliSelector::Neural)]
    selector: CliSelector,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliSelector {
    Neural,
    Mepo,
    Random,
    Oracle,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Defaults to neural when a model is given. Task commands without a
    /// selector use the rankings stored in the task file.
    #[arg(long, value_enum)]
    selector: Option<CliSelector>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TaskEvalArgs {
    #[command(flatten)]
    common: EvalArgs,
    /// JSONL task batch.
    #[arg(long)]
    tasks: PathBuf,
}

#[derive(Subcommand)]
enum EvalCommand {
    Recall {
        #[command(flatten)]
        args: EvalArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,4,8,16,32,64,128")]
        ks: Vec<usize>,
        /// Pool hits over states instead of averaging per state.
        #[arg(long)]
        micro: bool,
    },
    Sweep {
        #[command(flatten)]
        args: TaskEvalArgs,
        #[arg(long, value_enum, default_value = "full")]
        variant: CliVariant,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
        k1: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        k2: Vec<usize>,
    },
    Errors {
        #[command(flatten)]
        args: TaskEvalArgs,
        #[arg(long, value_enum, default_value = "auto")]
        variant: CliVariant,
    },
    Difficulty {
        #[command(flatten)]
        args: TaskEvalArgs,
        #[arg(long, value_enum, default_value = "cumul")]
        variant: CliVariant,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CliVariant {
    Aesop,
    Auto,
    AesopAuto,
    Full,
    Cumul,
}

impl From<CliVariant> for Variant {
    fn from(v: CliVariant) -> Self {
        match v {
            CliVariant::Aesop => Variant::Aesop,
            CliVariant::Auto => Variant::Auto,
            CliVariant::AesopAuto => Variant::AesopAuto,
            CliVariant::Full => Variant::Full,
            CliVariant::Cumul => Variant::Cumul,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    premises: usize,
    #[arg(long, default_value_t = 400)]
    states: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn find_state<'a>(corpus: &'a Corpus, id: &str) -> Result<&'a premsel::corpus::StateRecord> {
    corpus
        .states
        .iter()
        .find(|s| s.id() == id)
        .with_context(|| format!("no state `{id}` in corpus"))
}

fn make_selector(kind: CliSelector, model: Option<&Path>, corpus: &Corpus, seed: u64) -> Result<Box<dyn Selector>> {
    Ok(match kind {
        CliSelector::Neural => {
            let path = model.context("the neural selector needs --model")?;
            Box::new(NeuralSelector::new(EncoderModel::load(path)?, corpus))
        }
        CliSelector::Mepo => Box::new(MepoSelector::new(corpus, MepoConfig::default())),
        CliSelector::Random => Box::new(RandomSelector { seed }),
        CliSelector::Oracle => Box::new(OracleSelector),
    })
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let config = TrainConfig {
        batch_size: a.batch_size,
        negatives_per_pair: a.negatives,
        temperature: a.temperature,
        learning_rate: a.lr,
        steps: a.steps,
        seed: a.seed,
        dim: a.dim,
        ..Default::default()
    };
    let out = train(&corpus, &config)?;
    out.model.save(&a.out)?;
    let csv = a.loss_csv.unwrap_or_else(|| a.out.with_extension("loss.csv"));
    write_loss_curve(&csv, &out.curve)?;
    if let (Some(first), Some(last)) = (out.curve.first(), out.curve.last()) {
        println!(
            "trained {} steps: loss {:.4} -> {:.4}; model {} ({}); curve {}",
            out.curve.len(),
            first.loss,
            last.loss,
            a.out.display(),
            out.model.version(),
            csv.display()
        );
    }
    if out.negative_shortfall > 0 {
        eprintln!("warning: {} requested negatives could not be drawn", out.negative_shortfall);
    }
    Ok(())
}

fn cmd_mepo(a: MepoArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let state = find_state(&corpus, &a.goal)?;
    let pool: Vec<_> = candidates_for(&corpus, state)?
        .into_iter()
        .filter_map(|n| corpus.premise(&n).map(|p| (n.clone(), premise_symbols(&n, &p.signature))))
        .collect();
    let config = MepoConfig {
        p: a.p,
        c: a.c,
        ..Default::default()
    };
    let sel = mepo_select(&extract_symbols(&state.state_text), &pool, &config);
    eprintln!("{} accepted over {} round(s)", sel.accepted.len(), sel.rounds_run);
    for acc in sel.last_k(a.k) {
        println!("{}", serde_json::to_string(acc)?);
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env().add_directive("info".parse()?))
        .init();
    let corpus = a.corpus.load()?;
    let mut service = PremiseService::new(EncoderModel::load(&a.model)?);
    if let Some(dir) = a.cache_dir {
        service = service.with_disk_cache(SnapshotCache::new(dir));
    }
    let id = service.warm_cache(corpus)?;
    let addr = resolve_addr(a.addr.as_deref());
    tracing::info!(snapshot = %id, model = %service.model_version(), "snapshot ready");
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(premsel::server::serve(Arc::new(service), &addr))?;
    Ok(())
}

fn cmd_retrieve(a: RetrieveArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let state = find_state(&corpus, &a.state)?;
    let url = a.url.unwrap_or_else(|| format!("http://{}", resolve_addr(None)));
    let client = RetrievalClient::new(url);
    let health = client.health()?;
    if !health.snapshots.contains(&corpus.snapshot_id) {
        let info = client.upload_snapshot(&SnapshotUpload {
            jsonl: corpus.to_jsonl(),
            blacklist: Vec::new(),
        })?;
        eprintln!("uploaded snapshot {} ({} premises)", info.corpus_snapshot_id, info.premises);
    }
    let mut req = RetrieveRequest::new(state.state_text.clone(), a.k, corpus.snapshot_id.clone());
    req.module = Some(state.module.clone());
    req.decl_index = Some(state.decl_index);
    req.selector = match a.selector {
        CliSelector::Neural => SelectorKind::Neural,
        CliSelector::Mepo => SelectorKind::Mepo,
        other => bail!(
            "the server offers neural and mepo selectors, not {}",
            if other == CliSelector::Random { "random" } else { "oracle" }
        ),
    };
    let resp = client.retrieve(&req)?;
    println!("{}", serde_json::to_string_pretty(&resp)?);
    Ok(())
}

fn load_tasks(path: &Path) -> Result<Vec<TaskRecord>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_task_batch(&text)?)
}

fn task_selector(args: &EvalArgs, corpus: &Corpus) -> Result<Option<Box<dyn Selector>>> {
    let kind = args.selector.or(args.model.as_ref().map(|_| CliSelector::Neural));
    kind.map(|k| make_selector(k, args.model.as_deref(), corpus, args.seed))
        .transpose()
}

fn cmd_eval(command: EvalCommand) -> Result<()> {
    match command {
        EvalCommand::Recall { args, ks, micro } => {
            let corpus = args.corpus.load()?;
            let kind = args.selector.unwrap_or(CliSelector::Neural);
            let sel = make_selector(kind, args.model.as_deref(), &corpus, args.seed)?;
            let report = recall_at_k(sel.as_ref(), &corpus, &ks, RecallOptions { micro })?;
            write_recall(&args.out, &report)?;
            for (k, r) in &report.recall_at_k {
                println!("recall@{k}\t{r:.4}");
            }
        }
        EvalCommand::Sweep { args, variant, k1, k2 } => {
            let corpus = args.common.corpus.load()?;
            let tasks = load_tasks(&args.tasks)?;
            let sel = task_selector(&args.common, &corpus)?;
            let cells = sweep_k(&tasks, Some(&corpus), sel.as_deref(), variant.into(), &k1, &k2);
            write_sweep(&args.common.out, &cells)?;
            for c in &cells {
                println!("k1={}\tk2={}\t{}/{}\t{:.4}", c.k1, c.k2, c.proved, c.total, c.proof_rate);
            }
        }
        EvalCommand::Errors { args, variant } => {
            let corpus = args.common.corpus.load()?;
            let tasks = load_tasks(&args.tasks)?;
            let sel = task_selector(&args.common, &corpus)?;
            let rows = run_tasks(&tasks, Some(&corpus), sel.as_deref());
            let v: Variant = variant.into();
            let fractions = error_report(rows.iter().map(|(_, o)| &o[&v]));
            write_errors(&args.common.out, &fractions)?;
            for (k, f) in &fractions {
                println!("{k}\t{f:.4}");
            }
        }
        EvalCommand::Difficulty { args, variant } => {
            let corpus = args.common.corpus.load()?;
            let tasks = load_tasks(&args.tasks)?;
            let sel = task_selector(&args.common, &corpus)?;
            let rows: Vec<_> = run_tasks(&tasks, Some(&corpus), sel.as_deref())
                .into_iter()
                .map(|r| r.0)
                .collect();
            let report = difficulty_report(&rows, variant.into());
            write_difficulty(&args.common.out, &report)?;
            for r in &report {
                println!("{}\t{}\t{}\t{}", r.dimension, r.bucket, r.proved, r.unproved);
            }
        }
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let s = generate_synthetic(&SyntheticSpec {
        num_premises: a.premises,
        num_states: a.states,
        seed: a.seed,
        ..Default::default()
    });
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("corpus.jsonl"), s.corpus.to_jsonl())?;
    let mut tasks = String::new();
    for t in &s.tasks {
        tasks.push_str(&serde_json::to_string(t)?);
        tasks.push('\n');
    }
    std::fs::write(a.out.join("tasks.jsonl"), tasks)?;
    println!(
        "{} premises, {} states, {} tasks -> {}",
        s.corpus.premises.len(),
        s.corpus.states.len(),
        s.tasks.len(),
        a.out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(a) => cmd_train(a),
        Command::Mepo(a) => cmd_mepo(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Client {
            command: ClientCommand::Retrieve(a),
        } => cmd_retrieve(a),
        Command::Eval { command } => cmd_eval(command),
        Command::Synth(a) => cmd_synth(a),
    }
}
