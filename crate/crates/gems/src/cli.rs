//! The `gems` command line.
//!
//! Exit status: 0 on success, 1 when a command fails, 2 on bad arguments
//! (including unreadable `--config` files and missing input files).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gems_core::graph::{degree_stats, Corpus, SceneGraph, Split};
use gems_core::metrics::{evaluate_all, MetricConfig};
use gems_core::model::{
    expand, partial_similarity_matrix, train, EmbeddingTable, ExpandOptions, ExternalKnowledge, ModelConfig,
    ModelParams, TrainConfig,
};
use gems_core::rng::{derive_seed, derived_rng};
use gems_core::seed::{extract_seeds, PageRankConfig, SeedExtractConfig};
use gems_core::synth::{generate_synthetic_corpus, SyntheticSpec};

use crate::checkpoint::{self, Checkpoint};
use crate::format::{
    parse_corpus, parse_embeddings, parse_graph, parse_graphs_jsonl, parse_vocabulary, serialize_graphs_jsonl,
    serialize_vocabulary, FormatError,
};
use crate::report::report_to_json;
use crate::service::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "gems", version, about = "Scene-graph expansion: train, expand, evaluate, serve")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a corpus and write a checkpoint.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Expand seed graphs with a trained model.
    #[command(args_override_self = true)]
    Expand(ExpandArgs),
    /// Score generated graphs against train and test corpora.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Draw seed subgraphs from every graph of a corpus.
    #[command(args_override_self = true)]
    SeedExtract(SeedExtractArgs),
    /// Write a synthetic corpus and its vocabulary.
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Serve expansion and seed extraction over HTTP.
    #[command(args_override_self = true)]
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Root seed for every random choice.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// TOML file of `flag-name = value` defaults; command-line flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report progress on stderr.
    #[arg(short, long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Training corpus (JSONL).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Vocabulary file [default: corpus path with a .vocab extension].
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Pretrained label embeddings (`label<TAB>values`).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss curve CSV [default: checkpoint path + .loss.csv].
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Weight of the knowledge-smoothed node loss term.
    #[arg(long, default_value_t = 0.2)]
    pub alpha: f64,
    /// Class-balance factor for the edge loss.
    #[arg(long, default_value_t = 0.9999)]
    pub beta: f64,
    /// Weigh every edge class equally.
    #[arg(long)]
    pub uniform_edge_weights: bool,
    /// Predecessor window [default: degree percentile of the corpus].
    #[arg(long)]
    pub k: Option<usize>,
    /// Degree percentile that sets the default window.
    #[arg(long, default_value_t = 0.99)]
    pub percentile: f64,
    /// Embedding size [default: embedding file dimension, else 64].
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value_t = 4)]
    pub node_layers: usize,
    #[arg(long, default_value_t = 4)]
    pub edge_layers: usize,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One seed graph (JSON) or several (JSONL).
    #[arg(long)]
    pub seed_graph: PathBuf,
    /// Refuse the checkpoint unless its vocabulary equals this one.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Expansions per seed.
    #[arg(short = 'm', long, default_value_t = 1)]
    pub num_samples: usize,
    #[arg(long, default_value_t = 20)]
    pub max_new_nodes: usize,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Output JSONL [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Generated graphs (JSONL).
    #[arg(long)]
    pub generated: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Vocabulary of all three files [default: test path with a .vocab extension].
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Seeds the generated graphs were expanded from (JSONL). Each seed
    /// covers an equal, consecutive share of the generated graphs.
    #[arg(long)]
    pub seeds: Option<PathBuf>,
    /// Contiguous test splits to average the MMDs over.
    #[arg(long, default_value_t = 1)]
    pub splits: usize,
    /// K for Obj_K and Trip_K.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Gaussian kernel bandwidth.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 20)]
    pub degree_max_bin: usize,
    #[arg(long, default_value_t = 10)]
    pub clustering_bins: usize,
    #[arg(long, default_value_t = 50)]
    pub count_max_bin: usize,
    /// Expansions per diversity group [default: expansions per seed, else 3].
    #[arg(long)]
    pub diversity_group: Option<usize>,
    /// Report JSON [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeedExtractArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Vocabulary file [default: corpus path with a .vocab extension].
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Seeds per connected component.
    #[arg(long, default_value_t = 1)]
    pub per_component: usize,
    /// Largest seed, in nodes.
    #[arg(long, default_value_t = 4)]
    pub max_nodes: usize,
    /// Output JSONL, one seed set per input graph [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Corpus JSONL to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Vocabulary to write [default: output path with a .vocab extension].
    #[arg(long)]
    pub vocab_out: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    pub num_graphs: usize,
    #[arg(long, default_value_t = 60)]
    pub num_objects: usize,
    #[arg(long, default_value_t = 8)]
    pub num_relations: usize,
    /// Disjoint clusters of consecutive labels.
    #[arg(long, default_value_t = 3)]
    pub clusters: usize,
    #[arg(long, default_value_t = 8)]
    pub cluster_size: usize,
    #[arg(long, default_value_t = 7)]
    pub min_nodes: usize,
    #[arg(long, default_value_t = 8)]
    pub max_nodes: usize,
    /// Relation `r` has weight `(r + 1)^-skew`.
    #[arg(long, default_value_t = 1.5)]
    pub skew: f64,
    #[arg(long, default_value_t = 0.01)]
    pub off_cluster_prob: f64,
    #[arg(long, default_value_t = 0.0)]
    pub split_prob: f64,
    #[arg(long, default_value_t = 0.1)]
    pub reverse_prob: f64,
    #[arg(long, default_value_t = 0.0)]
    pub chord_prob: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Training corpus for the novelty flag.
    #[arg(long)]
    pub train_corpus: Option<PathBuf>,
    /// Vocabulary of the training corpus [default: its path with a .vocab extension].
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}

/// A failed command: bad usage (exit 2) or a failed run (exit 1).
pub enum CliError {
    Usage(String),
    Run(Box<dyn std::error::Error + Send + Sync>),
}

impl<E: std::error::Error + Send + Sync + 'static> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Run(Box::new(e))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Run(e) => {
                write!(f, "{e}")?;
                let mut src = e.source();
                while let Some(s) = src {
                    write!(f, ": {s}")?;
                    src = s.source();
                }
                Ok(())
            }
        }
    }
}

fn failure(msg: impl Into<String>) -> CliError {
    CliError::Run(msg.into().into())
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match apply_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => 2,
                CliError::Run(_) => 1,
            }
        }
    }
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Splices the `--config` file's entries in as flags right after the
/// subcommand, so anything given on the command line overrides them.
fn apply_config(mut args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let table: BTreeMap<String, toml::Value> =
        toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))?;
    let mut tokens: Vec<OsString> = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            continue;
        }
        match value {
            toml::Value::Boolean(true) => tokens.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => tokens.extend([flag.into(), s.into()]),
            toml::Value::Integer(i) => tokens.extend([flag.into(), i.to_string().into()]),
            toml::Value::Float(x) => tokens.extend([flag.into(), x.to_string().into()]),
            _ => return Err(format!("config key `{key}` must be a string, number or boolean")),
        }
    }
    let Some(sub) = args.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')) else {
        return Ok(args);
    };
    let at = sub + 2;
    args.splice(at..at, tokens);
    Ok(args)
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Train(a) => run_train(a),
        Command::Expand(a) => run_expand(a),
        Command::Eval(a) => run_eval(a),
        Command::SeedExtract(a) => run_seed_extract(a),
        Command::Synth(a) => run_synth(a),
        Command::Serve(a) => run_serve(a),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!("input file {} does not exist", path.display())));
    }
    fs::read(path).map_err(|e| failure(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read_bytes(path)?).map_err(|_| failure(format!("{} is not UTF-8", path.display())))
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| failure(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush())?;
            Ok(())
        }
    }
}

fn in_file(path: &Path, e: impl fmt::Display) -> CliError {
    failure(format!("{}: {e}", path.display()))
}

fn load_corpus(path: &Path, vocab: Option<&Path>, split: Split) -> Result<Corpus, CliError> {
    let text = read_text(path)?;
    let vocab_path = vocab.map(Path::to_path_buf).unwrap_or_else(|| path.with_extension("vocab"));
    let v = parse_vocabulary(&read_text(&vocab_path)?).map_err(|e| in_file(&vocab_path, e))?;
    parse_corpus(&text, v, split).map_err(|e| in_file(path, e))
}

fn run_train(a: TrainArgs) -> Result<(), CliError> {
    let corpus = load_corpus(&a.corpus, a.vocab.as_deref(), Split::Train)?;
    let table: Option<EmbeddingTable> = match &a.embeddings {
        Some(p) => Some(parse_embeddings(&read_text(p)?).map_err(|e| in_file(p, e))?),
        None => None,
    };
    let vocab = &corpus.vocabulary;
    let k = match a.k {
        Some(k) => k,
        None => degree_stats(&corpus.graphs, a.percentile)?.percentile_k.max(1),
    };
    let config = ModelConfig {
        embed_dim: a.embed_dim.or(table.as_ref().map(|t| t.dim)).unwrap_or(64),
        hidden: a.hidden,
        node_layers: a.node_layers,
        edge_layers: a.edge_layers,
        ..ModelConfig::new(vocab.num_objects(), vocab.num_relations(), k)
    };
    let ek = match &table {
        Some(t) => {
            let (ek, missing) = partial_similarity_matrix(vocab.object_labels(), t);
            if !missing.is_empty() {
                eprintln!("warning: no embedding for {} object label(s): {}", missing.len(), missing.join(", "));
            }
            ek
        }
        None => ExternalKnowledge::none(vocab.num_objects()),
    };
    let seed = a.common.seed;
    let mut model = ModelParams::new(config, Some(vocab), table.as_ref(), &mut derived_rng(seed, "init", 0))?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        alpha: a.alpha,
        beta: a.beta,
        class_balanced: !a.uniform_edge_weights,
        seed,
    };
    if a.common.verbose {
        eprintln!(
            "training on {} graphs: k = {k}, {} parameters, {} epochs",
            corpus.len(),
            model.store.num_scalars(),
            a.epochs
        );
    }
    let report = train(&mut model, &corpus, &ek, &cfg)?;
    write_output(Some(&a.out), &checkpoint::encode(&model, vocab))?;
    let mut csv = String::from("epoch,loss\n");
    csv.push_str(&format!("0,{}\n", report.initial_loss));
    for (e, l) in report.loss_curve.iter().enumerate() {
        csv.push_str(&format!("{},{l}\n", e + 1));
    }
    let csv_path = a.loss_csv.unwrap_or_else(|| PathBuf::from(format!("{}.loss.csv", a.out.display())));
    write_output(Some(&csv_path), csv.as_bytes())?;
    if a.common.verbose {
        let last = report.loss_curve.last().copied().unwrap_or(report.initial_loss);
        eprintln!("loss {} -> {last}", report.initial_loss);
    }
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    checkpoint::decode(&read_bytes(path)?).map_err(|e| in_file(path, e))
}

fn run_expand(a: ExpandArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    if let Some(p) = &a.vocab {
        let v = parse_vocabulary(&read_text(p)?).map_err(|e| in_file(p, e))?;
        ck.check_vocabulary(&v)?;
    }
    let text = read_text(&a.seed_graph)?;
    let seeds = match parse_graph(text.trim(), &ck.vocabulary) {
        Ok(g) => vec![g],
        Err(FormatError::Malformed(_)) => {
            parse_graphs_jsonl(&text, &ck.vocabulary, false).map_err(|e| in_file(&a.seed_graph, e))?
        }
        Err(e) => return Err(in_file(&a.seed_graph, e)),
    };
    if seeds.is_empty() {
        return Err(failure(format!("{}: no seed graphs", a.seed_graph.display())));
    }
    let mut out = Vec::new();
    for (i, s) in seeds.iter().enumerate() {
        let opt = ExpandOptions {
            num_samples: a.num_samples,
            max_new_nodes: a.max_new_nodes,
            temperature: a.temperature,
            seed: derive_seed(a.common.seed, "seed-graph", i as u64),
        };
        out.extend(expand(&ck.model, s, &opt)?);
    }
    write_output(a.out.as_deref(), serialize_graphs_jsonl(&out, &ck.vocabulary)?.as_bytes())
}

fn run_eval(a: EvalArgs) -> Result<(), CliError> {
    let vocab_path = a.vocab.clone().unwrap_or_else(|| a.test.with_extension("vocab"));
    let train = load_corpus(&a.train, Some(&vocab_path), Split::Train)?;
    let test = load_corpus(&a.test, Some(&vocab_path), Split::Test)?;
    let vocab = &test.vocabulary;
    let gen = parse_graphs_jsonl(&read_text(&a.generated)?, vocab, false).map_err(|e| in_file(&a.generated, e))?;
    if gen.is_empty() {
        return Err(failure(format!("{}: generated set is empty", a.generated.display())));
    }
    let mut group = None;
    let seeds = match &a.seeds {
        Some(p) => {
            let s = parse_graphs_jsonl(&read_text(p)?, vocab, false).map_err(|e| in_file(p, e))?;
            if s.is_empty() || gen.len() % s.len() != 0 {
                return Err(CliError::Usage(format!(
                    "{} generated graphs cannot be shared evenly among {} seeds",
                    gen.len(),
                    s.len()
                )));
            }
            let per = gen.len() / s.len();
            group = Some(per);
            Some(s.iter().flat_map(|g| std::iter::repeat_n(g.clone(), per)).collect::<Vec<_>>())
        }
        None => None,
    };
    let cfg = MetricConfig {
        sigma: a.sigma,
        degree_max_bin: a.degree_max_bin,
        clustering_bins: a.clustering_bins,
        count_max_bin: a.count_max_bin,
        k: a.k,
        splits: a.splits,
        diversity_group: a.diversity_group.or(group).unwrap_or(3),
        ..MetricConfig::default()
    };
    let report = evaluate_all(&gen, seeds.as_deref(), &train, &test, &cfg)?;
    write_output(a.out.as_deref(), report_to_json(&report).as_bytes())
}

/// All seeds of one graph merged into a single graph (node ids are shared
/// with the source, so overlapping seeds merge consistently).
fn merge(seeds: &[SceneGraph]) -> SceneGraph {
    let mut nodes = BTreeMap::new();
    let mut edges = BTreeMap::new();
    for s in seeds {
        for n in s.nodes() {
            nodes.insert(n.id, *n);
        }
        for e in s.edges() {
            edges.insert((e.src, e.dst), *e);
        }
    }
    SceneGraph::new(nodes.into_values().collect(), edges.into_values().collect())
        .expect("subgraphs of one graph merge into a subgraph")
}

fn run_seed_extract(a: SeedExtractArgs) -> Result<(), CliError> {
    let corpus = load_corpus(&a.corpus, a.vocab.as_deref(), Split::Test)?;
    let cfg = SeedExtractConfig { per_component: a.per_component, max_nodes: a.max_nodes };
    let pr = PageRankConfig::default();
    let mut out = Vec::with_capacity(corpus.len());
    for (i, g) in corpus.graphs.iter().enumerate() {
        if g.is_empty() {
            out.push(SceneGraph::empty());
            continue;
        }
        let mut rng = derived_rng(a.common.seed, "seed-extract", i as u64);
        let seeds = extract_seeds(g, &cfg, &pr, &mut rng)?;
        out.push(merge(&seeds));
    }
    if a.common.verbose {
        let nodes: usize = out.iter().map(SceneGraph::num_nodes).sum();
        eprintln!("{} seed sets, {nodes} nodes", out.len());
    }
    write_output(a.out.as_deref(), serialize_graphs_jsonl(&out, &corpus.vocabulary)?.as_bytes())
}

fn run_synth(a: SynthArgs) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        num_graphs: a.num_graphs,
        num_object_labels: a.num_objects,
        num_relation_labels: a.num_relations,
        clusters: SyntheticSpec::disjoint_clusters(a.clusters, a.cluster_size),
        edge_label_skew: a.skew,
        nodes_per_graph: (a.min_nodes, a.max_nodes),
        off_cluster_prob: a.off_cluster_prob,
        split_prob: a.split_prob,
        reverse_prob: a.reverse_prob,
        chord_prob: a.chord_prob,
        seed: a.common.seed,
    };
    let corpus = generate_synthetic_corpus(&spec)?;
    let vocab_out = a.vocab_out.unwrap_or_else(|| a.out.with_extension("vocab"));
    write_output(Some(&a.out), serialize_graphs_jsonl(&corpus.graphs, &corpus.vocabulary)?.as_bytes())?;
    write_output(Some(&vocab_out), serialize_vocabulary(&corpus.vocabulary).as_bytes())
}

fn run_serve(a: ServeArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let train = match &a.train_corpus {
        Some(p) => {
            let c = load_corpus(p, a.vocab.as_deref(), Split::Train)?;
            ck.check_vocabulary(&c.vocabulary)?;
            Some(c.graphs)
        }
        None => None,
    };
    let listener = TcpListener::bind((a.host.as_str(), a.port))
        .map_err(|e| failure(format!("cannot listen on {}:{}: {e}", a.host, a.port)))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    service::serve(listener, AppState::new(ck, train))?;
    Ok(())
}
