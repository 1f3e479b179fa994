mod commands;
mod config;
mod error;
mod fsio;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use graphaudit::audit::{ContextMode, ImportanceReduction};
use graphaudit::mgnan::Link;
use graphaudit::retrieval::{PrizeScheme, RetrievalMode};

use config::RunConfig;
use error::{CliError, Result};

/// Auditable graph retrieval: build a graph bundle, retrieve per-query
/// subgraphs, train the additive encoder, attribute and audit.
#[derive(Debug, Parser)]
#[command(name = "graphaudit", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate nodes, edges and embeddings into a checksummed bundle.
    Build(BuildArgs),
    /// Retrieve one subgraph per query.
    Retrieve(RetrieveArgs),
    /// Fit the encoder on labelled subgraphs.
    Train(TrainArgs),
    /// Encode subgraphs and write per-node, per-group attributions.
    Attribute(AttributeArgs),
    /// Importance, pruning, fragmentation and bridge audit per query.
    Audit(AuditArgs),
    /// Aggregate per-query audits into a corpus summary.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long)]
    nodes: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Text embeddings, or a binary blob when --embeddings-index is given.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    embeddings_index: Option<PathBuf>,
    /// Hash-embed node text at this width instead of reading embeddings.
    #[arg(long)]
    hash_dim: Option<usize>,
    /// Generate a synthetic graph with this many nodes.
    #[arg(long)]
    synthetic_nodes: Option<usize>,
    #[arg(long)]
    synthetic_queries: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Single,
    Multi,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    RankLinear,
    Similarity,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    /// Bundle directory written by `build`.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Line-delimited `{"qid", "text"}` objects.
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    k_seeds: Option<usize>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    k_frontier: Option<usize>,
    #[arg(long)]
    prize_pool: Option<usize>,
    #[arg(long)]
    merge_pool: Option<usize>,
    #[arg(long)]
    edge_cost: Option<f64>,
    #[arg(long, value_enum)]
    prize_scheme: Option<SchemeArg>,
    #[arg(long)]
    prize_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LinkArg {
    Identity,
    Sigmoid,
    Softmax,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Directory of subgraph records (default: <out>/subgraphs).
    #[arg(long)]
    subgraphs: Option<PathBuf>,
    /// Line-delimited `{"qid", "target": [..]}` objects.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    groups: Option<usize>,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long, value_enum)]
    link: Option<LinkArg>,
    #[arg(long)]
    knots: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Debug, Args)]
struct AttributeArgs {
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Checkpoint written by `train` (default: <out>/model.json).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    subgraphs: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReductionArg {
    Channel0Abs,
    ChannelNorm,
    Channel0Signed,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ContextArg {
    FullPcst,
    TopKOnly,
    PcstPlusTopK,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    subgraphs: Option<PathBuf>,
    /// Directory of attribution records (default: <out>/attributions).
    #[arg(long)]
    attributions: Option<PathBuf>,
    /// High-importance set size for pruning and bridges.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    bridges: Option<usize>,
    #[arg(long, value_enum)]
    reduction: Option<ReductionArg>,
    /// Keep neighbours of top-k nodes when pruning.
    #[arg(long)]
    with_neighbours: bool,
    #[arg(long, value_enum)]
    context_mode: Option<ContextArg>,
    #[arg(long)]
    context_k: Option<usize>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory of audit reports (default: <out>/audits).
    #[arg(long)]
    audits: Option<PathBuf>,
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if flag.is_some() {
        slot.clone_from(flag);
    }
}

/// Applies flags on top of the file configuration.
fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.jobs, cli.jobs);
    set_path(&mut cfg.paths.out, &cli.out);
    let p = &mut cfg.paths;
    match &cli.command {
        Command::Build(a) => {
            set_path(&mut p.nodes, &a.nodes);
            set_path(&mut p.edges, &a.edges);
            set_path(&mut p.embeddings, &a.embeddings);
            set_path(&mut p.embeddings_index, &a.embeddings_index);
            if a.hash_dim.is_some() {
                cfg.build.hash_dim = a.hash_dim;
            }
            if a.synthetic_nodes.is_some() {
                cfg.build.synthetic_nodes = a.synthetic_nodes;
            }
            set(&mut cfg.build.synthetic_queries, a.synthetic_queries);
        }
        Command::Retrieve(a) => {
            set_path(&mut p.graph, &a.graph);
            set_path(&mut p.queries, &a.queries);
            set(
                &mut cfg.mode,
                a.mode.map(|m| match m {
                    ModeArg::Single => RetrievalMode::SingleHop,
                    ModeArg::Multi => RetrievalMode::MultiHop,
                }),
            );
            let r = &mut cfg.retrieval;
            set(&mut r.k_seeds, a.k_seeds);
            set(&mut r.hops, a.hops);
            set(&mut r.k_frontier, a.k_frontier);
            set(&mut r.prize_pool, a.prize_pool);
            set(&mut r.merge_pool, a.merge_pool);
            set(&mut r.edge_cost, a.edge_cost);
            set(
                &mut r.prize_scheme,
                a.prize_scheme.map(|s| match s {
                    SchemeArg::RankLinear => PrizeScheme::RankLinear,
                    SchemeArg::Similarity => PrizeScheme::Similarity,
                }),
            );
            set(&mut r.prize_scale, a.prize_scale);
        }
        Command::Train(a) => {
            set_path(&mut p.graph, &a.graph);
            set_path(&mut p.subgraphs, &a.subgraphs);
            set_path(&mut p.labels, &a.labels);
            let m = &mut cfg.model;
            set(&mut m.groups, a.groups);
            set(&mut m.hidden, a.hidden.clone());
            set(&mut m.channels, a.channels);
            set(
                &mut m.link,
                a.link.map(|l| match l {
                    LinkArg::Identity => Link::Identity,
                    LinkArg::Sigmoid => Link::Sigmoid,
                    LinkArg::Softmax => Link::Softmax,
                }),
            );
            set(&mut m.knots, a.knots);
            set(&mut cfg.train.lr, a.lr);
            set(&mut cfg.train.epochs, a.epochs);
            set(&mut cfg.train.batch_size, a.batch_size);
        }
        Command::Attribute(a) => {
            set_path(&mut p.graph, &a.graph);
            set_path(&mut p.model, &a.model);
            set_path(&mut p.subgraphs, &a.subgraphs);
        }
        Command::Audit(a) => {
            set_path(&mut p.graph, &a.graph);
            set_path(&mut p.subgraphs, &a.subgraphs);
            set_path(&mut p.attributions, &a.attributions);
            set(&mut cfg.audit.k, a.k);
            set(&mut cfg.audit.bridges, a.bridges);
            set(
                &mut cfg.audit.reduction,
                a.reduction.map(|r| match r {
                    ReductionArg::Channel0Abs => ImportanceReduction::Channel0Abs,
                    ReductionArg::ChannelNorm => ImportanceReduction::ChannelNorm,
                    ReductionArg::Channel0Signed => ImportanceReduction::Channel0Signed,
                }),
            );
            if a.with_neighbours {
                cfg.audit.with_neighbours = true;
            }
            set(
                &mut cfg.context.mode,
                a.context_mode.map(|c| match c {
                    ContextArg::FullPcst => ContextMode::FullPcst,
                    ContextArg::TopKOnly => ContextMode::TopKOnly,
                    ContextArg::PcstPlusTopK => ContextMode::PcstPlusTopK,
                }),
            );
            set(&mut cfg.context.k, a.context_k);
        }
        Command::Report(a) => set_path(&mut p.audits, &a.audits),
    }
    // the run seed drives batch shuffling too
    cfg.train.seed = cfg.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve(&cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build_global()
        .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    match cli.command {
        Command::Build(_) => commands::build(&mut cfg),
        Command::Retrieve(_) => commands::retrieve(&mut cfg),
        Command::Train(_) => commands::train(&mut cfg),
        Command::Attribute(_) => commands::attribute(&mut cfg),
        Command::Audit(_) => commands::audit(&mut cfg),
        Command::Report(_) => commands::report(&mut cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
