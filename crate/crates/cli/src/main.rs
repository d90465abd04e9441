use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use simaudit_core::analysis::report::{diff_reports, emit_report, Report};
use simaudit_core::analysis::PredicateHops;
use simaudit_core::config::{ConfigError, RunConfig};
use simaudit_core::pipeline::{self, DatasetRun};
use simaudit_core::{Error, Hop, Result};

#[derive(Parser)]
#[command(
    name = "kge-simaudit",
    version,
    about = "Audit KGE entity similarity against graph neighbourhoods"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse datasets and write load reports.
    Ingest(RunArgs),
    /// Write top-N neighbour dumps.
    Neighbors {
        #[arg(long, value_enum)]
        side: Side,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write per-entity RBO for every model.
    Audit(RunArgs),
    /// Run the whole pipeline and write the report bundle.
    Report(RunArgs),
    /// List cells that differ between two reports.
    Diff {
        left: PathBuf,
        right: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        tolerance: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Graph,
    Embedding,
}

#[derive(Clone, Copy, ValueEnum)]
enum PredicateHopsArg {
    First,
    Both,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// 0 = available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_hop)]
    hop: Option<Vec<Hop>>,
    #[arg(long = "model")]
    models: Vec<String>,
    #[arg(long)]
    include_backtracking: bool,
    #[arg(long, value_enum)]
    predicate_hops: Option<PredicateHopsArg>,
}

fn parse_hop(s: &str) -> std::result::Result<Hop, String> {
    let v: u8 = s.trim().parse().map_err(|_| format!("invalid hop {s:?}"))?;
    Hop::try_from(v)
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if let Some(k) = &self.k {
            cfg.k = k.clone();
        }
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(h) = &self.hop {
            cfg.hops = h.clone();
        }
        if self.include_backtracking {
            cfg.include_backtracking = true;
        }
        if let Some(p) = self.predicate_hops {
            cfg.predicate_hops = match p {
                PredicateHopsArg::First => PredicateHops::First,
                PredicateHopsArg::Both => PredicateHops::Both,
            };
        }
        cfg.normalize();
        cfg.retain_models(&self.models)?;
        cfg.validate(true)?;
        if cfg.threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build_global()
                .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
        }
        Ok(cfg)
    }
}

fn ingest(cfg: &RunConfig) -> Result<()> {
    let dir = cfg.out.join("ingest");
    for ds in &cfg.datasets {
        let data = pipeline::load_dataset(ds)?;
        let path = pipeline::write_load_report(&dir, &data)?;
        let load = &data.load;
        println!(
            "{}: {} entities, {} predicates, {} classes, {} triples -> {}",
            ds.name,
            load.entities,
            load.predicates,
            load.classes,
            load.triples_per_split.values().sum::<usize>(),
            path.display()
        );
    }
    Ok(())
}

fn neighbors(cfg: &RunConfig, side: Side) -> Result<()> {
    let dir = cfg.out.join("neighbors");
    let cache = pipeline::cache_dir(cfg);
    for ds in &cfg.datasets {
        let data = pipeline::load_dataset(ds)?;
        match side {
            Side::Graph => {
                let options = simaudit_core::neighborhood::NeighborhoodOptions {
                    include_backtracking: cfg.include_backtracking,
                };
                let sets = pipeline::neighborhoods(&data, options, cache.as_deref())?;
                for (hop, lists) in pipeline::graph_neighbor_lists(&sets, &cfg.hops, cfg.n)? {
                    let path = dir.join(format!("{}.graph.hop{hop}.tsv", ds.name));
                    pipeline::write_neighbor_file(&path, &data.graph, &lists)?;
                    println!("{} lists -> {}", lists.len(), path.display());
                }
            }
            Side::Embedding => {
                for (model, files) in &ds.models {
                    let matrix = pipeline::load_model(&files.embeddings, &data.graph)?;
                    let lists = simaudit_core::embedding::all_embedding_neighbors(&matrix, cfg.n)?;
                    let path = dir.join(format!("{}.{model}.embedding.tsv", ds.name));
                    pipeline::write_neighbor_file(&path, &data.graph, &lists)?;
                    println!("{} lists -> {}", lists.len(), path.display());
                }
            }
        }
    }
    Ok(())
}

fn audit(cfg: &RunConfig) -> Result<()> {
    let dir = cfg.out.join("audit");
    let cache = pipeline::cache_dir(cfg);
    for ds in &cfg.datasets {
        let run = DatasetRun::prepare(ds, cfg, cache.as_deref())?;
        for (model, files) in &ds.models {
            let audit = run.audit_model(model, files, cfg)?;
            let path = dir.join(format!("{}.{model}.rbo.tsv", ds.name));
            pipeline::write_rbo_file(&path, run.graph(), &audit.per_entity)?;
            let means: Vec<String> = audit
                .per_entity
                .keys()
                .map(|&(hop, k)| format!("R{hop}@{k}={:.4}", audit.global_mean(hop, k).unwrap_or(0.0)))
                .collect();
            println!("{}/{model}: {} -> {}", ds.name, means.join(" "), path.display());
        }
    }
    Ok(())
}

fn report(cfg: &RunConfig) -> Result<()> {
    let report = pipeline::run_report(cfg, pipeline::cache_dir(cfg).as_deref())?;
    let dir = cfg.out.join("report");
    for path in emit_report(&report, &dir)? {
        println!("{}", path.display());
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(())
}

fn load_report(path: &Path) -> Result<Report> {
    if path.is_dir() {
        Report::load(&path.join("report.json"))
    } else {
        Report::load(path)
    }
}

fn diff(left: &Path, right: &Path, tolerance: f64) -> Result<()> {
    let diffs = diff_reports(&load_report(left)?, &load_report(right)?, tolerance);
    if diffs.is_empty() {
        println!("no differences");
    }
    for d in diffs {
        let show = |v: &Option<String>| v.clone().unwrap_or_else(|| "-".into());
        println!("{}\t{}\t{}\t{}", d.table, d.key, show(&d.left), show(&d.right));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => ingest(&args.resolve()?),
        Command::Neighbors { side, run } => neighbors(&run.resolve()?, side),
        Command::Audit(args) => audit(&args.resolve()?),
        Command::Report(args) => report(&args.resolve()?),
        Command::Diff { left, right, tolerance } => {
            if tolerance.is_nan() || tolerance < 0.0 {
                return Err(ConfigError::Invalid("--tolerance must be >= 0".into()).into());
            }
            diff(&left, &right, tolerance)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
