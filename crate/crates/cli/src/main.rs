//! `sublog`: generate key files, build and query indexes, run benchmarks.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use sublog::bench::{read_csv, run_experiment, write_csv, BenchRow, ExperimentConfig, Method};
use sublog::distributions::{sample_sorted, DistSpec};
use sublog::keyfile::{read_normalized, write_normalized, write_raw_keys};
use sublog::pca::{build_pca, PcaIndex};
use sublog::rda::{rda_build, RdaIndex};
use sublog::rds::RdsIndex;
use sublog::subexp::build_subexp;
use sublog::{BinaryIndex, OpContext, RankIndex, SortedKeyArray};

#[derive(Parser)]
#[command(name = "sublog", version, about = "Learned indexes for the rank problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KeyFormat {
    /// 8-byte reals in [0, 1]
    Normalized,
    /// 8-byte unsigned integers (keys scaled by 2^53)
    Raw,
}

#[derive(Clone, Copy, ValueEnum)]
enum StoredIndex {
    Pca,
    Rda,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a sorted key file from a distribution
    Generate {
        #[arg(long)]
        dist: DistSpec,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "normalized")]
        format: KeyFormat,
    },
    /// Build an index over a normalized key file and save it
    Build {
        #[arg(long, value_enum)]
        method: StoredIndex,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        ratio: f64,
    },
    /// Answer one rank query, printing the rank and its operation count
    Query {
        #[arg(long)]
        data: PathBuf,
        /// Saved index from `build`; otherwise one is built with --method
        #[arg(long, conflicts_with = "method")]
        index: Option<PathBuf>,
        #[arg(long, default_value = "binary")]
        method: Method,
        /// Distribution model for rds
        #[arg(long, default_value = "uniform")]
        dist: DistSpec,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        ratio: f64,
        #[arg(long, allow_negative_numbers = true)]
        q: f64,
    },
    /// Run an operation-count experiment and write a CSV report
    Bench(BenchArgs),
    /// Print a saved CSV report as a table
    Report {
        csv: PathBuf,
    },
}

#[derive(clap::Args)]
struct BenchArgs {
    /// key = value file; flags given here take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    /// Repeat for several distributions
    #[arg(long)]
    dist: Vec<DistSpec>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    arrays: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_verify: bool,
    /// Record build times (makes reports differ between runs)
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            dist,
            n,
            seed,
            out,
            format,
        } => generate(&dist, n, seed, &out, format),
        Command::Build {
            method,
            data,
            out,
            eps,
            rho,
            ratio,
        } => {
            let array = Arc::new(load(&data)?);
            let bytes = match method {
                StoredIndex::Pca => build_pca(array, eps, rho)?.to_bytes(),
                StoredIndex::Rda => rda_build(array, ratio)?.to_bytes(),
            };
            fs::write(&out, bytes).with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
        Command::Query {
            data,
            index,
            method,
            dist,
            eps,
            rho,
            ratio,
            q,
        } => {
            let array = Arc::new(load(&data)?);
            let idx: Box<dyn RankIndex> = match index {
                Some(path) => load_index(&path, array)?,
                None => build_index(method, array, &dist, eps, rho, ratio)?,
            };
            let mut ctx = OpContext::new();
            let rank = idx.rank(q, &mut ctx);
            println!("rank={rank} ops={}", ctx.mem_ops);
            Ok(())
        }
        Command::Bench(args) => bench(args),
        Command::Report { csv } => {
            print_table(&read_csv(&csv)?);
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<SortedKeyArray> {
    read_normalized(path).with_context(|| format!("reading key file {}", path.display()))
}

fn generate(dist: &DistSpec, n: usize, seed: u64, out: &Path, format: KeyFormat) -> Result<()> {
    if dist.is_empirical() {
        bail!("generate needs a parametric distribution, got {dist}");
    }
    let a = sample_sorted(&dist.model()?, n, seed);
    match format {
        KeyFormat::Normalized => write_normalized(out, &a)?,
        KeyFormat::Raw => {
            let scale = (1u64 << 53) as f64;
            let raw: Vec<u64> = a.keys().iter().map(|&x| (x * scale) as u64).collect();
            write_raw_keys(out, &raw)?;
        }
    }
    Ok(())
}

fn load_index(path: &Path, array: Arc<SortedKeyArray>) -> Result<Box<dyn RankIndex>> {
    let bytes = fs::read(path).with_context(|| format!("reading index {}", path.display()))?;
    let idx: Box<dyn RankIndex> = if bytes.starts_with(b"SLRDA") {
        Box::new(RdaIndex::from_bytes(&bytes, array)?)
    } else {
        Box::new(PcaIndex::from_bytes(&bytes, array)?)
    };
    Ok(idx)
}

fn build_index(
    method: Method,
    array: Arc<SortedKeyArray>,
    dist: &DistSpec,
    eps: f64,
    rho: f64,
    ratio: f64,
) -> Result<Box<dyn RankIndex>> {
    Ok(match method {
        Method::Binary => Box::new(BinaryIndex::new(array)),
        Method::Pca => Box::new(build_pca(array, eps, rho)?),
        Method::Rda => Box::new(rda_build(array, ratio)?),
        Method::Rds => Box::new(RdsIndex::new(array, dist.model()?)),
        Method::Subexp => Box::new(build_subexp(
            |slice| Ok(Box::new(rda_build(slice, ratio)?) as Box<dyn RankIndex>),
            array,
        )?),
    })
}

/// Reads `key = value` lines; `#` starts a comment. Repeated `dist` lines
/// accumulate.
fn apply_config_file(path: &Path, cfg: &mut ExperimentConfig, out: &mut Option<PathBuf>) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut dists = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key = value", path.display(), no + 1);
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "out" => *out = Some(PathBuf::from(value)),
            "dist" => dists.push(value.parse()?),
            _ => cfg
                .set(key, value)
                .with_context(|| format!("{}:{}", path.display(), no + 1))?,
        }
    }
    if !dists.is_empty() {
        cfg.dists = dists;
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    let mut out = None;
    if let Some(path) = &args.config {
        apply_config_file(path, &mut cfg, &mut out)?;
    }
    if !args.method.is_empty() {
        cfg.methods = args.method;
    }
    if !args.dist.is_empty() {
        cfg.dists = args.dist;
    }
    if !args.n.is_empty() {
        cfg.ns = args.n;
    }
    cfg.eps = args.eps.unwrap_or(cfg.eps);
    cfg.rho = args.rho.or(cfg.rho);
    cfg.ratio = args.ratio.unwrap_or(cfg.ratio);
    cfg.queries = args.queries.unwrap_or(cfg.queries);
    cfg.arrays = args.arrays.unwrap_or(cfg.arrays);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.verify &= !args.no_verify;
    cfg.timing |= args.timing;
    if let Ok(v) = std::env::var("SUBLOG_THREADS") {
        cfg.threads = v.trim().parse().context("SUBLOG_THREADS must be a count")?;
    }
    let out = args.out.or(out).unwrap_or_else(|| PathBuf::from("bench.csv"));

    let rows = run_experiment(&cfg)?;
    write_csv(&rows, &out)?;
    print_table(&rows);
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn print_table(rows: &[BenchRow]) {
    let dist_w = rows.iter().map(|r| r.dist.len()).max().unwrap_or(4).max(4);
    println!(
        "{:<8} {:<dist_w$} {:>10} {:>10} {:>14} {:>10}",
        "method", "dist", "n", "ops", "size_ints", "build_s"
    );
    for r in rows {
        println!(
            "{:<8} {:<dist_w$} {:>10} {:>10.3} {:>14} {:>10.4}",
            r.method.name(),
            r.dist,
            r.n,
            r.metric_ops,
            r.index_size_ints,
            r.build_seconds
        );
    }
}
