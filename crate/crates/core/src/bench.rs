//! Operation-count experiments.
//!
//! For every distribution and array size, the harness draws a set of arrays
//! and one shared set of queries, builds each method's index on each array,
//! and counts the memory operations of every query. The reported metric is
//! the maximum over queries of the mean over arrays. Every answer is checked
//! against the oracle unless verification is turned off.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distributions::{sample_sorted, CdfModel, DistSpec};
use crate::error::{Error, Result};
use crate::instrument::OpContext;
use crate::keyfile::read_raw_keys;
use crate::keys::{normalize_with_range, rank_oracle_batch, SortedKeyArray};
use crate::pca::build_pca;
use crate::rda::rda_build;
use crate::rds::RdsIndex;
use crate::subexp::build_subexp;
use crate::{BinaryIndex, RankIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Binary,
    Pca,
    Rda,
    Rds,
    Subexp,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Binary, Method::Pca, Method::Rda, Method::Rds, Method::Subexp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Binary => "binary",
            Method::Pca => "pca",
            Method::Rda => "rda",
            Method::Rds => "rds",
            Method::Subexp => "subexp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}` (expected binary, pca, rda, rds or subexp)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub dists: Vec<DistSpec>,
    pub ns: Vec<usize>,
    pub eps: f64,
    /// PCA density bound; defaults to the model's bound, or 1 for real data.
    pub rho: Option<f64>,
    /// RDA density ratio.
    pub ratio: f64,
    pub queries: usize,
    pub arrays: usize,
    pub seed: u64,
    pub verify: bool,
    /// Record build times. Off by default so reports are reproducible.
    pub timing: bool,
    /// Worker threads; 0 picks automatically.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: vec![Method::Binary],
            dists: vec![DistSpec::Uniform],
            ns: vec![1 << 12],
            eps: 0.1,
            rho: None,
            ratio: 1.0,
            queries: 1000,
            arrays: 100,
            seed: 0,
            verify: true,
            timing: false,
            threads: 0,
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad value `{s}` for {key}")))
        })
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{value}` for {key}")))
}

impl ExperimentConfig {
    /// Sets one `key = value` entry. `method` and `n` take comma lists; a
    /// `dist` entry replaces the distribution list with a single spec.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "method" => self.methods = value.split(',').map(Method::from_str).collect::<Result<_>>()?,
            "dist" => self.dists = vec![value.trim().parse()?],
            "n" => self.ns = parse_list(key, value)?,
            "eps" => self.eps = parse_one(key, value)?,
            "rho" => self.rho = Some(parse_one(key, value)?),
            "ratio" => self.ratio = parse_one(key, value)?,
            "queries" => self.queries = parse_one(key, value)?,
            "arrays" => self.arrays = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "verify" => self.verify = parse_one(key, value)?,
            "timing" => self.timing = parse_one(key, value)?,
            "threads" => self.threads = parse_one(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.methods.is_empty() || self.dists.is_empty() || self.ns.is_empty() {
            return bad("need at least one method, distribution and n");
        }
        if let Some(&n) = self.ns.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidConfig(format!("n must be at least 2, got {n}")));
        }
        if self.queries == 0 || self.arrays == 0 {
            return bad("queries and arrays must be at least 1");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps must be positive");
        }
        if !(self.ratio >= 1.0 && self.ratio.is_finite()) {
            return bad("ratio must be at least 1");
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho.is_finite()) {
                return bad("rho must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub dist: String,
    pub n: usize,
    pub metric_ops: f64,
    /// Mean over arrays, rounded to the nearest integer.
    pub index_size_ints: u64,
    pub build_seconds: f64,
    pub exactness_checked: bool,
}

/// Mixes `parts` into `seed` (splitmix64 finalizer per step).
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut h = seed;
    for &p in parts {
        h = h.wrapping_add(p).wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

/// FNV-1a, for turning distribution names into seed material.
fn name_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// `count` i.i.d. uniform draws on `[lo, hi]`.
pub fn gen_queries(lo: f64, hi: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidRange { lo, hi });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect())
}

/// A raw key file held in memory, normalized by the full file's extent.
#[derive(Debug, Clone)]
pub struct RealDataset {
    path: PathBuf,
    raw: Vec<u64>,
    lo: u64,
    hi: u64,
}

impl RealDataset {
    pub fn open(path: &Path) -> Result<Self> {
        let raw = read_raw_keys(path)?;
        let (Some(&lo), Some(&hi)) = (raw.iter().min(), raw.iter().max()) else {
            return Err(Error::EmptyInput);
        };
        if lo == hi {
            return Err(Error::DegenerateData);
        }
        Ok(RealDataset {
            path: path.to_path_buf(),
            raw,
            lo,
            hi,
        })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Uniform sample of `n` keys without replacement, mapped with the full
    /// file's normalization so that ranks are comparable across samples.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<SortedKeyArray> {
        if n < 2 || n > self.raw.len() {
            return Err(Error::NTooLarge {
                requested: n,
                available: self.raw.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked: Vec<u64> = sample(&mut rng, self.raw.len(), n).into_iter().map(|i| self.raw[i]).collect();
        normalize_with_range(&picked, self.lo, self.hi)
    }

    /// The whole file, normalized.
    pub fn full(&self) -> Result<SortedKeyArray> {
        normalize_with_range(&self.raw, self.lo, self.hi)
    }
}

pub fn load_real(path: &Path, n: usize, seed: u64) -> Result<SortedKeyArray> {
    RealDataset::open(path)?.subsample(n, seed)
}

/// `max` over rows (queries) of the mean over columns (arrays).
pub fn max_of_means(ops: &[Vec<u64>]) -> f64 {
    ops.iter()
        .filter(|row| !row.is_empty())
        .map(|row| row.iter().sum::<u64>() as f64 / row.len() as f64)
        .fold(0.0, f64::max)
}

enum Source {
    Synthetic(CdfModel),
    Real { data: RealDataset, model: CdfModel },
}

impl Source {
    fn open(spec: &DistSpec) -> Result<Self> {
        match spec {
            DistSpec::Empirical(path) => {
                let data = RealDataset::open(path)?;
                let model = CdfModel::empirical(&data.full()?);
                Ok(Source::Real { data, model })
            }
            other => Ok(Source::Synthetic(other.model()?)),
        }
    }

    fn model(&self) -> &CdfModel {
        match self {
            Source::Synthetic(m) | Source::Real { model: m, .. } => m,
        }
    }

    fn draw(&self, n: usize, seed: u64) -> Result<SortedKeyArray> {
        match self {
            Source::Synthetic(m) => Ok(sample_sorted(m, n, seed)),
            Source::Real { data, .. } => data.subsample(n, seed),
        }
    }

    fn default_rho(&self) -> Result<f64> {
        match self {
            Source::Synthetic(m) => Ok(m.pdf_bound()?.1),
            Source::Real { .. } => Ok(1.0),
        }
    }
}

/// Per-array measurements of one method.
struct Cell {
    ops: Vec<u64>,
    size: u64,
    seconds: f64,
}

fn run_method(
    method: Method,
    cfg: &ExperimentConfig,
    source: &Source,
    array: &Arc<SortedKeyArray>,
    array_id: usize,
    queries: &[f64],
) -> Result<Cell> {
    // the composite expects centered data: shift array and queries together
    let (array, queries) = if method == Method::Subexp {
        let mean = array.keys().iter().sum::<f64>() / array.len() as f64;
        let shifted = array.keys().iter().map(|x| x - mean).collect();
        let q: Vec<f64> = queries.iter().map(|x| x - mean).collect();
        (Arc::new(SortedKeyArray::from_unsorted(shifted)?), q)
    } else {
        (array.clone(), queries.to_vec())
    };

    let started = Instant::now();
    let index: Box<dyn RankIndex> = match method {
        Method::Binary => Box::new(BinaryIndex::new(array.clone())),
        Method::Pca => {
            let rho = match cfg.rho {
                Some(r) => r,
                None => source.default_rho()?,
            };
            Box::new(build_pca(array.clone(), cfg.eps, rho)?)
        }
        Method::Rds => Box::new(RdsIndex::new(array.clone(), source.model().clone())),
        Method::Rda => Box::new(rda_build(array.clone(), cfg.ratio)?),
        Method::Subexp => {
            let ratio = cfg.ratio;
            Box::new(build_subexp(
                |slice| Ok(Box::new(rda_build(slice, ratio)?) as Box<dyn RankIndex>),
                array.clone(),
            )?)
        }
    };
    let seconds = started.elapsed().as_secs_f64();

    let expected = cfg.verify.then(|| rank_oracle_batch(&array, &queries));
    let mut ops = Vec::with_capacity(queries.len());
    let mut ctx = OpContext::new();
    for (i, &q) in queries.iter().enumerate() {
        ctx.reset();
        let got = index.rank(q, &mut ctx);
        if let Some(expected) = &expected {
            if got != expected[i] {
                return Err(Error::ExactnessViolation {
                    method: method.to_string(),
                    array: array_id,
                    query: q,
                    got: got.0,
                    expected: expected[i].0,
                });
            }
        }
        ops.push(ctx.mem_ops);
    }
    Ok(Cell {
        ops,
        size: index.size_ints(),
        seconds,
    })
}

fn measure_all(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for spec in &cfg.dists {
        let source = Source::open(spec)?;
        let dist = spec.to_string();
        let dist_seed = name_hash(&dist);
        for &n in &cfg.ns {
            let queries = gen_queries(0.0, 1.0, cfg.queries, derive_seed(cfg.seed, &[1, n as u64]))?;
            // one array at a time, every method on it, then drop the array
            let per_array: Vec<Vec<Cell>> = (0..cfg.arrays)
                .into_par_iter()
                .map(|a| {
                    let seed = derive_seed(cfg.seed, &[2, dist_seed, n as u64, a as u64]);
                    let array = Arc::new(source.draw(n, seed)?);
                    cfg.methods
                        .iter()
                        .map(|&m| run_method(m, cfg, &source, &array, a, &queries))
                        .collect()
                })
                .collect::<Result<_>>()?;
            for (mi, &method) in cfg.methods.iter().enumerate() {
                let mut sums = vec![0u64; queries.len()];
                let (mut size, mut seconds) = (0u64, 0.0);
                for cells in &per_array {
                    let cell = &cells[mi];
                    for (s, o) in sums.iter_mut().zip(&cell.ops) {
                        *s += o;
                    }
                    size += cell.size;
                    seconds += cell.seconds;
                }
                let arrays = cfg.arrays as u64;
                let worst = sums.iter().copied().max().unwrap_or(0);
                rows.push(BenchRow {
                    method,
                    dist: dist.clone(),
                    n,
                    metric_ops: worst as f64 / arrays as f64,
                    index_size_ints: (size + arrays / 2) / arrays,
                    build_seconds: if cfg.timing { seconds / arrays as f64 } else { 0.0 },
                    exactness_checked: cfg.verify,
                });
            }
        }
    }
    sort_rows(&mut rows);
    Ok(rows)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| measure_all(cfg))
}

pub fn sort_rows(rows: &mut [BenchRow]) {
    rows.sort_by(|a, b| {
        (a.method.name(), &a.dist, a.n).cmp(&(b.method.name(), &b.dist, b.n))
    });
}

pub const CSV_HEADER: [&str; 6] = ["method", "dist", "n", "metric_ops", "index_size_ints", "build_seconds"];

/// Writes rows in `(method, dist, n)` order.
pub fn write_csv_to<W: std::io::Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &sorted {
        w.write_record([
            r.method.name().to_string(),
            r.dist.clone(),
            r.n.to_string(),
            r.metric_ops.to_string(),
            r.index_size_ints.to_string(),
            r.build_seconds.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_csv(rows: &[BenchRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(rows, std::io::BufWriter::new(file))
}

/// Parses a report written by [`write_csv`]. The exactness flag is not part
/// of the file and reads back as `false`.
pub fn read_csv(path: &Path) -> Result<Vec<BenchRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    if rdr.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::BadHeader(format!("unexpected CSV header in {}", path.display())));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |i: usize| Error::BadHeader(format!("bad {} `{}`", CSV_HEADER[i], field(i)));
        rows.push(BenchRow {
            method: field(0).parse()?,
            dist: field(1).to_string(),
            n: field(2).parse().map_err(|_| bad(2))?,
            metric_ops: field(3).parse().map_err(|_| bad(3))?,
            index_size_ints: field(4).parse().map_err(|_| bad(4))?,
            build_seconds: field(5).parse().map_err(|_| bad(5))?,
            exactness_checked: false,
        });
    }
    Ok(rows)
}
