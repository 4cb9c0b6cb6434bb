//! Benchmark harness: timed kNN / radius runs over several structures with
//! an exactness gate, pointer-memory accounting and parameter studies.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use twolevel_lsh::baselines::default_layer;
use twolevel_lsh::synth::SynthSpec;
use twolevel_lsh::{BoxMode, BruteForce, HashIndex, KdTree, NeighborStructure, Octree, PointCloud, QueryResult};

pub mod memory;
pub mod studies;

pub use memory::{memory_bytes, memory_report, MemoryRow};
pub use studies::{scale_study, sweep_p_avg, ScaleRow, SweepRow};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Input(#[from] twolevel_lsh::Error),
    #[error(
        "checksum mismatch on {model}: {structure} disagrees with {reference} for {kind} {parameter} at query {query}"
    )]
    ChecksumMismatch {
        model: String,
        structure: Structure,
        reference: Structure,
        kind: QueryKind,
        parameter: Param,
        query: usize,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
    #[error("cannot write csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Structure {
    Llsh,
    LlshAabb,
    KdTree,
    Octree,
    BruteForce,
}

impl Structure {
    pub const ALL: [Structure; 5] = [
        Structure::Llsh,
        Structure::LlshAabb,
        Structure::KdTree,
        Structure::Octree,
        Structure::BruteForce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Structure::Llsh => "2llsh",
            Structure::LlshAabb => "2llsh-aabb",
            Structure::KdTree => "kdtree",
            Structure::Octree => "octree",
            Structure::BruteForce => "bruteforce",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Structure::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| BenchError::Argument(format!("unknown structure {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryKind {
    Knn,
    Radius,
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryKind::Knn => "knn",
            QueryKind::Radius => "rn",
        })
    }
}

/// A k or r value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param {
    K(usize),
    R(f64),
}

impl Param {
    pub fn kind(self) -> QueryKind {
        match self {
            Param::K(_) => QueryKind::Knn,
            Param::R(_) => QueryKind::Radius,
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::K(k) => write!(f, "{k}"),
            Param::R(r) => write!(f, "{r}"),
        }
    }
}

/// A point-cloud source: a file or a `synthetic:` specifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Path(PathBuf),
    Synthetic(SynthSpec),
}

impl FromStr for Input {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        if s.starts_with("synthetic:") {
            Ok(Input::Synthetic(s.parse()?))
        } else {
            Ok(Input::Path(PathBuf::from(s)))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub cloud: Arc<PointCloud>,
}

impl Input {
    pub fn load(&self) -> Result<Model> {
        Ok(match self {
            Input::Path(p) => Model {
                name: p
                    .file_stem()
                    .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()),
                cloud: Arc::new(twolevel_lsh::load_cloud(p, None)?),
            },
            Input::Synthetic(spec) => Model {
                name: spec.label(),
                cloud: Arc::new(spec.generate()?),
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub inputs: Vec<Input>,
    pub structures: Vec<Structure>,
    pub query_count: usize,
    pub k_list: Vec<usize>,
    pub r_list: Vec<f64>,
    pub p_avg_override: Option<u32>,
    pub layer_override: Option<u32>,
    pub seed: u64,
    /// Offsets each query by up to this much per axis, moving some of them
    /// off the cloud and outside its box.
    pub jitter: Option<f64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            structures: vec![Structure::Llsh, Structure::KdTree, Structure::Octree],
            query_count: 1_000,
            k_list: (1..=5).collect(),
            r_list: vec![2.0, 4.0, 6.0, 8.0, 10.0],
            p_avg_override: None,
            layer_override: None,
            seed: 0,
            jitter: None,
        }
    }
}

/// One (model, structure, parameter) cell. Timing columns are `build_ms`
/// and `query_ms`; everything else is deterministic given the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub model: String,
    pub m: usize,
    pub structure: Structure,
    pub kind: QueryKind,
    pub parameter: Param,
    pub build_ms: f64,
    pub query_ms: f64,
    pub mean_visited: f64,
    pub pointer_bytes: u64,
    pub checksum: String,
}

pub const RECORD_HEADER: [&str; 10] = [
    "model",
    "m",
    "structure",
    "kind",
    "parameter",
    "build_ms",
    "query_ms",
    "mean_visited",
    "pointer_bytes",
    "checksum",
];

/// Columns that hold wall-clock measurements.
pub const TIMING_COLUMNS: [&str; 2] = ["build_ms", "query_ms"];

impl BenchRecord {
    fn fields(&self) -> [String; 10] {
        [
            self.model.clone(),
            self.m.to_string(),
            self.structure.to_string(),
            self.kind.to_string(),
            self.parameter.to_string(),
            format!("{:.3}", self.build_ms),
            format!("{:.3}", self.query_ms),
            format!("{:.3}", self.mean_visited),
            self.pointer_bytes.to_string(),
            self.checksum.clone(),
        ]
    }
}

pub fn write_records(records: &[BenchRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

/// Seeded query points: distinct cloud points, optionally jittered.
pub fn select_queries(cloud: &PointCloud, count: usize, seed: u64, jitter: Option<f64>) -> Vec<Point3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = count.min(cloud.len());
    let ids = sample(&mut rng, cloud.len(), n).into_vec();
    ids.into_iter()
        .map(|i| {
            let p = cloud[i as u32];
            match jitter {
                Some(j) if j > 0.0 => p + Vector3::from_fn(|_, _| rng.random_range(-j..=j)),
                _ => p,
            }
        })
        .collect()
}

/// Builds one structure, returning it with its build time in ms.
pub fn build_structure(
    structure: Structure,
    cloud: &Arc<PointCloud>,
    p_avg: Option<u32>,
    layer: Option<u32>,
) -> Result<(Box<dyn NeighborStructure>, f64)> {
    let t = Instant::now();
    let built: Box<dyn NeighborStructure> = match structure {
        Structure::Llsh => Box::new(HashIndex::build(cloud.clone(), BoxMode::Obb, p_avg)?),
        Structure::LlshAabb => Box::new(HashIndex::build(cloud.clone(), BoxMode::Aabb, p_avg)?),
        Structure::KdTree => Box::new(KdTree::build(cloud.clone())),
        Structure::Octree => Box::new(Octree::build(
            cloud.clone(),
            layer.unwrap_or_else(|| default_layer(cloud.len())),
        )?),
        Structure::BruteForce => Box::new(BruteForce::new(cloud.clone())),
    };
    Ok((built, t.elapsed().as_secs_f64() * 1e3))
}

pub fn run_query(s: &dyn NeighborStructure, q: &Point3<f64>, p: Param) -> twolevel_lsh::Result<(QueryResult, usize)> {
    let (res, stats) = match p {
        Param::K(k) => s.knn_stats(q, k)?,
        Param::R(r) => s.radius_stats(q, r)?,
    };
    Ok((res, stats.visited))
}

fn digest(res: &QueryResult) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((res.len() as u32).to_le_bytes());
    for hit in &res.hits {
        h.update(hit.id.to_le_bytes());
    }
    h.finalize().into()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs every configured cell.
///
/// Each (model, structure, parameter) cell gets an untimed pass that
/// collects results and visit counts, then a timed pass over the same
/// queries. Per-query result digests must agree across all structures of
/// a cell; brute force, when enabled, serves as the reference.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    if config.structures.is_empty() {
        return Err(BenchError::Argument("no structures selected".into()));
    }
    let mut structures = config.structures.clone();
    // the reference goes first so mismatches are reported against it
    structures.sort_by_key(|s| *s != Structure::BruteForce);
    structures.dedup();

    let params: Vec<Param> = config
        .k_list
        .iter()
        .map(|&k| Param::K(k))
        .chain(config.r_list.iter().map(|&r| Param::R(r)))
        .collect();

    let mut records = Vec::new();
    for (mi, input) in config.inputs.iter().enumerate() {
        let model = input.load()?;
        let queries = select_queries(
            &model.cloud,
            config.query_count,
            config.seed.wrapping_add(mi as u64),
            config.jitter,
        );
        let built: Vec<(Structure, Box<dyn NeighborStructure>, f64)> = structures
            .iter()
            .map(|&s| {
                build_structure(s, &model.cloud, config.p_avg_override, config.layer_override).map(|(b, ms)| (s, b, ms))
            })
            .collect::<Result<_>>()?;

        for &param in &params {
            let mut reference: Option<(Structure, Vec<[u8; 32]>)> = None;
            for (structure, index, build_ms) in &built {
                let mut digests = Vec::with_capacity(queries.len());
                let mut visited = 0usize;
                for q in &queries {
                    let (res, v) = run_query(index.as_ref(), q, param)?;
                    digests.push(digest(&res));
                    visited += v;
                }
                if let Some((ref_s, ref_d)) = &reference {
                    if let Some(query) = (0..queries.len()).find(|&i| ref_d[i] != digests[i]) {
                        return Err(BenchError::ChecksumMismatch {
                            model: model.name.clone(),
                            structure: *structure,
                            reference: *ref_s,
                            kind: param.kind(),
                            parameter: param,
                            query,
                        });
                    }
                }

                let t = Instant::now();
                for q in &queries {
                    std::hint::black_box(run_query(index.as_ref(), q, param)?);
                }
                let query_ms = t.elapsed().as_secs_f64() * 1e3;

                let mut total = Sha256::new();
                for d in &digests {
                    total.update(d);
                }
                records.push(BenchRecord {
                    model: model.name.clone(),
                    m: model.cloud.len(),
                    structure: *structure,
                    kind: param.kind(),
                    parameter: param,
                    build_ms: *build_ms,
                    query_ms,
                    mean_visited: visited as f64 / queries.len().max(1) as f64,
                    pointer_bytes: memory::BYTES_PER_POINTER * index.pointer_count(),
                    checksum: hex(&total.finalize()[..8]),
                });
                if reference.is_none() {
                    reference = Some((*structure, digests));
                }
            }
        }
    }
    Ok(records)
}

/// `(t_base − t_2llsh) / t_base × 100`: Reduct₁ against the Kd-tree,
/// Reduct₂ against the Octree.
pub fn reduct(t_base: f64, t_2llsh: f64) -> f64 {
    (t_base - t_2llsh) / t_base * 100.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductRow {
    pub model: String,
    pub kind: QueryKind,
    pub parameter: Param,
    pub t_kdtree: f64,
    pub t_octree: f64,
    pub t_2llsh: f64,
    pub reduct_1: f64,
    pub reduct_2: f64,
}

/// Table-3/4 style rows from records holding 2llsh, kdtree and octree.
pub fn reduct_rows(records: &[BenchRecord]) -> Vec<ReductRow> {
    let time = |r: &BenchRecord, s: Structure| {
        records
            .iter()
            .find(|o| o.model == r.model && o.parameter == r.parameter && o.structure == s)
            .map(|o| o.query_ms)
    };
    records
        .iter()
        .filter(|r| r.structure == Structure::Llsh)
        .filter_map(|r| {
            let (kd, oct) = (time(r, Structure::KdTree)?, time(r, Structure::Octree)?);
            Some(ReductRow {
                model: r.model.clone(),
                kind: r.kind,
                parameter: r.parameter,
                t_kdtree: kd,
                t_octree: oct,
                t_2llsh: r.query_ms,
                reduct_1: reduct(kd, r.query_ms),
                reduct_2: reduct(oct, r.query_ms),
            })
        })
        .collect()
}

pub fn write_reduct(rows: &[ReductRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model",
        "kind",
        "parameter",
        "t_kdtree_ms",
        "t_octree_ms",
        "t_2llsh_ms",
        "reduct_1",
        "reduct_2",
    ])?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.kind.to_string(),
            r.parameter.to_string(),
            format!("{:.3}", r.t_kdtree),
            format!("{:.3}", r.t_octree),
            format!("{:.3}", r.t_2llsh),
            format!("{:.3}", r.reduct_1),
            format!("{:.3}", r.reduct_2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `1..5` (inclusive) or a comma list.
pub fn parse_k_list(s: &str) -> Result<Vec<usize>> {
    let bad = || BenchError::Argument(format!("bad k list {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        );
        return Ok((a..=b).collect());
    }
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect()
}

pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| BenchError::Argument(format!("bad list item {t:?}")))
        })
        .collect()
}
