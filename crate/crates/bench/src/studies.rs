//! Parameter sweeps: time against `p_avg` on one model, and time against
//! cloud size.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use twolevel_lsh::synth::{generate, Family};
use twolevel_lsh::{BoxMode, HashIndex, NeighborStructure};

use crate::{run_query, select_queries, Model, Param, QueryKind, Result};

/// Shared knobs of the studies.
#[derive(Debug, Clone, Copy)]
pub struct StudyOptions {
    pub queries: usize,
    pub seed: u64,
    /// Timed passes per cell; the fastest is reported.
    pub repeats: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            queries: 1_000,
            seed: 0,
            repeats: 3,
        }
    }
}

/// Total time (ms, fastest of `repeats`) and mean visits for one parameter.
fn time_param(
    index: &dyn NeighborStructure,
    queries: &[nalgebra::Point3<f64>],
    p: Param,
    repeats: usize,
) -> Result<(f64, f64)> {
    let mut visited = 0;
    for q in queries {
        visited += run_query(index, q, p)?.1;
    }
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        for q in queries {
            std::hint::black_box(run_query(index, q, p)?);
        }
        best = best.min(t.elapsed().as_secs_f64() * 1e3);
    }
    Ok((best, visited as f64 / queries.len().max(1) as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub model: String,
    pub m: usize,
    pub p_avg: u32,
    pub div: u32,
    pub kind: QueryKind,
    pub parameter: Param,
    pub query_ms: f64,
    pub mean_visited: f64,
}

/// One row per (p_avg, parameter).
pub fn sweep_p_avg(
    model: &Model,
    p_avg_list: &[u32],
    k_list: &[usize],
    r_list: &[f64],
    opts: StudyOptions,
) -> Result<Vec<SweepRow>> {
    let queries = select_queries(&model.cloud, opts.queries, opts.seed, None);
    let params: Vec<Param> = k_list
        .iter()
        .map(|&k| Param::K(k))
        .chain(r_list.iter().map(|&r| Param::R(r)))
        .collect();
    let mut rows = Vec::new();
    for &p_avg in p_avg_list {
        let index = HashIndex::build(model.cloud.clone(), BoxMode::Obb, Some(p_avg))?;
        for &p in &params {
            let (query_ms, mean_visited) = time_param(&index, &queries, p, opts.repeats)?;
            rows.push(SweepRow {
                model: model.name.clone(),
                m: model.cloud.len(),
                p_avg,
                div: index.div(),
                kind: p.kind(),
                parameter: p,
                query_ms,
                mean_visited,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep(rows: &[SweepRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model",
        "m",
        "p_avg",
        "div",
        "kind",
        "parameter",
        "query_ms",
        "mean_visited",
    ])?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.m.to_string(),
            r.p_avg.to_string(),
            r.div.to_string(),
            r.kind.to_string(),
            r.parameter.to_string(),
            format!("{:.3}", r.query_ms),
            format!("{:.3}", r.mean_visited),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleRow {
    pub m: usize,
    pub p_avg: u32,
    pub div: u32,
    /// Mean per-query time in microseconds.
    pub knn_us: f64,
    pub rn_us: f64,
    pub knn_visited: f64,
    pub rn_visited: f64,
}

/// Mean query time against cloud size on one synthetic family, with the
/// default `p_avg` of each size bucket.
pub fn scale_study(family: Family, m_list: &[usize], k: usize, r: f64, opts: StudyOptions) -> Result<Vec<ScaleRow>> {
    let mut rows = Vec::new();
    for (i, &m) in m_list.iter().enumerate() {
        let cloud = Arc::new(generate(family, m, opts.seed.wrapping_add(i as u64))?);
        let index = HashIndex::build(cloud.clone(), BoxMode::Obb, None)?;
        let queries = select_queries(&cloud, opts.queries, opts.seed, None);
        let n = queries.len().max(1) as f64;
        let (knn_ms, knn_visited) = time_param(&index, &queries, Param::K(k), opts.repeats)?;
        let (rn_ms, rn_visited) = time_param(&index, &queries, Param::R(r), opts.repeats)?;
        rows.push(ScaleRow {
            m,
            p_avg: index.p_avg(),
            div: index.div(),
            knn_us: knn_ms * 1e3 / n,
            rn_us: rn_ms * 1e3 / n,
            knn_visited,
            rn_visited,
        });
    }
    Ok(rows)
}

/// Writes nothing at all for an empty study.
pub fn write_scale(rows: &[ScaleRow], out: impl Write) -> Result<()> {
    if rows.is_empty() {
        return Ok(());
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m", "p_avg", "div", "knn_us", "rn_us", "knn_visited", "rn_visited"])?;
    for r in rows {
        w.write_record([
            r.m.to_string(),
            r.p_avg.to_string(),
            r.div.to_string(),
            format!("{:.3}", r.knn_us),
            format!("{:.3}", r.rn_us),
            format!("{:.3}", r.knn_visited),
            format!("{:.3}", r.rn_visited),
        ])?;
    }
    w.flush()?;
    Ok(())
}
