//! Pointer-memory model: every pointer costs 4 bytes regardless of host.

use std::io::Write;

use twolevel_lsh::baselines::default_layer;
use twolevel_lsh::{select_div, HashIndex, KdTree, Octree};

use crate::{Result, Structure};

pub const BYTES_PER_POINTER: u64 = 4;

/// Pointer count of `structure` over `m` points. `p_avg` and `layer`
/// default to the size-bucket values.
pub fn pointer_count(structure: Structure, m: usize, p_avg: Option<u32>, layer: Option<u32>) -> (u64, u32) {
    match structure {
        Structure::Llsh | Structure::LlshAabb => {
            let (div, _) = select_div(m, p_avg);
            (HashIndex::pointer_count_for(m, div), div)
        }
        Structure::KdTree => (KdTree::pointer_count_for(m), 0),
        Structure::Octree => {
            let layer = layer.unwrap_or_else(|| default_layer(m));
            (Octree::pointer_count_for(m, layer), layer)
        }
        Structure::BruteForce => (m as u64, 0),
    }
}

pub fn memory_bytes(structure: Structure, m: usize, p_avg: Option<u32>, layer: Option<u32>) -> u64 {
    BYTES_PER_POINTER * pointer_count(structure, m, p_avg, layer).0
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryRow {
    pub m: usize,
    pub structure: Structure,
    /// `div` for the hash index, `layer` for the octree, 0 otherwise.
    pub setting: u32,
    pub pointers: u64,
    pub bytes: u64,
}

impl MemoryRow {
    pub fn kib(&self) -> f64 {
        self.bytes as f64 / 1024.0
    }
}

pub fn memory_report(
    m_list: &[usize],
    structures: &[Structure],
    p_avg: Option<u32>,
    layer: Option<u32>,
) -> Vec<MemoryRow> {
    m_list
        .iter()
        .flat_map(|&m| {
            structures.iter().map(move |&s| {
                let (pointers, setting) = pointer_count(s, m, p_avg, layer);
                MemoryRow {
                    m,
                    structure: s,
                    setting,
                    pointers,
                    bytes: BYTES_PER_POINTER * pointers,
                }
            })
        })
        .collect()
}

pub fn write_memory(rows: &[MemoryRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m", "structure", "setting", "pointers", "bytes", "kib"])?;
    for r in rows {
        w.write_record([
            r.m.to_string(),
            r.structure.to_string(),
            r.setting.to_string(),
            r.pointers.to_string(),
            r.bytes.to_string(),
            format!("{:.2}", r.kib()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
