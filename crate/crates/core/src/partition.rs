//! Distributes one GEMM across a grid of identical sub-arrays and aggregates
//! cycles, SRAM traffic, energy and mux state for the whole array.
//!
//! The grid axes carve the two spatially-mapped workload extents of the
//! configured dataflow (ceil-split, degenerate zero-size chunks dropped);
//! the temporal extent is never split, so the partitions run independently
//! except for the output accumulation that a K-split (WS/IS row axis)
//! requires. Sub-arrays run in parallel: whole-array latency is the slowest
//! tile, while traffic aggregates according to the read mode:
//!
//! * [`ReadMode::Replicated`] charges every sub-array for its own stream, as
//!   if each had a private SRAM port.
//! * [`ReadMode::Collated`] recognizes that sub-arrays sharing a grid row
//!   (or column) consume the identical operand stream in lockstep, so the
//!   shared stream is fetched once and multicast. Modeled at formula level:
//!   the fetch count per shared stream is the largest per-tile fold count in
//!   that grid row/column, which for equal-size partitions is exactly the
//!   replicated count divided by the grid extent. Output traffic is never
//!   collated.

use crate::analytic::{self, OperandTraffic};
use crate::domain::{
    ArrayConfig, ArrayGeometry, ConfigError, Dataflow, EnergyParams, GemmWorkload, SimReport,
};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadMode {
    Replicated,
    Collated,
}

impl fmt::Display for ReadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReadMode::Replicated => "replicated",
            ReadMode::Collated => "collated",
        })
    }
}

impl FromStr for ReadMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "replicated" => Ok(ReadMode::Replicated),
            "collated" => Ok(ReadMode::Collated),
            _ => Err(format!("unknown read mode {s:?} (replicated|collated)")),
        }
    }
}

/// One sub-array's slice of the workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tile {
    pub grid_row: u64,
    pub grid_col: u64,
    pub workload: GemmWorkload,
}

/// Ceil-split of `extent` over `parts` slots: full chunks of
/// `ceil(extent/parts)` followed by one remainder, empty slots dropped.
fn ceil_chunks(extent: u64, parts: u64) -> Vec<u64> {
    debug_assert!(extent >= 1 && parts >= 1);
    let chunk = extent.div_ceil(parts);
    let full = extent / chunk;
    let rem = extent % chunk;
    let mut out = vec![chunk; full as usize];
    if rem > 0 {
        out.push(rem);
    }
    debug_assert!(out.len() as u64 <= parts);
    out
}

/// Which workload extents the grid axes split under each dataflow; the
/// remaining extent is temporal and replicated to every tile.
fn split_dims(df: Dataflow, w: &GemmWorkload) -> (u64, u64) {
    match df {
        Dataflow::Os => (w.m, w.n),
        Dataflow::Ws => (w.k, w.n),
        Dataflow::Is => (w.k, w.m),
    }
}

fn tile_workload(df: Dataflow, w: &GemmWorkload, row_chunk: u64, col_chunk: u64) -> GemmWorkload {
    let (m, n, k) = match df {
        Dataflow::Os => (row_chunk, col_chunk, w.k),
        Dataflow::Ws => (w.m, col_chunk, row_chunk),
        Dataflow::Is => (col_chunk, w.n, row_chunk),
    };
    GemmWorkload { m, n, k }
}

/// Static assignment of workload slices to grid positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    pub workload: GemmWorkload,
    pub config: ArrayConfig,
    /// Chunk sizes of the grid-row-mapped extent; one entry per active grid
    /// row, first entries largest.
    pub row_chunks: Vec<u64>,
    /// Chunk sizes of the grid-column-mapped extent.
    pub col_chunks: Vec<u64>,
}

impl PartitionPlan {
    /// Active grid extent; a grid larger than the workload extent leaves
    /// trailing sub-arrays idle.
    pub fn active_grid(&self) -> (u64, u64) {
        (self.row_chunks.len() as u64, self.col_chunks.len() as u64)
    }

    pub fn tiles(&self) -> Vec<Tile> {
        let mut tiles = Vec::with_capacity(self.row_chunks.len() * self.col_chunks.len());
        for (a, &rc) in self.row_chunks.iter().enumerate() {
            for (b, &cc) in self.col_chunks.iter().enumerate() {
                tiles.push(Tile {
                    grid_row: a as u64,
                    grid_col: b as u64,
                    workload: tile_workload(self.config.dataflow, &self.workload, rc, cc),
                });
            }
        }
        tiles
    }
}

pub fn partition_workload(w: &GemmWorkload, cfg: &ArrayConfig) -> PartitionPlan {
    let (row_dim, col_dim) = split_dims(cfg.dataflow, w);
    PartitionPlan {
        workload: *w,
        config: *cfg,
        row_chunks: ceil_chunks(row_dim, cfg.grid_rows),
        col_chunks: ceil_chunks(col_dim, cfg.grid_cols),
    }
}

/// Distinct (row_chunk, col_chunk, multiplicity) classes of a plan. The
/// ceil-split produces at most two distinct sizes per axis, so aggregation
/// loops run over at most four classes regardless of grid extent.
fn chunk_classes(chunks: &[u64]) -> Vec<(u64, u64)> {
    let mut classes: Vec<(u64, u64)> = Vec::with_capacity(2);
    for &c in chunks {
        match classes.iter_mut().find(|(size, _)| *size == c) {
            Some((_, count)) => *count += 1,
            None => classes.push((c, 1)),
        }
    }
    classes
}

/// Whole-array latency of `w` under `cfg`: slowest tile plus the one-time
/// bypass fill charge. Cheap enough to sit inside exhaustive searches.
pub fn config_cycles(w: &GemmWorkload, cfg: &ArrayConfig, fill_latency: u64) -> u64 {
    let plan = partition_workload(w, cfg);
    let mut worst = 0;
    for &(rc, _) in &chunk_classes(&plan.row_chunks) {
        for &(cc, _) in &chunk_classes(&plan.col_chunks) {
            let tile = tile_workload(cfg.dataflow, w, rc, cc);
            let cycles =
                analytic::gemm_cycles(&tile, cfg.part_rows, cfg.part_cols, cfg.dataflow, 0);
            worst = worst.max(cycles);
        }
    }
    worst + fill_latency
}

/// Full report for one workload under one configuration of `geometry`.
pub fn simulate_config(
    w: &GemmWorkload,
    cfg: &ArrayConfig,
    geometry: &ArrayGeometry,
    mode: ReadMode,
    params: &EnergyParams,
    fill_latency: u64,
) -> Result<SimReport, ConfigError> {
    cfg.validate(geometry)?;
    let plan = partition_workload(w, cfg);
    let row_classes = chunk_classes(&plan.row_chunks);
    let col_classes = chunk_classes(&plan.col_chunks);
    let (active_rows, active_cols) = plan.active_grid();

    let mut worst_cycles = 0u64;
    let mut replicated = OperandTraffic::default();
    let mut tile_macs = 0u64;
    for &(rc, rn) in &row_classes {
        for &(cc, cn) in &col_classes {
            let tile = tile_workload(cfg.dataflow, w, rc, cc);
            let count = rn * cn;
            let cycles =
                analytic::gemm_cycles(&tile, cfg.part_rows, cfg.part_cols, cfg.dataflow, 0);
            worst_cycles = worst_cycles.max(cycles);
            let tr = analytic::gemm_reads(&tile, cfg.part_rows, cfg.part_cols, cfg.dataflow);
            replicated = replicated.add(&OperandTraffic {
                reads_a: count * tr.reads_a,
                reads_b: count * tr.reads_b,
                reads_out: count * tr.reads_out,
                writes_out: count * tr.writes_out,
            });
            tile_macs += count * tile.mac_ops();
        }
    }
    debug_assert_eq!(tile_macs, w.mac_ops(), "tiles must cover the problem exactly");

    // Largest per-tile fold counts; the first chunk of each axis is the
    // largest, so these are the multicast fetch counts under collation.
    let fc_max = plan.col_chunks[0].div_ceil(cfg.part_cols);
    let fr_max = plan.row_chunks[0].div_ceil(cfg.part_rows);

    let mut traffic = match mode {
        ReadMode::Replicated => replicated,
        ReadMode::Collated => match cfg.dataflow {
            // Both operands stream: A is shared along grid rows (fetched
            // once per column-fold epoch), B along grid columns.
            Dataflow::Os => OperandTraffic {
                reads_a: w.m * w.k * fc_max,
                reads_b: w.n * w.k * fr_max,
                reads_out: replicated.reads_out,
                writes_out: replicated.writes_out,
            },
            // Stationary B is partitioned (nothing shared to collate); the
            // streamed A is shared along grid rows.
            Dataflow::Ws => OperandTraffic {
                reads_a: w.m * w.k * fc_max,
                reads_b: replicated.reads_b,
                reads_out: replicated.reads_out,
                writes_out: replicated.writes_out,
            },
            Dataflow::Is => OperandTraffic {
                reads_a: replicated.reads_a,
                reads_b: w.n * w.k * fc_max,
                reads_out: replicated.reads_out,
                writes_out: replicated.writes_out,
            },
        },
    };

    // A K-split leaves each grid row holding a full M x N partial; merging
    // the partials costs one extra read and write of the output per merged
    // partition, in either read mode.
    if matches!(cfg.dataflow, Dataflow::Ws | Dataflow::Is) && active_rows > 1 {
        let merge = (active_rows - 1) * w.m * w.n;
        traffic.reads_out += merge;
        traffic.writes_out += merge;
    }
    let _ = active_cols;

    let cycles = worst_cycles + fill_latency;
    let mac_ops = w.mac_ops();
    let total_macs = geometry.mac_count();
    let energy = analytic::energy(&traffic, mac_ops, total_macs, cycles, params);
    Ok(SimReport {
        cycles,
        reads_a: traffic.reads_a,
        reads_b: traffic.reads_b,
        reads_out: traffic.reads_out,
        writes_out: traffic.writes_out,
        mac_ops,
        energy,
        utilization: analytic::utilization(mac_ops, total_macs, cycles),
    })
}

/// Bypass-mux state for one configuration, two bits per internal cell
/// boundary (input-select and output-select, always programmed together).
///
/// Layout contract: the horizontal-neighbor set comes first, row-major over
/// `(cell_row, boundary)` with `(cells_per_row - 1)` boundaries per cell
/// row; then the vertical-neighbor set, row-major over
/// `(boundary, cell_col)`. A bit pair is set exactly when its boundary
/// coincides with a partition edge, so the monolithic configuration is
/// all-zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MuxBitVector {
    bits: Vec<bool>,
}

impl MuxBitVector {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn get(&self, idx: usize) -> Option<bool> {
        self.bits.get(idx).copied()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Hex dump, MSB-first within each byte, zero-padded at the tail.
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.bits.len().div_ceil(8) * 2);
        for byte_bits in self.bits.chunks(8) {
            let mut byte = 0u8;
            for (i, &b) in byte_bits.iter().enumerate() {
                if b {
                    byte |= 0x80 >> i;
                }
            }
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

pub fn mux_bitvector(
    geometry: &ArrayGeometry,
    cfg: &ArrayConfig,
) -> Result<MuxBitVector, ConfigError> {
    cfg.validate(geometry)?;
    let (cell_rows, cell_cols) = geometry.cell_grid();
    let part_cell_rows = cfg.part_rows / geometry.cell;
    let part_cell_cols = cfg.part_cols / geometry.cell;

    let mut bits =
        Vec::with_capacity((2 * ((cell_cols - 1) * cell_rows + (cell_rows - 1) * cell_cols)) as usize);
    for _row in 0..cell_rows {
        for boundary in 0..cell_cols - 1 {
            let edge = (boundary + 1) % part_cell_cols == 0;
            bits.push(edge);
            bits.push(edge);
        }
    }
    for boundary in 0..cell_rows - 1 {
        for _col in 0..cell_cols {
            let edge = (boundary + 1) % part_cell_rows == 0;
            bits.push(edge);
            bits.push(edge);
        }
    }
    Ok(MuxBitVector { bits })
}
