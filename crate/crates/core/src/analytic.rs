//! Closed-form latency and SRAM traffic for one GEMM on one systolic array.
//!
//! The array is `rows x cols` MACs running a single dataflow. A GEMM whose
//! spatial extents exceed the array is serialized into folds: the row-mapped
//! extent splits into `FR = ceil(D_r / rows)` pieces, the column-mapped
//! extent into `FC = ceil(D_c / cols)`, and each of the `FR * FC` folds runs
//! the per-fold schedule simulated in [`crate::event_sim`]. Every value here
//! is checked against that simulator at small scale.

use crate::domain::{Dataflow, GemmWorkload};

/// How the three GEMM extents land on the array for each dataflow:
/// `(row-mapped, column-mapped, temporal)`.
///
/// * OS keeps the output tile in place: rows take M, columns take N and K
///   streams through.
/// * WS pins the B operand: rows take K, columns take N and M streams.
/// * IS pins the A operand: rows take K, columns take M and N streams.
pub fn map_dims(df: Dataflow, w: &GemmWorkload) -> (u64, u64, u64) {
    match df {
        Dataflow::Os => (w.m, w.n, w.k),
        Dataflow::Ws => (w.k, w.n, w.m),
        Dataflow::Is => (w.k, w.m, w.n),
    }
}

/// Latency of one fold occupying `rows x cols` PEs with temporal depth
/// `temporal`: skewed injection, one MAC wavefront per cycle, serial drain.
/// Identical for all three dataflows; ground truth is the event simulator.
pub fn fold_cycles(rows: u64, cols: u64, temporal: u64) -> u64 {
    debug_assert!(rows >= 1 && cols >= 1 && temporal >= 1);
    2 * rows + cols + temporal - 2
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Occupied edge lengths of the serialized folds along one axis: `count - 1`
/// full pieces of `edge` and one remainder piece. Returned as
/// `(full_edge, full_count, last_edge)`; `full_count` includes the last
/// piece when it is full.
fn fold_edges(extent: u64, edge: u64) -> (u64, u64, u64) {
    let folds = ceil_div(extent, edge);
    let last = extent - (folds - 1) * edge;
    if last == edge {
        (edge, folds, edge)
    } else {
        (edge, folds - 1, last)
    }
}

/// Total cycles for one GEMM on one `rows x cols` array.
///
/// This is the fold sum in closed form. With `FR`/`FC` fold counts, occupied
/// edges `R'_a`/`C'_b` summing to `D_r`/`D_c`, the per-fold latencies add to
///
/// ```text
/// sum_{a,b} (2 R'_a + C'_b + D_t - 2)
///   = 2 FC D_r + FR D_c + FR FC D_t - 2 FR FC
/// ```
///
/// `fill_latency` is charged once per GEMM and models the extra pipeline
/// depth of bypass links when the array is carved out of a larger grid.
pub fn gemm_cycles(
    w: &GemmWorkload,
    rows: u64,
    cols: u64,
    df: Dataflow,
    fill_latency: u64,
) -> u64 {
    debug_assert!(rows >= 1 && cols >= 1);
    let (d_r, d_c, d_t) = map_dims(df, w);
    let fr = ceil_div(d_r, rows);
    let fc = ceil_div(d_c, cols);
    // Each per-fold latency is >= 2, so the subtrahend can never underflow.
    fill_latency + 2 * fc * d_r + fr * d_c + fr * fc * d_t - 2 * fr * fc
}

/// SRAM word traffic of one GEMM on one array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OperandTraffic {
    pub reads_a: u64,
    pub reads_b: u64,
    pub reads_out: u64,
    pub writes_out: u64,
}

impl OperandTraffic {
    pub fn total_reads(&self) -> u64 {
        self.reads_a + self.reads_b + self.reads_out
    }

    pub fn add(&self, other: &OperandTraffic) -> OperandTraffic {
        OperandTraffic {
            reads_a: self.reads_a + other.reads_a,
            reads_b: self.reads_b + other.reads_b,
            reads_out: self.reads_out + other.reads_out,
            writes_out: self.writes_out + other.writes_out,
        }
    }
}

/// Reads are counted at array injection, so an operand re-entering for every
/// fold of the orthogonal axis is counted once per such fold:
///
/// * OS streams both operands: A re-enters per column fold, B per row fold;
///   the finished tile is written once and never read back.
/// * WS holds B resident (each element read exactly once) while A re-enters
///   per column fold; every row fold emits a full M x N partial, so the
///   partial tile is written `FR` times and read back `FR - 1` times.
/// * IS mirrors WS with A resident and B streaming.
pub fn gemm_reads(w: &GemmWorkload, rows: u64, cols: u64, df: Dataflow) -> OperandTraffic {
    let (d_r, d_c, _) = map_dims(df, w);
    let fr = ceil_div(d_r, rows);
    let fc = ceil_div(d_c, cols);
    match df {
        Dataflow::Os => OperandTraffic {
            reads_a: fc * w.m * w.k,
            reads_b: fr * w.n * w.k,
            reads_out: 0,
            writes_out: w.m * w.n,
        },
        Dataflow::Ws => OperandTraffic {
            reads_a: fc * w.m * w.k,
            reads_b: w.k * w.n,
            reads_out: (fr - 1) * w.m * w.n,
            writes_out: fr * w.m * w.n,
        },
        Dataflow::Is => OperandTraffic {
            reads_a: w.k * w.m,
            reads_b: fc * w.n * w.k,
            reads_out: (fr - 1) * w.m * w.n,
            writes_out: fr * w.m * w.n,
        },
    }
}

/// Compulsory input traffic: every A and B element must be read at least
/// once no matter the schedule.
pub fn min_reads(w: &GemmWorkload) -> u64 {
    w.m * w.k + w.k * w.n
}

/// Energy in MAC-equivalent units: arithmetic, SRAM touches, and leakage
/// integrated over every provisioned MAC for the whole runtime.
pub fn energy(
    traffic: &OperandTraffic,
    mac_ops: u64,
    total_macs: u64,
    cycles: u64,
    p: &crate::domain::EnergyParams,
) -> f64 {
    p.e_mac * mac_ops as f64
        + p.e_read * traffic.total_reads() as f64
        + p.e_write * traffic.writes_out as f64
        + p.p_leak * total_macs as f64 * cycles as f64
}

pub fn edp(energy: f64, cycles: u64) -> f64 {
    energy * cycles as f64
}

/// Fraction of provisioned MAC-cycles doing useful work.
pub fn utilization(mac_ops: u64, total_macs: u64, cycles: u64) -> f64 {
    mac_ops as f64 / (total_macs as f64 * cycles as f64)
}

/// Visit every fold of a GEMM as `(occupied_rows, occupied_cols, count)`
/// classes; the edge pieces make at most four distinct classes. Summing
/// per-class values times `count` reproduces any per-fold aggregate.
pub fn for_each_fold_class<F: FnMut(u64, u64, u64)>(
    w: &GemmWorkload,
    rows: u64,
    cols: u64,
    df: Dataflow,
    mut visit: F,
) {
    let (d_r, d_c, _) = map_dims(df, w);
    let (r_edge, r_full, r_last) = fold_edges(d_r, rows);
    let (c_edge, c_full, c_last) = fold_edges(d_c, cols);
    let r_classes = [(r_edge, r_full), (r_last, u64::from(r_last != r_edge))];
    let c_classes = [(c_edge, c_full), (c_last, u64::from(c_last != c_edge))];
    for &(re, rc) in &r_classes {
        for &(ce, cc) in &c_classes {
            if rc * cc > 0 {
                visit(re, ce, rc * cc);
            }
        }
    }
}
