//! Cycle estimates for running the recommender network itself, on two
//! different engines: a purpose-built bank of 1-D multiplier units with
//! binary reduction trees, and the reconfigurable systolic array it serves.
//!
//! Both estimates cover the same pipeline: a fixed 3-cycle embedding lookup
//! charge followed by the dense layers. The 1-D engine buffers the input
//! vector near the multipliers once per fold, then streams one weight row
//! per cycle through the reduction tree; the systolic estimate treats each
//! layer as a batch-1 GEMM and takes the best weight-stationary
//! configuration the array offers.

use crate::domain::{enumerate_configs, ArrayGeometry, ConfigError, Dataflow, GemmWorkload};
use crate::partition;

/// Cycles charged for the three embedding-table lookups feeding the MLP.
pub const EMBED_LOOKUP_CYCLES: u64 = 3;

/// The 1-D engine: `units` independent multiplier units, each `mults_per_unit`
/// wide with a binary reduction tree across its lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadsSpec {
    pub units: u64,
    pub mults_per_unit: u64,
}

impl QuadsSpec {
    pub fn new(units: u64, mults_per_unit: u64) -> Result<Self, ConfigError> {
        if units == 0 {
            return Err(ConfigError::ZeroParam { name: "units" });
        }
        if mults_per_unit == 0 {
            return Err(ConfigError::ZeroParam {
                name: "mults per unit",
            });
        }
        Ok(QuadsSpec {
            units,
            mults_per_unit,
        })
    }

    pub fn total_mults(&self) -> u64 {
        self.units * self.mults_per_unit
    }

    /// Reduction-tree depth: ceil(log2 of the unit width).
    pub fn tree_depth(&self) -> u64 {
        let mut depth = 0;
        while (1u64 << depth) < self.mults_per_unit {
            depth += 1;
        }
        depth
    }
}

/// One dense layer on the 1-D engine. With `f = ceil(n_in / U)` input folds:
/// `f` cycles to buffer the input, `ceil(n_out / P) * f` to stream the
/// weight rows at one element per lane per cycle, plus tree depth and one
/// drain cycle of pipeline fill.
pub fn dense_layer_cycles(spec: &QuadsSpec, n_in: u64, n_out: u64) -> u64 {
    debug_assert!(n_in >= 1 && n_out >= 1);
    let folds = n_in.div_ceil(spec.mults_per_unit);
    folds + n_out.div_ceil(spec.units) * folds + spec.tree_depth() + 1
}

/// Whole recommender on the 1-D engine. `widths` lists the layer interface
/// sizes, input first: `[input, hidden, ..., classes]`.
pub fn quads_mlp_cycles(spec: &QuadsSpec, widths: &[u64]) -> u64 {
    debug_assert!(widths.len() >= 2);
    let mut cycles = EMBED_LOOKUP_CYCLES;
    for pair in widths.windows(2) {
        cycles += dense_layer_cycles(spec, pair[0], pair[1]);
    }
    cycles
}

/// One dense layer as a batch-1 GEMM on the array: the cheapest
/// weight-stationary configuration in the geometry's space.
pub fn systolic_layer_cycles(geometry: ArrayGeometry, n_in: u64, n_out: u64) -> u64 {
    debug_assert!(n_in >= 1 && n_out >= 1);
    let layer = GemmWorkload {
        m: 1,
        n: n_out,
        k: n_in,
    };
    enumerate_configs(geometry)
        .iter()
        .filter(|(_, c)| c.dataflow == Dataflow::Ws)
        .map(|(_, c)| partition::config_cycles(&layer, c, 0))
        .min()
        .expect("every space carries WS configurations")
}

/// Whole recommender on the array, layers back to back.
pub fn systolic_mlp_cycles(geometry: ArrayGeometry, widths: &[u64]) -> u64 {
    debug_assert!(widths.len() >= 2);
    let mut cycles = EMBED_LOOKUP_CYCLES;
    for pair in widths.windows(2) {
        cycles += systolic_layer_cycles(geometry, pair[0], pair[1]);
    }
    cycles
}

/// Layer interface widths of a recommender with the given embedding width,
/// hidden size and class count (three tables concatenate on input).
pub fn recommender_widths(embed_dim: u64, hidden: u64, classes: u64) -> [u64; 3] {
    [3 * embed_dim, hidden, classes]
}
