//! Workload, geometry and configuration vocabulary shared by every model.
//!
//! A GEMM is `C[M,N] += A[M,K] * B[K,N]`. The accelerator is a
//! `total_rows x total_cols` grid of MAC units assembled from `cell x cell`
//! systolic cells; a configuration carves that grid into `grid_rows x
//! grid_cols` equal sub-arrays of `part_rows x part_cols` units each and runs
//! every sub-array with one dataflow. The configuration space of a geometry
//! is the canonical, contiguously numbered list of all such carvings; class
//! ids from this numbering are what the oracle labels and the recommender
//! predicts.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("workload dimension {name} must be >= 1")]
    ZeroWorkloadDim { name: &'static str },
    #[error("array {name} must be >= 1")]
    ZeroArrayDim { name: &'static str },
    #[error("cell size {cell} does not divide array {rows}x{cols}")]
    CellNotDividing { cell: u64, rows: u64, cols: u64 },
    #[error("partition {axis} size {part} is not a multiple of cell size {cell}")]
    PartNotCellMultiple { axis: &'static str, part: u64, cell: u64 },
    #[error("partition {axis} size {part} does not divide array extent {total}")]
    PartNotDivisor { axis: &'static str, part: u64, total: u64 },
    #[error("grid {axis} count {grid} x partition size {part} != array extent {total}")]
    GridMismatch { axis: &'static str, grid: u64, part: u64, total: u64 },
    #[error("configuration {0} is not in the space")]
    ConfigNotInSpace(String),
    #[error("class id {id} out of range (space has {len} classes)")]
    ClassOutOfRange { id: usize, len: usize },
    #[error("unknown dataflow {0:?} (expected OS, WS or IS)")]
    UnknownDataflow(String),
    #[error("malformed configuration space: {0}")]
    MalformedSpace(String),
    #[error("invalid dataset spec: {0}")]
    BadDatasetSpec(String),
    #[error("{name} must be >= 1")]
    ZeroParam { name: &'static str },
}

/// One GEMM problem instance. All three extents are at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GemmWorkload {
    pub m: u64,
    pub n: u64,
    pub k: u64,
}

impl GemmWorkload {
    pub fn new(m: u64, n: u64, k: u64) -> Result<Self, ConfigError> {
        for (name, v) in [("m", m), ("n", n), ("k", k)] {
            if v == 0 {
                return Err(ConfigError::ZeroWorkloadDim { name });
            }
        }
        Ok(Self { m, n, k })
    }

    /// Multiply-accumulate count of the full problem.
    pub fn mac_ops(&self) -> u64 {
        self.m * self.n * self.k
    }
}

impl fmt::Display for GemmWorkload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.m, self.n, self.k)
    }
}

/// Stationarity choice of a sub-array. The derive order is the canonical
/// order (OS < WS < IS) used everywhere ties or sort keys involve dataflows.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Dataflow {
    #[serde(rename = "OS")]
    Os,
    #[serde(rename = "WS")]
    Ws,
    #[serde(rename = "IS")]
    Is,
}

impl Dataflow {
    pub const ALL: [Dataflow; 3] = [Dataflow::Os, Dataflow::Ws, Dataflow::Is];

    pub fn as_str(&self) -> &'static str {
        match self {
            Dataflow::Os => "OS",
            Dataflow::Ws => "WS",
            Dataflow::Is => "IS",
        }
    }
}

impl fmt::Display for Dataflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dataflow {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "OS" => Ok(Dataflow::Os),
            "WS" => Ok(Dataflow::Ws),
            "IS" => Ok(Dataflow::Is),
            _ => Err(ConfigError::UnknownDataflow(s.to_string())),
        }
    }
}

/// Physical array: MAC grid extent plus the systolic cell edge length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArrayGeometry {
    pub total_rows: u64,
    pub total_cols: u64,
    pub cell: u64,
}

impl ArrayGeometry {
    pub fn new(total_rows: u64, total_cols: u64, cell: u64) -> Result<Self, ConfigError> {
        if total_rows == 0 {
            return Err(ConfigError::ZeroArrayDim { name: "rows" });
        }
        if total_cols == 0 {
            return Err(ConfigError::ZeroArrayDim { name: "cols" });
        }
        if cell == 0 {
            return Err(ConfigError::ZeroArrayDim { name: "cell" });
        }
        if total_rows % cell != 0 || total_cols % cell != 0 {
            return Err(ConfigError::CellNotDividing {
                cell,
                rows: total_rows,
                cols: total_cols,
            });
        }
        Ok(Self {
            total_rows,
            total_cols,
            cell,
        })
    }

    pub fn mac_count(&self) -> u64 {
        self.total_rows * self.total_cols
    }

    /// Cell-grid extent (rows, cols) in units of whole cells.
    pub fn cell_grid(&self) -> (u64, u64) {
        (self.total_rows / self.cell, self.total_cols / self.cell)
    }
}

impl fmt::Display for ArrayGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} (cell {})",
            self.total_rows, self.total_cols, self.cell
        )
    }
}

/// One carving of a geometry: a grid of identical sub-arrays plus a dataflow.
/// `grid_rows * part_rows` must equal the geometry's row extent (same for
/// columns); `validate` checks this against a concrete geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArrayConfig {
    pub grid_rows: u64,
    pub grid_cols: u64,
    pub part_rows: u64,
    pub part_cols: u64,
    pub dataflow: Dataflow,
}

impl ArrayConfig {
    pub fn new(
        grid_rows: u64,
        grid_cols: u64,
        part_rows: u64,
        part_cols: u64,
        dataflow: Dataflow,
    ) -> Self {
        Self {
            grid_rows,
            grid_cols,
            part_rows,
            part_cols,
            dataflow,
        }
    }

    pub fn is_monolithic(&self) -> bool {
        self.grid_rows == 1 && self.grid_cols == 1
    }

    pub fn validate(&self, geometry: &ArrayGeometry) -> Result<(), ConfigError> {
        let axes = [
            ("rows", self.grid_rows, self.part_rows, geometry.total_rows),
            ("cols", self.grid_cols, self.part_cols, geometry.total_cols),
        ];
        for (axis, grid, part, total) in axes {
            if part == 0 || grid == 0 {
                return Err(ConfigError::ZeroArrayDim { name: axis });
            }
            if part % geometry.cell != 0 {
                return Err(ConfigError::PartNotCellMultiple {
                    axis,
                    part,
                    cell: geometry.cell,
                });
            }
            if total % part != 0 {
                return Err(ConfigError::PartNotDivisor { axis, part, total });
            }
            if grid * part != total {
                return Err(ConfigError::GridMismatch {
                    axis,
                    grid,
                    part,
                    total,
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for ArrayConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} grid of {}x{} {}",
            self.grid_rows, self.grid_cols, self.part_rows, self.part_cols, self.dataflow
        )
    }
}

/// Canonical configuration space of a geometry. Entries are sorted by
/// `(part_rows, part_cols, dataflow)` ascending and class ids are the
/// (contiguous, 0-based) positions in that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigSpace {
    geometry: ArrayGeometry,
    configs: Vec<ArrayConfig>,
}

/// All partition edge lengths admitted by one axis: multiples of `cell` that
/// divide `total`, ascending.
fn axis_sizes(total: u64, cell: u64) -> Vec<u64> {
    (1..=total / cell)
        .map(|q| q * cell)
        .filter(|len| total % len == 0)
        .collect()
}

/// Enumerate every configuration of `geometry`: each partition edge length
/// runs over the multiples of the cell size that divide the array extent,
/// crossed with the three dataflows.
pub fn enumerate_configs(geometry: ArrayGeometry) -> ConfigSpace {
    let mut configs = Vec::new();
    for &r in &axis_sizes(geometry.total_rows, geometry.cell) {
        for &c in &axis_sizes(geometry.total_cols, geometry.cell) {
            for df in Dataflow::ALL {
                configs.push(ArrayConfig::new(
                    geometry.total_rows / r,
                    geometry.total_cols / c,
                    r,
                    c,
                    df,
                ));
            }
        }
    }
    ConfigSpace { geometry, configs }
}

impl ConfigSpace {
    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &ArrayConfig)> {
        self.configs.iter().enumerate()
    }

    pub fn config(&self, class_id: usize) -> Result<&ArrayConfig, ConfigError> {
        self.configs.get(class_id).ok_or(ConfigError::ClassOutOfRange {
            id: class_id,
            len: self.configs.len(),
        })
    }

    pub fn class_of(&self, cfg: &ArrayConfig) -> Result<usize, ConfigError> {
        self.configs
            .iter()
            .position(|c| c == cfg)
            .ok_or_else(|| ConfigError::ConfigNotInSpace(cfg.to_string()))
    }

    /// Class id of the undivided array with the given dataflow.
    pub fn monolithic_class(&self, df: Dataflow) -> usize {
        let cfg = ArrayConfig::new(
            1,
            1,
            self.geometry.total_rows,
            self.geometry.total_cols,
            df,
        );
        self.class_of(&cfg)
            .expect("enumeration always contains the monolithic shapes")
    }

    /// SHA-256 over the canonical JSON wire form, hex-encoded. Datasets and
    /// model files record this so mismatched spaces are rejected early.
    pub fn space_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_json().as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> String {
        let file = SpaceFile {
            geometry: GeometryWire {
                rows: self.geometry.total_rows,
                cols: self.geometry.total_cols,
                cell: self.geometry.cell,
            },
            configs: self
                .iter()
                .map(|(id, c)| ConfigWire {
                    id,
                    gr: c.grid_rows,
                    gc: c.grid_cols,
                    r: c.part_rows,
                    c: c.part_cols,
                    df: c.dataflow,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("space serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let file: SpaceFile = serde_json::from_str(text)
            .map_err(|e| ConfigError::MalformedSpace(e.to_string()))?;
        let geometry = ArrayGeometry::new(file.geometry.rows, file.geometry.cols, file.geometry.cell)?;
        let configs: Vec<ArrayConfig> = file
            .configs
            .iter()
            .map(|w| ArrayConfig::new(w.gr, w.gc, w.r, w.c, w.df))
            .collect();
        for (i, (wire, cfg)) in file.configs.iter().zip(&configs).enumerate() {
            if wire.id != i {
                return Err(ConfigError::MalformedSpace(format!(
                    "class ids must be contiguous from 0 (found {} at position {i})",
                    wire.id
                )));
            }
            cfg.validate(&geometry)?;
        }
        let space = ConfigSpace { geometry, configs };
        let canonical = enumerate_configs(geometry);
        if space.configs != canonical.configs {
            return Err(ConfigError::MalformedSpace(
                "configuration list does not match the canonical enumeration".into(),
            ));
        }
        Ok(space)
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    geometry: GeometryWire,
    configs: Vec<ConfigWire>,
}

#[derive(Serialize, Deserialize)]
struct GeometryWire {
    rows: u64,
    cols: u64,
    cell: u64,
}

#[derive(Serialize, Deserialize)]
struct ConfigWire {
    id: usize,
    gr: u64,
    gc: u64,
    r: u64,
    c: u64,
    df: Dataflow,
}

/// Energy model coefficients. Unit-free weights; acceptance checks only
/// ratios and orderings, so the defaults are a plausible relative scale
/// (SRAM touch ~4x a MAC, leakage a few percent of a MAC per unit-cycle).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyParams {
    pub e_mac: f64,
    pub e_read: f64,
    pub e_write: f64,
    pub p_leak: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            e_mac: 1.0,
            e_read: 4.0,
            e_write: 4.0,
            p_leak: 0.05,
        }
    }
}

impl EnergyParams {
    /// Parse TOML or JSON depending on the file extension (`.json` means
    /// JSON, everything else is treated as TOML).
    pub fn from_file(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let is_json = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("json"))
            .unwrap_or(false);
        if is_json {
            serde_json::from_str(&text).map_err(|e| format!("bad energy JSON: {e}"))
        } else {
            toml::from_str(&text).map_err(|e| format!("bad energy TOML: {e}"))
        }
    }
}

/// Aggregated outcome of running one workload under one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub cycles: u64,
    pub reads_a: u64,
    pub reads_b: u64,
    pub reads_out: u64,
    pub writes_out: u64,
    pub mac_ops: u64,
    pub energy: f64,
    pub utilization: f64,
}

impl SimReport {
    pub fn total_reads(&self) -> u64 {
        self.reads_a + self.reads_b + self.reads_out
    }
}
