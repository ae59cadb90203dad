//! Exhaustive-search labeling: for a workload, the oracle walks the whole
//! configuration space and returns the fastest class. Datasets of labeled
//! random workloads are what the recommender trains on.
//!
//! Dataset files come in pairs: `<name>.csv` holds the samples
//! (`m,n,k,class_id,oracle_cycles`) and `<name>.meta.json` holds the
//! generator spec plus the hash of the configuration space the labels refer
//! to, so a reader can refuse mismatched spaces.

use crate::domain::{ArrayGeometry, ConfigError, ConfigSpace, EnergyParams, GemmWorkload};
use crate::partition::{self, ReadMode};
use crate::rng::Xoshiro256StarStar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DATASET_HEADER: &str = "m,n,k,class_id,oracle_cycles";

/// Fastest class for `w`: minimum whole-array cycles, ties resolved to the
/// lowest class id. Returns `(class_id, cycles)`.
pub fn best_config(w: &GemmWorkload, space: &ConfigSpace, fill_latency: u64) -> (usize, u64) {
    let mut best = (0usize, u64::MAX);
    for (id, cfg) in space.iter() {
        let cycles = partition::config_cycles(w, cfg, fill_latency);
        if cycles < best.1 {
            best = (id, cycles);
        }
    }
    best
}

/// Minimum-energy class under a fixed read mode; ties go to the lowest id.
pub fn best_config_by_energy(
    w: &GemmWorkload,
    space: &ConfigSpace,
    mode: ReadMode,
    params: &EnergyParams,
    fill_latency: u64,
) -> Result<(usize, f64), ConfigError> {
    let mut best: Option<(usize, f64)> = None;
    for (id, cfg) in space.iter() {
        let report =
            partition::simulate_config(w, cfg, space.geometry(), mode, params, fill_latency)?;
        if best.map_or(true, |(_, e)| report.energy < e) {
            best = Some((id, report.energy));
        }
    }
    Ok(best.expect("configuration space is never empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    #[serde(flatten)]
    pub workload: GemmWorkload,
    pub class_id: usize,
    pub oracle_cycles: u64,
}

/// Everything needed to regenerate a dataset bit for bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub samples: u64,
    /// Workload extents are drawn uniformly from `1..=dim_max`.
    pub dim_max: u64,
    pub seed: u64,
    pub rows: u64,
    pub cols: u64,
    pub cell: u64,
    #[serde(default)]
    pub fill_latency: u64,
}

impl DatasetSpec {
    pub fn geometry(&self) -> Result<ArrayGeometry, ConfigError> {
        ArrayGeometry::new(self.rows, self.cols, self.cell)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.samples == 0 {
            return Err(ConfigError::BadDatasetSpec("samples must be >= 1".into()));
        }
        if self.dim_max == 0 {
            return Err(ConfigError::BadDatasetSpec("dim_max must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub space_hash: String,
    pub samples: Vec<LabeledSample>,
}

/// Draw and label `spec.samples` workloads. The stream of draws is fixed by
/// the seed (three draws per sample, in m, n, k order) and labeling runs in
/// parallel without perturbing sample order, so output is identical for any
/// worker count.
pub fn gen_dataset(spec: &DatasetSpec) -> Result<Dataset, ConfigError> {
    spec.validate()?;
    let geometry = spec.geometry()?;
    let space = crate::domain::enumerate_configs(geometry);

    let mut rng = Xoshiro256StarStar::seed_from_u64(spec.seed);
    let workloads: Vec<GemmWorkload> = (0..spec.samples)
        .map(|_| {
            let m = rng.next_range(1, spec.dim_max);
            let n = rng.next_range(1, spec.dim_max);
            let k = rng.next_range(1, spec.dim_max);
            GemmWorkload { m, n, k }
        })
        .collect();

    let samples = workloads
        .par_iter()
        .map(|w| {
            let (class_id, oracle_cycles) = best_config(w, &space, spec.fill_latency);
            LabeledSample {
                workload: *w,
                class_id,
                oracle_cycles,
            }
        })
        .collect();

    Ok(Dataset {
        spec: spec.clone(),
        space_hash: space.space_hash(),
        samples,
    })
}

#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("dataset header mismatch: expected {DATASET_HEADER:?}, got {0:?}")]
    Header(String),
    #[error("dataset line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dataset metadata: {0}")]
    Meta(#[from] serde_json::Error),
    #[error("dataset was labeled for a different configuration space (meta hash {meta}, space hash {space})")]
    SpaceMismatch { meta: String, space: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Sidecar path: `foo.csv` -> `foo.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

#[derive(Serialize, Deserialize)]
struct MetaFile {
    #[serde(flatten)]
    spec: DatasetSpec,
    space_hash: String,
}

pub fn dataset_to_csv(ds: &Dataset) -> String {
    let mut out = String::with_capacity(ds.samples.len() * 24 + DATASET_HEADER.len() + 1);
    out.push_str(DATASET_HEADER);
    out.push('\n');
    for s in &ds.samples {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.workload.m, s.workload.n, s.workload.k, s.class_id, s.oracle_cycles
        )
        .expect("string write cannot fail");
    }
    out
}

pub fn meta_to_json(ds: &Dataset) -> String {
    let meta = MetaFile {
        spec: ds.spec.clone(),
        space_hash: ds.space_hash.clone(),
    };
    let mut s = serde_json::to_string_pretty(&meta).expect("meta serializes");
    s.push('\n');
    s
}

/// Writes `<path>` (CSV) and its `.meta.json` sidecar.
pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<(), DatasetIoError> {
    std::fs::write(path, dataset_to_csv(ds))?;
    std::fs::write(meta_path(path), meta_to_json(ds))?;
    Ok(())
}

/// Reads a dataset pair back and re-checks label integrity: the sidecar's
/// space hash must match the space enumerated from the sidecar's geometry,
/// and every class id must be inside that space.
pub fn read_dataset(path: &Path) -> Result<Dataset, DatasetIoError> {
    let meta: MetaFile = serde_json::from_str(&std::fs::read_to_string(meta_path(path))?)?;
    let space = crate::domain::enumerate_configs(meta.spec.geometry()?);
    if space.space_hash() != meta.space_hash {
        return Err(DatasetIoError::SpaceMismatch {
            meta: meta.space_hash,
            space: space.space_hash(),
        });
    }

    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != DATASET_HEADER {
        return Err(DatasetIoError::Header(header.to_string()));
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let lineno = i + 2;
        let mut fields = line.split(',');
        let mut next_u64 = |name: &str| -> Result<u64, DatasetIoError> {
            fields
                .next()
                .ok_or_else(|| DatasetIoError::Parse {
                    line: lineno,
                    msg: format!("missing field {name}"),
                })?
                .trim()
                .parse()
                .map_err(|e| DatasetIoError::Parse {
                    line: lineno,
                    msg: format!("field {name}: {e}"),
                })
        };
        let m = next_u64("m")?;
        let n = next_u64("n")?;
        let k = next_u64("k")?;
        let class_id = next_u64("class_id")? as usize;
        let oracle_cycles = next_u64("oracle_cycles")?;
        if class_id >= space.len() {
            return Err(DatasetIoError::Parse {
                line: lineno,
                msg: format!("class id {class_id} outside space of {}", space.len()),
            });
        }
        samples.push(LabeledSample {
            workload: GemmWorkload::new(m, n, k).map_err(|e| DatasetIoError::Parse {
                line: lineno,
                msg: e.to_string(),
            })?,
            class_id,
            oracle_cycles,
        });
    }
    Ok(Dataset {
        spec: meta.spec,
        space_hash: meta.space_hash,
        samples,
    })
}
