//! Per-workload controller sequence: pick a configuration class, program
//! the bypass muxes, partition the problem, simulate, report. Sequences of
//! workloads aggregate into totals so whole strategies can be compared.

use crate::domain::{
    ArrayConfig, ConfigError, ConfigSpace, Dataflow, EnergyParams, GemmWorkload, SimReport,
};
use crate::oracle;
use crate::partition::{self, MuxBitVector, ReadMode};
use crate::recnet::RecModel;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// How the controller chooses a class for each workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Ask the trained recommender.
    Recommended,
    /// Exhaustive search per workload; the ceiling every recommender chases.
    Oracle,
    /// Undivided array, output-stationary, regardless of workload.
    Monolithic,
    /// One pinned class for the whole sequence.
    Fixed(usize),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Recommended => f.write_str("recommended"),
            Strategy::Oracle => f.write_str("oracle"),
            Strategy::Monolithic => f.write_str("monolithic"),
            Strategy::Fixed(id) => write!(f, "fixed:{id}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "recommended" => Ok(Strategy::Recommended),
            "oracle" => Ok(Strategy::Oracle),
            "monolithic" => Ok(Strategy::Monolithic),
            other => match other.strip_prefix("fixed:") {
                Some(id) => id
                    .parse()
                    .map(Strategy::Fixed)
                    .map_err(|e| format!("bad fixed class id {id:?}: {e}")),
                None => Err(format!(
                    "unknown strategy {s:?} (recommended|oracle|monolithic|fixed:<id>)"
                )),
            },
        }
    }
}

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("strategy 'recommended' requires a model")]
    ModelRequired,
    #[error("model was trained for space {model}, not {space}")]
    ModelSpaceMismatch { model: String, space: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone)]
pub struct WorkloadResult {
    pub workload: GemmWorkload,
    pub class_id: usize,
    pub config: ArrayConfig,
    pub mux: MuxBitVector,
    pub report: SimReport,
}

pub fn run_workload(
    w: &GemmWorkload,
    strategy: &Strategy,
    model: Option<&RecModel>,
    space: &ConfigSpace,
    mode: ReadMode,
    params: &EnergyParams,
    fill_latency: u64,
) -> Result<WorkloadResult, ControlError> {
    let class_id = match strategy {
        Strategy::Recommended => {
            let model = model.ok_or(ControlError::ModelRequired)?;
            if model.space_hash() != space.space_hash() {
                return Err(ControlError::ModelSpaceMismatch {
                    model: model.space_hash().to_string(),
                    space: space.space_hash(),
                });
            }
            model.predict(w)
        }
        Strategy::Oracle => oracle::best_config(w, space, fill_latency).0,
        Strategy::Monolithic => space.monolithic_class(Dataflow::Os),
        Strategy::Fixed(id) => {
            space.config(*id)?;
            *id
        }
    };
    let config = *space.config(class_id)?;
    let mux = partition::mux_bitvector(space.geometry(), &config)?;
    let report =
        partition::simulate_config(w, &config, space.geometry(), mode, params, fill_latency)?;
    Ok(WorkloadResult {
        workload: *w,
        class_id,
        config,
        mux,
        report,
    })
}

/// Sequence-level sums. Energy-delay product multiplies the summed energy
/// by the summed cycle count.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Totals {
    pub items: usize,
    pub cycles: u64,
    pub reads_a: u64,
    pub reads_b: u64,
    pub reads_out: u64,
    pub writes_out: u64,
    pub mac_ops: u64,
    pub energy: f64,
}

impl Totals {
    fn add(&mut self, r: &SimReport) {
        self.items += 1;
        self.cycles += r.cycles;
        self.reads_a += r.reads_a;
        self.reads_b += r.reads_b;
        self.reads_out += r.reads_out;
        self.writes_out += r.writes_out;
        self.mac_ops += r.mac_ops;
        self.energy += r.energy;
    }

    pub fn total_reads(&self) -> u64 {
        self.reads_a + self.reads_b + self.reads_out
    }

    pub fn edp(&self) -> f64 {
        self.energy * self.cycles as f64
    }
}

#[derive(Debug, Clone)]
pub struct SequenceOutcome {
    pub results: Vec<WorkloadResult>,
    pub totals: Totals,
}

pub fn run_sequence(
    workloads: &[GemmWorkload],
    strategy: &Strategy,
    model: Option<&RecModel>,
    space: &ConfigSpace,
    mode: ReadMode,
    params: &EnergyParams,
    fill_latency: u64,
) -> Result<SequenceOutcome, ControlError> {
    let mut results = Vec::with_capacity(workloads.len());
    let mut totals = Totals::default();
    for w in workloads {
        let r = run_workload(w, strategy, model, space, mode, params, fill_latency)?;
        totals.add(&r.report);
        results.push(r);
    }
    Ok(SequenceOutcome { results, totals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{enumerate_configs, ArrayGeometry};
    use crate::oracle::{gen_dataset, DatasetSpec};
    use crate::rng::Xoshiro256StarStar;

    fn space() -> ConfigSpace {
        enumerate_configs(ArrayGeometry::new(16, 16, 4).unwrap())
    }

    fn dataset() -> crate::oracle::Dataset {
        gen_dataset(&DatasetSpec {
            samples: 30,
            dim_max: 60,
            seed: 3,
            rows: 16,
            cols: 16,
            cell: 4,
            fill_latency: 0,
        })
        .unwrap()
    }

    fn zero_model(space: &ConfigSpace) -> RecModel {
        let mut rng = Xoshiro256StarStar::seed_from_u64(1);
        let mut m = RecModel::init(61, 4, 8, space.len(), space.space_hash(), &mut rng);
        m.t.zero_out();
        m
    }

    #[test]
    fn strategy_strings_round_trip() {
        for s in [
            Strategy::Recommended,
            Strategy::Oracle,
            Strategy::Monolithic,
            Strategy::Fixed(17),
        ] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert!("best".parse::<Strategy>().is_err());
        assert!("fixed:x".parse::<Strategy>().is_err());
    }

    #[test]
    fn oracle_strategy_reproduces_labels() {
        let ds = dataset();
        let space = space();
        let p = EnergyParams::default();
        for s in &ds.samples {
            let r = run_workload(
                &s.workload,
                &Strategy::Oracle,
                None,
                &space,
                ReadMode::Collated,
                &p,
                0,
            )
            .unwrap();
            assert_eq!(r.class_id, s.class_id);
            assert_eq!(r.report.cycles, s.oracle_cycles);
        }
    }

    #[test]
    fn monolithic_strategy_is_undivided_os_with_quiet_muxes() {
        let space = space();
        let p = EnergyParams::default();
        let r = run_workload(
            &GemmWorkload::new(9, 31, 7).unwrap(),
            &Strategy::Monolithic,
            None,
            &space,
            ReadMode::Replicated,
            &p,
            0,
        )
        .unwrap();
        assert!(r.config.is_monolithic());
        assert_eq!(r.config.dataflow, Dataflow::Os);
        assert_eq!(r.mux.popcount(), 0);
    }

    #[test]
    fn fixed_strategy_validates_the_class() {
        let space = space();
        let p = EnergyParams::default();
        let w = GemmWorkload::new(5, 5, 5).unwrap();
        let r = run_workload(&w, &Strategy::Fixed(4), None, &space, ReadMode::Collated, &p, 0)
            .unwrap();
        assert_eq!(r.class_id, 4);
        assert!(run_workload(
            &w,
            &Strategy::Fixed(space.len()),
            None,
            &space,
            ReadMode::Collated,
            &p,
            0
        )
        .is_err());
    }

    #[test]
    fn recommended_strategy_needs_a_matching_model() {
        let space = space();
        let p = EnergyParams::default();
        let w = GemmWorkload::new(5, 5, 5).unwrap();
        assert!(matches!(
            run_workload(&w, &Strategy::Recommended, None, &space, ReadMode::Collated, &p, 0),
            Err(ControlError::ModelRequired)
        ));

        let other = enumerate_configs(ArrayGeometry::new(8, 8, 4).unwrap());
        let foreign = zero_model(&other);
        assert!(matches!(
            run_workload(
                &w,
                &Strategy::Recommended,
                Some(&foreign),
                &space,
                ReadMode::Collated,
                &p,
                0
            ),
            Err(ControlError::ModelSpaceMismatch { .. })
        ));

        let local = zero_model(&space);
        let r = run_workload(
            &w,
            &Strategy::Recommended,
            Some(&local),
            &space,
            ReadMode::Collated,
            &p,
            0,
        )
        .unwrap();
        assert_eq!(r.class_id, 0); // zeroed net always recommends class 0
    }

    #[test]
    fn sequence_totals_are_sums() {
        let ds = dataset();
        let space = space();
        let p = EnergyParams::default();
        let workloads: Vec<GemmWorkload> = ds.samples.iter().map(|s| s.workload).collect();
        let out = run_sequence(
            &workloads,
            &Strategy::Oracle,
            None,
            &space,
            ReadMode::Collated,
            &p,
            0,
        )
        .unwrap();
        assert_eq!(out.results.len(), workloads.len());
        assert_eq!(out.totals.items, workloads.len());
        assert_eq!(
            out.totals.cycles,
            out.results.iter().map(|r| r.report.cycles).sum::<u64>()
        );
        assert_eq!(
            out.totals.reads_a,
            out.results.iter().map(|r| r.report.reads_a).sum::<u64>()
        );
        let energy_sum: f64 = out.results.iter().map(|r| r.report.energy).sum();
        assert!((out.totals.energy - energy_sum).abs() < 1e-9);
        assert_eq!(out.totals.edp(), out.totals.energy * out.totals.cycles as f64);

        let empty = run_sequence(&[], &Strategy::Oracle, None, &space, ReadMode::Collated, &p, 0)
            .unwrap();
        assert_eq!(empty.totals, Totals::default());
    }

    #[test]
    fn oracle_sequence_dominates_rigid_strategies() {
        let ds = dataset();
        let space = space();
        let p = EnergyParams::default();
        let workloads: Vec<GemmWorkload> = ds.samples.iter().map(|s| s.workload).collect();
        let oracle_total = run_sequence(
            &workloads,
            &Strategy::Oracle,
            None,
            &space,
            ReadMode::Collated,
            &p,
            0,
        )
        .unwrap()
        .totals
        .cycles;
        let mono = run_sequence(
            &workloads,
            &Strategy::Monolithic,
            None,
            &space,
            ReadMode::Collated,
            &p,
            0,
        )
        .unwrap()
        .totals
        .cycles;
        assert!(oracle_total <= mono);
        for id in [0, 7, space.len() - 1] {
            let fixed = run_sequence(
                &workloads,
                &Strategy::Fixed(id),
                None,
                &space,
                ReadMode::Collated,
                &p,
                0,
            )
            .unwrap()
            .totals
            .cycles;
            assert!(oracle_total <= fixed, "fixed:{id}");
        }
    }

    #[test]
    fn recommended_ratio_agrees_with_evaluate() {
        // The controller path and the evaluation path must price a
        // recommendation identically.
        let ds = dataset();
        let space = space();
        let p = EnergyParams::default();
        let model = zero_model(&space);
        let mut ln_sum = 0.0;
        for s in &ds.samples {
            let r = run_workload(
                &s.workload,
                &Strategy::Recommended,
                Some(&model),
                &space,
                ReadMode::Collated,
                &p,
                0,
            )
            .unwrap();
            ln_sum += (s.oracle_cycles as f64 / r.report.cycles as f64).ln();
        }
        let manual = (ln_sum / ds.samples.len() as f64).exp();
        let summary = crate::recnet::evaluate(&model, &ds.samples, &space, 0).unwrap();
        assert!((summary.geomean_ratio - manual).abs() < 1e-12);
    }
}
