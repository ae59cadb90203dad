//! Performance laboratory for reconfigurable systolic GEMM accelerators.
//!
//! The hardware being modeled is a rows x cols grid of multiply-accumulate
//! units built from small "systolic cells" (4x4 by default). Bypass muxes on
//! cell boundaries let the grid run either as one monolithic array or as a
//! grid of independent sub-arrays, each working on a slice of the same GEMM.
//! Whether splitting helps depends on the workload shape, so the crate also
//! ships an oracle (exhaustive search over the configuration space) and a
//! small embedding/MLP classifier trained to predict the oracle's choice from
//! `(M, N, K)` alone.
//!
//! Module map:
//!
//! * [`domain`] - workload, geometry and configuration types; config-space
//!   enumeration.
//! * [`event_sim`] - cycle-accurate simulator for a single fold on a small
//!   array; ground truth for the closed forms.
//! * [`analytic`] - closed-form cycle counts and SRAM traffic for one array.
//! * [`partition`] - splits a GEMM across a grid of sub-arrays, aggregates
//!   cycles/traffic (with optional read collation) and derives mux bits.
//! * [`oracle`] - exhaustive best-configuration search and labeled dataset
//!   generation.
//! * [`recnet`] - the recommendation network: three embedding tables feeding
//!   a one-hidden-layer MLP, trained from scratch with Adam.
//! * [`quads`] - cycle model for a 1-D multiply/reduce vector engine used to
//!   estimate how fast the recommender itself runs in hardware.
//! * [`control`] - end-to-end control loop: recommend, set mux bits, run.
//! * [`report`] - frozen CSV headers and row formats for emitted artifacts.
//! * [`rng`] - the fixed, documented PRNG behind every randomized artifact.

pub mod analytic;
pub mod control;
pub mod domain;
pub mod event_sim;
pub mod oracle;
pub mod partition;
pub mod quads;
pub mod recnet;
pub mod report;
pub mod rng;

pub use domain::{
    enumerate_configs, ArrayConfig, ArrayGeometry, ConfigError, ConfigSpace, Dataflow,
    EnergyParams, GemmWorkload, SimReport,
};
pub use partition::ReadMode;
