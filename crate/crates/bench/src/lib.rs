//! Shared inputs for the benchmarks: fixed workloads and dataset shapes so
//! runs stay comparable across commits.

use gemmflex_core::oracle::DatasetSpec;
use gemmflex_core::GemmWorkload;

/// A spread of GEMM shapes from skinny to square, fixed so bench history
/// stays comparable.
pub fn mixed_workloads() -> Vec<GemmWorkload> {
    [
        (1, 128, 48),
        (64, 64, 512),
        (196, 256, 1152),
        (256, 256, 64),
        (784, 128, 576),
        (3136, 64, 147),
    ]
    .into_iter()
    .map(|(m, n, k)| GemmWorkload::new(m, n, k).unwrap())
    .collect()
}

/// Small labeled dataset on the 75-class space; big enough to time an epoch,
/// small enough to keep a bench iteration under a second.
pub fn bench_dataset_spec() -> DatasetSpec {
    DatasetSpec {
        samples: 2_000,
        dim_max: 1024,
        seed: 7,
        rows: 64,
        cols: 64,
        cell: 4,
        fill_latency: 0,
    }
}
