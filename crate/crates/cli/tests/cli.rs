//! End-to-end checks of the `gemmflex` binary: flag parsing, output
//! contracts, determinism across runs and thread counts, and failure
//! behavior (nonzero exit, single-line diagnostic, no partial files).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gemmflex_core::{enumerate_configs, ArrayConfig, ArrayGeometry, ConfigSpace, Dataflow};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gemmflex"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("spawn gemmflex");
    assert!(
        out.status.success(),
        "gemmflex {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn run_fail(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn gemmflex");
    assert!(!out.status.success(), "gemmflex {args:?} unexpectedly succeeded");
    out
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

#[test]
fn enumerate_emits_loadable_space() {
    let json = run_ok(&["enumerate", "--rows", "8", "--cols", "8", "--cell", "4"]);
    let space = ConfigSpace::from_json(&json).expect("stdout parses as a space");
    let local = enumerate_configs(ArrayGeometry::new(8, 8, 4).unwrap());
    assert_eq!(space.len(), local.len());
    assert_eq!(space.space_hash(), local.space_hash());
    // 2x2 cell grid: four grid shapes times three dataflows.
    assert_eq!(space.len(), 12);
}

#[test]
fn simulate_unit_workload_takes_two_cycles() {
    let out = run_ok(&[
        "simulate", "--m", "1", "--n", "1", "--k", "1", "--config", "1,1,4,4,OS", "--rows", "4",
        "--cols", "4", "--cell", "4",
    ]);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "workload_id,config_id,mode,cycles,reads_a,reads_b,reads_out,writes_out,energy,utilization"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "1x1x1");
    assert_eq!(row[2], "replicated");
    assert_eq!(row[3], "2");
}

#[test]
fn simulate_accepts_class_id_or_tuple() {
    let space = enumerate_configs(ArrayGeometry::new(4, 4, 4).unwrap());
    let mono = ArrayConfig::new(1, 1, 4, 4, Dataflow::Os);
    let id = space.class_of(&mono).unwrap().to_string();
    let base = [
        "simulate", "--m", "5", "--n", "3", "--k", "4", "--rows", "4", "--cols", "4", "--cell",
        "4", "--config",
    ];
    let by_tuple = run_ok(&[&base[..], &["1,1,4,4,OS"]].concat());
    let by_id = run_ok(&[&base[..], &[id.as_str()]].concat());
    assert_eq!(by_tuple, by_id);
    assert!(by_tuple.lines().nth(1).unwrap().starts_with("5x3x4,"));
}

#[test]
fn sweep_covers_every_workload_config_pair() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let wl = fixture("workloads.csv");
    let base = [
        "sweep",
        "--workloads",
        wl.to_str().unwrap(),
        "--rows",
        "8",
        "--cols",
        "8",
        "--cell",
        "4",
    ];
    run_ok(&[&base[..], &["--out", a.to_str().unwrap(), "--jobs", "1"]].concat());
    run_ok(&[&base[..], &["--out", b.to_str().unwrap(), "--jobs", "8"]].concat());
    let text_a = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text_a, std::fs::read_to_string(&b).unwrap(), "--jobs changed sweep bytes");
    // 12 fixture workloads x 12 configurations plus the header.
    assert_eq!(text_a.lines().count(), 1 + 12 * 12);
}

#[test]
fn gen_dataset_is_deterministic_and_jobs_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let mk = |stem: &str, jobs: &str| {
        let csv = dir.path().join(format!("{stem}.csv"));
        run_ok(&[
            "gen-dataset", "--samples", "60", "--dim-max", "64", "--seed", "7", "--rows", "8",
            "--cols", "8", "--cell", "2", "--out", csv.to_str().unwrap(), "--jobs", jobs,
        ]);
        let meta = dir.path().join(format!("{stem}.meta.json"));
        (std::fs::read(&csv).unwrap(), std::fs::read(&meta).unwrap())
    };
    let first = mk("a", "1");
    let second = mk("b", "1");
    let wide = mk("c", "8");
    assert_eq!(first, second, "same seed produced different bytes");
    assert_eq!(first, wide, "--jobs changed dataset bytes");
}

#[test]
fn train_is_bit_deterministic_and_feeds_downstream_commands() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    run_ok(&[
        "gen-dataset", "--samples", "240", "--dim-max", "32", "--seed", "9", "--rows", "4",
        "--cols", "4", "--cell", "2", "--out", data.to_str().unwrap(),
    ]);

    let m1 = dir.path().join("m1.bin");
    let m2 = dir.path().join("m2.bin");
    let metrics = dir.path().join("metrics.csv");
    let train = |model: &Path, extra: &[&str]| {
        run_ok(
            &[
                &[
                    "train", "--data", data.to_str().unwrap(), "--epochs", "3", "--batch", "16",
                    "--seed", "5", "--out", model.to_str().unwrap(),
                ][..],
                extra,
            ]
            .concat(),
        );
    };
    train(&m1, &["--metrics", metrics.to_str().unwrap()]);
    train(&m2, &[]);
    assert_eq!(
        std::fs::read(&m1).unwrap(),
        std::fs::read(&m2).unwrap(),
        "same flags produced different model bytes"
    );
    let metrics_text = std::fs::read_to_string(&metrics).unwrap();
    assert!(metrics_text.starts_with("epoch,train_loss,train_acc,val_loss,val_acc\n"));
    assert_eq!(metrics_text.lines().count(), 1 + 3);

    let eval = run_ok(&["evaluate", "--model", m1.to_str().unwrap(), "--data", data.to_str().unwrap()]);
    for key in ["samples=", "top1=", "optimal_frac=", "geomean_ratio=", "tail_frac="] {
        assert!(eval.lines().any(|l| l.starts_with(key)), "missing {key} in {eval}");
    }

    let rec = run_ok(&[
        "recommend", "--model", m1.to_str().unwrap(), "--rows", "4", "--cols", "4", "--cell",
        "2", "--m", "12", "--n", "8", "--k", "20",
    ]);
    for key in ["class_id=", "config=", "cycles=", "mux_hex="] {
        assert!(rec.lines().any(|l| l.starts_with(key)), "missing {key} in {rec}");
    }

    let wl = fixture("workloads.csv");
    let report = run_ok(&[
        "run", "--workloads", wl.to_str().unwrap(), "--rows", "4", "--cols", "4", "--cell", "2",
        "--strategy", "recommended", "--model", m1.to_str().unwrap(),
    ]);
    assert!(report.starts_with("workload_id,config_id,mode,"));
    assert_eq!(report.lines().filter(|l| !l.starts_with('#')).count(), 1 + 12);
    assert!(report.lines().any(|l| l.starts_with("# totals items=12 ")));
    assert!(report.lines().any(|l| l.starts_with("# recommender decision_cycles_on_array=")));
}

#[test]
fn run_oracle_never_loses_to_monolithic() {
    let wl = fixture("workloads.csv");
    let totals = |strategy: &str| -> u64 {
        let out = run_ok(&[
            "run", "--workloads", wl.to_str().unwrap(), "--rows", "8", "--cols", "8", "--cell",
            "2", "--strategy", strategy,
        ]);
        let line = out
            .lines()
            .find(|l| l.starts_with("# totals"))
            .expect("totals line");
        let cycles = line
            .split_whitespace()
            .find_map(|f| f.strip_prefix("cycles="))
            .expect("cycles field");
        cycles.parse().unwrap()
    };
    assert!(totals("oracle") <= totals("monolithic"));
    assert!(totals("oracle") <= totals("fixed:0"));
}

#[test]
fn quads_reports_the_reference_latency() {
    let out = run_ok(&["quads", "--units", "2", "--mults", "256"]);
    let line = out.trim();
    assert!(line.contains("total_mults=512"), "{line}");
    assert!(line.contains("widths=48,128,858"), "{line}");
    assert!(line.ends_with("cycles=516"), "{line}");
}

#[test]
fn fold_sim_matches_the_closed_form_and_logs_events() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.csv");
    let out = run_ok(&[
        "fold-sim", "--rows", "2", "--cols", "2", "--temporal", "4", "--dataflow", "OS", "--log",
        log.to_str().unwrap(),
    ]);
    // 2R + C + T - 2 with R = C = 2, T = 4.
    assert!(out.lines().any(|l| l == "cycles=8"), "{out}");
    let events = std::fs::read_to_string(&log).unwrap();
    assert!(events.starts_with("cycle,unit_row,unit_col,event\n"));
    assert!(events.lines().count() > 1);
}

#[test]
fn failures_exit_nonzero_with_one_line_and_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();

    let out = run_fail(&[
        "simulate", "--m", "1", "--n", "1", "--k", "1", "--config", "99", "--rows", "4", "--cols",
        "4", "--cell", "4",
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().count(), 1, "expected one diagnostic line, got {stderr:?}");
    assert!(stderr.starts_with("error: "), "{stderr}");

    // A rejected spec must not leave a dataset file behind.
    let csv = dir.path().join("bad.csv");
    run_fail(&[
        "gen-dataset", "--samples", "0", "--dim-max", "8", "--seed", "1", "--rows", "4", "--cols",
        "4", "--cell", "2", "--out", csv.to_str().unwrap(),
    ]);
    assert!(!csv.exists(), "failed run left {} behind", csv.display());

    // Strategy strings are validated before any work happens.
    let wl = fixture("workloads.csv");
    run_fail(&[
        "run", "--workloads", wl.to_str().unwrap(), "--rows", "4", "--cols", "4", "--cell", "2",
        "--strategy", "fastest",
    ]);

    // Recommended without a model is an error, not a silent fallback.
    run_fail(&[
        "run", "--workloads", wl.to_str().unwrap(), "--rows", "4", "--cols", "4", "--cell", "2",
        "--strategy", "recommended",
    ]);
}

#[test]
fn space_file_round_trips_through_commands() {
    let dir = tempfile::tempdir().unwrap();
    let space_path = dir.path().join("space.json");
    run_ok(&[
        "enumerate", "--rows", "8", "--cols", "8", "--cell", "4", "--out",
        space_path.to_str().unwrap(),
    ]);
    let from_file = run_ok(&[
        "simulate", "--m", "6", "--n", "6", "--k", "6", "--config", "0", "--space",
        space_path.to_str().unwrap(),
    ]);
    let from_geometry = run_ok(&[
        "simulate", "--m", "6", "--n", "6", "--k", "6", "--config", "0", "--rows", "8", "--cols",
        "8", "--cell", "4",
    ]);
    assert_eq!(from_file, from_geometry);
}
