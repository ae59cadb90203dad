//! `gemmflex`: command-line front end over the array laboratory.
//!
//! Every subcommand is a pure function of its flags and input files. Output
//! files are written atomically (temp file in the target directory, then
//! rename), so an interrupted or failing run never leaves a truncated
//! artifact behind. Errors print a single `error: ...` line on stderr and
//! exit nonzero.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use gemmflex_core::control::{self, Strategy};
use gemmflex_core::event_sim::{simulate_fold, FoldSpec, SimLimits};
use gemmflex_core::oracle::{self, DatasetSpec};
use gemmflex_core::partition;
use gemmflex_core::quads::{self, QuadsSpec};
use gemmflex_core::recnet::{self, RecModel, TrainConfig};
use gemmflex_core::report;
use gemmflex_core::{
    enumerate_configs, ArrayConfig, ArrayGeometry, ConfigSpace, Dataflow, EnergyParams,
    GemmWorkload, ReadMode,
};

#[derive(Parser)]
#[command(name = "gemmflex", version, about = "Reconfigurable systolic array laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List every legal partition of an array as a configuration space.
    Enumerate(EnumerateArgs),
    /// Run one workload under one configuration and print a report row.
    Simulate(SimulateArgs),
    /// Run every workload in a file under every configuration.
    Sweep(SweepArgs),
    /// Sample random workloads and label each with its best configuration.
    GenDataset(GenDatasetArgs),
    /// Fit the configuration recommender on a labeled dataset.
    Train(TrainArgs),
    /// Score a trained recommender against dataset labels.
    Evaluate(EvaluateArgs),
    /// Ask a trained recommender for the configuration of one workload.
    Recommend(RecommendArgs),
    /// Execute a workload sequence under a reconfiguration strategy.
    Run(RunArgs),
    /// Cost the recommender on a lookup-table accelerator and on the array.
    Quads(QuadsArgs),
    /// Cycle-level simulation of a single fold (debug aid).
    FoldSim(FoldSimArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::GenDataset(a) => cmd_gen_dataset(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Recommend(a) => cmd_recommend(a),
        Command::Run(a) => cmd_run(a),
        Command::Quads(a) => cmd_quads(a),
        Command::FoldSim(a) => cmd_fold_sim(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

/// Where a configuration space comes from: either a JSON file produced by
/// `enumerate`, or an array geometry enumerated on the fly.
#[derive(Args)]
struct SpaceSource {
    /// Configuration-space JSON written by `enumerate`.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["rows", "cols", "cell"])]
    space: Option<PathBuf>,
    /// Array height in PEs (used with --cols and --cell instead of --space).
    #[arg(long, requires_all = ["cols", "cell"])]
    rows: Option<u64>,
    /// Array width in PEs.
    #[arg(long, requires_all = ["rows", "cell"])]
    cols: Option<u64>,
    /// Side length of the square cell granule.
    #[arg(long, requires_all = ["rows", "cols"])]
    cell: Option<u64>,
}

impl SpaceSource {
    fn load(&self) -> Result<ConfigSpace> {
        match (&self.space, self.rows, self.cols, self.cell) {
            (Some(path), ..) => load_space(path),
            (None, Some(r), Some(c), Some(cell)) => Ok(enumerate_configs(ArrayGeometry::new(r, c, cell)?)),
            _ => bail!("provide either --space FILE or all of --rows/--cols/--cell"),
        }
    }
}

fn load_space(path: &Path) -> Result<ConfigSpace> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ConfigSpace::from_json(&text)
        .with_context(|| format!("parsing configuration space {}", path.display()))
}

/// Write via a sibling temp file and rename so readers never observe a
/// partial file and failures leave the previous contents intact.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file beside {}", path.display()))?;
    tmp.write_all(bytes)
        .with_context(|| format!("writing {}", path.display()))?;
    tmp.persist(path)
        .map_err(|e| anyhow!("committing {}: {}", path.display(), e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, contents.as_bytes()),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn parse_mode(s: &str) -> Result<ReadMode> {
    s.parse().map_err(|e: String| anyhow!(e))
}

/// `--config` accepts either a class id or an explicit `gr,gc,r,c,df` tuple;
/// tuples are resolved back to their class id within the space.
fn resolve_config(s: &str, space: &ConfigSpace) -> Result<usize> {
    if let Ok(id) = s.parse::<usize>() {
        space.config(id)?;
        return Ok(id);
    }
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        bail!("--config takes a class id or gr,gc,rows,cols,dataflow (got {s:?})");
    }
    let mut dims = [0u64; 4];
    for (slot, part) in dims.iter_mut().zip(&parts) {
        *slot = part
            .parse()
            .map_err(|_| anyhow!("bad number {part:?} in --config {s:?}"))?;
    }
    let df: Dataflow = parts[4].parse()?;
    let cfg = ArrayConfig::new(dims[0], dims[1], dims[2], dims[3], df);
    Ok(space.class_of(&cfg)?)
}

fn load_energy(path: Option<&Path>) -> Result<EnergyParams> {
    match path {
        Some(p) => EnergyParams::from_file(p).map_err(|e| anyhow!(e)),
        None => Ok(EnergyParams::default()),
    }
}

/// Size the global worker pool. `None` keeps rayon's default; results must
/// not depend on the choice, only wall time may.
fn init_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            bail!("--jobs must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("initializing worker pool")?;
    }
    Ok(())
}

#[derive(Args)]
struct EnumerateArgs {
    /// Array height in PEs.
    #[arg(long)]
    rows: u64,
    /// Array width in PEs.
    #[arg(long)]
    cols: u64,
    /// Side length of the square cell granule.
    #[arg(long)]
    cell: u64,
    /// Write the space JSON here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn cmd_enumerate(a: EnumerateArgs) -> Result<()> {
    let space = enumerate_configs(ArrayGeometry::new(a.rows, a.cols, a.cell)?);
    let mut json = space.to_json();
    if !json.ends_with('\n') {
        json.push('\n');
    }
    emit(a.out.as_deref(), &json)
}

#[derive(Args)]
struct SimulateArgs {
    /// Output rows of the GEMM.
    #[arg(long)]
    m: u64,
    /// Output columns of the GEMM.
    #[arg(long)]
    n: u64,
    /// Reduction depth of the GEMM.
    #[arg(long)]
    k: u64,
    /// Class id or gr,gc,rows,cols,dataflow tuple.
    #[arg(long)]
    config: String,
    /// Off-chip read accounting: replicated or collated.
    #[arg(long, default_value = "replicated")]
    mode: String,
    #[command(flatten)]
    space: SpaceSource,
    /// Energy coefficients (TOML or JSON); defaults are built in.
    #[arg(long, value_name = "FILE")]
    energy: Option<PathBuf>,
    /// Extra pipeline-fill cycles charged once per fold.
    #[arg(long, default_value_t = 0)]
    fill: u64,
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let space = a.space.load()?;
    let id = resolve_config(&a.config, &space)?;
    let mode = parse_mode(&a.mode)?;
    let params = load_energy(a.energy.as_deref())?;
    let w = GemmWorkload::new(a.m, a.n, a.k)?;
    let cfg = space.config(id)?;
    let rep = partition::simulate_config(&w, cfg, space.geometry(), mode, &params, a.fill)?;
    println!("{}", report::REPORT_HEADER);
    println!("{}", report::report_row(&w.to_string(), id, mode, &rep));
    Ok(())
}

#[derive(Args)]
struct SweepArgs {
    /// Workload CSV with header name,m,n,k.
    #[arg(long, value_name = "FILE")]
    workloads: PathBuf,
    #[command(flatten)]
    space: SpaceSource,
    /// Off-chip read accounting: replicated or collated.
    #[arg(long, default_value = "replicated")]
    mode: String,
    /// Energy coefficients (TOML or JSON); defaults are built in.
    #[arg(long, value_name = "FILE")]
    energy: Option<PathBuf>,
    /// Extra pipeline-fill cycles charged once per fold.
    #[arg(long, default_value_t = 0)]
    fill: u64,
    /// Write the report CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Worker threads; output is identical for any value.
    #[arg(long)]
    jobs: Option<usize>,
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    init_jobs(a.jobs)?;
    let space = a.space.load()?;
    let mode = parse_mode(&a.mode)?;
    let params = load_energy(a.energy.as_deref())?;
    let text = std::fs::read_to_string(&a.workloads)
        .with_context(|| format!("reading {}", a.workloads.display()))?;
    let list = report::parse_workloads(&text)?;

    // One block of rows per workload, computed in parallel; collect preserves
    // input order so the CSV is byte-identical for any --jobs value.
    let blocks: Vec<String> = list
        .par_iter()
        .map(|(name, w)| {
            let mut block = String::new();
            for (id, cfg) in space.iter() {
                let rep =
                    partition::simulate_config(w, cfg, space.geometry(), mode, &params, a.fill)?;
                writeln!(block, "{}", report::report_row(name, id, mode, &rep)).unwrap();
            }
            Ok(block)
        })
        .collect::<Result<_>>()?;

    let mut csv = String::from(report::REPORT_HEADER);
    csv.push('\n');
    for b in blocks {
        csv.push_str(&b);
    }
    emit(a.out.as_deref(), &csv)
}

#[derive(Args)]
struct GenDatasetArgs {
    /// Number of workloads to draw.
    #[arg(long)]
    samples: u64,
    /// Upper bound (inclusive) for each GEMM dimension.
    #[arg(long = "dim-max")]
    dim_max: u64,
    /// PRNG seed; same seed means byte-identical output.
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    space: SpaceSource,
    /// Dataset CSV path; a .meta.json sidecar is written next to it.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Extra pipeline-fill cycles charged once per fold.
    #[arg(long, default_value_t = 0)]
    fill: u64,
    /// Worker threads; output is identical for any value.
    #[arg(long)]
    jobs: Option<usize>,
}

fn cmd_gen_dataset(a: GenDatasetArgs) -> Result<()> {
    init_jobs(a.jobs)?;
    let space = a.space.load()?;
    let g = *space.geometry();
    let spec = DatasetSpec {
        samples: a.samples,
        dim_max: a.dim_max,
        seed: a.seed,
        rows: g.total_rows,
        cols: g.total_cols,
        cell: g.cell,
        fill_latency: a.fill,
    };
    let ds = oracle::gen_dataset(&spec)?;
    write_atomic(&a.out, oracle::dataset_to_csv(&ds).as_bytes())?;
    write_atomic(&oracle::meta_path(&a.out), oracle::meta_to_json(&ds).as_bytes())?;
    println!(
        "wrote {} samples over {} classes to {}",
        ds.samples.len(),
        space.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled dataset CSV from gen-dataset (with its .meta.json sidecar).
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Optional space JSON; must match the space the labels were made for.
    #[arg(long, value_name = "FILE")]
    space: Option<PathBuf>,
    /// Optimization epochs.
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    /// Minibatch size.
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Seed for parameter init and epoch shuffles.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Leading fraction of samples used for updates; the rest validate.
    #[arg(long = "train-fraction", default_value_t = 0.9)]
    train_fraction: f64,
    /// Embedding width per GEMM dimension.
    #[arg(long = "embed-dim", default_value_t = 16)]
    embed_dim: usize,
    /// Hidden layer width.
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    /// Model file to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Optional per-epoch metrics CSV.
    #[arg(long, value_name = "FILE")]
    metrics: Option<PathBuf>,
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let ds = oracle::read_dataset(&a.data)?;
    if let Some(space_path) = &a.space {
        let space = load_space(space_path)?;
        if space.space_hash() != ds.space_hash {
            bail!(
                "space file {} does not match the space the dataset was labeled for",
                space_path.display()
            );
        }
    }
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        seed: a.seed,
        train_fraction: a.train_fraction,
        embed_dim: a.embed_dim,
        hidden: a.hidden,
        ..TrainConfig::default()
    };
    let (model, history) = recnet::train(&ds, &cfg)?;

    // The model writer produces the final bytes itself, so atomicity comes
    // from saving to a temp path and renaming.
    let dir = match a.out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file beside {}", a.out.display()))?;
    model.save(tmp.path())?;
    tmp.persist(&a.out)
        .map_err(|e| anyhow!("committing {}: {}", a.out.display(), e.error))?;

    if let Some(metrics_path) = &a.metrics {
        let mut csv = String::from(report::METRICS_HEADER);
        csv.push('\n');
        for m in &history {
            writeln!(csv, "{}", report::metrics_row(m)).unwrap();
        }
        write_atomic(metrics_path, csv.as_bytes())?;
    }

    if let Some(last) = history.last() {
        println!(
            "epoch {}: train_loss={} train_acc={} val_loss={} val_acc={}",
            last.epoch, last.train_loss, last.train_acc, last.val_loss, last.val_acc
        );
    }
    println!(
        "saved model ({} classes, {} parameters) to {}",
        model.classes(),
        model.param_count(),
        a.out.display()
    );
    Ok(())
}

#[derive(Args)]
struct EvaluateArgs {
    /// Trained model file.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Labeled dataset CSV to score against.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Optional space JSON; defaults to the space named in the sidecar.
    #[arg(long, value_name = "FILE")]
    space: Option<PathBuf>,
    /// Extra pipeline-fill cycles charged once per fold.
    #[arg(long, default_value_t = 0)]
    fill: u64,
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let ds = oracle::read_dataset(&a.data)?;
    let space = match &a.space {
        Some(p) => load_space(p)?,
        None => enumerate_configs(ds.spec.geometry()?),
    };
    let model = RecModel::load_for_space(&a.model, &space)?;
    let s = recnet::evaluate(&model, &ds.samples, &space, a.fill)?;
    println!("samples={}", s.samples);
    println!("top1={}", s.top1);
    println!("optimal_frac={}", s.optimal_frac);
    println!("geomean_ratio={}", s.geomean_ratio);
    println!("tail_frac={}", s.tail_frac);
    Ok(())
}

#[derive(Args)]
struct RecommendArgs {
    /// Trained model file.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[command(flatten)]
    space: SpaceSource,
    /// Output rows of the GEMM.
    #[arg(long)]
    m: u64,
    /// Output columns of the GEMM.
    #[arg(long)]
    n: u64,
    /// Reduction depth of the GEMM.
    #[arg(long)]
    k: u64,
    /// Extra pipeline-fill cycles charged once per fold.
    #[arg(long, default_value_t = 0)]
    fill: u64,
}

fn cmd_recommend(a: RecommendArgs) -> Result<()> {
    let space = a.space.load()?;
    let model = RecModel::load_for_space(&a.model, &space)?;
    let w = GemmWorkload::new(a.m, a.n, a.k)?;
    let class_id = model.predict(&w);
    let cfg = space.config(class_id)?;
    let mux = partition::mux_bitvector(space.geometry(), cfg)?;
    println!("class_id={class_id}");
    println!("config={cfg}");
    println!("cycles={}", partition::config_cycles(&w, cfg, a.fill));
    println!("mux_hex={}", mux.to_hex());
    Ok(())
}

#[derive(Args)]
struct RunArgs {
    /// Workload CSV with header name,m,n,k, executed in order.
    #[arg(long, value_name = "FILE")]
    workloads: PathBuf,
    #[command(flatten)]
    space: SpaceSource,
    /// recommended, oracle, monolithic, or fixed:<id>.
    #[arg(long, default_value = "recommended")]
    strategy: String,
    /// Trained model file (required for --strategy recommended).
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Off-chip read accounting: replicated or collated.
    #[arg(long, default_value = "replicated")]
    mode: String,
    /// Energy coefficients (TOML or JSON); defaults are built in.
    #[arg(long, value_name = "FILE")]
    energy: Option<PathBuf>,
    /// Extra pipeline-fill cycles charged once per fold.
    #[arg(long, default_value_t = 0)]
    fill: u64,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let space = a.space.load()?;
    let strategy: Strategy = a.strategy.parse().map_err(|e: String| anyhow!(e))?;
    let mode = parse_mode(&a.mode)?;
    let params = load_energy(a.energy.as_deref())?;
    let model = match (&strategy, &a.model) {
        (Strategy::Recommended, Some(path)) => Some(RecModel::load_for_space(path, &space)?),
        (Strategy::Recommended, None) => bail!("--strategy recommended needs --model"),
        _ => None,
    };
    let text = std::fs::read_to_string(&a.workloads)
        .with_context(|| format!("reading {}", a.workloads.display()))?;
    let list = report::parse_workloads(&text)?;
    let workloads: Vec<GemmWorkload> = list.iter().map(|(_, w)| *w).collect();
    let outcome = control::run_sequence(
        &workloads,
        &strategy,
        model.as_ref(),
        &space,
        mode,
        &params,
        a.fill,
    )?;

    let mut out = String::from(report::REPORT_HEADER);
    out.push('\n');
    for ((name, _), r) in list.iter().zip(&outcome.results) {
        writeln!(out, "{}", report::report_row(name, r.class_id, mode, &r.report)).unwrap();
    }
    let t = &outcome.totals;
    writeln!(
        out,
        "# totals items={} cycles={} reads_a={} reads_b={} reads_out={} writes_out={} mac_ops={} energy={} edp={}",
        t.items, t.cycles, t.reads_a, t.reads_b, t.reads_out, t.writes_out, t.mac_ops, t.energy,
        t.edp()
    )
    .unwrap();
    if let Some(m) = &model {
        // Decision latency if the recommender itself ran on this array,
        // reported for context rather than folded into the cycle totals.
        let widths = quads::recommender_widths(
            m.embed_dim() as u64,
            m.hidden() as u64,
            m.classes() as u64,
        );
        let per_decision = quads::systolic_mlp_cycles(*space.geometry(), &widths);
        writeln!(
            out,
            "# recommender decision_cycles_on_array={} decisions={}",
            per_decision, t.items
        )
        .unwrap();
    }
    emit(a.out.as_deref(), &out)
}

#[derive(Args)]
struct QuadsArgs {
    /// Parallel dot-product units.
    #[arg(long)]
    units: u64,
    /// Multipliers per unit.
    #[arg(long)]
    mults: u64,
    /// Output classes of the costed network.
    #[arg(long, default_value_t = 858)]
    classes: u64,
    /// Embedding width per GEMM dimension.
    #[arg(long = "embed-dim", default_value_t = 16)]
    embed_dim: u64,
    /// Hidden layer width.
    #[arg(long, default_value_t = 128)]
    hidden: u64,
}

fn cmd_quads(a: QuadsArgs) -> Result<()> {
    let spec = QuadsSpec::new(a.units, a.mults)?;
    let widths = quads::recommender_widths(a.embed_dim, a.hidden, a.classes);
    let cycles = quads::quads_mlp_cycles(&spec, &widths);
    println!(
        "units={} mults_per_unit={} total_mults={} widths={},{},{} cycles={}",
        a.units,
        a.mults,
        spec.total_mults(),
        widths[0],
        widths[1],
        widths[2],
        cycles
    );
    Ok(())
}

#[derive(Args)]
struct FoldSimArgs {
    /// Active PE rows in the fold.
    #[arg(long)]
    rows: u64,
    /// Active PE columns in the fold.
    #[arg(long)]
    cols: u64,
    /// Temporal extent mapped onto each PE.
    #[arg(long)]
    temporal: u64,
    /// OS, WS, or IS.
    #[arg(long)]
    dataflow: String,
    /// Write a per-cycle event CSV here.
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
}

fn cmd_fold_sim(a: FoldSimArgs) -> Result<()> {
    let df: Dataflow = a.dataflow.parse()?;
    let spec = FoldSpec::new(a.rows, a.cols, a.temporal)?;
    let trace = simulate_fold(spec, df, &SimLimits::default(), a.log.is_some())?;
    if let Some(log_path) = &a.log {
        let mut csv = String::from(report::EVENT_LOG_HEADER);
        csv.push('\n');
        for ev in trace.events.as_deref().unwrap_or_default() {
            writeln!(csv, "{}", ev.csv_row()).unwrap();
        }
        write_atomic(log_path, csv.as_bytes())?;
    }
    println!("cycles={}", trace.cycles);
    println!("reads_row_operand={}", trace.reads_row_operand);
    println!("reads_col_operand={}", trace.reads_col_operand);
    println!("outputs_drained={}", trace.outputs_drained);
    Ok(())
}
