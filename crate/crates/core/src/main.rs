use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rtpart::analysis::{run_test, TestId, Witness};
use rtpart::experiment::{
    bin_by_density, bin_by_density_all_criteria, run_matrix, write_csv, AlgoSpec, CriteriaAgg, EvalOptions,
    Execution, OpaMetrics,
};
use rtpart::format::{self, FormatError, TaskSetFile};
use rtpart::model::DeadlineModel;
use rtpart::opa::{opa_search, Objective, OpaConfig, OpaError};
use rtpart::partition::{assign, parse_order, AssignOutcome, Heuristic, SortCriterion};
use rtpart::taskgen::{generate, Distribution, GenConfig};

const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "rtpart", version, about = "Partitioned multiprocessor real-time scheduling")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write generated task sets, one file per set, plus a manifest.
    Generate(GenerateArgs),
    /// Run one schedulability test on a task-set file.
    Check(CheckArgs),
    /// Partition a task-set file with a bin-packing heuristic.
    Partition(PartitionArgs),
    /// Search every partition of a task-set file.
    Opa(OpaArgs),
    /// Run the comparison matrix and write the binned CSV.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenSource {
    /// Seed for every random draw.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "uniform")]
    dist: Distribution,
    #[arg(long, default_value = "implicit")]
    deadline: DeadlineModel,
    /// Number of processors.
    #[arg(long, default_value_t = 4)]
    m: usize,
    /// Number of growth sequences; each yields several sets.
    #[arg(long, default_value_t = 100)]
    count: u64,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct GenerateArgs {
    #[command(flatten)]
    src: GenSource,
    /// Output directory.
    #[arg(long, default_value = "tasksets")]
    out: PathBuf,
    /// Read `key = value` defaults from this file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct CheckArgs {
    file: PathBuf,
    #[arg(long)]
    test: TestId,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct PartitionArgs {
    file: PathBuf,
    /// Processors; defaults to the file header.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value = "ff")]
    heur: Heuristic,
    /// Sorting criterion (ID, DD, IL, DL, IP, DP, IU, DU) or `none`.
    #[arg(long, default_value = "none")]
    sort: String,
    #[arg(long)]
    test: TestId,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    First,
    MinProcs,
    MaxSpare,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct OpaArgs {
    file: PathBuf,
    #[arg(long)]
    m: Option<usize>,
    /// EDF-BHR or DM-ABRTW.
    #[arg(long)]
    test: TestId,
    /// Refuse sets larger than this.
    #[arg(long)]
    max_tasks: Option<usize>,
    #[arg(long, value_enum, default_value = "first")]
    objective: ObjectiveArg,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct ExperimentArgs {
    #[command(flatten)]
    src: GenSource,
    /// Comma-separated `HEUR:<h>:<criterion>:<test>` / `OPA:<test>` labels,
    /// or `all` for every heuristic combination valid for the deadline model.
    #[arg(long, default_value = "all")]
    algos: String,
    /// Also run both OPA variants.
    #[arg(long, action = clap::ArgAction::Set, default_value_t = false)]
    opa: bool,
    #[arg(long)]
    opa_max_tasks: Option<usize>,
    /// Density bin width; defaults to 0.1·m.
    #[arg(long)]
    bin_width: Option<f64>,
    /// Also emit `HEUR:<h>:ALL:<test>` rows folding the criteria this way.
    #[arg(long)]
    agg: Option<CriteriaAgg>,
    /// Worker threads; 0 picks the machine default.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// CSV output path.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// A failure already reported to the user, carrying its exit code.
struct Exit(u8);

fn fail(code: u8, msg: impl std::fmt::Display) -> Exit {
    eprintln!("error: {msg}");
    Exit(code)
}

fn read_set(path: &Path) -> Result<TaskSetFile, Exit> {
    format::read(path).map_err(|e: FormatError| fail(USAGE, e))
}

/// Expands `--config FILE` into flags placed right after the subcommand so
/// that flags given on the command line win.
fn expand_config(args: Vec<String>) -> Result<Vec<String>, String> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_owned());
        }
    }
    let (Some(path), true) = (path, args.len() > 1) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let mut extra = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("{path}:{}: expected `key = value`", no + 1));
        };
        let key = key.trim().replace('_', "-");
        if key == "config" {
            return Err(format!("{path}:{}: nested config files are not supported", no + 1));
        }
        extra.push(format!("--{key}"));
        extra.push(value.trim().to_owned());
    }
    let mut out = args[..2].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

fn cmd_generate(a: GenerateArgs) -> Result<u8, Exit> {
    let seed = a.src.seed.ok_or_else(|| fail(USAGE, "--seed is required"))?;
    if a.src.m == 0 {
        return Err(fail(USAGE, "--m must be at least 1"));
    }
    let cfg = GenConfig::new(a.src.deadline, a.src.dist, a.src.m, seed);
    let samples = generate(&cfg, a.src.count);
    fs::create_dir_all(&a.out).map_err(|e| fail(USAGE, format!("{}: {e}", a.out.display())))?;
    for (i, s) in samples.iter().enumerate() {
        let path = a.out.join(format!("set_{i:06}.txt"));
        format::write(&path, &s.set, cfg.m).map_err(|e| fail(USAGE, e))?;
    }
    let manifest = a.out.join("manifest.txt");
    let line = format!(
        "{seed} {} {} {} {}\n",
        cfg.distribution,
        cfg.deadline_model,
        cfg.m,
        samples.len()
    );
    fs::write(&manifest, line).map_err(|e| fail(USAGE, format!("{}: {e}", manifest.display())))?;
    println!("wrote {} task sets to {}", samples.len(), a.out.display());
    Ok(0)
}

fn cmd_check(a: CheckArgs) -> Result<u8, Exit> {
    let file = read_set(&a.file)?;
    let v = run_test(a.test, &file.set).map_err(|e| fail(USAGE, e))?;
    if v.schedulable {
        println!("{}: schedulable", a.test);
        return Ok(0);
    }
    match v.detail {
        Some(Witness::Task(id)) => println!("{}: not schedulable (task {id})", a.test),
        Some(Witness::Instant(t)) => println!("{}: not schedulable (demand exceeds t = {t})", a.test),
        None => println!("{}: not schedulable", a.test),
    }
    Ok(1)
}

fn print_outcome(out: &AssignOutcome) -> u8 {
    let spare = out.partition.spare_capacities();
    for (j, (ids, s)) in out.partition.ids().iter().zip(&spare).enumerate() {
        let ids: Vec<String> = ids.iter().map(usize::to_string).collect();
        println!("P{}: [{}] spare={s:.6}", j + 1, ids.join(" "));
    }
    if out.success {
        println!("schedulable on {} processor(s)", out.partition.processors_used());
        0
    } else {
        match out.failed_task {
            Some(id) => println!("not schedulable: task {id} does not fit"),
            None => println!("not schedulable"),
        }
        1
    }
}

fn platform(m: Option<usize>, file: &TaskSetFile) -> Result<usize, Exit> {
    match m.unwrap_or(file.m) {
        0 => Err(fail(USAGE, "--m must be at least 1")),
        m => Ok(m),
    }
}

fn cmd_partition(a: PartitionArgs) -> Result<u8, Exit> {
    let order: Option<SortCriterion> = parse_order(&a.sort).map_err(|e| fail(USAGE, e))?;
    let file = read_set(&a.file)?;
    let m = platform(a.m, &file)?;
    let out = assign(&file.set, m, a.heur, a.test, order).map_err(|e| fail(USAGE, e))?;
    Ok(print_outcome(&out))
}

fn cmd_opa(a: OpaArgs) -> Result<u8, Exit> {
    let file = read_set(&a.file)?;
    let m = platform(a.m, &file)?;
    let mut cfg = OpaConfig::new(a.test).map_err(|e| fail(USAGE, e))?;
    if let Some(max) = a.max_tasks {
        cfg = cfg.with_max_tasks(max);
    }
    let objective = match a.objective {
        ObjectiveArg::First => Objective::FirstFound,
        ObjectiveArg::MinProcs => Objective::MinProcessors,
        ObjectiveArg::MaxSpare => Objective::MaxMinSpare,
    };
    match opa_search(&file.set, m, cfg, objective) {
        Ok(out) => Ok(print_outcome(&out)),
        Err(e @ OpaError::TooManyTasks { .. }) => Err(fail(USAGE, format!("capped: {e}"))),
        Err(e) => Err(fail(USAGE, e)),
    }
}

fn cmd_experiment(a: ExperimentArgs) -> Result<u8, Exit> {
    let seed = a
        .src
        .seed
        .ok_or_else(|| fail(USAGE, "--seed is required for experiment"))?;
    if a.src.m == 0 {
        return Err(fail(USAGE, "--m must be at least 1"));
    }
    let model = a.src.deadline;
    let mut algos = Vec::new();
    for label in a.algos.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if label.eq_ignore_ascii_case("all") {
            algos.extend(AlgoSpec::all_heuristics(model));
        } else {
            let algo: AlgoSpec = label.parse().map_err(|e: String| fail(USAGE, e))?;
            if !algo.test().accepts(model) {
                return Err(fail(USAGE, format!("{algo} cannot run on {model}-deadline sets")));
            }
            algos.push(algo);
        }
    }
    if a.opa {
        algos.extend(AlgoSpec::all_opa());
    }
    if algos.is_empty() {
        return Err(fail(USAGE, "no algorithms selected"));
    }
    let width = a.bin_width.unwrap_or(0.1 * a.src.m as f64);
    if width.is_nan() || width <= 0.0 {
        return Err(fail(USAGE, "--bin-width must be positive"));
    }
    let gen = GenConfig::new(model, a.src.dist, a.src.m, seed);
    let opts = EvalOptions {
        opa_max_tasks: a.opa_max_tasks,
        opa_metrics: OpaMetrics::Optimized,
    };
    let exec = if a.jobs == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel { jobs: a.jobs }
    };
    let records = run_matrix(&gen, &algos, a.src.count, opts, exec).map_err(|e| fail(USAGE, e))?;
    let mut rows = bin_by_density(&records, width);
    if let Some(agg) = a.agg {
        rows.extend(bin_by_density_all_criteria(&records, width, agg));
    }
    write_csv(&rows, model, a.src.dist, &a.out).map_err(|e| fail(USAGE, e))?;
    let sets = records.len() / algos.len();
    println!(
        "evaluated {} algorithm(s) on {sets} task set(s); wrote {}",
        algos.len(),
        a.out.display()
    );
    Ok(0)
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let result = match cli.cmd {
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Partition(a) => cmd_partition(a),
        Cmd::Opa(a) => cmd_opa(a),
        Cmd::Experiment(a) => cmd_experiment(a),
    };
    ExitCode::from(result.unwrap_or_else(|Exit(code)| code))
}
