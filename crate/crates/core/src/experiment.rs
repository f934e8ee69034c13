//! Comparative experiments: run partitioning algorithms over generated task
//! sets, then aggregate success ratio, processors used and spare capacity by
//! total-density bin.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::analysis::{TestError, TestId};
use crate::math::floor_snap;
use crate::model::{DeadlineModel, TaskSet};
use crate::opa::{opa_search, Objective, OpaConfig, OpaError};
use crate::partition::{assign, order_code, parse_order, AssignOutcome, Heuristic, SortCriterion};
use crate::taskgen::{gen_task_set_stream, Distribution, GenConfig, Sample};

/// One partitioning algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgoSpec {
    Heuristic {
        heuristic: Heuristic,
        /// `None` keeps generation order.
        order: Option<SortCriterion>,
        test: TestId,
    },
    Opa {
        test: TestId,
    },
}

impl AlgoSpec {
    pub fn heuristic(heuristic: Heuristic, order: SortCriterion, test: TestId) -> Self {
        AlgoSpec::Heuristic {
            heuristic,
            order: Some(order),
            test,
        }
    }

    pub fn test(&self) -> TestId {
        match *self {
            AlgoSpec::Heuristic { test, .. } | AlgoSpec::Opa { test } => test,
        }
    }

    /// Every heuristic × criterion × test combination valid for `model`.
    pub fn all_heuristics(model: DeadlineModel) -> Vec<AlgoSpec> {
        let mut out = Vec::new();
        for test in TestId::compatible_with(model) {
            for heuristic in Heuristic::ALL {
                for order in SortCriterion::ALL {
                    out.push(AlgoSpec::heuristic(heuristic, order, test));
                }
            }
        }
        out
    }

    /// Both optimal partitioners.
    pub fn all_opa() -> Vec<AlgoSpec> {
        vec![
            AlgoSpec::Opa { test: TestId::EdfBhr },
            AlgoSpec::Opa { test: TestId::DmAbrtw },
        ]
    }
}

impl fmt::Display for AlgoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AlgoSpec::Heuristic {
                heuristic,
                order,
                test,
            } => write!(f, "HEUR:{heuristic}:{}:{test}", order_code(order)),
            AlgoSpec::Opa { test } => write!(f, "OPA:{test}"),
        }
    }
}

impl FromStr for AlgoSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts[..] {
            [kind, test] if kind.eq_ignore_ascii_case("opa") => Ok(AlgoSpec::Opa { test: test.parse()? }),
            [kind, h, order, test] if kind.eq_ignore_ascii_case("heur") => Ok(AlgoSpec::Heuristic {
                heuristic: h.parse()?,
                order: parse_order(order)?,
                test: test.parse()?,
            }),
            _ => Err(format!(
                "bad algorithm `{s}` (expected HEUR:<h>:<criterion>:<test> or OPA:<test>)"
            )),
        }
    }
}

/// How OPA picks among feasible partitions for the processor and spare
/// metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpaMetrics {
    /// Report the first witness found.
    Witness,
    /// Fewest processors for `processors_used`; largest minimum spare for
    /// `spare`.
    Optimized,
}

/// Worker layout for the data-parallel loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// `jobs = 0` uses rayon's default pool. Without the `parallel` feature
    /// this runs sequentially.
    Parallel { jobs: usize },
}

/// Outcome of one algorithm on one task set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub set_index: usize,
    pub sequence: u64,
    pub n: usize,
    pub total_density: f64,
    pub algo: AlgoSpec,
    pub schedulable: bool,
    /// OPA refused the set because it exceeds the size cap.
    pub capped: bool,
    pub processors_used: usize,
    /// Per-processor spare capacity, clamped to `[0, 1]`.
    pub spare: Vec<f64>,
    pub wall_time: Duration,
}

impl ExperimentRecord {
    /// Equality ignoring `wall_time`.
    pub fn same_outcome(&self, other: &Self) -> bool {
        ExperimentRecord {
            wall_time: other.wall_time,
            ..self.clone()
        } == *other
    }

    pub fn mean_spare(&self) -> f64 {
        if self.spare.is_empty() {
            return 1.0;
        }
        self.spare.iter().sum::<f64>() / self.spare.len() as f64
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Test(#[from] TestError),
    #[error(transparent)]
    Opa(#[from] OpaError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("{0}")]
    Contract(String),
}

/// Knobs shared by every evaluation in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub opa_max_tasks: Option<usize>,
    pub opa_metrics: OpaMetrics,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            opa_max_tasks: None,
            opa_metrics: OpaMetrics::Optimized,
        }
    }
}

struct Evaluation {
    schedulable: bool,
    capped: bool,
    processors_used: usize,
    spare: Vec<f64>,
}

fn from_outcome(out: &AssignOutcome) -> Evaluation {
    Evaluation {
        schedulable: out.success,
        capped: false,
        processors_used: out.partition.processors_used(),
        spare: if out.success {
            out.partition
                .spare_capacities()
                .into_iter()
                .map(|s| s.clamp(0.0, 1.0))
                .collect()
        } else {
            Vec::new()
        },
    }
}

fn evaluate(set: &TaskSet, m: usize, algo: AlgoSpec, opts: EvalOptions) -> Result<Evaluation, ExperimentError> {
    match algo {
        AlgoSpec::Heuristic {
            heuristic,
            order,
            test,
        } => Ok(from_outcome(&assign(set, m, heuristic, test, order)?)),
        AlgoSpec::Opa { test } => {
            let mut cfg = OpaConfig::new(test)?;
            if let Some(max) = opts.opa_max_tasks {
                cfg = cfg.with_max_tasks(max);
            }
            let first = match opa_search(set, m, cfg, Objective::FirstFound) {
                Err(OpaError::TooManyTasks { .. }) => {
                    return Ok(Evaluation {
                        schedulable: false,
                        capped: true,
                        processors_used: 0,
                        spare: Vec::new(),
                    })
                }
                other => other?,
            };
            if !first.success || opts.opa_metrics == OpaMetrics::Witness {
                return Ok(from_outcome(&first));
            }
            let fewest = opa_search(set, m, cfg, Objective::MinProcessors)?;
            let spread = opa_search(set, m, cfg, Objective::MaxMinSpare)?;
            Ok(Evaluation {
                processors_used: fewest.partition.processors_used(),
                ..from_outcome(&spread)
            })
        }
    }
}

/// Evaluates every algorithm on one set.
pub fn evaluate_set(
    set_index: usize,
    sample: &Sample,
    m: usize,
    algos: &[AlgoSpec],
    opts: EvalOptions,
) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    let set = &sample.set;
    let density = set.total_density();
    algos
        .iter()
        .map(|&algo| {
            let start = Instant::now();
            let e = evaluate(set, m, algo, opts)?;
            Ok(ExperimentRecord {
                set_index,
                sequence: sample.sequence,
                n: set.len(),
                total_density: density,
                algo,
                schedulable: e.schedulable,
                capped: e.capped,
                processors_used: e.processors_used,
                spare: e.spare,
                wall_time: start.elapsed(),
            })
        })
        .collect()
}

/// Maps `f` over `items` in order, in parallel when requested and available.
pub fn par_map<T, U, F>(items: &[T], exec: Execution, f: F) -> Result<Vec<U>, ExperimentError>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    match exec {
        Execution::Sequential => Ok(items.iter().enumerate().map(|(i, t)| f(i, t)).collect()),
        #[cfg(feature = "parallel")]
        Execution::Parallel { jobs } => {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| ExperimentError::Pool(e.to_string()))?;
            Ok(pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()))
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel { .. } => Ok(items.iter().enumerate().map(|(i, t)| f(i, t)).collect()),
    }
}

/// Generates sequences `0..sequences` (in parallel when requested) and
/// flattens them in sequence order.
pub fn generate_samples(gen: &GenConfig, sequences: u64, exec: Execution) -> Result<Vec<Sample>, ExperimentError> {
    let ids: Vec<u64> = (0..sequences).collect();
    let per_seq = par_map(&ids, exec, |_, &seq| {
        gen_task_set_stream(gen, seq)
            .map(|set| Sample { sequence: seq, set })
            .collect::<Vec<_>>()
    })?;
    Ok(per_seq.into_iter().flatten().collect())
}

/// Runs every algorithm over the given sets. Records come out ordered by
/// `(set_index, position in algos)` whatever the worker count.
pub fn run_on_samples(
    samples: &[Sample],
    m: usize,
    algos: &[AlgoSpec],
    opts: EvalOptions,
    exec: Execution,
) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    for algo in algos {
        if let Some(s) = samples.first() {
            if !algo.test().accepts(s.set.model()) {
                return Err(TestError::Incompatible {
                    test: algo.test(),
                    model: s.set.model(),
                }
                .into());
            }
        }
    }
    let nested = par_map(samples, exec, |i, s| evaluate_set(i, s, m, algos, opts))?;
    let mut out = Vec::with_capacity(samples.len() * algos.len());
    for r in nested {
        out.extend(r?);
    }
    Ok(out)
}

/// Generates `count` sequences from `gen` and evaluates every algorithm on
/// each emitted set.
pub fn run_matrix(
    gen: &GenConfig,
    algos: &[AlgoSpec],
    count: u64,
    opts: EvalOptions,
    exec: Execution,
) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    let samples = generate_samples(gen, count, exec)?;
    run_on_samples(&samples, gen.m, algos, opts, exec)
}

// ---------------------------------------------------------------------------
// Aggregation

/// Half-open density interval `[index·width, (index+1)·width)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub index: usize,
    pub width: f64,
}

impl Bin {
    pub fn of(density: f64, width: f64) -> Bin {
        assert!(width > 0.0, "bin width must be positive");
        Bin {
            index: floor_snap(density / width).max(0.0) as usize,
            width,
        }
    }

    pub fn lo(&self) -> f64 {
        tidy(self.index as f64 * self.width)
    }

    pub fn hi(&self) -> f64 {
        tidy((self.index + 1) as f64 * self.width)
    }
}

/// Rounds away representation noise such as `3 · 0.4 = 1.2000000000000002`.
fn tidy(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSummary {
    pub bin: usize,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub algo: String,
    pub samples: usize,
    pub success_ratio: f64,
    /// Over successful runs only; `None` when nothing succeeded.
    pub mean_procs: Option<f64>,
    pub mean_spare: Option<f64>,
}

#[derive(Default)]
struct Acc {
    samples: usize,
    successes: usize,
    procs: f64,
    spare: f64,
}

impl Acc {
    fn add(&mut self, r: &ExperimentRecord) {
        self.samples += 1;
        if r.schedulable {
            self.successes += 1;
            self.procs += r.processors_used as f64;
            self.spare += r.mean_spare();
        }
    }

    fn summary(&self, bin: Bin, algo: String) -> BinnedSummary {
        let s = self.successes as f64;
        BinnedSummary {
            bin: bin.index,
            bin_lo: bin.lo(),
            bin_hi: bin.hi(),
            algo,
            samples: self.samples,
            success_ratio: s / self.samples as f64,
            mean_procs: (self.successes > 0).then(|| self.procs / s),
            mean_spare: (self.successes > 0).then(|| self.spare / s),
        }
    }
}

/// Per-bin, per-algorithm summaries, ordered by bin then algorithm label.
/// OPA records refused for size are left out.
pub fn bin_by_density(records: &[ExperimentRecord], width: f64) -> Vec<BinnedSummary> {
    let mut acc: BTreeMap<(usize, String), Acc> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.capped) {
        let bin = Bin::of(r.total_density, width);
        acc.entry((bin.index, r.algo.to_string())).or_default().add(r);
    }
    acc.into_iter()
        .map(|((index, algo), a)| a.summary(Bin { index, width }, algo))
        .collect()
}

/// How to fold the eight sorting criteria of one heuristic/test pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriteriaAgg {
    /// Pool all criteria: the mean of the per-criterion ratios.
    Mean,
    /// A set counts as scheduled when any criterion schedules it.
    Any,
}

impl FromStr for CriteriaAgg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(CriteriaAgg::Mean),
            "any" => Ok(CriteriaAgg::Any),
            other => Err(format!("unknown aggregation `{other}` (expected mean or any)")),
        }
    }
}

impl fmt::Display for CriteriaAgg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CriteriaAgg::Mean => "mean",
            CriteriaAgg::Any => "any",
        })
    }
}

/// Summaries of heuristic records with the sorting criteria folded together,
/// labelled `HEUR:<h>:ALL:<test>`. `samples` counts task sets.
pub fn bin_by_density_all_criteria(records: &[ExperimentRecord], width: f64, agg: CriteriaAgg) -> Vec<BinnedSummary> {
    // (bin, heuristic, test) -> set_index -> records
    let mut groups: BTreeMap<(usize, Heuristic, TestId), BTreeMap<usize, Vec<&ExperimentRecord>>> = BTreeMap::new();
    for r in records {
        if let AlgoSpec::Heuristic {
            heuristic,
            order: Some(_),
            test,
        } = r.algo
        {
            let bin = Bin::of(r.total_density, width).index;
            groups
                .entry((bin, heuristic, test))
                .or_default()
                .entry(r.set_index)
                .or_default()
                .push(r);
        }
    }
    let mut out: Vec<BinnedSummary> = groups
        .into_iter()
        .map(|((index, h, test), sets)| {
            let mut acc = Acc::default();
            let mut ratio_sum = 0.0;
            for runs in sets.values() {
                let ok: Vec<_> = runs.iter().filter(|r| r.schedulable).collect();
                ratio_sum += match agg {
                    CriteriaAgg::Mean => ok.len() as f64 / runs.len() as f64,
                    CriteriaAgg::Any => f64::from(u8::from(!ok.is_empty())),
                };
                for r in &ok {
                    acc.successes += 1;
                    acc.procs += r.processors_used as f64;
                    acc.spare += r.mean_spare();
                }
            }
            acc.samples = sets.len();
            let mut s = acc.summary(Bin { index, width }, format!("HEUR:{h}:ALL:{test}"));
            s.success_ratio = ratio_sum / sets.len() as f64;
            s
        })
        .collect();
    out.sort_by(|a, b| (a.bin, &a.algo).cmp(&(b.bin, &b.algo)));
    out
}

/// Fraction of `algo`'s records in `bin` that succeeded; `None` for an
/// empty bin.
pub fn success_ratio(records: &[ExperimentRecord], algo: AlgoSpec, bin: Bin) -> Option<f64> {
    let (n, ok) = records
        .iter()
        .filter(|r| r.algo == algo && !r.capped && Bin::of(r.total_density, bin.width).index == bin.index)
        .fold((0usize, 0usize), |(n, ok), r| (n + 1, ok + usize::from(r.schedulable)));
    (n > 0).then(|| ok as f64 / n as f64)
}

/// `100 · (SR(p2) − SR(p1)) / SR(p2)`: how far `p1` falls short of `p2`, in
/// percent. `Ok(None)` when `p2` never succeeds.
pub fn suboptimality_degree(p1: f64, p2: f64) -> Result<Option<f64>, ExperimentError> {
    if p2 <= 0.0 {
        return Ok(None);
    }
    if p1 > p2 + 1e-12 {
        return Err(ExperimentError::Contract(format!(
            "suboptimality degree needs p2 >= p1, got p1 = {p1}, p2 = {p2}"
        )));
    }
    Ok(Some((p2 - p1) / p2 * 100.0))
}

/// Success ratios of `a` and `b` per density bin, over the sets where
/// neither record is capped.
pub fn paired_success(
    records: &[ExperimentRecord],
    a: AlgoSpec,
    b: AlgoSpec,
    width: f64,
) -> BTreeMap<usize, (usize, f64, f64)> {
    let mut by_set: BTreeMap<usize, (Option<&ExperimentRecord>, Option<&ExperimentRecord>)> = BTreeMap::new();
    for r in records {
        if r.algo == a {
            by_set.entry(r.set_index).or_default().0 = Some(r);
        }
        if r.algo == b {
            by_set.entry(r.set_index).or_default().1 = Some(r);
        }
    }
    let mut bins: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for (ra, rb) in by_set.values() {
        let (Some(ra), Some(rb)) = (ra, rb) else { continue };
        if ra.capped || rb.capped {
            continue;
        }
        let e = bins.entry(Bin::of(ra.total_density, width).index).or_default();
        e.0 += 1;
        e.1 += usize::from(ra.schedulable);
        e.2 += usize::from(rb.schedulable);
    }
    bins.into_iter()
        .map(|(bin, (n, sa, sb))| (bin, (n, sa as f64 / n as f64, sb as f64 / n as f64)))
        .collect()
}

// ---------------------------------------------------------------------------
// CSV

pub const CSV_HEADER: [&str; 9] = [
    "bin_lo",
    "bin_hi",
    "algo",
    "deadline_model",
    "distribution",
    "samples",
    "success_ratio",
    "mean_procs",
    "mean_spare",
];

/// One CSV row as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub algo: String,
    pub deadline_model: String,
    pub distribution: String,
    pub samples: usize,
    pub success_ratio: f64,
    pub mean_procs: Option<f64>,
    pub mean_spare: Option<f64>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes summaries, sorted by bin then algorithm, overwriting `path`.
pub fn write_csv(
    summaries: &[BinnedSummary],
    model: DeadlineModel,
    dist: Distribution,
    path: &Path,
) -> Result<(), ExperimentError> {
    let csv_err = |source| ExperimentError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut rows: Vec<&BinnedSummary> = summaries.iter().collect();
    rows.sort_by(|a, b| (a.bin, &a.algo).cmp(&(b.bin, &b.algo)));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for s in rows {
        w.write_record([
            s.bin_lo.to_string(),
            s.bin_hi.to_string(),
            s.algo.clone(),
            model.to_string(),
            dist.to_string(),
            s.samples.to_string(),
            s.success_ratio.to_string(),
            opt(s.mean_procs),
            opt(s.mean_spare),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>, ExperimentError> {
    let csv_err = |source| ExperimentError::Csv {
        path: path.display().to_string(),
        source,
    };
    let bad = |what: &str| ExperimentError::Contract(format!("{}: bad {what}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(bad("header"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(CSV_HEADER[i]));
        let opt_num = |i: usize| {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        out.push(CsvRow {
            bin_lo: num(0)?,
            bin_hi: num(1)?,
            algo: rec[2].to_owned(),
            deadline_model: rec[3].to_owned(),
            distribution: rec[4].to_owned(),
            samples: rec[5].parse().map_err(|_| bad("samples"))?,
            success_ratio: num(6)?,
            mean_procs: opt_num(7)?,
            mean_spare: opt_num(8)?,
        });
    }
    Ok(out)
}
