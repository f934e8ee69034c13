//! Sporadic task model and the workload functions the schedulability tests
//! are built from.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;

use thiserror::Error;

use crate::math::{as_integer, ceil_snap, floor_snap, EPS};

/// Largest hyperperiod [`TaskSet::hyperperiod`] reports before signalling
/// overflow. Instants up to this value are exactly representable as `f64`.
pub const DEFAULT_HYPERPERIOD_CAP: u64 = 1 << 53;

/// One sporadic task `(C, T, D)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    pub id: usize,
    /// Worst-case execution time `C`.
    pub wcet: f64,
    /// Minimum inter-arrival time `T`.
    pub period: f64,
    /// Relative deadline `D`.
    pub deadline: f64,
}

impl Task {
    pub fn new(id: usize, wcet: f64, period: f64, deadline: f64) -> Self {
        Task {
            id,
            wcet,
            period,
            deadline,
        }
    }

    /// `C / T`
    #[inline]
    pub fn utilization(&self) -> f64 {
        self.wcet / self.period
    }

    /// `C / min(D, T)`
    #[inline]
    pub fn density(&self) -> f64 {
        self.wcet / self.deadline.min(self.period)
    }

    /// Number of jobs with release and deadline inside `[0, t]`.
    #[inline]
    fn jobs_in(&self, t: f64) -> f64 {
        (1.0 + floor_snap((t - self.deadline) / self.period)).max(0.0)
    }
}

/// Relation between deadlines and periods across a task set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeadlineModel {
    /// `D = T` for every task.
    Implicit,
    /// `D <= T` for every task.
    Constrained,
}

impl DeadlineModel {
    pub fn as_str(self) -> &'static str {
        match self {
            DeadlineModel::Implicit => "implicit",
            DeadlineModel::Constrained => "constrained",
        }
    }
}

impl fmt::Display for DeadlineModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DeadlineModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "implicit" | "id" => Ok(DeadlineModel::Implicit),
            "constrained" | "cd" => Ok(DeadlineModel::Constrained),
            other => Err(format!("unknown deadline model `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("task {id}: parameters must be positive and finite (C={wcet}, T={period}, D={deadline})")]
    NonPositive {
        id: usize,
        wcet: f64,
        period: f64,
        deadline: f64,
    },
    #[error("task {id}: deadline {deadline} differs from period {period} in an implicit-deadline set")]
    NotImplicit {
        id: usize,
        period: f64,
        deadline: f64,
    },
    #[error("task {id}: deadline {deadline} exceeds period {period} in a constrained-deadline set")]
    NotConstrained {
        id: usize,
        period: f64,
        deadline: f64,
    },
    #[error("duplicate task id {0}")]
    DuplicateId(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum HyperperiodError {
    #[error("task {0} has a non-integer period; hyperperiod is undefined")]
    NonIntegerPeriod(usize),
    #[error("hyperperiod exceeds the cap of {0}")]
    Overflow(u64),
}

/// An ordered collection of tasks. Index order is the fixed-priority order
/// (index 0 highest) for the functions that take an index.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    tasks: Vec<Task>,
    model: DeadlineModel,
}

impl TaskSet {
    pub fn new(tasks: Vec<Task>, model: DeadlineModel) -> Result<Self, ModelError> {
        let mut ids: Vec<usize> = Vec::with_capacity(tasks.len());
        for t in &tasks {
            check_task(t, model)?;
            ids.push(t.id);
        }
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(ModelError::DuplicateId(w[0]));
        }
        Ok(TaskSet { tasks, model })
    }

    /// Builds a set from `(C, T, D)` triples, numbering tasks from 1.
    pub fn from_params(params: &[(f64, f64, f64)], model: DeadlineModel) -> Result<Self, ModelError> {
        let tasks = params
            .iter()
            .enumerate()
            .map(|(i, &(c, t, d))| Task::new(i + 1, c, t, d))
            .collect();
        TaskSet::new(tasks, model)
    }

    /// Implicit-deadline set from `(C, T)` pairs, numbered from 1.
    pub fn implicit(params: &[(f64, f64)]) -> Result<Self, ModelError> {
        let triples: Vec<_> = params.iter().map(|&(c, t)| (c, t, t)).collect();
        TaskSet::from_params(&triples, DeadlineModel::Implicit)
    }

    pub fn empty(model: DeadlineModel) -> Self {
        TaskSet {
            tasks: Vec::new(),
            model,
        }
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn into_tasks(self) -> Vec<Task> {
        self.tasks
    }

    pub fn model(&self) -> DeadlineModel {
        self.model
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Appends a task, checking it against the set's deadline model.
    pub fn push(&mut self, task: Task) -> Result<(), ModelError> {
        check_task(&task, self.model)?;
        if self.tasks.iter().any(|t| t.id == task.id) {
            return Err(ModelError::DuplicateId(task.id));
        }
        self.tasks.push(task);
        Ok(())
    }

    /// Append without validation; the caller guarantees the task came from
    /// a set with the same deadline model and a disjoint id.
    pub(crate) fn push_unchecked(&mut self, task: Task) {
        self.tasks.push(task);
    }

    pub(crate) fn pop(&mut self) -> Option<Task> {
        self.tasks.pop()
    }

    /// Same tasks, reordered. `order` must be a permutation of indices.
    pub(crate) fn permuted(&self, order: &[usize]) -> TaskSet {
        TaskSet {
            tasks: order.iter().map(|&i| self.tasks[i]).collect(),
            model: self.model,
        }
    }

    /// True when every task satisfies `D = T` (within tolerance), whatever
    /// the declared model.
    pub fn has_implicit_deadlines(&self) -> bool {
        self.tasks
            .iter()
            .all(|t| (t.deadline - t.period).abs() <= EPS)
    }

    pub fn total_utilization(&self) -> f64 {
        total_utilization(&self.tasks)
    }

    pub fn total_density(&self) -> f64 {
        total_density(&self.tasks)
    }

    pub fn rbf(&self, t: f64) -> f64 {
        rbf(&self.tasks, t)
    }

    pub fn rbf_star(&self, t: f64) -> f64 {
        rbf_star(&self.tasks, t)
    }

    pub fn dbf(&self, t: f64) -> f64 {
        dbf(&self.tasks, t)
    }

    pub fn dbf_star(&self, t: f64) -> f64 {
        dbf_star(&self.tasks, t)
    }

    pub fn hyperperiod(&self) -> Result<u64, HyperperiodError> {
        self.hyperperiod_capped(DEFAULT_HYPERPERIOD_CAP)
    }

    /// `lcm` of the periods, or [`HyperperiodError::Overflow`] once it
    /// exceeds `cap`.
    pub fn hyperperiod_capped(&self, cap: u64) -> Result<u64, HyperperiodError> {
        let mut acc: u64 = 1;
        for t in &self.tasks {
            let p = as_integer(t.period)
                .filter(|&p| p > 0)
                .ok_or(HyperperiodError::NonIntegerPeriod(t.id))?;
            let g = gcd(acc, p);
            acc = (acc / g)
                .checked_mul(p)
                .filter(|&v| v <= cap)
                .ok_or(HyperperiodError::Overflow(cap))?;
        }
        Ok(acc)
    }

    /// Sorted, deduplicated absolute deadlines `D_j + k·T_j <= horizon`.
    pub fn deadline_checkpoints(&self, horizon: f64) -> Vec<f64> {
        DemandSteps::new(&self.tasks)
            .take_while(|s| s.t <= horizon + EPS)
            .map(|s| s.t)
            .collect()
    }

    /// Walks the absolute deadlines in increasing order together with the
    /// demand bound function at each of them.
    pub fn demand_steps(&self) -> DemandSteps {
        DemandSteps::new(&self.tasks)
    }
}

fn check_task(t: &Task, model: DeadlineModel) -> Result<(), ModelError> {
    let ok = |x: f64| x.is_finite() && x > 0.0;
    if !(ok(t.wcet) && ok(t.period) && ok(t.deadline)) {
        return Err(ModelError::NonPositive {
            id: t.id,
            wcet: t.wcet,
            period: t.period,
            deadline: t.deadline,
        });
    }
    match model {
        DeadlineModel::Implicit if (t.deadline - t.period).abs() > EPS => Err(ModelError::NotImplicit {
            id: t.id,
            period: t.period,
            deadline: t.deadline,
        }),
        DeadlineModel::Constrained if t.deadline > t.period + EPS => Err(ModelError::NotConstrained {
            id: t.id,
            period: t.period,
            deadline: t.deadline,
        }),
        _ => Ok(()),
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn total_utilization<'a>(tasks: impl IntoIterator<Item = &'a Task>) -> f64 {
    tasks.into_iter().map(Task::utilization).sum()
}

pub fn total_density<'a>(tasks: impl IntoIterator<Item = &'a Task>) -> f64 {
    tasks.into_iter().map(Task::density).sum()
}

/// Request bound function: `Σ ⌈t/T_i⌉·C_i`.
pub fn rbf<'a>(tasks: impl IntoIterator<Item = &'a Task>, t: f64) -> f64 {
    tasks
        .into_iter()
        .map(|k| ceil_snap(t / k.period) * k.wcet)
        .sum()
}

/// Linear upper bound of [`rbf`]: `Σ (C_i + u_i·t)`.
pub fn rbf_star<'a>(tasks: impl IntoIterator<Item = &'a Task>, t: f64) -> f64 {
    tasks
        .into_iter()
        .map(|k| k.wcet + k.utilization() * t)
        .sum()
}

/// Demand bound function: `Σ max{0, 1 + ⌊(t − D_i)/T_i⌋}·C_i`.
pub fn dbf<'a>(tasks: impl IntoIterator<Item = &'a Task>, t: f64) -> f64 {
    tasks.into_iter().map(|k| k.jobs_in(t) * k.wcet).sum()
}

/// Linear upper bound of [`dbf`]: `C_i + (t − D_i)·u_i` for `t >= D_i`.
pub fn dbf_star<'a>(tasks: impl IntoIterator<Item = &'a Task>, t: f64) -> f64 {
    tasks
        .into_iter()
        .filter(|k| t >= k.deadline - EPS)
        .map(|k| k.wcet + (t - k.deadline) * k.utilization())
        .sum()
}

/// One step of [`DemandSteps`]: an absolute deadline and the demand bound
/// function evaluated there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandStep {
    pub t: f64,
    pub dbf: f64,
}

#[derive(Debug, Clone, Copy)]
struct NextDeadline {
    t: f64,
    task: usize,
    job: u64,
}

impl PartialEq for NextDeadline {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for NextDeadline {}

impl PartialOrd for NextDeadline {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for NextDeadline {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t
            .total_cmp(&other.t)
            .then(self.task.cmp(&other.task))
    }
}

/// Unbounded iterator over the distinct absolute deadlines of a task set,
/// accumulating the demand bound function incrementally. Deadlines that
/// coincide within tolerance are merged into one step.
#[derive(Debug, Clone)]
pub struct DemandSteps {
    tasks: Vec<(f64, f64, f64)>,
    heap: BinaryHeap<Reverse<NextDeadline>>,
    demand: f64,
}

impl DemandSteps {
    fn new(tasks: &[Task]) -> Self {
        let heap = tasks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                Reverse(NextDeadline {
                    t: t.deadline,
                    task: i,
                    job: 0,
                })
            })
            .collect();
        DemandSteps {
            tasks: tasks.iter().map(|t| (t.wcet, t.period, t.deadline)).collect(),
            heap,
            demand: 0.0,
        }
    }

    fn advance(&mut self, next: NextDeadline) {
        let (c, p, d) = self.tasks[next.task];
        self.demand += c;
        let job = next.job + 1;
        self.heap.push(Reverse(NextDeadline {
            t: d + job as f64 * p,
            task: next.task,
            job,
        }));
    }
}

impl Iterator for DemandSteps {
    type Item = DemandStep;

    fn next(&mut self) -> Option<DemandStep> {
        let Reverse(first) = self.heap.pop()?;
        let t = first.t;
        self.advance(first);
        while let Some(Reverse(peek)) = self.heap.peek() {
            if peek.t > t + EPS {
                break;
            }
            let Reverse(n) = self.heap.pop().expect("peeked");
            self.advance(n);
        }
        Some(DemandStep {
            t,
            dbf: self.demand,
        })
    }
}
