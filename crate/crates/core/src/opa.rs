//! Optimal partitioning by exhaustive search.
//!
//! Processors are identical, so a partition is an unlabeled set of at most
//! `m` blocks. Blocks are enumerated as restricted growth strings: task `i`
//! joins one of the blocks opened by tasks `0..i` or opens the next one.
//! Adding a task never makes a failing block pass under the exact tests, so
//! any prefix with a failing block is pruned.

use thiserror::Error;

use crate::analysis::{run_test, spare_capacity, TestError, TestId};
use crate::model::{DeadlineModel, Task, TaskSet};
use crate::partition::{AssignOutcome, Partition};

pub const DEFAULT_MAX_TASKS_EDF: usize = 14;
pub const DEFAULT_MAX_TASKS_FP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpaConfig {
    pub test: TestId,
    pub max_tasks: usize,
}

impl OpaConfig {
    /// Default size cap for the given exact test.
    pub fn new(test: TestId) -> Result<Self, OpaError> {
        let max_tasks = match test {
            TestId::EdfBhr => DEFAULT_MAX_TASKS_EDF,
            TestId::DmAbrtw => DEFAULT_MAX_TASKS_FP,
            other => return Err(OpaError::InexactTest(other)),
        };
        Ok(OpaConfig { test, max_tasks })
    }

    pub fn with_max_tasks(mut self, max_tasks: usize) -> Self {
        self.max_tasks = max_tasks;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpaError {
    #[error("{0} is not an exact test; optimal partitioning needs EDF-BHR or DM-ABRTW")]
    InexactTest(TestId),
    #[error("{n} tasks exceed the optimal-partitioning cap of {max}")]
    TooManyTasks { n: usize, max: usize },
    #[error(transparent)]
    Test(#[from] TestError),
}

/// Every partition of `{0, …, n−1}` into at most `m` unlabeled blocks, as
/// block labels per element, in lexicographic order.
#[derive(Debug, Clone)]
pub struct SetPartitions {
    labels: Vec<usize>,
    /// `prefix_max[i] = max(labels[..=i])`
    prefix_max: Vec<usize>,
    m: usize,
    started: bool,
    done: bool,
}

pub fn set_partitions(n: usize, m: usize) -> SetPartitions {
    SetPartitions {
        labels: vec![0; n],
        prefix_max: vec![0; n],
        m,
        started: false,
        done: m == 0 && n > 0,
    }
}

impl Iterator for SetPartitions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.labels.clone());
        }
        let n = self.labels.len();
        // Rightmost element that can still be bumped.
        let mut i = n;
        while i > 1 {
            i -= 1;
            let cap = (self.prefix_max[i - 1] + 1).min(self.m - 1);
            if self.labels[i] < cap {
                self.labels[i] += 1;
                self.prefix_max[i] = self.prefix_max[i - 1].max(self.labels[i]);
                for j in i + 1..n {
                    self.labels[j] = 0;
                    self.prefix_max[j] = self.prefix_max[i];
                }
                return Some(self.labels.clone());
            }
        }
        self.done = true;
        None
    }
}

/// Which feasible partition to prefer once a witness exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// First feasible partition in enumeration order.
    FirstFound,
    /// Fewest nonempty processors.
    MinProcessors,
    /// Largest minimum spare capacity over the `m` processors.
    MaxMinSpare,
}

struct Search<'a> {
    tasks: &'a [Task],
    model: DeadlineModel,
    /// Longest prefix placed so far.
    deepest: usize,
    test: TestId,
    blocks: Vec<TaskSet>,
    spares: Vec<f64>,
    max_blocks: usize,
    track_spare: bool,
    best: Option<(Vec<TaskSet>, f64)>,
    stop_at_first: bool,
}

impl Search<'_> {
    fn min_spare(&self) -> f64 {
        self.spares.iter().copied().fold(1.0, f64::min)
    }

    fn dfs(&mut self, i: usize) -> Result<(), TestError> {
        self.deepest = self.deepest.max(i);
        if i == self.tasks.len() {
            let score = if self.track_spare { self.min_spare() } else { 0.0 };
            if self.best.as_ref().is_none_or(|(_, b)| score > *b) {
                self.best = Some((self.blocks.clone(), score));
            }
            return Ok(());
        }
        let task = self.tasks[i];
        let open = self.blocks.len();
        for b in 0..=open {
            if b == open {
                if open == self.max_blocks {
                    break;
                }
                self.blocks.push(TaskSet::empty(self.model));
                self.spares.push(1.0);
            }
            self.blocks[b].push_unchecked(task);
            if run_test(self.test, &self.blocks[b])?.schedulable {
                let saved = self.spares[b];
                if self.track_spare {
                    self.spares[b] = spare_capacity(self.test, &self.blocks[b]);
                }
                // Spare only shrinks as tasks are added, so a prefix that
                // cannot beat the incumbent is dead.
                let promising = !self.track_spare
                    || self.best.as_ref().is_none_or(|(_, best)| self.min_spare() > *best);
                if promising {
                    self.dfs(i + 1)?;
                }
                self.spares[b] = saved;
            }
            self.blocks[b].pop();
            if b == open {
                self.blocks.pop();
                self.spares.pop();
            }
            if self.stop_at_first && self.best.is_some() {
                return Ok(());
            }
        }
        Ok(())
    }
}

/// Searches every partition of `ts` onto `m` processors for one whose blocks
/// all pass the exact test. Returns the first witness in enumeration order.
pub fn opa_schedulable(ts: &TaskSet, m: usize, cfg: OpaConfig) -> Result<AssignOutcome, OpaError> {
    opa_search(ts, m, cfg, Objective::FirstFound)
}

/// Like [`opa_schedulable`], but keeps searching for the feasible partition
/// that is best under `objective`.
pub fn opa_search(
    ts: &TaskSet,
    m: usize,
    cfg: OpaConfig,
    objective: Objective,
) -> Result<AssignOutcome, OpaError> {
    assert!(m >= 1, "a platform needs at least one processor");
    if !matches!(cfg.test, TestId::EdfBhr | TestId::DmAbrtw) {
        return Err(OpaError::InexactTest(cfg.test));
    }
    if ts.len() > cfg.max_tasks {
        return Err(OpaError::TooManyTasks {
            n: ts.len(),
            max: cfg.max_tasks,
        });
    }
    if !cfg.test.accepts(ts.model()) {
        return Err(TestError::Incompatible {
            test: cfg.test,
            model: ts.model(),
        }
        .into());
    }

    let limits: Vec<usize> = match objective {
        Objective::MinProcessors => (1..=m).collect(),
        _ => vec![m],
    };
    let mut found = None;
    let mut deepest = 0;
    for max_blocks in limits {
        let mut search = Search {
            tasks: ts.tasks(),
            model: ts.model(),
            deepest: 0,
            test: cfg.test,
            blocks: Vec::with_capacity(max_blocks),
            spares: Vec::with_capacity(max_blocks),
            max_blocks,
            track_spare: objective == Objective::MaxMinSpare,
            best: None,
            stop_at_first: objective != Objective::MaxMinSpare,
        };
        search.dfs(0)?;
        deepest = search.deepest;
        if let Some((blocks, _)) = search.best {
            found = Some(blocks);
            break;
        }
    }

    let mut partition = Partition::new(m, ts, cfg.test);
    let success = found.is_some();
    if let Some(blocks) = found {
        for (slot, block) in partition.subsets.iter_mut().zip(blocks) {
            *slot = block;
        }
    }
    Ok(AssignOutcome {
        success,
        partition,
        // The first task no explored prefix could place.
        failed_task: (!success).then(|| ts.tasks()[deepest.min(ts.len().saturating_sub(1))].id),
    })
}
