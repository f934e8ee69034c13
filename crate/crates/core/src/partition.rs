//! Sequential task-to-processor assignment with bin-packing heuristics.

use std::fmt;
use std::str::FromStr;

use crate::analysis::{run_test, spare_capacity, TestError, TestId};
use crate::model::{Task, TaskSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Heuristic {
    /// First processor, starting from the first, that passes the test.
    FirstFit,
    /// Passing processor with the least spare capacity after assignment.
    BestFit,
    /// Passing processor with the most spare capacity after assignment.
    WorstFit,
    /// Like first fit, but never looks behind the processor that took the
    /// previous task.
    NextFit,
}

impl Heuristic {
    pub const ALL: [Heuristic; 4] = [
        Heuristic::FirstFit,
        Heuristic::BestFit,
        Heuristic::WorstFit,
        Heuristic::NextFit,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Heuristic::FirstFit => "FF",
            Heuristic::BestFit => "BF",
            Heuristic::WorstFit => "WF",
            Heuristic::NextFit => "NF",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        Heuristic::ALL
            .into_iter()
            .find(|h| h.code() == up)
            .ok_or_else(|| format!("unknown heuristic `{s}` (expected ff, bf, wf or nf)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SortKey {
    Deadline,
    Density,
    Period,
    Utilization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Order in which tasks are offered to the heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SortCriterion {
    pub key: SortKey,
    pub direction: Direction,
}

impl SortCriterion {
    pub const ALL: [SortCriterion; 8] = {
        use Direction::*;
        use SortKey::*;
        [
            SortCriterion::new(Deadline, Increasing),
            SortCriterion::new(Deadline, Decreasing),
            SortCriterion::new(Density, Increasing),
            SortCriterion::new(Density, Decreasing),
            SortCriterion::new(Period, Increasing),
            SortCriterion::new(Period, Decreasing),
            SortCriterion::new(Utilization, Increasing),
            SortCriterion::new(Utilization, Decreasing),
        ]
    };

    pub const fn new(key: SortKey, direction: Direction) -> Self {
        SortCriterion { key, direction }
    }

    /// Two-letter code: direction (`I`/`D`) then key (`D`eadline,
    /// density `L`, `P`eriod, `U`tilization).
    pub fn code(self) -> &'static str {
        use Direction::*;
        use SortKey::*;
        match (self.direction, self.key) {
            (Increasing, Deadline) => "ID",
            (Decreasing, Deadline) => "DD",
            (Increasing, Density) => "IL",
            (Decreasing, Density) => "DL",
            (Increasing, Period) => "IP",
            (Decreasing, Period) => "DP",
            (Increasing, Utilization) => "IU",
            (Decreasing, Utilization) => "DU",
        }
    }

    fn key_of(self, t: &Task) -> f64 {
        match self.key {
            SortKey::Deadline => t.deadline,
            SortKey::Density => t.density(),
            SortKey::Period => t.period,
            SortKey::Utilization => t.utilization(),
        }
    }
}

impl fmt::Display for SortCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for SortCriterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        if let Some(c) = SortCriterion::ALL
            .into_iter()
            .find(|c| c.code().eq_ignore_ascii_case(&norm))
        {
            return Ok(c);
        }
        let (dir, key) = norm
            .split_once('-')
            .ok_or_else(|| format!("unknown sort criterion `{s}`"))?;
        let direction = match dir {
            "inc" | "increasing" => Direction::Increasing,
            "dec" | "decreasing" => Direction::Decreasing,
            _ => return Err(format!("unknown sort direction in `{s}`")),
        };
        let key = match key {
            "deadline" => SortKey::Deadline,
            "density" => SortKey::Density,
            "period" => SortKey::Period,
            "utilization" | "util" => SortKey::Utilization,
            _ => return Err(format!("unknown sort key in `{s}`")),
        };
        Ok(SortCriterion { key, direction })
    }
}

/// Parses a criterion, with `none` selecting generation order.
pub fn parse_order(s: &str) -> Result<Option<SortCriterion>, String> {
    if s.trim().eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

pub fn order_code(order: Option<SortCriterion>) -> &'static str {
    order.map_or("NONE", SortCriterion::code)
}

/// Stable sort on the criterion's key; tasks keep their ids.
pub fn sort_tasks(ts: &TaskSet, c: SortCriterion) -> TaskSet {
    let tasks = ts.tasks();
    let mut idx: Vec<usize> = (0..tasks.len()).collect();
    idx.sort_by(|&a, &b| {
        let ord = c.key_of(&tasks[a]).total_cmp(&c.key_of(&tasks[b]));
        match c.direction {
            Direction::Increasing => ord,
            Direction::Decreasing => ord.reverse(),
        }
    });
    ts.permuted(&idx)
}

/// Assignment of tasks to `m` identical processors.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub subsets: Vec<TaskSet>,
    pub test: TestId,
}

impl Partition {
    pub fn new(m: usize, ts: &TaskSet, test: TestId) -> Self {
        Partition {
            subsets: vec![TaskSet::empty(ts.model()); m],
            test,
        }
    }

    pub fn m(&self) -> usize {
        self.subsets.len()
    }

    /// Processors holding at least one task.
    pub fn processors_used(&self) -> usize {
        self.subsets.iter().filter(|s| !s.is_empty()).count()
    }

    pub fn spare_capacities(&self) -> Vec<f64> {
        self.subsets
            .iter()
            .map(|s| spare_capacity(self.test, s))
            .collect()
    }

    /// Mean spare capacity over all `m` processors; empty ones count as 1.
    pub fn mean_spare(&self) -> f64 {
        if self.subsets.is_empty() {
            return 1.0;
        }
        self.spare_capacities().iter().sum::<f64>() / self.m() as f64
    }

    /// Every nonempty subset passes the partition's test.
    pub fn verify(&self) -> Result<bool, TestError> {
        for s in self.subsets.iter().filter(|s| !s.is_empty()) {
            if !run_test(self.test, s)?.schedulable {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Task ids per processor.
    pub fn ids(&self) -> Vec<Vec<usize>> {
        self.subsets
            .iter()
            .map(|s| s.tasks().iter().map(|t| t.id).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignOutcome {
    pub success: bool,
    pub partition: Partition,
    /// The first task no processor would accept.
    pub failed_task: Option<usize>,
}

/// True when `subset ∪ {task}` passes `test`.
pub fn admit(subset: &TaskSet, task: &Task, test: TestId) -> Result<bool, TestError> {
    let mut s = subset.clone();
    s.push_unchecked(*task);
    Ok(run_test(test, &s)?.schedulable)
}

/// Runs `test` on `subset` with `task` tentatively appended and, when it
/// passes, reports the spare capacity the processor would be left with.
fn try_place(
    subset: &mut TaskSet,
    task: Task,
    test: TestId,
    want_spare: bool,
) -> Result<Option<f64>, TestError> {
    subset.push_unchecked(task);
    let result = run_test(test, subset).map(|v| {
        v.schedulable
            .then(|| if want_spare { spare_capacity(test, subset) } else { 0.0 })
    });
    subset.pop();
    result
}

/// Sorts `ts` by `order` (generation order when `None`) and places tasks one
/// at a time with heuristic `h`, stopping at the first unplaceable task.
pub fn assign(
    ts: &TaskSet,
    m: usize,
    h: Heuristic,
    test: TestId,
    order: Option<SortCriterion>,
) -> Result<AssignOutcome, TestError> {
    assert!(m >= 1, "a platform needs at least one processor");
    if !test.accepts(ts.model()) {
        return Err(TestError::Incompatible {
            test,
            model: ts.model(),
        });
    }
    let sorted;
    let ts = match order {
        Some(c) => {
            sorted = sort_tasks(ts, c);
            &sorted
        }
        None => ts,
    };

    let mut partition = Partition::new(m, ts, test);
    let mut cursor = 0;
    for &task in ts.tasks() {
        let chosen = match h {
            Heuristic::FirstFit | Heuristic::NextFit => {
                let start = if h == Heuristic::NextFit { cursor } else { 0 };
                let mut found = None;
                for j in start..m {
                    if try_place(&mut partition.subsets[j], task, test, false)?.is_some() {
                        found = Some(j);
                        break;
                    }
                }
                found
            }
            Heuristic::BestFit | Heuristic::WorstFit => {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..m {
                    if let Some(spare) = try_place(&mut partition.subsets[j], task, test, true)? {
                        let better = match best {
                            None => true,
                            Some((_, b)) if h == Heuristic::BestFit => spare < b,
                            Some((_, b)) => spare > b,
                        };
                        if better {
                            best = Some((j, spare));
                        }
                    }
                }
                best.map(|(j, _)| j)
            }
        };
        match chosen {
            Some(j) => {
                partition.subsets[j].push_unchecked(task);
                cursor = j;
            }
            None => {
                return Ok(AssignOutcome {
                    success: false,
                    partition,
                    failed_task: Some(task.id),
                })
            }
        }
    }
    Ok(AssignOutcome {
        success: true,
        partition,
        failed_task: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DeadlineModel;
    use proptest::prelude::*;

    fn utils(us: &[f64]) -> TaskSet {
        let p: Vec<_> = us.iter().map(|&u| (u * 10.0, 10.0)).collect();
        TaskSet::implicit(&p).unwrap()
    }

    #[test]
    fn criteria_are_distinct_and_parse() {
        let mut codes: Vec<_> = SortCriterion::ALL.iter().map(|c| c.code()).collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), 8);
        for c in SortCriterion::ALL {
            assert_eq!(c.code().parse::<SortCriterion>(), Ok(c));
        }
        assert_eq!(
            "dec-density".parse::<SortCriterion>(),
            Ok(SortCriterion::new(SortKey::Density, Direction::Decreasing))
        );
        assert_eq!(parse_order("none"), Ok(None));
        assert!(parse_order("sideways").is_err());
        assert_eq!("wf".parse::<Heuristic>(), Ok(Heuristic::WorstFit));
    }

    #[test]
    fn sorting_is_stable() {
        let s = utils(&[0.2, 0.5, 0.3]);
        let d = sort_tasks(&s, SortCriterion::new(SortKey::Utilization, Direction::Decreasing));
        let ids: Vec<_> = d.tasks().iter().map(|t| t.id).collect();
        assert_eq!(ids, vec![2, 3, 1]);

        let eq = utils(&[0.2, 0.2, 0.2]);
        for c in SortCriterion::ALL {
            let ids: Vec<_> = sort_tasks(&eq, c).tasks().iter().map(|t| t.id).collect();
            assert_eq!(ids, vec![1, 2, 3], "{c}");
        }

        let p = TaskSet::implicit(&[(1., 6.), (1., 4.), (1., 4.)]).unwrap();
        let ids: Vec<_> = sort_tasks(&p, SortCriterion::new(SortKey::Period, Direction::Increasing))
            .tasks()
            .iter()
            .map(|t| t.id)
            .collect();
        assert_eq!(ids, vec![2, 3, 1]);
    }

    #[test]
    fn admission() {
        let empty = TaskSet::empty(DeadlineModel::Implicit);
        let t = Task::new(1, 9.0, 10.0, 10.0);
        assert!(admit(&empty, &t, TestId::EdfLl).unwrap());
        let one = utils(&[0.6]);
        assert!(!admit(&one, &Task::new(2, 5.0, 10.0, 10.0), TestId::EdfLl).unwrap());
        let rta = TaskSet::implicit(&[(1., 4.)]).unwrap();
        assert!(admit(&rta, &Task::new(2, 2.0, 6.0, 6.0), TestId::DmAbrtw).unwrap());
    }

    #[test]
    fn hand_traces() {
        let s = utils(&[0.5, 0.3, 0.4]);
        let ff = assign(&s, 2, Heuristic::FirstFit, TestId::EdfLl, None).unwrap();
        assert!(ff.success);
        assert_eq!(ff.partition.ids(), vec![vec![1, 2], vec![3]]);

        let wf = assign(&s, 2, Heuristic::WorstFit, TestId::EdfLl, None).unwrap();
        assert_eq!(wf.partition.ids(), vec![vec![1], vec![2, 3]]);

        let bad = utils(&[0.5, 0.4, 0.6, 0.5]);
        let out = assign(&bad, 2, Heuristic::FirstFit, TestId::EdfLl, None).unwrap();
        assert!(!out.success);
        assert_eq!(out.failed_task, Some(4));
        assert_eq!(out.partition.ids(), vec![vec![1, 2], vec![3]]);

        let ff4 = assign(&s, 4, Heuristic::FirstFit, TestId::EdfLl, None).unwrap();
        assert_eq!(ff4.partition.processors_used(), 2);
        let wf4 = assign(&s, 4, Heuristic::WorstFit, TestId::EdfLl, None).unwrap();
        assert_eq!(wf4.partition.processors_used(), 3);
    }

    #[test]
    fn best_fit_packs_tightest() {
        // After 0.5 | 0.6, the 0.2 task fits both; BF picks the fuller one.
        let s = utils(&[0.5, 0.6, 0.2]);
        let bf = assign(&s, 2, Heuristic::BestFit, TestId::EdfLl, None).unwrap();
        assert_eq!(bf.partition.ids(), vec![vec![1], vec![2, 3]]);
    }

    #[test]
    fn next_fit_never_looks_back() {
        let s = utils(&[0.5, 0.6, 0.4, 0.3]);
        let nf = assign(&s, 3, Heuristic::NextFit, TestId::EdfLl, None).unwrap();
        assert_eq!(nf.partition.ids(), vec![vec![1], vec![2, 3], vec![4]]);
        let ff = assign(&s, 3, Heuristic::FirstFit, TestId::EdfLl, None).unwrap();
        assert_eq!(ff.partition.ids(), vec![vec![1, 3], vec![2, 4], vec![]]);
        // No wrap-around: NF fails where FF would succeed.
        let tail = utils(&[0.6, 0.5, 0.4, 0.4]);
        assert!(!assign(&tail, 2, Heuristic::NextFit, TestId::EdfLl, None).unwrap().success);
        assert!(assign(&tail, 2, Heuristic::FirstFit, TestId::EdfLl, None).unwrap().success);
    }

    #[test]
    fn mean_spare_counts_empty_processors() {
        let s = utils(&[0.5]);
        let out = assign(&s, 2, Heuristic::FirstFit, TestId::RmLl, None).unwrap();
        assert!((out.partition.mean_spare() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn incompatible_test_is_an_error() {
        let cd = TaskSet::from_params(&[(1., 4., 3.)], DeadlineModel::Constrained).unwrap();
        assert!(assign(&cd, 2, Heuristic::FirstFit, TestId::RmLl, None).is_err());
    }

    fn arb_set() -> impl Strategy<Value = TaskSet> {
        prop::collection::vec((0.02f64..0.7, 2u32..=60, 0u32..=30, any::<bool>()), 1..12).prop_map(|v| {
            let implicit = v[0].3;
            let p: Vec<_> = v
                .iter()
                .map(|&(l, d, extra, _)| {
                    let d = d as f64;
                    let t = if implicit { d } else { d + extra as f64 };
                    (l * d, t, d)
                })
                .collect();
            let model = if implicit { DeadlineModel::Implicit } else { DeadlineModel::Constrained };
            TaskSet::from_params(&p, model).unwrap()
        })
    }

    fn arb_order() -> impl Strategy<Value = Option<SortCriterion>> {
        (0usize..9).prop_map(|i| SortCriterion::ALL.get(i).copied())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn outcomes_are_valid(ts in arb_set(), m in 1usize..5, order in arb_order()) {
            for test in TestId::compatible_with(ts.model()) {
                for h in Heuristic::ALL {
                    let out = assign(&ts, m, h, test, order).unwrap();
                    prop_assert!(out.partition.verify().unwrap());
                    prop_assert_eq!(out.success, out.failed_task.is_none());
                    let placed: usize = out.partition.subsets.iter().map(TaskSet::len).sum();
                    if out.success {
                        prop_assert_eq!(placed, ts.len());
                    } else {
                        prop_assert!(placed < ts.len());
                    }
                    let mut ids: Vec<usize> = out.partition.ids().concat();
                    ids.sort();
                    ids.dedup();
                    prop_assert_eq!(ids.len(), placed);
                }
            }
        }

        #[test]
        fn single_processor_heuristics_agree(ts in arb_set(), order in arb_order()) {
            for test in TestId::compatible_with(ts.model()) {
                let ff = assign(&ts, 1, Heuristic::FirstFit, test, order).unwrap();
                for h in [Heuristic::BestFit, Heuristic::WorstFit, Heuristic::NextFit] {
                    prop_assert_eq!(&assign(&ts, 1, h, test, order).unwrap(), &ff);
                }
            }
        }

        #[test]
        fn next_fit_uses_at_least_first_fit_processors(ts in arb_set(), m in 1usize..5) {
            for test in TestId::compatible_with(ts.model()) {
                let ff = assign(&ts, m, Heuristic::FirstFit, test, None).unwrap();
                let nf = assign(&ts, m, Heuristic::NextFit, test, None).unwrap();
                if nf.success {
                    prop_assert!(ff.success);
                    prop_assert!(nf.partition.processors_used() >= ff.partition.processors_used());
                }
            }
        }

        #[test]
        fn extra_processor_never_hurts(ts in arb_set(), m in 1usize..4, order in arb_order()) {
            for test in TestId::compatible_with(ts.model()) {
                for h in [Heuristic::FirstFit, Heuristic::BestFit, Heuristic::NextFit] {
                    if assign(&ts, m, h, test, order).unwrap().success {
                        prop_assert!(assign(&ts, m + 1, h, test, order).unwrap().success, "{h} {test}");
                    }
                }
            }
        }
    }
}
