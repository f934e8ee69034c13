//! Uniprocessor schedulability tests and the per-test spare-capacity metric.
//!
//! | id       | exactness  | complexity | deadlines   | policy |
//! |----------|------------|------------|-------------|--------|
//! | EDF-LL   | exact      | P          | implicit    | EDF    |
//! | EDF-BHR  | exact      | PP         | arbitrary   | EDF    |
//! | EDF-BF   | sufficient | P          | arbitrary   | EDF    |
//! | DM-ABRTW | exact      | PP         | constrained | FP     |
//! | DM-FBB   | sufficient | P          | arbitrary   | FP     |
//! | RM-LL    | sufficient | P          | implicit    | FP     |
//! | RM-BBB   | sufficient | P          | implicit    | FP     |
//! | RM-LMM   | sufficient | P          | implicit    | FP     |
//!
//! Arbitrary-deadline tests are only ever fed constrained-deadline sets.
//! Fixed-priority tests derive priorities themselves: deadline-monotonic for
//! constrained sets, rate-monotonic for implicit ones, ties by task id.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::math::{ceil_snap, floor_snap, le, EPS};
use crate::model::{dbf_star, rbf_star, DeadlineModel, Task, TaskSet};

/// EDF-BHR never scans deadlines past `2^16 · D_max`.
pub const LOAD_HORIZON_FACTOR: f64 = 65536.0;

/// Safety net on the response-time fixed point.
pub const MAX_RTA_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestId {
    EdfLl,
    EdfBhr,
    EdfBf,
    DmAbrtw,
    DmFbb,
    RmLl,
    RmBbb,
    RmLmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exactness {
    Exact,
    Sufficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Complexity {
    Polynomial,
    PseudoPolynomial,
}

/// The deadline model a test was designed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeadlineClass {
    Implicit,
    Constrained,
    Arbitrary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Edf,
    FixedPriority,
}

impl TestId {
    pub const ALL: [TestId; 8] = [
        TestId::EdfLl,
        TestId::EdfBhr,
        TestId::EdfBf,
        TestId::DmAbrtw,
        TestId::DmFbb,
        TestId::RmLl,
        TestId::RmBbb,
        TestId::RmLmm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestId::EdfLl => "EDF-LL",
            TestId::EdfBhr => "EDF-BHR",
            TestId::EdfBf => "EDF-BF",
            TestId::DmAbrtw => "DM-ABRTW",
            TestId::DmFbb => "DM-FBB",
            TestId::RmLl => "RM-LL",
            TestId::RmBbb => "RM-BBB",
            TestId::RmLmm => "RM-LMM",
        }
    }

    pub fn exactness(self) -> Exactness {
        match self {
            TestId::EdfLl | TestId::EdfBhr | TestId::DmAbrtw => Exactness::Exact,
            _ => Exactness::Sufficient,
        }
    }

    pub fn complexity(self) -> Complexity {
        match self {
            TestId::EdfBhr | TestId::DmAbrtw => Complexity::PseudoPolynomial,
            _ => Complexity::Polynomial,
        }
    }

    pub fn deadline_class(self) -> DeadlineClass {
        match self {
            TestId::EdfLl | TestId::RmLl | TestId::RmBbb | TestId::RmLmm => DeadlineClass::Implicit,
            TestId::DmAbrtw => DeadlineClass::Constrained,
            TestId::EdfBhr | TestId::EdfBf | TestId::DmFbb => DeadlineClass::Arbitrary,
        }
    }

    pub fn policy(self) -> Policy {
        match self {
            TestId::EdfLl | TestId::EdfBhr | TestId::EdfBf => Policy::Edf,
            _ => Policy::FixedPriority,
        }
    }

    pub fn accepts(self, model: DeadlineModel) -> bool {
        self.deadline_class() != DeadlineClass::Implicit || model == DeadlineModel::Implicit
    }

    /// Tests usable on sets of the given deadline model.
    pub fn compatible_with(model: DeadlineModel) -> impl Iterator<Item = TestId> {
        TestId::ALL.into_iter().filter(move |t| t.accepts(model))
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        TestId::ALL
            .into_iter()
            .find(|t| t.name() == norm)
            .ok_or_else(|| format!("unknown schedulability test `{s}`"))
    }
}

/// Evidence attached to a negative verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Witness {
    /// The first task found violating its condition.
    Task(usize),
    /// An instant at which demand exceeds supply.
    Instant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub schedulable: bool,
    pub detail: Option<Witness>,
}

impl Verdict {
    pub fn from_bool(schedulable: bool) -> Self {
        Verdict {
            schedulable,
            detail: None,
        }
    }

    fn pass() -> Self {
        Verdict::from_bool(true)
    }

    fn fail(w: Witness) -> Self {
        Verdict {
            schedulable: false,
            detail: Some(w),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TestError {
    #[error("{test} requires implicit deadlines, got a {model}-deadline task set")]
    Incompatible { test: TestId, model: DeadlineModel },
}

fn require_implicit(test: TestId, ts: &TaskSet) -> Result<(), TestError> {
    if test.accepts(ts.model()) {
        Ok(())
    } else {
        Err(TestError::Incompatible {
            test,
            model: ts.model(),
        })
    }
}

/// Registry dispatch. Tests designed for implicit deadlines refuse any other
/// model instead of answering `false`.
pub fn run_test(test: TestId, ts: &TaskSet) -> Result<Verdict, TestError> {
    match test {
        TestId::EdfLl => edf_ll(ts),
        TestId::EdfBhr => Ok(edf_bhr(ts)),
        TestId::EdfBf => Ok(edf_bf(ts)),
        TestId::DmAbrtw => Ok(dm_abrtw(ts)),
        TestId::DmFbb => Ok(dm_fbb(ts)),
        TestId::RmLl => rm_ll(ts),
        TestId::RmBbb => rm_bbb(ts),
        TestId::RmLmm => rm_lmm(ts),
    }
}

/// Unutilized capacity left on a processor: `1 − Load` for EDF-BHR and
/// `1 − Λ` for every other test. An empty processor has capacity 1.
pub fn spare_capacity(test: TestId, ts: &TaskSet) -> f64 {
    if ts.is_empty() {
        return 1.0;
    }
    match test {
        TestId::EdfBhr => 1.0 - load(ts).load,
        _ => 1.0 - ts.total_density(),
    }
}

// ---------------------------------------------------------------------------
// EDF

pub fn edf_ll(ts: &TaskSet) -> Result<Verdict, TestError> {
    require_implicit(TestId::EdfLl, ts)?;
    Ok(Verdict::from_bool(le(ts.total_utilization(), 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadResult {
    pub load: f64,
    /// Deadline at which the maximum ratio was found, when it exceeds `U`.
    pub witness_t: Option<f64>,
    /// The scan stopped at the `2^16 · D_max` cap before reaching the
    /// hyperperiod without proving the remaining instants irrelevant.
    pub truncated: bool,
}

struct Horizon {
    utilization: f64,
    /// `Σ (T_i − D_i)·u_i`, so that `DBF(t) <= U·t + slack` for all `t`.
    slack: f64,
    hyperperiod: f64,
    cap: f64,
}

impl Horizon {
    fn of(ts: &TaskSet) -> Self {
        let tasks = ts.tasks();
        let d_max = tasks.iter().map(|t| t.deadline).fold(0.0, f64::max);
        Horizon {
            utilization: ts.total_utilization(),
            slack: tasks
                .iter()
                .map(|t| (t.period - t.deadline).max(0.0) * t.utilization())
                .sum(),
            hyperperiod: ts.hyperperiod().map_or(f64::INFINITY, |p| p as f64),
            cap: LOAD_HORIZON_FACTOR * d_max,
        }
    }

    /// Last instant that can hold a first deadline miss.
    fn violation_bound(&self, d_max: f64) -> f64 {
        let u = self.utilization;
        if u < 1.0 - EPS {
            d_max.max(self.slack / (1.0 - u))
        } else {
            f64::INFINITY
        }
    }
}

/// `Load(τ) = max{U, sup_t DBF(τ,t)/t}`.
///
/// Deadlines are visited in increasing order. Since `DBF(t)/t <= U + S/t`
/// with `S = Σ (T_i − D_i)·u_i`, the scan stops as soon as the running
/// maximum `ℓ > U` satisfies `t >= S/(ℓ − U)`; otherwise it runs to the
/// hyperperiod or the `2^16 · D_max` cap, whichever comes first.
pub fn load(ts: &TaskSet) -> LoadResult {
    let u = ts.total_utilization();
    let plain = LoadResult {
        load: u,
        witness_t: None,
        truncated: false,
    };
    if ts.is_empty() || u > 1.0 + EPS || ts.has_implicit_deadlines() {
        return plain;
    }
    let h = Horizon::of(ts);
    let limit = h.hyperperiod.min(h.cap);
    let mut best = plain;
    let mut reached_limit = true;
    for step in ts.demand_steps() {
        if step.t > limit + EPS {
            break;
        }
        let ratio = step.dbf / step.t;
        if ratio > best.load {
            best.load = ratio;
            best.witness_t = Some(step.t);
        }
        if best.load > u && step.t >= h.slack / (best.load - u) {
            reached_limit = false;
            break;
        }
    }
    best.truncated = reached_limit && h.cap < h.hyperperiod;
    best
}

/// Exact EDF test `Load(τ) <= 1`.
///
/// The verdict only needs deadlines up to `min(P, L_a, 2^16·D_max)` where
/// `L_a = max(D_max, S/(1 − U))`; past `L_a` demand never exceeds supply.
pub fn edf_bhr(ts: &TaskSet) -> Verdict {
    if ts.is_empty() {
        return Verdict::pass();
    }
    let u = ts.total_utilization();
    if u > 1.0 + EPS {
        return Verdict::from_bool(false);
    }
    if ts.has_implicit_deadlines() {
        return Verdict::pass();
    }
    let d_max = ts.tasks().iter().map(|t| t.deadline).fold(0.0, f64::max);
    let h = Horizon::of(ts);
    let horizon = h.hyperperiod.min(h.cap).min(h.violation_bound(d_max));
    ts.demand_steps()
        .take_while(|s| s.t <= horizon + EPS)
        .find(|s| s.dbf / s.t > 1.0 + EPS)
        .map_or_else(Verdict::pass, |s| Verdict::fail(Witness::Instant(s.t)))
}

/// `D_i − DBF*(τ∖{τ_i}, D_i) >= C_i` and `1 − Σ_{j≠i} u_j >= u_i` for all `i`.
pub fn edf_bf(ts: &TaskSet) -> Verdict {
    interference_test(ts, |o, t| dbf_star(o, t))
}

// ---------------------------------------------------------------------------
// Fixed priority

/// Indices of `ts` from highest to lowest priority: deadline-monotonic for
/// constrained sets, rate-monotonic for implicit ones, ties by task id.
pub fn priority_order(ts: &TaskSet) -> Vec<usize> {
    let key = |t: &Task| match ts.model() {
        DeadlineModel::Constrained => t.deadline,
        DeadlineModel::Implicit => t.period,
    };
    let tasks = ts.tasks();
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by(|&a, &b| {
        key(&tasks[a])
            .total_cmp(&key(&tasks[b]))
            .then(tasks[a].id.cmp(&tasks[b].id))
    });
    order
}

/// Reorders `ts` into its fixed-priority order.
pub fn by_priority(ts: &TaskSet) -> TaskSet {
    ts.permuted(&priority_order(ts))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponseTime {
    Bounded(f64),
    /// An iterate exceeded the deadline.
    Diverged,
}

/// Worst-case response time of the task at index `i`, taking indices
/// `0..i` as the higher-priority tasks.
pub fn response_time(ts: &TaskSet, i: usize) -> ResponseTime {
    let tasks = ts.tasks();
    let task = &tasks[i];
    let hp = &tasks[..i];
    let mut w = task.wcet;
    for _ in 0..MAX_RTA_ITERATIONS {
        if w > task.deadline + EPS {
            return ResponseTime::Diverged;
        }
        let next = task.wcet
            + hp.iter()
                .map(|j| ceil_snap(w / j.period) * j.wcet)
                .sum::<f64>();
        if (next - w).abs() <= EPS {
            return ResponseTime::Bounded(next);
        }
        w = next;
    }
    ResponseTime::Diverged
}

/// Response-time analysis under deadline-monotonic priorities.
pub fn dm_abrtw(ts: &TaskSet) -> Verdict {
    let ordered = by_priority(ts);
    for i in 0..ordered.len() {
        if let ResponseTime::Diverged = response_time(&ordered, i) {
            return Verdict::fail(Witness::Task(ordered.tasks()[i].id));
        }
    }
    Verdict::pass()
}

/// `D_i − RBF*(τ∖{τ_i}, D_i) >= C_i` and `1 − Σ_{j≠i} u_j >= u_i` for all `i`.
pub fn dm_fbb(ts: &TaskSet) -> Verdict {
    interference_test(ts, |o, t| rbf_star(o, t))
}

fn interference_test(ts: &TaskSet, bound: impl Fn(&[Task], f64) -> f64) -> Verdict {
    let tasks = ts.tasks();
    let mut others = Vec::with_capacity(tasks.len());
    for (i, task) in tasks.iter().enumerate() {
        others.clear();
        others.extend(tasks.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, t)| *t));
        let interference = bound(&others, task.deadline);
        let other_util: f64 = others.iter().map(Task::utilization).sum();
        if !le(task.wcet, task.deadline - interference) || !le(task.utilization(), 1.0 - other_util) {
            return Verdict::fail(Witness::Task(task.id));
        }
    }
    Verdict::pass()
}

/// `n(2^{1/n} − 1)`
pub fn liu_layland_bound(n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let n = n as f64;
    n * (2f64.powf(1.0 / n) - 1.0)
}

pub fn rm_ll(ts: &TaskSet) -> Result<Verdict, TestError> {
    require_implicit(TestId::RmLl, ts)?;
    Ok(Verdict::from_bool(le(
        ts.total_utilization(),
        liu_layland_bound(ts.len()),
    )))
}

/// Hyperbolic bound `Π (u_i + 1) <= 2`.
pub fn rm_bbb(ts: &TaskSet) -> Result<Verdict, TestError> {
    require_implicit(TestId::RmBbb, ts)?;
    let product: f64 = ts.tasks().iter().map(|t| t.utilization() + 1.0).product();
    Ok(Verdict::from_bool(le(product, 2.0)))
}

/// `B(r, n) = n(r^{1/n} − 1) + 2/r − 1`, the RM bound for period ratio
/// `r = T_max/T_min ∈ [1, 2)`.
pub fn lmm_bound(r: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let nf = n as f64;
    nf * (r.powf(1.0 / nf) - 1.0) + 2.0 / r - 1.0
}

/// Folds every period into `[T_min, 2·T_min)` by dividing it (and its
/// execution time) by `2^⌊log2(T_i/T_min)⌋`. Utilizations are preserved.
pub fn scale_periods(ts: &TaskSet) -> TaskSet {
    let t_min = ts
        .tasks()
        .iter()
        .map(|t| t.period)
        .fold(f64::INFINITY, f64::min);
    let mut out = TaskSet::empty(DeadlineModel::Implicit);
    for t in ts.tasks() {
        let k = floor_snap((t.period / t_min).log2()).max(0.0);
        let f = 2f64.powi(k as i32);
        let p = t.period / f;
        out.push_unchecked(Task::new(t.id, t.wcet / f, p, p));
    }
    out
}

pub fn rm_lmm(ts: &TaskSet) -> Result<Verdict, TestError> {
    require_implicit(TestId::RmLmm, ts)?;
    if ts.is_empty() {
        return Ok(Verdict::pass());
    }
    let scaled = scale_periods(ts);
    let periods = scaled.tasks().iter().map(|t| t.period);
    let t_min = periods.clone().fold(f64::INFINITY, f64::min);
    let t_max = periods.fold(0.0, f64::max);
    let r = (t_max / t_min).clamp(1.0, 2.0);
    Ok(Verdict::from_bool(le(
        scaled.total_utilization(),
        lmm_bound(r, scaled.len()),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cd(params: &[(f64, f64, f64)]) -> TaskSet {
        TaskSet::from_params(params, DeadlineModel::Constrained).unwrap()
    }

    fn id(params: &[(f64, f64)]) -> TaskSet {
        TaskSet::implicit(params).unwrap()
    }

    /// Implicit set with period `T` and the given utilizations.
    fn utils(periods: &[f64], us: &[f64]) -> TaskSet {
        let p: Vec<_> = periods.iter().zip(us).map(|(&t, &u)| (u * t, t)).collect();
        id(&p)
    }

    fn sched(v: Result<Verdict, TestError>) -> bool {
        v.unwrap().schedulable
    }

    #[test]
    fn metadata() {
        assert_eq!(TestId::EdfBhr.exactness(), Exactness::Exact);
        assert_eq!(TestId::DmFbb.exactness(), Exactness::Sufficient);
        assert_eq!(TestId::DmAbrtw.complexity(), Complexity::PseudoPolynomial);
        assert_eq!(TestId::RmLmm.deadline_class(), DeadlineClass::Implicit);
        assert_eq!(TestId::DmAbrtw.deadline_class(), DeadlineClass::Constrained);
        assert_eq!(TestId::EdfBf.policy(), Policy::Edf);
        assert_eq!(TestId::compatible_with(DeadlineModel::Constrained).count(), 4);
        assert_eq!(TestId::compatible_with(DeadlineModel::Implicit).count(), 8);
        for t in TestId::ALL {
            assert_eq!(t.name().parse::<TestId>(), Ok(t));
            assert_eq!(t.name().to_lowercase().parse::<TestId>(), Ok(t));
        }
        assert!("edf".parse::<TestId>().is_err());
    }

    #[test]
    fn edf_ll_examples() {
        assert!(sched(edf_ll(&id(&[(1., 2.), (1., 2.)]))));
        assert!(!sched(edf_ll(&id(&[(1., 2.), (1., 2.), (0.1, 2.)]))));
        assert!(sched(edf_ll(&id(&[(2., 4.)]))));
        assert!(edf_ll(&cd(&[(1., 4., 3.)])).is_err());
    }

    #[test]
    fn load_examples() {
        let r = load(&cd(&[(2., 4., 3.)]));
        assert_abs_diff_eq!(r.load, 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(r.witness_t, Some(3.0));
        assert!(!r.truncated);

        let r = load(&id(&[(1., 4.), (1., 2.)]));
        assert_abs_diff_eq!(r.load, 0.75);
        assert_eq!(r.witness_t, None);
    }

    #[test]
    fn load_matches_brute_force_over_hyperperiod() {
        // Brute force: max of U and DBF(t)/t over every deadline t <= lcm(4,5) = 20.
        let s = cd(&[(2., 4., 3.), (1., 5., 5.)]);
        let mut brute: f64 = s.total_utilization();
        for t in 1..=20 {
            let t = t as f64;
            let jobs = |p: f64, d: f64| ((t - d) / p).floor().max(-1.0) + 1.0;
            let demand = 2.0 * jobs(4., 3.) + jobs(5., 5.);
            brute = brute.max(demand / t);
        }
        assert_abs_diff_eq!(brute, 11.0 / 15.0, epsilon = 1e-12);
        let r = load(&s);
        assert_abs_diff_eq!(r.load, brute, epsilon = 1e-12);
        assert_eq!(r.witness_t, Some(15.0));
    }

    #[test]
    fn edf_bhr_examples() {
        assert!(edf_bhr(&cd(&[(2., 4., 3.)])).schedulable);
        assert!(!edf_bhr(&cd(&[(2., 3., 2.), (2., 4., 3.)])).schedulable);
        assert!(edf_bhr(&id(&[(1., 2.), (1., 2.)])).schedulable);
        // U < 1 but demand peaks early: DBF(2) = 2 + 1 > 2.
        let v = edf_bhr(&cd(&[(2., 10., 2.), (1., 10., 2.)]));
        assert_eq!(v.detail, Some(Witness::Instant(2.0)));
    }

    #[test]
    fn edf_bf_examples() {
        assert!(edf_bf(&cd(&[(1., 5., 3.), (1., 5., 4.)])).schedulable);
        assert_eq!(
            edf_bf(&cd(&[(3., 5., 3.), (3., 5., 3.)])).detail,
            Some(Witness::Task(1))
        );
        assert!(edf_bf(&id(&[(1., 4.)])).schedulable);
    }

    #[test]
    fn response_time_examples() {
        let s = id(&[(1., 4.), (2., 6.), (3., 12.)]);
        assert_eq!(response_time(&s, 0), ResponseTime::Bounded(1.0));
        assert_eq!(response_time(&id(&[(1., 4.), (2., 6.)]), 1), ResponseTime::Bounded(3.0));
        assert_eq!(response_time(&s, 2), ResponseTime::Bounded(10.0));
        assert_eq!(response_time(&id(&[(2., 4.), (3., 6.)]), 1), ResponseTime::Diverged);
    }

    #[test]
    fn dm_abrtw_examples() {
        assert!(dm_abrtw(&id(&[(1., 4.), (2., 6.), (3., 12.)])).schedulable);
        assert_eq!(
            dm_abrtw(&id(&[(2., 4.), (3., 6.)])).detail,
            Some(Witness::Task(2))
        );
        assert!(dm_abrtw(&cd(&[(1., 4., 3.)])).schedulable);
        // Priorities come from deadlines, not from index order.
        assert!(dm_abrtw(&id(&[(3., 12.), (2., 6.), (1., 4.)])).schedulable);
    }

    #[test]
    fn dm_fbb_examples() {
        assert!(dm_fbb(&id(&[(1., 4.), (1., 5.)])).schedulable);
        assert_eq!(dm_fbb(&id(&[(2., 4.), (2., 5.)])).detail, Some(Witness::Task(1)));
        assert!(dm_fbb(&id(&[(3., 4.)])).schedulable);
    }

    #[test]
    fn rm_ll_examples() {
        assert!(sched(rm_ll(&utils(&[10.], &[0.99]))));
        assert!(sched(rm_ll(&utils(&[10., 20.], &[0.5, 0.3]))));
        assert!(!sched(rm_ll(&utils(&[10., 20.], &[0.6, 0.25]))));
        assert!(rm_ll(&cd(&[(1., 4., 3.)])).is_err());
    }

    #[test]
    fn rm_bbb_examples() {
        assert!(sched(rm_bbb(&utils(&[10.], &[1.0]))));
        assert!(sched(rm_bbb(&utils(&[10., 20.], &[0.6, 0.25]))));
        assert!(!sched(rm_bbb(&utils(&[10., 20.], &[0.5, 0.4]))));
    }

    #[test]
    fn rm_lmm_examples() {
        assert_abs_diff_eq!(
            lmm_bound(1.5, 2),
            2.0 * (1.5f64.sqrt() - 1.0) + 2.0 / 1.5 - 1.0,
            epsilon = 1e-15
        );
        assert!(sched(rm_lmm(&utils(&[4., 6.], &[0.3, 0.4]))));
        assert!(!sched(rm_lmm(&utils(&[4., 6.], &[0.5, 0.4]))));
        assert!(sched(rm_lmm(&utils(&[4., 4.], &[0.5, 0.5]))));
        assert!(!sched(rm_lmm(&utils(&[4., 4.], &[0.5, 0.51]))));
    }

    #[test]
    fn scaling_folds_periods_and_keeps_utilization() {
        let s = utils(&[3., 7., 12., 48., 100.], &[0.1, 0.2, 0.05, 0.3, 0.1]);
        let scaled = scale_periods(&s);
        for (a, b) in s.tasks().iter().zip(scaled.tasks()) {
            assert_abs_diff_eq!(a.utilization(), b.utilization(), epsilon = 1e-12);
            assert!(b.period >= 3.0 && b.period < 6.0, "{}", b.period);
        }
        // Harmonic periods fold onto one value: r' = 1 and B = 1.
        let h = utils(&[2., 4., 8.], &[0.3, 0.3, 0.3]);
        assert!(scale_periods(&h).tasks().iter().all(|t| t.period == 2.0));
        assert!(sched(rm_lmm(&h)));
    }

    #[test]
    fn spare_capacity_examples() {
        assert_abs_diff_eq!(spare_capacity(TestId::RmLl, &id(&[(1., 4.)])), 0.75);
        assert_abs_diff_eq!(
            spare_capacity(TestId::EdfBhr, &cd(&[(2., 4., 3.)])),
            1.0 / 3.0,
            epsilon = 1e-12
        );
        for t in TestId::ALL {
            assert_eq!(spare_capacity(t, &TaskSet::empty(DeadlineModel::Implicit)), 1.0);
        }
    }

    #[test]
    fn run_test_dispatch() {
        assert!(run_test(TestId::EdfLl, &utils(&[10., 10.], &[0.5, 0.4])).unwrap().schedulable);
        assert_eq!(
            run_test(TestId::RmLl, &cd(&[(1., 4., 3.)])),
            Err(TestError::Incompatible {
                test: TestId::RmLl,
                model: DeadlineModel::Constrained
            })
        );
        let imp = id(&[(1., 4.), (2., 6.), (3., 12.)]);
        let as_cd = cd(&[(1., 4., 4.), (2., 6., 6.), (3., 12., 12.)]);
        assert_eq!(
            run_test(TestId::DmAbrtw, &imp).unwrap(),
            run_test(TestId::DmAbrtw, &as_cd).unwrap()
        );
    }

    fn arb_implicit() -> impl Strategy<Value = TaskSet> {
        prop::collection::vec((0.01f64..0.6, 1u32..=100), 1..8).prop_map(|v| {
            let p: Vec<_> = v.iter().map(|&(u, t)| (u * t as f64, t as f64)).collect();
            TaskSet::implicit(&p).unwrap()
        })
    }

    fn arb_constrained() -> impl Strategy<Value = TaskSet> {
        prop::collection::vec((0.01f64..0.9, 1u32..=30, 0u32..=20), 1..6).prop_map(|v| {
            let p: Vec<_> = v
                .iter()
                .map(|&(l, d, extra)| {
                    let d = d as f64;
                    (l * d, d + extra as f64, d)
                })
                .collect();
            cd(&p)
        })
    }

    proptest! {
        #[test]
        fn lmm_bound_in_unit_interval(r in 1.0f64..2.0, n in 1usize..64) {
            let b = lmm_bound(r, n);
            prop_assert!(b > 0.0 && b <= 1.0 + 1e-12, "B({r},{n}) = {b}");
        }

        #[test]
        fn implicit_dominance(ts in arb_implicit()) {
            let ll = sched(rm_ll(&ts));
            let bbb = sched(rm_bbb(&ts));
            let lmm = sched(rm_lmm(&ts));
            let fbb = dm_fbb(&ts).schedulable;
            let rta = dm_abrtw(&ts).schedulable;
            let bhr = edf_bhr(&ts).schedulable;
            prop_assert!(!ll || bbb);
            prop_assert!(!ll || rta);
            prop_assert!(!bbb || rta);
            prop_assert!(!lmm || rta);
            prop_assert!(!fbb || rta);
            prop_assert!(!rta || bhr);
            prop_assert_eq!(bhr, sched(edf_ll(&ts)));
        }

        #[test]
        fn constrained_dominance(ts in arb_constrained()) {
            let bhr = edf_bhr(&ts).schedulable;
            prop_assert!(!edf_bf(&ts).schedulable || bhr);
            prop_assert!(!dm_abrtw(&ts).schedulable || bhr);
            prop_assert!(!dm_fbb(&ts).schedulable || dm_abrtw(&ts).schedulable);
            prop_assert_eq!(bhr, le(load(&ts).load, 1.0));
        }

        #[test]
        fn response_time_ignores_higher_priority_order(ts in arb_implicit(), seed in any::<u64>()) {
            let n = ts.len();
            let mut order: Vec<usize> = (0..n - 1).collect();
            // Deterministic shuffle from the seed.
            let mut s = seed;
            for i in (1..order.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (s >> 33) as usize % (i + 1));
            }
            order.push(n - 1);
            let a = response_time(&ts, n - 1);
            let b = response_time(&ts.permuted(&order), n - 1);
            match (a, b) {
                (ResponseTime::Bounded(x), ResponseTime::Bounded(y)) => prop_assert!((x - y).abs() < 1e-9),
                (x, y) => prop_assert_eq!(x, y),
            }
        }

        #[test]
        fn load_is_scale_invariant(ts in arb_constrained(), k in 1u32..5) {
            let k = k as f64;
            let scaled: Vec<_> = ts.tasks().iter().map(|t| (t.wcet * k, t.period * k, t.deadline * k)).collect();
            let a = load(&ts).load;
            let b = load(&cd(&scaled)).load;
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
