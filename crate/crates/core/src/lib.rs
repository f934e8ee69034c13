//! Partitioned multiprocessor real-time scheduling.
//!
//! A task set is split across `m` identical processors by a bin-packing
//! heuristic ([`partition`]) or by exhaustive search ([`opa`]), and every
//! processor is checked with a uniprocessor schedulability test
//! ([`analysis`]). [`taskgen`] and [`experiment`] drive Monte-Carlo
//! comparisons of the resulting algorithms.

pub mod analysis;
pub mod experiment;
pub mod format;
pub mod math;
pub mod model;
pub mod opa;
pub mod partition;
pub mod taskgen;

pub use analysis::{run_test, spare_capacity, TestError, TestId, Verdict};
pub use model::{DeadlineModel, Task, TaskSet};
