//! Reproducible random task sets.
//!
//! Each task draws a size `k` uniformly from `{1, …, 100}` and a ratio `ρ`
//! from one of four distributions, clamped to `[0.001, 0.999]`. For implicit
//! deadlines `(k, ρ) = (T, u)`; for constrained deadlines `(k, ρ) = (D, λ)`
//! and `T` is drawn uniformly from `{D, …, 100}`.
//!
//! A *sequence* starts from `m + 1` tasks and grows one task at a time; every
//! set whose density does not exceed `m` is emitted. Sequence `i` of seed `s`
//! draws from ChaCha8 stream `i` keyed by `s`, so sequences can be generated
//! in any order or in parallel with identical results.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp};

use crate::math::le;
use crate::model::{DeadlineModel, Task, TaskSet};

pub const K_MIN: u32 = 1;
pub const K_MAX: u32 = 100;
pub const RHO_MIN: f64 = 0.001;
pub const RHO_MAX: f64 = 0.999;
pub const HEAVY_PROBABILITY: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Distribution {
    /// `ρ ~ U[1/k, 1]`
    Uniform,
    /// Heavy with probability 1/3: `U[0.5, 1]`, otherwise `U[1/k, 0.5]`.
    Bimodal,
    /// Exponential with mean 0.25.
    Exp025,
    /// Exponential with mean 0.50.
    Exp050,
}

impl Distribution {
    pub const ALL: [Distribution; 4] = [
        Distribution::Uniform,
        Distribution::Bimodal,
        Distribution::Exp025,
        Distribution::Exp050,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::Bimodal => "bimodal",
            Distribution::Exp025 => "exp025",
            Distribution::Exp050 => "exp050",
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Distribution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase();
        Distribution::ALL
            .into_iter()
            .find(|d| d.as_str() == norm)
            .ok_or_else(|| format!("unknown distribution `{s}` (expected uniform, bimodal, exp025 or exp050)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenConfig {
    pub deadline_model: DeadlineModel,
    pub distribution: Distribution,
    pub m: usize,
    pub seed: u64,
    /// Size of the first set of each sequence.
    pub initial_tasks: usize,
}

impl GenConfig {
    pub fn new(deadline_model: DeadlineModel, distribution: Distribution, m: usize, seed: u64) -> Self {
        assert!(m >= 1, "a platform needs at least one processor");
        GenConfig {
            deadline_model,
            distribution,
            m,
            seed,
            initial_tasks: m + 1,
        }
    }
}

/// Generator for sequence `index` of `seed`.
pub fn sequence_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn draw_k<R: Rng + ?Sized>(rng: &mut R) -> u32 {
    rng.random_range(K_MIN..=K_MAX)
}

/// One draw of `ρ`, with the pre-clamp value and the bimodal branch taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoDraw {
    pub value: f64,
    pub raw: f64,
    pub heavy: Option<bool>,
}

fn uniform_between<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn draw_rho_detailed<R: Rng + ?Sized>(rng: &mut R, dist: Distribution, k: u32) -> RhoDraw {
    let inv_k = 1.0 / f64::from(k.max(1));
    let (raw, heavy) = match dist {
        Distribution::Uniform => (uniform_between(rng, inv_k, 1.0), None),
        Distribution::Bimodal => {
            let heavy = rng.random::<f64>() < HEAVY_PROBABILITY;
            let raw = if heavy {
                uniform_between(rng, 0.5, 1.0)
            } else {
                // For k <= 2 the light range degenerates or inverts; the
                // draw then lands between 0.5 and 1/k.
                uniform_between(rng, inv_k, 0.5)
            };
            (raw, Some(heavy))
        }
        Distribution::Exp025 => (exponential(rng, 0.25), None),
        Distribution::Exp050 => (exponential(rng, 0.50), None),
    };
    RhoDraw {
        value: raw.clamp(RHO_MIN, RHO_MAX),
        raw,
        heavy,
    }
}

fn exponential<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    Exp::new(1.0 / mean).expect("positive rate").sample(rng)
}

pub fn draw_rho<R: Rng + ?Sized>(rng: &mut R, dist: Distribution, k: u32) -> f64 {
    draw_rho_detailed(rng, dist, k).value
}

pub fn gen_task<R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig, id: usize) -> Task {
    let k = draw_k(rng);
    let rho = draw_rho(rng, cfg.distribution, k);
    let k = f64::from(k);
    match cfg.deadline_model {
        DeadlineModel::Implicit => Task::new(id, rho * k, k, k),
        DeadlineModel::Constrained => {
            let period = f64::from(rng.random_range(k as u32..=K_MAX));
            Task::new(id, rho * k, period, k)
        }
    }
}

/// Growing task sets of one sequence.
#[derive(Debug, Clone)]
pub struct GrowthStream {
    rng: ChaCha8Rng,
    cfg: GenConfig,
    set: TaskSet,
    density: f64,
    done: bool,
}

impl GrowthStream {
    fn push_task(&mut self) {
        let task = gen_task(&mut self.rng, &self.cfg, self.set.len() + 1);
        self.density += task.density();
        self.set.push_unchecked(task);
    }

    fn trivially_schedulable(&self) -> bool {
        self.set.len() == self.cfg.m && self.set.tasks().iter().all(|t| le(t.density(), 1.0))
    }
}

impl Iterator for GrowthStream {
    type Item = TaskSet;

    fn next(&mut self) -> Option<TaskSet> {
        loop {
            if self.done {
                return None;
            }
            if self.set.len() < self.cfg.initial_tasks {
                while self.set.len() < self.cfg.initial_tasks {
                    self.push_task();
                }
            } else {
                self.push_task();
            }
            if self.density > self.cfg.m as f64 {
                self.done = true;
                return None;
            }
            if !self.trivially_schedulable() {
                return Some(self.set.clone());
            }
        }
    }
}

/// Sets emitted by sequence `index` of `cfg.seed`.
pub fn gen_task_set_stream(cfg: &GenConfig, index: u64) -> GrowthStream {
    GrowthStream {
        rng: sequence_rng(cfg.seed, index),
        cfg: *cfg,
        set: TaskSet::empty(cfg.deadline_model),
        density: 0.0,
        done: false,
    }
}

/// A generated set tagged with its origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub sequence: u64,
    pub set: TaskSet,
}

/// All sets of sequences `0..sequences`, in sequence order.
pub fn generate(cfg: &GenConfig, sequences: u64) -> Vec<Sample> {
    (0..sequences)
        .flat_map(|sequence| {
            gen_task_set_stream(cfg, sequence).map(move |set| Sample { sequence, set })
        })
        .collect()
}
