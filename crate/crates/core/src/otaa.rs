//! Outer task assignment: a genetic algorithm over task-index vectors that
//! truly evaluates one surrogate-selected offspring per iteration, with a
//! memory of good assignments carried across frames and random immigrants.

use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::budget::BudgetAccountant;
use crate::error::{Error, Result};
use crate::ibaa::BandwidthPlanner;
use crate::kriging::{lhs_initial_population, Dataset, EvaluatedPoint, Kriging, KrigingConfig};
use crate::model::{validate_bandwidth, BandwidthAllocation, TaskAssignment};
use crate::scenario::{Scenario, TargetState};
use crate::utility::FrameContext;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuterConfig {
    /// Population size `P`.
    pub population: usize,
    /// Iterations at frame 1.
    pub iterations: usize,
    /// Iteration and budget factor `α` for frames after the first.
    pub shrink: f64,
    /// Memory ratio `r₁`.
    pub memory_ratio: f64,
    /// Immigrant ratio `r₂`.
    pub immigrant_ratio: f64,
    /// Memory refresh interval range `(a, b)`, inclusive.
    pub memory_interval: (usize, usize),
    pub crossover_rate: f64,
    /// Per-gene mutation rate; `None` means `1/N`.
    pub mutation_rate: Option<f64>,
    /// Evaluation budget of frame 1.
    pub budget: u64,
    /// Screen offspring with the surrogate. When false every new offspring
    /// is truly evaluated.
    pub surrogate: bool,
    /// Memory and random immigrants.
    pub memory: bool,
    pub kriging: KrigingConfig,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            population: 6,
            iterations: 400,
            shrink: 0.3,
            memory_ratio: 0.1,
            immigrant_ratio: 0.1,
            memory_interval: (5, 10),
            crossover_rate: 0.8,
            mutation_rate: None,
            budget: 100_000_000,
            surrogate: true,
            memory: true,
            kriging: KrigingConfig::default(),
        }
    }
}

impl OuterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config("outer population must be at least 2".into()));
        }
        if !(self.shrink > 0.0 && self.shrink <= 1.0) {
            return Err(Error::Config("shrink factor must be in (0, 1]".into()));
        }
        if !(0.0..0.5).contains(&self.memory_ratio) || !(0.0..0.5).contains(&self.immigrant_ratio) {
            return Err(Error::Config("memory and immigrant ratios must be in [0, 0.5)".into()));
        }
        if self.memory_interval.0 > self.memory_interval.1 || self.memory_interval.0 == 0 {
            return Err(Error::Config("memory interval needs 1 <= a <= b".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || self.mutation_rate.is_some_and(|p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Config("GA rates must be in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn memory_size(&self) -> usize {
        (self.memory_ratio * self.population as f64).ceil() as usize
    }

    pub fn immigrant_count(&self) -> usize {
        (self.immigrant_ratio * self.population as f64).ceil() as usize
    }

    /// Iterations of frame `k` (1-based).
    pub fn iterations_at(&self, frame: usize) -> usize {
        if frame <= 1 {
            self.iterations
        } else {
            (self.shrink * self.iterations as f64).round() as usize
        }
    }

    /// Budget of frame `k` (1-based).
    pub fn budget_at(&self, frame: usize) -> u64 {
        if frame <= 1 {
            self.budget
        } else {
            (self.shrink * self.budget as f64).round() as u64
        }
    }
}

/// Memory slot; `utility` is `None` while the slot still holds its random
/// initial assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySlot {
    pub assignment: TaskAssignment,
    pub utility: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryPopulation {
    pub slots: Vec<MemorySlot>,
}

impl MemoryPopulation {
    pub fn random<R: Rng + ?Sized>(size: usize, num_uavs: usize, num_radars: usize, frame: usize, rng: &mut R) -> Self {
        let slots = (0..size)
            .map(|_| MemorySlot {
                assignment: random_assignment(num_uavs, num_radars, frame, rng),
                utility: None,
            })
            .collect();
        Self { slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn assignments(&self) -> impl Iterator<Item = &TaskAssignment> {
        self.slots.iter().map(|s| &s.assignment)
    }
}

pub fn random_assignment<R: Rng + ?Sized>(num_uavs: usize, num_radars: usize, frame: usize, rng: &mut R) -> TaskAssignment {
    let tasks = (0..num_uavs).map(|_| rng.random_range(0..=num_radars)).collect();
    TaskAssignment::new(tasks, num_radars, frame).expect("task indices are in range")
}

/// Binary tournament on `fitness`; returns `population.len()` parents.
pub fn tournament<R: Rng + ?Sized>(population: &[TaskAssignment], fitness: &[f64], rng: &mut R) -> Vec<TaskAssignment> {
    (0..population.len())
        .map(|_| {
            let a = rng.random_range(0..population.len());
            let b = rng.random_range(0..population.len());
            let w = if fitness[b] > fitness[a] { b } else { a };
            population[w].clone()
        })
        .collect()
}

/// Uniform crossover of consecutive parent pairs with probability
/// `crossover_rate`, then per-gene resampling with probability
/// `mutation_rate`. An unpaired last parent is only mutated.
pub fn ga_step<R: Rng + ?Sized>(
    parents: &[TaskAssignment],
    crossover_rate: f64,
    mutation_rate: f64,
    rng: &mut R,
) -> Vec<TaskAssignment> {
    let mut genes: Vec<Vec<usize>> = parents.iter().map(|p| p.tasks().to_vec()).collect();
    for pair in genes.chunks_mut(2) {
        if let [a, b] = pair {
            if rng.random::<f64>() < crossover_rate {
                for d in 0..a.len() {
                    if rng.random::<bool>() {
                        std::mem::swap(&mut a[d], &mut b[d]);
                    }
                }
            }
        }
    }
    genes
        .into_iter()
        .zip(parents)
        .map(|(mut g, p)| {
            for t in g.iter_mut() {
                if rng.random::<f64>() < mutation_rate {
                    *t = rng.random_range(0..=p.num_radars());
                }
            }
            TaskAssignment::new(g, p.num_radars(), p.frame).expect("task indices are in range")
        })
        .collect()
}

/// Stores `best` in the memory: into a random still-random slot if one
/// exists, else over the closest slot by Hamming distance (lowest index on
/// ties) when `best` is strictly better. Returns the changed slot.
pub fn memory_update<R: Rng + ?Sized>(memory: &mut MemoryPopulation, best: &EvaluatedPoint, rng: &mut R) -> Option<usize> {
    if memory.slots.is_empty() || memory.assignments().any(|a| a.tasks() == best.assignment.tasks()) {
        return None;
    }
    let random: Vec<usize> = (0..memory.len()).filter(|&i| memory.slots[i].utility.is_none()).collect();
    let slot = if let Some(&i) = random.choose(rng) {
        i
    } else {
        let (i, _) = memory
            .slots
            .iter()
            .enumerate()
            .min_by_key(|(i, s)| (s.assignment.hamming(&best.assignment), *i))
            .expect("memory is nonempty");
        if best.utility <= memory.slots[i].utility.unwrap_or(f64::NEG_INFINITY) {
            return None;
        }
        i
    };
    memory.slots[slot] = MemorySlot {
        assignment: best.assignment.clone(),
        utility: Some(best.utility),
    };
    Some(slot)
}

/// Replaces the `count` lowest-predicted individuals by uniform random
/// assignments. Returns the replaced indices in ascending order.
pub fn random_immigrants<R: Rng + ?Sized>(
    population: &mut [TaskAssignment],
    predictions: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| predictions[a].total_cmp(&predictions[b]).then(a.cmp(&b)));
    let mut replaced: Vec<usize> = order.into_iter().take(count.min(population.len())).collect();
    replaced.sort_unstable();
    for &i in &replaced {
        let p = &population[i];
        population[i] = random_assignment(p.num_uavs(), p.num_radars(), p.frame, rng);
    }
    replaced
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the inner search for `assignment`, so that every assignment has
/// one fixed evaluation per frame regardless of search order.
pub fn inner_seed(seed: u64, frame: usize, assignment: &TaskAssignment) -> u64 {
    let mut h = mix(seed ^ mix(frame as u64));
    for &t in assignment.tasks() {
        h = mix(h ^ t as u64);
    }
    h
}

/// Runs the bandwidth planner on assignments and charges the frame budget.
pub struct Evaluator<'a> {
    pub ctx: &'a FrameContext,
    pub planner: &'a dyn BandwidthPlanner,
    pub budget: &'a BudgetAccountant,
    pub seed: u64,
    pub runs: usize,
    pub truncated: bool,
}

impl<'a> Evaluator<'a> {
    pub fn new(ctx: &'a FrameContext, planner: &'a dyn BandwidthPlanner, budget: &'a BudgetAccountant, seed: u64) -> Self {
        Self {
            ctx,
            planner,
            budget,
            seed,
            runs: 0,
            truncated: false,
        }
    }

    /// `None` when the budget cannot pay for the run.
    pub fn evaluate(&mut self, assignment: &TaskAssignment) -> Option<EvaluatedPoint> {
        let assignment = assignment.clone().with_frame(self.ctx.frame);
        let mut rng = ChaCha8Rng::seed_from_u64(inner_seed(self.seed, self.ctx.frame, &assignment));
        let out = self.planner.plan(&assignment, self.ctx, self.budget, &mut rng);
        if out.truncated {
            self.truncated = true;
        }
        if !out.evaluated {
            return None;
        }
        self.runs += 1;
        let feasible = validate_bandwidth(&assignment, &out.bandwidth, &self.ctx.radar_bandwidths)
            .map(|r| r.feasible())
            .unwrap_or(false);
        Some(EvaluatedPoint {
            assignment,
            utility: out.utility,
            bandwidth: out.bandwidth,
            feasible,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub evaluations: u64,
    pub best_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub frame: usize,
    pub assignment: TaskAssignment,
    pub bandwidth: BandwidthAllocation,
    pub utility: f64,
    /// A feasible schedule was found. When false the result is the idle
    /// schedule, which is always feasible.
    pub found_feasible: bool,
    pub evaluations: u64,
    pub inner_runs: usize,
    pub iterations: usize,
    pub truncated: bool,
    pub history: Vec<HistoryRow>,
    pub wall_time_s: f64,
}

impl FrameResult {
    fn from_dataset(frame: usize, dataset: &Dataset, num_uavs: usize, num_radars: usize) -> (TaskAssignment, BandwidthAllocation, f64, bool) {
        match dataset.best().filter(|p| p.feasible) {
            Some(p) => (p.assignment.clone(), p.bandwidth.clone(), p.utility, true),
            None => (
                TaskAssignment::idle(num_uavs, num_radars, frame),
                BandwidthAllocation::zeros(num_uavs, num_radars, frame),
                0.0,
                false,
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub result: FrameResult,
    pub memory: Option<MemoryPopulation>,
}

fn best_feasible_utility(dataset: &Dataset) -> f64 {
    dataset.best().filter(|p| p.feasible).map_or(f64::NEG_INFINITY, |p| p.utility)
}

struct Surrogate {
    model: Option<Kriging>,
    cfg: KrigingConfig,
}

impl Surrogate {
    fn fit(dataset: &Dataset, cfg: &KrigingConfig) -> Self {
        let mut s = Self { model: None, cfg: cfg.clone() };
        s.refit(dataset);
        s
    }

    fn refit(&mut self, dataset: &Dataset) {
        let (x, y): (Vec<_>, Vec<_>) = dataset.points().iter().filter(|p| p.feasible).map(|p| (p.features(), p.utility)).unzip();
        self.model = if x.len() >= 2 {
            match Kriging::fit(x, y, self.cfg.clone()) {
                Ok(m) => Some(m),
                Err(e) => {
                    log::warn!("otaa: surrogate fit failed: {e}");
                    None
                }
            }
        } else {
            None
        };
    }

    fn add(&mut self, dataset: &Dataset, point: &EvaluatedPoint) {
        if !point.feasible {
            return;
        }
        match &mut self.model {
            Some(m) => {
                if let Err(e) = m.update(point.features(), point.utility) {
                    log::warn!("otaa: surrogate update failed: {e}");
                    self.refit(dataset);
                }
            }
            None => self.refit(dataset),
        }
    }

    /// True value for known points, model prediction otherwise.
    fn score(&self, dataset: &Dataset, a: &TaskAssignment) -> f64 {
        if let Some(p) = dataset.get(a) {
            return if p.feasible { p.utility } else { f64::NEG_INFINITY };
        }
        match &self.model {
            Some(m) => m.predict(&crate::kriging::encode(a)),
            None => 0.0,
        }
    }
}

/// One frame of the outer search.
///
/// `memory` is the previous frame's memory (None at frame 1 or when the
/// memory module is off). `seed` fixes the inner searches; `rng` drives the
/// outer one.
pub fn solve_frame<R: Rng + ?Sized>(
    ctx: &FrameContext,
    memory: Option<MemoryPopulation>,
    cfg: &OuterConfig,
    planner: &dyn BandwidthPlanner,
    seed: u64,
    rng: &mut R,
) -> FrameOutput {
    let start = Instant::now();
    let frame = ctx.frame;
    let (n, m) = (ctx.num_uavs(), ctx.num_radars());
    let budget = BudgetAccountant::new(cfg.budget_at(frame));
    let mut eval = Evaluator::new(ctx, planner, &budget, seed);
    let mut dataset = Dataset::new();
    let p = cfg.population;
    let mutation_rate = cfg.mutation_rate.unwrap_or(1.0 / n as f64);

    let mut initial = lhs_initial_population(p, n, m, frame, rng);
    let mut memory = if cfg.memory {
        let mut mem = memory.unwrap_or_else(|| MemoryPopulation::random(cfg.memory_size(), n, m, frame, rng));
        for slot in &mut mem.slots {
            slot.assignment = slot.assignment.clone().with_frame(frame);
        }
        Some(mem)
    } else {
        None
    };
    let carried = frame > 1 && memory.is_some();
    if let Some(mem) = &mut memory {
        for slot in &mut mem.slots {
            let point = if let Some(known) = dataset.get(&slot.assignment) {
                Some(known.clone())
            } else {
                eval.evaluate(&slot.assignment)
            };
            if let Some(point) = point {
                if slot.utility.is_some() {
                    slot.utility = Some(point.utility);
                }
                if carried {
                    initial.push(point.assignment.clone());
                }
                dataset.insert(point);
            }
        }
    }
    for a in &initial {
        if !dataset.contains(a) {
            if let Some(point) = eval.evaluate(a) {
                dataset.insert(point);
            }
        }
    }
    // merged start: the top P distinct evaluated individuals
    let mut population: Vec<TaskAssignment> = {
        let mut seen = std::collections::HashSet::new();
        let mut pool: Vec<&EvaluatedPoint> = initial
            .iter()
            .filter_map(|a| dataset.get(a))
            .filter(|pt| seen.insert(pt.assignment.tasks().to_vec()))
            .collect();
        pool.sort_by(|a, b| (b.feasible, b.utility).partial_cmp(&(a.feasible, a.utility)).unwrap_or(std::cmp::Ordering::Equal));
        let mut pop: Vec<TaskAssignment> = pool.into_iter().take(p).map(|pt| pt.assignment.clone()).collect();
        while pop.len() < p {
            pop.push(random_assignment(n, m, frame, rng));
        }
        pop
    };

    let mut surrogate = Surrogate::fit(&dataset, &cfg.kriging);
    let (a, b) = cfg.memory_interval;
    let mut t_m = rng.random_range(a..=b);
    let iterations = cfg.iterations_at(frame);
    let mut history = Vec::with_capacity(iterations + 1);
    history.push(HistoryRow {
        iteration: 0,
        evaluations: budget.consumed(),
        best_utility: best_feasible_utility(&dataset),
    });
    let mut done = 0;
    for t in 0..iterations {
        if eval.truncated || budget.remaining() == 0 {
            break;
        }
        if let Some(mem) = &mut memory {
            if t == t_m {
                if let Some(best) = dataset.best().filter(|p| p.feasible) {
                    memory_update(mem, best, rng);
                }
                t_m = t + rng.random_range(a..=b);
            }
        }
        let fitness: Vec<f64> = population.iter().map(|u| surrogate.score(&dataset, u)).collect();
        let parents = tournament(&population, &fitness, rng);
        let mut offspring = ga_step(&parents, cfg.crossover_rate, mutation_rate, rng);

        if cfg.surrogate {
            let mut predictions: Vec<f64> = offspring.iter().map(|u| surrogate.score(&dataset, u)).collect();
            if cfg.memory {
                for i in random_immigrants(&mut offspring, &predictions, cfg.immigrant_count(), rng) {
                    predictions[i] = surrogate.score(&dataset, &offspring[i]);
                }
            }
            let pick = (0..offspring.len())
                .filter(|&i| !dataset.contains(&offspring[i]))
                .max_by(|&i, &j| predictions[i].total_cmp(&predictions[j]).then(j.cmp(&i)));
            if let Some(i) = pick {
                if let Some(point) = eval.evaluate(&offspring[i]) {
                    let point_ref = point.clone();
                    if dataset.insert(point) {
                        surrogate.add(&dataset, &point_ref);
                    }
                }
            }
        } else {
            if cfg.memory {
                let predictions: Vec<f64> = offspring.iter().map(|u| surrogate.score(&dataset, u)).collect();
                random_immigrants(&mut offspring, &predictions, cfg.immigrant_count(), rng);
            }
            for u in &offspring {
                if !dataset.contains(u) {
                    if let Some(point) = eval.evaluate(u) {
                        let point_ref = point.clone();
                        if dataset.insert(point) {
                            surrogate.add(&dataset, &point_ref);
                        }
                    }
                }
            }
        }

        // elitism through the dataset
        if let Some(best) = dataset.best().filter(|p| p.feasible) {
            if !offspring.iter().any(|u| u.tasks() == best.assignment.tasks()) {
                let scores: Vec<f64> = offspring.iter().map(|u| surrogate.score(&dataset, u)).collect();
                let worst = (0..offspring.len())
                    .min_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(i.cmp(&j)))
                    .expect("population is nonempty");
                offspring[worst] = best.assignment.clone();
            }
        }
        population = offspring;
        done = t + 1;
        history.push(HistoryRow {
            iteration: done,
            evaluations: budget.consumed(),
            best_utility: best_feasible_utility(&dataset),
        });
    }
    if let (Some(mem), Some(best)) = (&mut memory, dataset.best().filter(|p| p.feasible)) {
        memory_update(mem, best, rng);
    }

    let (assignment, bandwidth, utility, found_feasible) = FrameResult::from_dataset(frame, &dataset, n, m);
    FrameOutput {
        result: FrameResult {
            frame,
            assignment,
            bandwidth,
            utility,
            found_feasible,
            evaluations: budget.consumed(),
            inner_runs: eval.runs,
            iterations: done,
            truncated: eval.truncated || done < iterations,
            history,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        memory,
    }
}

/// Runs `solve_frame` over a target trajectory, carrying the memory forward.
pub fn run_scenario<R: Rng + ?Sized>(
    scenario: &Scenario,
    trajectory: &[TargetState],
    cfg: &OuterConfig,
    planner: &dyn BandwidthPlanner,
    seed: u64,
    rng: &mut R,
) -> Result<Vec<FrameResult>> {
    cfg.validate()?;
    let mut memory = None;
    let mut out = Vec::with_capacity(trajectory.len());
    for target in trajectory {
        let ctx = FrameContext::new(scenario, target)?;
        let frame = solve_frame(&ctx, memory.take(), cfg, planner, seed, rng);
        memory = frame.memory;
        out.push(frame.result);
    }
    Ok(out)
}
