//! Inner bandwidth allocation: constrained differential evolution with a
//! feasibility-rule selection, an archive of high-utility infeasible trials,
//! and a rescue mutation for all-infeasible populations.
//!
//! Only the bandwidths of working UAVs on their assigned radar are decision
//! variables; every other matrix entry stays exactly zero.
//!
//! The sum constraints are equalities checked to a relative `1e-6`. Ranking
//! by raw violation makes the population collapse onto the first feasible
//! point it finds, so comparisons use a violation tolerance that starts at a
//! quantile of the initial population's violations and shrinks geometrically
//! to the feasibility tolerance over the first part of the run. After that
//! the ranking is the plain feasibility rule. The returned individual is the
//! best under the plain rule seen over the whole run.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::budget::BudgetAccountant;
use crate::error::{Error, Result};
use crate::model::{coalitions_of, feasibility_tolerance, BandwidthAllocation, TaskAssignment};
use crate::utility::{reward_term, violation_of, FrameContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerConfig {
    /// Population size `Q`.
    pub population: usize,
    /// Generations after the initial population.
    pub generations: usize,
    /// Scaling factor `F`.
    pub scaling: f64,
    /// Binomial crossover rate `CR`.
    pub crossover_rate: f64,
    /// Maximum number of archived trials per generation.
    pub archive_capacity: usize,
    /// Per-generation probability of the rescue mutation.
    pub rescue_probability: f64,
    /// Quantile of the initial violations used as the starting tolerance.
    pub tolerance_quantile: f64,
    /// Fraction of the generations over which the tolerance shrinks; 0 uses
    /// the plain feasibility rule throughout.
    pub tolerance_horizon: f64,
    /// Record `(generation, best utility, best violation)` per generation.
    #[serde(default)]
    pub trace: bool,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            population: 40,
            generations: 200,
            scaling: 0.6,
            crossover_rate: 0.9,
            archive_capacity: 2,
            rescue_probability: 0.1,
            tolerance_quantile: 0.2,
            tolerance_horizon: 0.7,
            trace: false,
        }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::Config("inner population must be at least 4".into()));
        }
        if !(self.scaling > 0.0 && self.scaling <= 1.0) || !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::Config("need F in (0, 1] and CR in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.rescue_probability) {
            return Err(Error::Config("rescue probability must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.tolerance_quantile) || !(0.0..=1.0).contains(&self.tolerance_horizon) {
            return Err(Error::Config("tolerance quantile and horizon must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// Evaluations consumed by one full run, excluding rescue mutations.
    pub fn run_cost(&self) -> u64 {
        (self.population * (self.generations + 1)) as u64
    }
}

/// A candidate bandwidth vector over the free variables with its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub x: Vec<f64>,
    pub utility: f64,
    pub violation: f64,
}

impl Individual {
    pub fn is_feasible(&self) -> bool {
        self.violation == 0.0
    }

    /// Violation as seen under `tolerance`: anything within it counts as 0.
    pub fn level(&self, tolerance: f64) -> f64 {
        if self.violation <= tolerance {
            0.0
        } else {
            self.violation
        }
    }

    /// Feasibility-rule order: lower violation wins, then higher utility.
    pub fn beats(&self, other: &Individual) -> bool {
        self.beats_at(other, 0.0)
    }

    pub fn beats_at(&self, other: &Individual, tolerance: f64) -> bool {
        let (a, b) = (self.level(tolerance), other.level(tolerance));
        a < b || (a == b && self.utility > other.utility)
    }
}

pub fn best_index(population: &[Individual]) -> usize {
    best_index_at(population, 0.0)
}

/// Best individual under the tolerance-relaxed feasibility rule; the lowest
/// index wins ties.
pub fn best_index_at(population: &[Individual], tolerance: f64) -> usize {
    let mut best = 0;
    for (i, ind) in population.iter().enumerate().skip(1) {
        if ind.beats_at(&population[best], tolerance) {
            best = i;
        }
    }
    best
}

/// Comparison tolerance at generation `g`: geometric decay from `start` to
/// `floor` over `horizon` generations, zero afterwards.
pub fn tolerance_at(g: usize, start: f64, floor: f64, horizon: usize) -> f64 {
    if g >= horizon || start <= floor {
        return 0.0;
    }
    start * (floor / start).powf(g as f64 / horizon as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MutationVariant {
    /// `v = x_q + F(x_q1 − x_q) + F(x_q2 − x_q3)`
    CurrentToRand,
    /// `v = x_q1 + F(x_best − x_q1) + F(x_q2 − x_q3)`
    RandToBest,
}

/// Mutant vector for fixed partner indices.
pub fn mutant_from(
    population: &[Vec<f64>],
    variant: MutationVariant,
    q: usize,
    partners: [usize; 3],
    best: usize,
    scaling: f64,
) -> Vec<f64> {
    let [q1, q2, q3] = partners;
    let (base, toward) = match variant {
        MutationVariant::CurrentToRand => (&population[q], &population[q1]),
        MutationVariant::RandToBest => (&population[q1], &population[best]),
    };
    (0..base.len())
        .map(|d| base[d] + scaling * (toward[d] - base[d]) + scaling * (population[q2][d] - population[q3][d]))
        .collect()
}

/// Three mutually distinct indices in `0..len`, all different from `q`.
pub fn draw_partners<R: Rng + ?Sized>(len: usize, q: usize, rng: &mut R) -> [usize; 3] {
    debug_assert!(len >= 4);
    let mut picked = [usize::MAX; 3];
    let mut k = 0;
    while k < 3 {
        let c = rng.random_range(0..len);
        if c != q && !picked[..k].contains(&c) {
            picked[k] = c;
            k += 1;
        }
    }
    picked
}

pub fn mutate<R: Rng + ?Sized>(
    population: &[Vec<f64>],
    q: usize,
    best: usize,
    variant: MutationVariant,
    scaling: f64,
    rng: &mut R,
) -> Vec<f64> {
    let partners = draw_partners(population.len(), q, rng);
    mutant_from(population, variant, q, partners, best, scaling)
}

/// Binomial crossover; coordinate `n_rand` always comes from the mutant.
pub fn crossover<R: Rng + ?Sized>(target: &[f64], mutant: &[f64], crossover_rate: f64, rng: &mut R) -> Vec<f64> {
    let forced = rng.random_range(0..target.len());
    target
        .iter()
        .zip(mutant)
        .enumerate()
        .map(|(d, (&t, &v))| {
            if d == forced || rng.random::<f64>() <= crossover_rate {
                v
            } else {
                t
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectOutcome {
    pub trial_survives: bool,
    /// Trial lost on violation but has strictly higher utility.
    pub archive_trial: bool,
}

pub fn select(target: &Individual, trial: &Individual) -> SelectOutcome {
    select_at(target, trial, 0.0)
}

pub fn select_at(target: &Individual, trial: &Individual, tolerance: f64) -> SelectOutcome {
    let (gw, gb) = (trial.level(tolerance), target.level(tolerance));
    let trial_survives = if gw != gb { gw < gb } else { trial.utility >= target.utility };
    SelectOutcome {
        trial_survives,
        archive_trial: gw > gb && trial.utility > target.utility,
    }
}

/// Lets archived infeasible trials displace the most-violating individual of
/// their part of the utility-sorted population. The population's best under
/// `tolerance` is never displaced. Clears the archive.
///
/// Returns the number of replacements.
pub fn frofi_replacement(population: &mut [Individual], archive: &mut Vec<Individual>, tolerance: f64) -> usize {
    if archive.is_empty() {
        return 0;
    }
    let protected = best_index_at(population, tolerance);
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| population[b].utility.total_cmp(&population[a].utility).then(a.cmp(&b)));
    let parts = archive.len().min(population.len());
    let part_len = population.len().div_ceil(parts);
    let mut replaced = 0;
    for (k, candidate) in archive.drain(..).take(parts).enumerate() {
        let start = k * part_len;
        if start >= order.len() {
            break;
        }
        let end = (start + part_len).min(order.len());
        let worst = order[start..end]
            .iter()
            .copied()
            .filter(|&i| i != protected)
            .max_by(|&a, &b| population[a].violation.total_cmp(&population[b].violation).then(b.cmp(&a)));
        if let Some(i) = worst {
            if candidate.utility > population[i].utility {
                population[i] = candidate;
                replaced += 1;
            }
        }
    }
    archive.clear();
    replaced
}

/// With probability `probability`, when every individual is infeasible,
/// replaces the maximum-violation individual by a fresh uniform draw in the
/// box. The best under `tolerance` is kept. `evaluate` may decline (for
/// instance when the budget is spent). Returns the replaced index.
pub fn frofi_mutation_strategy<R, E>(
    population: &mut [Individual],
    upper: &[f64],
    probability: f64,
    tolerance: f64,
    rng: &mut R,
    mut evaluate: E,
) -> Option<usize>
where
    R: Rng + ?Sized,
    E: FnMut(Vec<f64>) -> Option<Individual>,
{
    if population.iter().any(Individual::is_feasible) || population.len() < 2 {
        return None;
    }
    if !(rng.random::<f64>() < probability) {
        return None;
    }
    let protected = best_index_at(population, tolerance);
    let worst = (0..population.len())
        .filter(|&i| i != protected)
        .max_by(|&a, &b| population[a].violation.total_cmp(&population[b].violation).then(b.cmp(&a)))?;
    let x = upper.iter().map(|&u| rng.random::<f64>() * u).collect();
    population[worst] = evaluate(x)?;
    Some(worst)
}

/// The free variables of an assignment and a fast evaluator over them.
#[derive(Debug, Clone)]
pub struct BandwidthProblem<'a> {
    ctx: &'a FrameContext,
    /// `(uav, radar)` per variable, grouped by radar.
    vars: Vec<(usize, usize)>,
    /// `(radar, start, end)` ranges into `vars`.
    groups: Vec<(usize, usize, usize)>,
    upper: Vec<f64>,
    constant: f64,
}

impl<'a> BandwidthProblem<'a> {
    pub fn new(assignment: &TaskAssignment, ctx: &'a FrameContext) -> Self {
        let n = assignment.num_uavs() as f64;
        let lambda = ctx.cost_factor();
        let mut vars = Vec::new();
        let mut groups = Vec::new();
        let mut upper = Vec::new();
        let mut constant = 0.0;
        for c in coalitions_of(assignment) {
            if c.is_empty() {
                continue;
            }
            let start = vars.len();
            for &uav in &c.members {
                vars.push((uav, c.radar));
                upper.push(ctx.radar_bandwidths[c.radar - 1]);
            }
            groups.push((c.radar, start, vars.len()));
            constant -= ctx.weights[c.radar - 1] * lambda * c.len() as f64 / n;
        }
        Self {
            ctx,
            vars,
            groups,
            upper,
            constant,
        }
    }

    pub fn dimension(&self) -> usize {
        self.vars.len()
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    pub fn utility(&self, x: &[f64]) -> f64 {
        let ctx = self.ctx;
        let mut total = self.constant;
        for &(radar, start, end) in &self.groups {
            let bm = ctx.radar_bandwidths[radar - 1];
            let reward: f64 = (start..end)
                .map(|i| reward_term(ctx.jsr[self.vars[i].0][radar - 1], x[i], bm, &ctx.env))
                .sum();
            total += ctx.weights[radar - 1] * reward;
        }
        total
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        self.groups
            .iter()
            .map(|&(radar, start, end)| violation_of(x[start..end].iter().copied(), self.ctx.radar_bandwidths[radar - 1]))
            .sum()
    }

    pub fn evaluate(&self, x: Vec<f64>) -> Individual {
        Individual {
            utility: self.utility(&x),
            violation: self.violation(&x),
            x,
        }
    }

    pub fn to_allocation(&self, assignment: &TaskAssignment, x: &[f64]) -> BandwidthAllocation {
        let mut b = BandwidthAllocation::zeros(assignment.num_uavs(), assignment.num_radars(), assignment.frame);
        for (&(uav, radar), &v) in self.vars.iter().zip(x) {
            b.set(uav, radar, v);
        }
        b
    }

    /// `B_m / |C_m|` for every member.
    pub fn equal_split(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dimension()];
        for &(radar, start, end) in &self.groups {
            let share = self.ctx.radar_bandwidths[radar - 1] / (end - start) as f64;
            x[start..end].fill(share);
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: usize,
    pub best_utility: f64,
    pub best_violation: f64,
}

/// Result of one inner optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerOutcome {
    pub bandwidth: BandwidthAllocation,
    pub utility: f64,
    pub violation: f64,
    pub evaluations: u64,
    /// The budget ran out before the configured number of generations.
    pub truncated: bool,
    /// False when the budget could not pay for a single population; the
    /// outcome then carries no search result.
    pub evaluated: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRow>,
}

impl InnerOutcome {
    pub fn is_feasible(&self) -> bool {
        self.violation == 0.0
    }
}

/// Finds the feasibility-rule-best bandwidth allocation for `assignment`.
///
/// Costs `Q` evaluations per generation plus one per rescue mutation. When
/// the budget cannot cover a generation the run stops and the outcome is
/// flagged truncated.
pub fn optimize_bandwidth<R: Rng + ?Sized>(
    assignment: &TaskAssignment,
    ctx: &FrameContext,
    cfg: &InnerConfig,
    budget: &BudgetAccountant,
    rng: &mut R,
) -> InnerOutcome {
    let problem = BandwidthProblem::new(assignment, ctx);
    let q = cfg.population;
    let finish = |best: &Individual, evaluations: u64, truncated: bool, evaluated: bool, trace: Vec<TraceRow>| InnerOutcome {
        bandwidth: problem.to_allocation(assignment, &best.x),
        utility: best.utility,
        violation: best.violation,
        evaluations,
        truncated,
        evaluated,
        trace,
    };
    if problem.dimension() == 0 {
        return finish(&problem.evaluate(Vec::new()), 0, false, true, Vec::new());
    }
    if !budget.try_consume(q as u64) {
        let zero = problem.evaluate(vec![0.0; problem.dimension()]);
        return finish(&zero, 0, true, false, Vec::new());
    }
    let upper = problem.upper_bounds().to_vec();
    let mut pop: Vec<Individual> = (0..q)
        .map(|_| problem.evaluate(upper.iter().map(|&u| rng.random::<f64>() * u).collect()))
        .collect();
    let mut evaluations = q as u64;
    let mut truncated = false;

    let mut start = {
        let mut g: Vec<f64> = pop.iter().map(|p| p.violation).collect();
        g.sort_by(f64::total_cmp);
        let k = ((cfg.tolerance_quantile * q as f64) as usize).min(q - 1);
        g[k]
    };
    let floor = ctx
        .radar_bandwidths
        .iter()
        .copied()
        .map(feasibility_tolerance)
        .fold(f64::INFINITY, f64::min);
    if !start.is_finite() {
        start = 0.0;
    }
    let horizon = (cfg.tolerance_horizon * cfg.generations as f64).round() as usize;

    let mut incumbent = pop[best_index(&pop)].clone();
    let mut trace = Vec::new();
    let mut record = |g: usize, incumbent: &Individual| {
        if cfg.trace {
            trace.push(TraceRow {
                generation: g,
                best_utility: incumbent.utility,
                best_violation: incumbent.violation,
            });
        }
    };
    record(0, &incumbent);

    let mut archive: Vec<Individual> = Vec::new();
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(q);
    for g in 1..=cfg.generations {
        if !budget.try_consume(q as u64) {
            truncated = true;
            break;
        }
        evaluations += q as u64;
        let tol = tolerance_at(g, start, floor, horizon);
        xs.clear();
        xs.extend(pop.iter().map(|p| p.x.clone()));
        let best = best_index_at(&pop, tol);
        for i in 0..q {
            let w = if rng.random::<bool>() {
                // current-to-rand is rotation invariant and skips crossover
                mutate(&xs, i, best, MutationVariant::CurrentToRand, cfg.scaling, rng)
            } else {
                let v = mutate(&xs, i, best, MutationVariant::RandToBest, cfg.scaling, rng);
                crossover(&xs[i], &v, cfg.crossover_rate, rng)
            };
            let w: Vec<f64> = w.iter().zip(&upper).map(|(&wd, &ud)| wd.clamp(0.0, ud)).collect();
            let trial = problem.evaluate(w);
            let s = select_at(&pop[i], &trial, tol);
            if s.trial_survives {
                pop[i] = trial;
            } else if s.archive_trial && archive.len() < cfg.archive_capacity {
                archive.push(trial);
            }
        }
        frofi_replacement(&mut pop, &mut archive, tol);
        let rescued = frofi_mutation_strategy(&mut pop, &upper, cfg.rescue_probability, tol, rng, |x| {
            budget.try_consume(1).then(|| problem.evaluate(x))
        });
        evaluations += u64::from(rescued.is_some());
        let current = &pop[best_index(&pop)];
        if current.beats(&incumbent) {
            incumbent = current.clone();
        }
        record(g, &incumbent);
    }
    finish(&incumbent, evaluations, truncated, true, trace)
}

/// Scores an assignment for the outer search.
pub trait BandwidthPlanner: Sync {
    fn plan(
        &self,
        assignment: &TaskAssignment,
        ctx: &FrameContext,
        budget: &BudgetAccountant,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> InnerOutcome;

    fn name(&self) -> &'static str;
}

/// The constrained DE planner.
#[derive(Debug, Clone, Default)]
pub struct DePlanner(pub InnerConfig);

impl BandwidthPlanner for DePlanner {
    fn plan(
        &self,
        assignment: &TaskAssignment,
        ctx: &FrameContext,
        budget: &BudgetAccountant,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> InnerOutcome {
        optimize_bandwidth(assignment, ctx, &self.0, budget, rng)
    }

    fn name(&self) -> &'static str {
        "de"
    }
}

/// Divides each radar's bandwidth equally among its coalition. Costs one
/// evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct EqualSplit;

impl BandwidthPlanner for EqualSplit {
    fn plan(
        &self,
        assignment: &TaskAssignment,
        ctx: &FrameContext,
        budget: &BudgetAccountant,
        _rng: &mut rand_chacha::ChaCha8Rng,
    ) -> InnerOutcome {
        let problem = BandwidthProblem::new(assignment, ctx);
        let x = problem.equal_split();
        let evaluated = problem.dimension() == 0 || budget.try_consume(1);
        let ind = problem.evaluate(x);
        InnerOutcome {
            bandwidth: problem.to_allocation(assignment, &ind.x),
            utility: ind.utility,
            violation: ind.violation,
            evaluations: u64::from(evaluated && problem.dimension() > 0),
            truncated: !evaluated,
            evaluated,
            trace: Vec::new(),
        }
    }

    fn name(&self) -> &'static str {
        "equal-split"
    }
}
