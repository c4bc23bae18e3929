//! Seeded batch runs of the optimizer and its baselines.
//!
//! An [`ExperimentSpec`] names the variants, the sweep axes and the trial
//! count. Every combination of axis values is a [`SweepPoint`]; each point
//! runs `trials` independent multi-frame trials. Trial `i` uses seed
//! `base_seed + i` for everything that is not variant specific (target
//! trajectory, bandwidth estimation errors), so variants are compared on the
//! same draws.

mod emit;
mod reproduce;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use emit::{config_hash, emit_results, git_revision, Manifest};
pub use reproduce::{reproduction, Reproduction};

use crate::budget::BudgetAccountant;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::ibaa::{BandwidthPlanner, DePlanner, EqualSplit, InnerConfig};
use crate::model::{validate_bandwidth, BandwidthAllocation, TaskAssignment};
use crate::otaa::{run_scenario, Evaluator, FrameResult, HistoryRow, OuterConfig};
use crate::scenario::{distance_uav_radar, Scenario, TargetState};
use crate::utility::{score_against_true, FrameContext};

const TRAJECTORY_STREAM: u64 = 0;
const SEARCH_STREAM: u64 = 1;
const ESTIMATE_STREAM: u64 = 2;

/// Smallest estimated bandwidth, as a fraction of the true one.
const MIN_ESTIMATE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Variant {
    /// Surrogate, memory and immigrants, DE bandwidths.
    Proposed,
    /// Every offspring truly evaluated.
    Awkm,
    /// No memory and no immigrants.
    Awmr,
    /// Searched assignment, equal bandwidth split.
    Tabe,
    /// Fixed assignment, DE bandwidths.
    Tfba,
    /// Fixed assignment, equal bandwidth split.
    Tfbe,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Proposed,
        Variant::Awkm,
        Variant::Awmr,
        Variant::Tabe,
        Variant::Tfba,
        Variant::Tfbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Proposed => "PROPOSED",
            Variant::Awkm => "AWKM",
            Variant::Awmr => "AWMR",
            Variant::Tabe => "TABE",
            Variant::Tfba => "TFBA",
            Variant::Tfbe => "TFBE",
        }
    }

    fn searches_assignment(self) -> bool {
        !matches!(self, Variant::Tfba | Variant::Tfbe)
    }

    fn optimizes_bandwidth(self) -> bool {
        !matches!(self, Variant::Tabe | Variant::Tfbe)
    }

    fn outer_config(self, base: &OuterConfig) -> OuterConfig {
        let mut cfg = base.clone();
        match self {
            Variant::Awkm => cfg.surrogate = false,
            Variant::Awmr => cfg.memory = false,
            _ => {}
        }
        cfg
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

/// Threat weight presets for three radars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightSetting {
    /// Equal weights.
    Setting1,
    /// Radar 3 dominant.
    Setting2,
    /// Radar 3 minor.
    Setting3,
}

impl WeightSetting {
    pub const ALL: [WeightSetting; 3] = [WeightSetting::Setting1, WeightSetting::Setting2, WeightSetting::Setting3];

    pub fn weights(self) -> [f64; 3] {
        match self {
            WeightSetting::Setting1 => [1.0 / 3.0; 3],
            WeightSetting::Setting2 => [1.0 / 8.0, 1.0 / 8.0, 3.0 / 4.0],
            WeightSetting::Setting3 => [7.0 / 16.0, 7.0 / 16.0, 1.0 / 8.0],
        }
    }

    pub fn index(self) -> usize {
        match self {
            WeightSetting::Setting1 => 1,
            WeightSetting::Setting2 => 2,
            WeightSetting::Setting3 => 3,
        }
    }
}

/// Run-size presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Budget 10⁶, 100 iterations, 20 trials.
    Desk,
    /// Budget 10⁸, 400 iterations, 100 trials.
    Full,
}

impl Profile {
    pub fn budget(self) -> u64 {
        match self {
            Profile::Desk => 1_000_000,
            Profile::Full => 100_000_000,
        }
    }

    pub fn iterations(self) -> usize {
        match self {
            Profile::Desk => 100,
            Profile::Full => 400,
        }
    }

    pub fn trials(self) -> usize {
        match self {
            Profile::Desk => 20,
            Profile::Full => 100,
        }
    }

    /// Scale factor from full-profile budgets to this profile.
    pub fn budget_scale(self) -> f64 {
        self.budget() as f64 / Profile::Full.budget() as f64
    }

    pub fn outer_config(self) -> OuterConfig {
        OuterConfig {
            iterations: self.iterations(),
            budget: self.budget(),
            ..OuterConfig::default()
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(Error::Config(format!("unknown profile `{other}` (desk | full)"))),
        }
    }
}

/// Axis values; an empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepAxes {
    pub cost_factors: Vec<f64>,
    /// Relative std of the bandwidth estimation error.
    pub sigmas: Vec<f64>,
    pub settings: Vec<WeightSetting>,
    pub budgets: Vec<u64>,
    pub shrinks: Vec<f64>,
    pub populations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default = "ScenarioConfig::table1")]
    pub scenario: ScenarioConfig,
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub axes: SweepAxes,
    pub frames: usize,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub outer: OuterConfig,
    #[serde(default)]
    pub inner: InnerConfig,
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>, scenario: ScenarioConfig, profile: Profile) -> Self {
        Self {
            name: name.into(),
            scenario,
            variants: vec![Variant::Proposed],
            axes: SweepAxes::default(),
            frames: 10,
            trials: profile.trials(),
            base_seed: 1,
            outer: profile.outer_config(),
            inner: InnerConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trial count must be at least 1".into()));
        }
        if self.frames == 0 {
            return Err(Error::Config("frame count must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("no variants selected".into()));
        }
        self.outer.validate()?;
        self.inner.validate()?;
        let scenario = self.scenario.build()?;
        if !self.axes.settings.is_empty() && scenario.num_radars() != 3 {
            return Err(Error::Config("weight settings need exactly 3 radars".into()));
        }
        if self.axes.sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config("estimation error std must be non-negative".into()));
        }
        for point in self.points() {
            point.outer_config(&self.outer).validate()?;
            self.point_scenario(&point)?;
        }
        Ok(())
    }

    /// Cartesian product of the axes, variants outermost.
    pub fn points(&self) -> Vec<SweepPoint> {
        fn or<T: Clone>(axis: &[T], base: T) -> Vec<T> {
            if axis.is_empty() {
                vec![base]
            } else {
                axis.to_vec()
            }
        }
        let settings: Vec<Option<WeightSetting>> = if self.axes.settings.is_empty() {
            vec![None]
        } else {
            self.axes.settings.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for &variant in &self.variants {
            for &setting in &settings {
                for &cost_factor in &or(&self.axes.cost_factors, self.scenario.environment.cost_factor) {
                    for &sigma in &or(&self.axes.sigmas, 0.0) {
                        for &budget in &or(&self.axes.budgets, self.outer.budget) {
                            for &shrink in &or(&self.axes.shrinks, self.outer.shrink) {
                                for &population in &or(&self.axes.populations, self.outer.population) {
                                    out.push(SweepPoint {
                                        variant,
                                        setting,
                                        cost_factor,
                                        sigma,
                                        budget,
                                        shrink,
                                        population,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn point_scenario(&self, point: &SweepPoint) -> Result<Scenario> {
        let mut scenario = self.scenario.build()?.with_cost_factor(point.cost_factor)?;
        if let Some(setting) = point.setting {
            scenario = scenario.with_weights(&setting.weights())?;
        }
        Ok(scenario)
    }
}

/// One combination of axis values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub variant: Variant,
    pub setting: Option<WeightSetting>,
    pub cost_factor: f64,
    pub sigma: f64,
    pub budget: u64,
    pub shrink: f64,
    pub population: usize,
}

impl SweepPoint {
    fn outer_config(&self, base: &OuterConfig) -> OuterConfig {
        let mut cfg = self.variant.outer_config(base);
        cfg.budget = self.budget;
        cfg.shrink = self.shrink;
        cfg.population = self.population;
        cfg
    }

    /// Identical keys describe identical runs under the same spec.
    pub fn key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}",
            self.variant,
            self.setting.map_or(0, |s| s.index()),
            self.cost_factor,
            self.sigma,
            self.budget,
            self.shrink,
            self.population
        )
    }
}

/// One frame of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    /// Utility on the true radar bandwidths.
    pub utility: f64,
    /// Utility the optimizer saw, on the estimated bandwidths.
    pub planned_utility: f64,
    pub found_feasible: bool,
    /// The schedule meets the bandwidth constraints it was planned against.
    pub feasible: bool,
    pub assignment: TaskAssignment,
    pub bandwidth: BandwidthAllocation,
    pub evaluations: u64,
    pub inner_runs: usize,
    pub iterations: usize,
    pub truncated: bool,
    pub history: Vec<HistoryRow>,
    pub wall_time_s: f64,
}

impl FrameRecord {
    pub fn idle_count(&self) -> usize {
        self.assignment.idle_count()
    }

    /// Working UAVs per radar.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.assignment.num_radars()];
        for &t in self.assignment.tasks() {
            if t > 0 {
                counts[t - 1] += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// Estimated radar bandwidths the trial planned against.
    pub planned_bandwidths: Vec<f64>,
    pub frames: Vec<FrameRecord>,
}

/// Per-frame aggregate over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub frame: usize,
    pub trials: usize,
    pub mean_utility: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub std_utility: f64,
    pub feasible_trials: usize,
    pub mean_idle: f64,
    pub mean_counts: Vec<f64>,
    /// `task_counts[n][t]`: trials in which UAV `n` took task `t`.
    pub task_counts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point: SweepPoint,
    pub trials: Vec<TrialRecord>,
    pub stats: Vec<FrameStats>,
}

impl PointResult {
    /// Mean utility over trials and frames `first..=last` (1-based).
    pub fn mean_over(&self, first: usize, last: usize) -> f64 {
        let values: Vec<f64> = self
            .stats
            .iter()
            .filter(|s| (first..=last).contains(&s.frame))
            .map(|s| s.mean_utility)
            .collect();
        mean(&values)
    }

    pub fn mean_utility(&self) -> f64 {
        mean(&self.stats.iter().map(|s| s.mean_utility).collect::<Vec<_>>())
    }

    pub fn mean_idle(&self) -> f64 {
        mean(&self.stats.iter().map(|s| s.mean_idle).collect::<Vec<_>>())
    }

    /// Trial-level mean utilities over frames `first..=last`.
    pub fn trial_means(&self, first: usize, last: usize) -> Vec<f64> {
        self.trials
            .iter()
            .map(|t| {
                let v: Vec<f64> = t
                    .frames
                    .iter()
                    .filter(|f| (first..=last).contains(&f.frame))
                    .map(|f| f.utility)
                    .collect();
                mean(&v)
            })
            .collect()
    }

    /// Frame records whose schedule violates its bandwidth constraints.
    pub fn violations(&self) -> usize {
        self.trials.iter().flat_map(|t| &t.frames).filter(|f| !f.feasible).count()
    }

    pub fn infeasible_trials(&self, frame: usize) -> usize {
        self.trials
            .iter()
            .filter(|t| t.frames.iter().any(|f| f.frame == frame && !f.found_feasible))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: ExperimentSpec,
    pub points: Vec<PointResult>,
}

impl SweepResult {
    pub fn violations(&self) -> usize {
        self.points.iter().map(PointResult::violations).sum()
    }

    /// Finds the point matching `pred`.
    pub fn find(&self, pred: impl Fn(&SweepPoint) -> bool) -> Option<&PointResult> {
        self.points.iter().find(|p| pred(&p.point))
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (`n − 1`); 0 for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fixed two-radar split: the ⌈N/2⌉ UAVs nearest radar 1 take radar 1, the
/// rest radar 2 (or radar 1 when there is only one).
pub fn fixed_assignment(scenario: &Scenario, frame: usize) -> TaskAssignment {
    let n = scenario.num_uavs();
    let m = scenario.num_radars();
    let mut order: Vec<usize> = (0..n).collect();
    let d: Vec<f64> = scenario.uavs.iter().map(|u| distance_uav_radar(u, &scenario.radars[0])).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let mut tasks = vec![0; n];
    for (rank, &uav) in order.iter().enumerate() {
        tasks[uav] = if rank < n.div_ceil(2) || m == 1 { 1 } else { 2 };
    }
    TaskAssignment::new(tasks, m, frame).expect("tasks are within range")
}

/// Estimated bandwidths `B_m(1 + e)`, `e ~ N(0, σ²)`, floored at a small
/// positive fraction of `B_m`.
pub fn estimated_bandwidths<R: Rng + ?Sized>(truth: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    if sigma == 0.0 {
        return truth.to_vec();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    truth
        .iter()
        .map(|&b| b * (1.0 + normal.sample(rng)).max(MIN_ESTIMATE))
        .collect()
}

fn fixed_schedule(
    scenario: &Scenario,
    trajectory: &[TargetState],
    cfg: &OuterConfig,
    planner: &dyn BandwidthPlanner,
    seed: u64,
) -> Result<Vec<FrameResult>> {
    trajectory
        .iter()
        .map(|target| {
            let start = std::time::Instant::now();
            let ctx = FrameContext::new(scenario, target)?;
            let budget = BudgetAccountant::new(cfg.budget_at(ctx.frame));
            let mut eval = Evaluator::new(&ctx, planner, &budget, seed);
            let assignment = fixed_assignment(scenario, ctx.frame);
            let point = eval.evaluate(&assignment).filter(|p| p.feasible);
            let (bandwidth, utility, found) = match &point {
                Some(p) => (p.bandwidth.clone(), p.utility, true),
                None => (BandwidthAllocation::zeros(ctx.num_uavs(), ctx.num_radars(), ctx.frame), 0.0, false),
            };
            let assignment = if found {
                assignment
            } else {
                TaskAssignment::idle(ctx.num_uavs(), ctx.num_radars(), ctx.frame)
            };
            Ok(FrameResult {
                frame: ctx.frame,
                assignment,
                bandwidth,
                utility,
                found_feasible: found,
                evaluations: budget.consumed(),
                inner_runs: eval.runs,
                iterations: 0,
                truncated: eval.truncated,
                history: vec![HistoryRow {
                    iteration: 0,
                    evaluations: budget.consumed(),
                    best_utility: if found { utility } else { f64::NEG_INFINITY },
                }],
                wall_time_s: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

/// One seeded multi-frame trial at `point`.
pub fn run_trial(spec: &ExperimentSpec, point: &SweepPoint, trial: usize) -> Result<TrialRecord> {
    let seed = spec.base_seed.wrapping_add(trial as u64);
    let truth = spec.point_scenario(point)?;
    let trajectory = truth.trajectory(spec.frames, &mut stream(seed, TRAJECTORY_STREAM));
    let planned_bandwidths = estimated_bandwidths(&truth.radar_bandwidths(), point.sigma, &mut stream(seed, ESTIMATE_STREAM));
    let mut planned = truth.clone();
    for (r, &b) in planned.radars.iter_mut().zip(&planned_bandwidths) {
        r.bandwidth = b;
    }

    let cfg = point.outer_config(&spec.outer);
    let de = DePlanner(spec.inner.clone());
    let planner: &dyn BandwidthPlanner = if point.variant.optimizes_bandwidth() { &de } else { &EqualSplit };
    let results = if point.variant.searches_assignment() {
        run_scenario(&planned, &trajectory, &cfg, planner, seed, &mut stream(seed, SEARCH_STREAM))?
    } else {
        fixed_schedule(&planned, &trajectory, &cfg, planner, seed)?
    };

    let frames = results
        .into_iter()
        .zip(&trajectory)
        .map(|(r, target)| {
            let truth_ctx = FrameContext::new(&truth, target)?;
            let utility = score_against_true(&r.assignment, &r.bandwidth, &truth_ctx)?.total;
            let feasible = validate_bandwidth(&r.assignment, &r.bandwidth, &planned_bandwidths)?.feasible();
            Ok(FrameRecord {
                frame: r.frame,
                utility,
                planned_utility: r.utility,
                found_feasible: r.found_feasible,
                feasible,
                assignment: r.assignment,
                bandwidth: r.bandwidth,
                evaluations: r.evaluations,
                inner_runs: r.inner_runs,
                iterations: r.iterations,
                truncated: r.truncated,
                history: r.history,
                wall_time_s: r.wall_time_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialRecord {
        trial,
        seed,
        planned_bandwidths,
        frames,
    })
}

/// Aggregates trials frame by frame.
pub fn frame_stats(trials: &[TrialRecord]) -> Vec<FrameStats> {
    let Some(first) = trials.first() else {
        return Vec::new();
    };
    first
        .frames
        .iter()
        .enumerate()
        .map(|(i, f0)| {
            let frames: Vec<&FrameRecord> = trials.iter().map(|t| &t.frames[i]).collect();
            let utilities: Vec<f64> = frames.iter().map(|f| f.utility).collect();
            let (n, m) = (f0.assignment.num_uavs(), f0.assignment.num_radars());
            let mut task_counts = vec![vec![0; m + 1]; n];
            let mut counts = vec![0.0; m];
            for f in &frames {
                for (uav, &t) in f.assignment.tasks().iter().enumerate() {
                    task_counts[uav][t] += 1;
                }
                for (c, k) in counts.iter_mut().zip(f.counts()) {
                    *c += k as f64;
                }
            }
            let k = frames.len() as f64;
            FrameStats {
                frame: f0.frame,
                trials: frames.len(),
                mean_utility: mean(&utilities),
                std_utility: std_dev(&utilities),
                feasible_trials: frames.iter().filter(|f| f.found_feasible).count(),
                mean_idle: frames.iter().map(|f| f.idle_count() as f64).sum::<f64>() / k,
                mean_counts: counts.into_iter().map(|c| c / k).collect(),
                task_counts,
            }
        })
        .collect()
}

/// Runs every trial of one sweep point. Trials run on the current rayon pool.
pub fn run_variant(spec: &ExperimentSpec, point: &SweepPoint) -> Result<PointResult> {
    let trials = (0..spec.trials)
        .into_par_iter()
        .map(|i| run_trial(spec, point, i))
        .collect::<Result<Vec<_>>>()?;
    let stats = frame_stats(&trials);
    Ok(PointResult {
        point: *point,
        trials,
        stats,
    })
}

/// Runs every sweep point of `spec`.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    let points = spec
        .points()
        .iter()
        .map(|p| {
            log::info!("{}: running {}", spec.name, p.key());
            run_variant(spec, p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        spec: spec.clone(),
        points,
    })
}
