//! Release acceptance run. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! Set `JAMSWARM_FULL=1` to run the population-size study on the full
//! profile (hours); otherwise it runs on the desk profile.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use jamswarm_core::budget::BudgetAccountant;
use jamswarm_core::config::ScenarioConfig;
use jamswarm_core::experiments::{
    emit_results, mean, run_sweep, run_variant, std_dev, ExperimentSpec, PointResult, Profile, SweepPoint, Variant,
    WeightSetting,
};
use jamswarm_core::ibaa::{optimize_bandwidth, DePlanner, InnerConfig};
use jamswarm_core::kriging::{encode, Kriging, KrigingConfig};
use jamswarm_core::model::{validate_bandwidth, TaskAssignment};
use jamswarm_core::otaa::{random_assignment, solve_frame, Evaluator, OuterConfig};
use jamswarm_core::scenario::{echo_power, jamming_power, jsr, propagate_target, TargetState};
use jamswarm_core::utility::{effect, FrameContext};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

const REFERENCE_UTILITY: f64 = 0.9478;

struct Verdict {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(name: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict { name, pass, detail }
}

/// Runs sweep points of the desk spec once and keeps them.
struct Runner {
    base: ExperimentSpec,
    cache: HashMap<(usize, String), PointResult>,
}

impl Runner {
    fn new(profile: Profile) -> Self {
        let base = ExperimentSpec::new("acceptance", ScenarioConfig::table1(), profile);
        base.validate().expect("base spec is valid");
        Self {
            base,
            cache: HashMap::new(),
        }
    }

    fn base_point(&self) -> SweepPoint {
        SweepPoint {
            variant: Variant::Proposed,
            setting: None,
            cost_factor: 0.0,
            sigma: 0.0,
            budget: self.base.outer.budget,
            shrink: self.base.outer.shrink,
            population: self.base.outer.population,
        }
    }

    fn run(&mut self, frames: usize, point: SweepPoint) -> &PointResult {
        let key = (frames, point.key());
        if !self.cache.contains_key(&key) {
            let start = Instant::now();
            let mut spec = self.base.clone();
            spec.frames = frames;
            let result = run_variant(&spec, &point).expect("sweep point runs");
            eprintln!("  ran {} ({frames} frames) in {:.1} s", point.key(), start.elapsed().as_secs_f64());
            self.cache.insert(key.clone(), result);
        }
        &self.cache[&key]
    }

    fn frame_one(&mut self, point: SweepPoint) -> &PointResult {
        self.run(1, point)
    }

    fn dynamic(&mut self, point: SweepPoint) -> &PointResult {
        let frames = self.base.frames;
        self.run(frames, point)
    }
}

fn frame1_stats(p: &PointResult) -> (f64, f64) {
    let u: Vec<f64> = p.trials.iter().map(|t| t.frames[0].utility).collect();
    (mean(&u), std_dev(&u))
}

fn population_size(profile: Profile) -> Verdict {
    let mut runner = Runner::new(profile);
    let mut p2 = runner.base_point();
    p2.population = 2;
    let (m2, s2) = frame1_stats(runner.frame_one(p2));
    let p6 = runner.base_point();
    let (m6, s6) = frame1_stats(runner.frame_one(p6));
    let pass = (m6 - REFERENCE_UTILITY).abs() <= 0.02 && s6 <= 0.01 && m2 < m6 && s2 > 0.1;
    let profile = match profile {
        Profile::Full => "full profile",
        Profile::Desk => "desk profile; JAMSWARM_FULL=1 for full",
    };
    verdict(
        "population_size_study",
        pass,
        format!(
            "P=6 mean {m6:.4} (target {REFERENCE_UTILITY} ± 0.02) std {s6:.4} (≤ 0.01); P=2 mean {m2:.4} std {s2:.4} (> 0.1) [{profile}]"
        ),
    )
}

fn all_assignments(n: usize, m: usize) -> Vec<TaskAssignment> {
    (0..(m + 1).pow(n as u32))
        .map(|mut code| {
            let tasks = (0..n)
                .map(|_| {
                    let t = code % (m + 1);
                    code /= m + 1;
                    t
                })
                .collect();
            TaskAssignment::new(tasks, m, 1).unwrap()
        })
        .collect()
}

fn toy_oracle() -> Verdict {
    let start = Instant::now();
    let scenario = ScenarioConfig::toy().build().unwrap();
    let ctx = FrameContext::new(&scenario, &scenario.initial_target).unwrap();
    let planner = DePlanner::default();
    let cfg = OuterConfig {
        iterations: 150,
        budget: u64::MAX,
        ..OuterConfig::default()
    };
    let mut details = Vec::new();
    let mut pass = true;
    for seed in 1..=5u64 {
        let budget = BudgetAccountant::unlimited();
        let mut eval = Evaluator::new(&ctx, &planner, &budget, seed);
        let oracle = all_assignments(3, 2)
            .iter()
            .filter_map(|u| eval.evaluate(u))
            .filter(|p| p.feasible)
            .map(|p| p.utility)
            .fold(0.0, f64::max);
        let got = solve_frame(&ctx, None, &cfg, &planner, seed, &mut ChaCha8Rng::seed_from_u64(seed)).result;
        pass &= got.utility == oracle && got.found_feasible;
        details.push(format!("{:.6}/{:.6}", got.utility, oracle));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    verdict(
        "toy_oracle",
        pass,
        format!("search/enumeration over 27 assignments, 5 seeds: {} in {secs:.1} s", details.join(" ")),
    )
}

fn bandwidth_oracle() -> Verdict {
    let start = Instant::now();
    let scenario = ScenarioConfig::table1().build().unwrap();
    let ctx = FrameContext::new(&scenario, &scenario.initial_target).unwrap();
    // UAVs 10 and 11 are symmetric with respect to radar 1
    let (a, b) = (ctx.jsr[9][0], ctx.jsr[10][0]);
    let mut tasks = vec![0; 12];
    tasks[9] = 1;
    tasks[10] = 1;
    let u = TaskAssignment::new(tasks, 3, 1).unwrap();
    let bm = ctx.radar_bandwidths[0];
    let env = &ctx.env;
    let term = |j: f64, x: f64| {
        if x <= 0.0 {
            0.0
        } else {
            (-(env.jsr_requirement * x / j).powf(env.tolerance_factor)).exp() * x / bm
        }
    };
    let w = ctx.weights[0];
    let grid = (0..=10_000)
        .map(|i| {
            let x = bm * i as f64 / 10_000.0;
            w * (term(a, x) + term(b, bm - x))
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let mut worst = 0.0f64;
    let mut feasible = true;
    for seed in 0..5 {
        let out = optimize_bandwidth(&u, &ctx, &InnerConfig::default(), &BudgetAccountant::unlimited(), &mut ChaCha8Rng::seed_from_u64(seed));
        worst = worst.max((out.utility - grid).abs());
        feasible &= out.violation == 0.0 && validate_bandwidth(&u, &out.bandwidth, &ctx.radar_bandwidths).unwrap().feasible();
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = (a - b).abs() <= 1e-9 * a && worst < 1e-4 && feasible && secs < 5.0;
    verdict(
        "bandwidth_oracle",
        pass,
        format!("grid optimum {grid:.6}, worst |error| {worst:.2e} (< 1e-4) over 5 seeds, feasible {feasible}, {secs:.2} s"),
    )
}

/// Independent check of the bandwidth sums of every emitted schedule.
fn schedule_violations(p: &PointResult) -> usize {
    let mut bad = 0;
    for t in &p.trials {
        for f in &t.frames {
            let m = f.assignment.num_radars();
            for radar in 1..=m {
                let bm = t.planned_bandwidths[radar - 1];
                let members: Vec<usize> = (0..f.assignment.num_uavs()).filter(|&n| f.assignment.task(n) == radar).collect();
                if members.is_empty() {
                    continue;
                }
                let sum: f64 = members.iter().map(|&n| f.bandwidth.get(n, radar)).sum();
                let boxed = members.iter().all(|&n| (0.0..=bm).contains(&f.bandwidth.get(n, radar)));
                if (sum - bm).abs() > 1e-6 * bm || !boxed {
                    bad += 1;
                }
            }
        }
    }
    bad
}

fn feasibility_invariant(runner: &Runner) -> Verdict {
    let mut schedules = 0;
    let mut bad = 0;
    let mut flagged = 0;
    for p in runner.cache.values() {
        schedules += p.trials.iter().map(|t| t.frames.len()).sum::<usize>();
        bad += schedule_violations(p);
        flagged += p.violations();
    }
    verdict(
        "feasibility_invariant",
        bad == 0 && flagged == 0 && schedules > 0,
        format!("{schedules} schedules from {} runs, {bad} coalition sums off B_m, {flagged} flagged", runner.cache.len()),
    )
}

fn baseline_dominance(runner: &mut Runner) -> Verdict {
    let variants = [Variant::Proposed, Variant::Tabe, Variant::Tfba, Variant::Tfbe];
    let mut means: HashMap<(Variant, WeightSetting), Vec<f64>> = HashMap::new();
    for setting in WeightSetting::ALL {
        for v in variants {
            let mut point = runner.base_point();
            point.variant = v;
            point.setting = Some(setting);
            let r = runner.dynamic(point);
            means.insert((v, setting), r.stats.iter().map(|s| s.mean_utility).collect());
        }
    }
    let mut dominance = true;
    let mut worst_gap = f64::INFINITY;
    for setting in WeightSetting::ALL {
        let ours = &means[&(Variant::Proposed, setting)];
        for v in &variants[1..] {
            for (a, b) in ours.iter().zip(&means[&(*v, setting)]) {
                worst_gap = worst_gap.min(a - b);
                dominance &= a >= b;
            }
        }
    }
    let mut ordering = true;
    let mut summary = Vec::new();
    for v in variants {
        let avg = |s| mean(&means[&(v, s)]);
        let (s1, s2, s3) = (avg(WeightSetting::Setting1), avg(WeightSetting::Setting2), avg(WeightSetting::Setting3));
        ordering &= s2 < s1 && s2 < s3;
        summary.push(format!("{v} {s1:.3}/{s2:.3}/{s3:.3}"));
    }
    verdict(
        "baseline_dominance",
        dominance && ordering,
        format!(
            "min per-frame margin of PROPOSED {worst_gap:+.4}; setting 1/2/3 means: {}",
            summary.join(", ")
        ),
    )
}

fn surrogate_value(runner: &mut Runner) -> Verdict {
    let budget = (50_000_000.0 * runner.base.outer.budget as f64 / 100_000_000.0).round() as u64;
    let mut ours = runner.base_point();
    ours.budget = budget;
    let mut plain = ours;
    plain.variant = Variant::Awkm;
    let (m_ours, _) = frame1_stats(runner.frame_one(ours));
    let awkm = runner.frame_one(plain);
    let (m_awkm, _) = frame1_stats(awkm);
    let infeasible = awkm.infeasible_trials(1);
    let trials = awkm.trials.len();
    let pass = m_ours > m_awkm && (2 * infeasible >= trials || m_awkm < m_ours);
    verdict(
        "surrogate_value",
        pass,
        format!("budget {budget}: PROPOSED {m_ours:.4} vs AWKM {m_awkm:.4}, AWKM infeasible in {infeasible}/{trials} trials"),
    )
}

fn memory_value(runner: &mut Runner) -> Verdict {
    let frames = runner.base.frames;
    let ours = runner.base_point();
    let mut plain = ours;
    plain.variant = Variant::Awmr;
    let mut full = ours;
    full.shrink = 1.0;
    let a = runner.dynamic(ours).trial_means(2, frames);
    let b = runner.dynamic(plain).trial_means(2, frames);
    let c = mean(&runner.dynamic(full).trial_means(2, frames));
    let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let d = mean(&diffs);
    let n = diffs.len() as f64;
    let t = d / (std_dev(&diffs) / n.sqrt());
    let critical = StudentsT::new(0.0, 1.0, n - 1.0).unwrap().inverse_cdf(0.95);
    let ma = mean(&a);
    let pass = d > 0.0 && t > critical && (ma - c).abs() <= 0.01;
    verdict(
        "memory_value",
        pass,
        format!(
            "frames 2-{frames}: PROPOSED {ma:.4} vs AWMR {:.4} (paired t {t:.2} > {critical:.2}); α=1 {c:.4}, |Δ| {:.4} (≤ 0.01)",
            mean(&b),
            (ma - c).abs()
        ),
    )
}

fn cost_factor_trend(runner: &mut Runner) -> Verdict {
    let mut utilities = Vec::new();
    let mut idles = Vec::new();
    let mut shares = (0.0, 0.0, 0.0);
    for lambda in [0.0, 0.1, 0.3] {
        let mut point = runner.base_point();
        point.cost_factor = lambda;
        let r = runner.dynamic(point);
        utilities.push(r.mean_utility());
        idles.push(r.mean_idle());
        if lambda == 0.3 {
            let records: Vec<_> = r.trials.iter().flat_map(|t| &t.frames).collect();
            let share = |uav: usize, task: usize| {
                records.iter().filter(|f| f.assignment.task(uav - 1) == task).count() as f64 / records.len() as f64
            };
            shares = (share(10, 1), share(3, 2), share(6, 3));
        }
    }
    let decreasing = utilities.windows(2).all(|w| w[1] < w[0]);
    let idle_up = idles.windows(2).all(|w| w[1] >= w[0]);
    let majority = shares.0 > 0.5 && shares.1 > 0.5 && shares.2 > 0.5;
    verdict(
        "cost_factor_trend",
        decreasing && idle_up && majority,
        format!(
            "λ = 0/0.1/0.3: utility {:.4}/{:.4}/{:.4}, idle {:.3}/{:.3}/{:.3} (non-decreasing); at λ=0.3 UAV10→1 {:.0}%, UAV3→2 {:.0}%, UAV6→3 {:.0}%",
            utilities[0],
            utilities[1],
            utilities[2],
            idles[0],
            idles[1],
            idles[2],
            100.0 * shares.0,
            100.0 * shares.1,
            100.0 * shares.2
        ),
    )
}

fn estimation_error_trend(runner: &mut Runner) -> Verdict {
    let sigmas = [0.0, 0.1, 0.3, 0.5];
    let utilities: Vec<f64> = sigmas
        .iter()
        .map(|&sigma| {
            let mut point = runner.base_point();
            point.sigma = sigma;
            runner.dynamic(point).mean_utility()
        })
        .collect();
    let decline: Vec<f64> = utilities.iter().map(|u| 1.0 - u / utilities[0]).collect();
    let band = (0.20..=0.30).contains(&decline[1]);
    let monotone = decline.windows(2).all(|w| w[1] > w[0]);
    verdict(
        "estimation_error_trend",
        band && decline[3] > decline[1] && monotone,
        format!(
            "decline at σ = 10/30/50%: {:.1}%/{:.1}%/{:.1}% (σ=10% needs 20-30%); utility {:.4} at σ=0",
            100.0 * decline[1],
            100.0 * decline[2],
            100.0 * decline[3],
            utilities[0]
        ),
    )
}

fn numerical_properties() -> Verdict {
    let mut failures = Vec::new();

    // interpolation at the training points
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut seen = std::collections::HashSet::new();
    let mut x = Vec::new();
    while x.len() < 60 {
        let u = random_assignment(12, 3, 1, &mut rng);
        if seen.insert(u.tasks().to_vec()) {
            x.push(encode(&u));
        }
    }
    let y: Vec<f64> = x.iter().map(|_| rng.random::<f64>()).collect();
    let model = Kriging::fit(x.clone(), y.clone(), KrigingConfig::default()).unwrap();
    let interp = x.iter().zip(&y).map(|(xi, yi)| (model.predict(xi) - yi).abs()).fold(0.0, f64::max);
    if interp >= 1e-6 {
        failures.push(format!("interpolation error {interp:.2e}"));
    }

    // effect function shape
    let scenario = ScenarioConfig::table1().build().unwrap();
    let env = scenario.env.clone();
    let j0 = env.jsr_requirement;
    let slope = |x: f64| {
        let h = x * 1e-4;
        (effect(x + h, &env) - effect(x - h, &env)) / (2.0 * h) * j0
    };
    let values: Vec<f64> = (-40..=40).map(|k| effect(j0 * 10f64.powf(k as f64 / 10.0), &env)).collect();
    if !values.windows(2).all(|w| w[1] >= w[0]) {
        failures.push("effect not monotone".into());
    }
    let (lo, hi) = (slope(1e-6 * j0), slope(1e6 * j0));
    if lo.abs() > 1e-12 || hi.abs() > 1e-11 || slope(j0) < 0.3 {
        failures.push(format!("effect end slopes {lo:.1e}, {hi:.1e}"));
    }

    // constant-velocity step is linear in state and noise
    let s1 = TargetState::new(1, [1000.0, -20.0, 500.0, 7.0]);
    let s2 = TargetState::new(1, [-300.0, 4.0, 90.0, -11.0]);
    let (n1, n2) = ([0.5, -1.0], [2.0, 3.0]);
    let (a, b) = (1.7, -0.4);
    let mix = TargetState::new(1, std::array::from_fn(|i| a * s1.state[i] + b * s2.state[i]));
    let lhs = propagate_target(&mix, &scenario.motion, [a * n1[0] + b * n2[0], a * n1[1] + b * n2[1]]);
    let (p1, p2) = (propagate_target(&s1, &scenario.motion, n1), propagate_target(&s2, &scenario.motion, n2));
    let lin = (0..4).map(|i| (lhs.state[i] - (a * p1.state[i] + b * p2.state[i])).abs()).fold(0.0, f64::max);
    if lin > 1e-9 {
        failures.push(format!("propagation nonlinearity {lin:.1e}"));
    }

    // JSR equals the power ratio at every wavelength
    let target = scenario.initial_target;
    let mut jsr_err = 0.0f64;
    for wavelength in [0.01, 0.03, 0.3, 3.0] {
        for u in &scenario.uavs {
            for r in &scenario.radars {
                let ratio = jamming_power(u, r, &target, &env, wavelength).unwrap() / echo_power(r, &target, &env, wavelength);
                let j = jsr(u, r, &target, &env).unwrap();
                jsr_err = jsr_err.max((ratio - j).abs() / j);
            }
        }
    }
    if jsr_err > 1e-12 {
        failures.push(format!("JSR depends on wavelength ({jsr_err:.1e})"));
    }

    // byte-identical output on rerun
    let mut spec = ExperimentSpec::new("rerun", ScenarioConfig::table1(), Profile::Desk);
    spec.variants = vec![Variant::Proposed, Variant::Tfba];
    spec.frames = 2;
    spec.trials = 2;
    spec.outer.iterations = 10;
    spec.outer.budget = 100_000;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        emit_results(&run_sweep(&spec).unwrap(), d.path(), 0.0).unwrap();
    }
    for name in ["frames.csv", "summary.csv", "schedules.csv", "convergence.csv"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        if a != b {
            failures.push(format!("{name} differs on rerun"));
        }
    }

    verdict(
        "numerical_properties",
        failures.is_empty(),
        if failures.is_empty() {
            format!("interpolation {interp:.1e}, effect end slopes {lo:.0e}/{hi:.0e}, CV linearity {lin:.0e}, JSR λ-spread {jsr_err:.0e}, reruns identical")
        } else {
            failures.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let full = std::env::var("JAMSWARM_FULL").is_ok_and(|v| v == "1");
    let start = Instant::now();
    let mut results = vec![toy_oracle(), bandwidth_oracle(), numerical_properties()];
    let mut runner = Runner::new(Profile::Desk);
    results.push(baseline_dominance(&mut runner));
    results.push(surrogate_value(&mut runner));
    results.push(memory_value(&mut runner));
    results.push(cost_factor_trend(&mut runner));
    results.push(estimation_error_trend(&mut runner));
    results.push(feasibility_invariant(&runner));
    results.push(population_size(if full { Profile::Full } else { Profile::Desk }));

    println!();
    for r in &results {
        println!("{} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed ({:.0} s)",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
