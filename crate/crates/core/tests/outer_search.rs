use jamswarm_core::budget::BudgetAccountant;
use jamswarm_core::config::ScenarioConfig;
use jamswarm_core::ibaa::{DePlanner, EqualSplit};
use jamswarm_core::model::{validate_bandwidth, TaskAssignment};
use jamswarm_core::otaa::{run_scenario, solve_frame, Evaluator, OuterConfig};
use jamswarm_core::utility::FrameContext;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn toy_ctx() -> FrameContext {
    let scenario = ScenarioConfig::toy().build().unwrap();
    FrameContext::new(&scenario, &scenario.initial_target).unwrap()
}

fn all_assignments(n: usize, m: usize) -> Vec<TaskAssignment> {
    let total = (m + 1).pow(n as u32);
    (0..total)
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

fn brute_force(ctx: &FrameContext, planner: &DePlanner, seed: u64) -> f64 {
    let budget = BudgetAccountant::unlimited();
    let mut eval = Evaluator::new(ctx, planner, &budget, seed);
    all_assignments(ctx.num_uavs(), ctx.num_radars())
        .iter()
        .filter_map(|u| eval.evaluate(u))
        .filter(|p| p.feasible)
        .map(|p| p.utility)
        .fold(0.0, f64::max)
}

fn unlimited(iterations: usize) -> OuterConfig {
    OuterConfig {
        iterations,
        budget: u64::MAX,
        ..OuterConfig::default()
    }
}

#[test]
fn toy_matches_enumeration() {
    let ctx = toy_ctx();
    let planner = DePlanner::default();
    for seed in [1u64, 2, 3] {
        let oracle = brute_force(&ctx, &planner, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = solve_frame(&ctx, None, &unlimited(150), &planner, seed, &mut rng).result;
        assert!(out.found_feasible);
        assert_eq!(out.utility, oracle, "seed {seed}");
        assert!(!out.truncated);
    }
}

#[test]
fn toy_matches_enumeration_without_surrogate() {
    let ctx = toy_ctx();
    let planner = DePlanner::default();
    let oracle = brute_force(&ctx, &planner, 9);
    let cfg = OuterConfig {
        surrogate: false,
        ..unlimited(60)
    };
    let out = solve_frame(&ctx, None, &cfg, &planner, 9, &mut ChaCha8Rng::seed_from_u64(9)).result;
    assert_eq!(out.utility, oracle);
}

#[test]
fn single_uav_single_radar() {
    let mut cfg = ScenarioConfig::toy();
    cfg.radars.truncate(1);
    cfg.radars[0].threat_weight = 1.0;
    cfg.uavs.truncate(1);
    let scenario = cfg.build().unwrap();
    let ctx = FrameContext::new(&scenario, &scenario.initial_target).unwrap();
    let planner = DePlanner::default();
    let oracle = brute_force(&ctx, &planner, 4);
    assert!(oracle > 0.0);
    let out = solve_frame(&ctx, None, &unlimited(10), &planner, 4, &mut ChaCha8Rng::seed_from_u64(4)).result;
    assert_eq!(out.assignment.tasks(), &[1]);
    assert_eq!(out.utility, oracle);
}

#[test]
fn history_is_monotone_and_bounded() {
    let scenario = ScenarioConfig::table1().build().unwrap();
    let ctx = FrameContext::new(&scenario, &scenario.initial_target).unwrap();
    let cfg = OuterConfig {
        iterations: 40,
        budget: 10_000,
        ..OuterConfig::default()
    };
    let out = solve_frame(&ctx, None, &cfg, &EqualSplit, 5, &mut ChaCha8Rng::seed_from_u64(5)).result;
    for w in out.history.windows(2) {
        assert!(w[1].best_utility >= w[0].best_utility);
        assert!(w[1].evaluations >= w[0].evaluations);
    }
    // P initial, memory slots, one per iteration
    let bound = cfg.population + cfg.memory_size() + cfg.iterations;
    assert!(out.inner_runs <= bound, "{} > {bound}", out.inner_runs);
    let report = validate_bandwidth(&out.assignment, &out.bandwidth, &ctx.radar_bandwidths).unwrap();
    assert!(report.feasible());
}

#[test]
fn budget_is_never_exceeded() {
    let scenario = ScenarioConfig::table1().build().unwrap();
    let ctx = FrameContext::new(&scenario, &scenario.initial_target).unwrap();
    let cfg = OuterConfig {
        iterations: 50,
        budget: 20_000,
        ..OuterConfig::default()
    };
    let out = solve_frame(&ctx, None, &cfg, &DePlanner::default(), 6, &mut ChaCha8Rng::seed_from_u64(6)).result;
    assert!(out.evaluations <= 20_000);
    assert!(out.truncated);
}

#[test]
fn runs_are_deterministic() {
    let scenario = ScenarioConfig::table1().build().unwrap();
    let traj = scenario.trajectory(3, &mut ChaCha8Rng::seed_from_u64(11));
    let cfg = OuterConfig {
        iterations: 20,
        budget: 200_000,
        ..OuterConfig::default()
    };
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frames = run_scenario(&scenario, &traj, &cfg, &DePlanner::default(), 11, &mut rng).unwrap();
        frames
            .into_iter()
            .map(|f| (f.assignment, f.bandwidth, f.utility.to_bits(), f.evaluations))
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn later_frames_get_shrunk_budget() {
    let scenario = ScenarioConfig::table1().build().unwrap();
    let traj = scenario.trajectory(2, &mut ChaCha8Rng::seed_from_u64(2));
    let cfg = OuterConfig {
        iterations: 20,
        budget: 50_000,
        ..OuterConfig::default()
    };
    let frames = run_scenario(&scenario, &traj, &cfg, &DePlanner::default(), 2, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_eq!(frames.len(), 2);
    assert_eq!(frames[1].frame, 2);
    assert!(frames[1].evaluations <= 15_000);
    assert!(frames[1].iterations <= 6);
}
