//! Shared fixtures for the benchmarks.

use jamswarm_core::kriging::encode;
use jamswarm_core::otaa::random_assignment;
use jamswarm_core::{FrameContext, ScenarioConfig, TaskAssignment};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Frame-1 context of the reference scenario.
pub fn reference_frame() -> FrameContext {
    let scenario = ScenarioConfig::table1().build().expect("reference scenario is valid");
    FrameContext::new(&scenario, &scenario.initial_target).expect("reference geometry is valid")
}

/// A good 12-UAV assignment on the reference frame.
pub fn reference_assignment() -> TaskAssignment {
    TaskAssignment::new(vec![2, 2, 2, 2, 3, 3, 3, 3, 3, 1, 1, 1], 3, 1).expect("valid tasks")
}

/// `count` distinct random assignments, encoded, with synthetic outputs.
pub fn kriging_data(count: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut x = Vec::with_capacity(count);
    while x.len() < count {
        let u = random_assignment(12, 3, 1, &mut rng);
        if seen.insert(u.tasks().to_vec()) {
            x.push(encode(&u));
        }
    }
    let y = x.iter().map(|v| v.iter().enumerate().map(|(i, t)| (t * (i + 1) as f64).sin()).sum()).collect();
    (x, y)
}
