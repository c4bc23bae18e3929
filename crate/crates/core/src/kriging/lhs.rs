use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::TaskAssignment;

const MAX_REDRAWS: usize = 100;

/// Latin hypercube sample of `count` distinct assignments of `num_uavs` UAVs
/// over tasks `0..=num_radars`.
///
/// Each UAV dimension is stratified into `count` equal slices of `[0, 1)`,
/// one point per slice, and the point is mapped to a task index by
/// `floor(u·(M+1))`. Duplicate rows are redrawn a bounded number of times;
/// rows still duplicated afterwards are replaced by uniform draws. The result
/// is shorter than `count` only when the search space itself is smaller.
pub fn lhs_initial_population<R: Rng + ?Sized>(
    count: usize,
    num_uavs: usize,
    num_radars: usize,
    frame: usize,
    rng: &mut R,
) -> Vec<TaskAssignment> {
    let levels = num_radars + 1;
    let space = (levels as f64).powi(num_uavs as i32);
    let target = if space < count as f64 { space as usize } else { count };
    if target < count {
        log::warn!("lhs: only {target} distinct assignments exist, {count} requested");
    }
    let mut best: Vec<Vec<usize>> = Vec::new();
    for _ in 0..MAX_REDRAWS {
        let rows = draw(count, num_uavs, levels, rng);
        let mut seen = HashSet::new();
        let unique: Vec<Vec<usize>> = rows.into_iter().filter(|r| seen.insert(r.clone())).collect();
        if unique.len() > best.len() {
            best = unique;
        }
        if best.len() >= target {
            break;
        }
    }
    let mut seen: HashSet<Vec<usize>> = best.iter().cloned().collect();
    let mut attempts = 0;
    while best.len() < target && attempts < MAX_REDRAWS * target.max(1) {
        attempts += 1;
        let row: Vec<usize> = (0..num_uavs).map(|_| rng.random_range(0..levels)).collect();
        if seen.insert(row.clone()) {
            best.push(row);
        }
    }
    if best.len() < target {
        // exhaustively fill from the lattice; only reachable for tiny spaces
        let mut code = 0usize;
        while best.len() < target {
            let row: Vec<usize> = (0..num_uavs).map(|d| code / levels.pow(d as u32) % levels).collect();
            if seen.insert(row.clone()) {
                best.push(row);
            }
            code += 1;
        }
    }
    best.truncate(target);
    best.into_iter()
        .map(|tasks| TaskAssignment::new(tasks, num_radars, frame).expect("task indices are in range"))
        .collect()
}

fn draw<R: Rng + ?Sized>(count: usize, num_uavs: usize, levels: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut rows = vec![vec![0; num_uavs]; count];
    let mut strata: Vec<usize> = (0..count).collect();
    for d in 0..num_uavs {
        strata.shuffle(rng);
        for (i, &s) in strata.iter().enumerate() {
            let u = (s as f64 + rng.random::<f64>()) / count as f64;
            rows[i][d] = ((u * levels as f64) as usize).min(levels - 1);
        }
    }
    rows
}
