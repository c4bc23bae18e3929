//! The utility stack: suppression probability, bandwidth-normalized JSR,
//! effect function, coalition reward and cost, weighted total utility, and
//! the constraint-violation measure used by the inner optimizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_shapes, coalitions_of, feasibility_tolerance, BandwidthAllocation, Coalition, TaskAssignment};
use crate::scenario::{EnvironmentConstants, Scenario, TargetState};

/// Everything the utility needs for one frame, with JSR precomputed for
/// every UAV/radar pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameContext {
    pub frame: usize,
    /// `jsr[n][m-1]` for UAV `n` against radar `m`.
    pub jsr: Vec<Vec<f64>>,
    /// Radar bandwidths the schedule is planned against, Hz.
    pub radar_bandwidths: Vec<f64>,
    pub weights: Vec<f64>,
    pub env: EnvironmentConstants,
}

impl FrameContext {
    pub fn new(scenario: &Scenario, target: &TargetState) -> Result<Self> {
        Ok(Self {
            frame: target.frame,
            jsr: scenario.jsr_matrix(target)?,
            radar_bandwidths: scenario.radar_bandwidths(),
            weights: scenario.weights(),
            env: scenario.env.clone(),
        })
    }

    pub fn num_uavs(&self) -> usize {
        self.jsr.len()
    }

    pub fn num_radars(&self) -> usize {
        self.radar_bandwidths.len()
    }

    /// Same frame, planned against different radar bandwidths.
    pub fn with_radar_bandwidths(&self, bandwidths: Vec<f64>) -> Self {
        Self {
            radar_bandwidths: bandwidths,
            ..self.clone()
        }
    }

    pub fn cost_factor(&self) -> f64 {
        self.env.cost_factor
    }
}

/// Probability that a radar hopping uniformly over `radar_bandwidth` lands
/// inside a jammer band of width `bandwidth`.
pub fn suppression_probability(bandwidth: f64, radar_bandwidth: f64) -> Result<f64> {
    if !(0.0..=radar_bandwidth).contains(&bandwidth) || radar_bandwidth <= 0.0 {
        return Err(Error::BandwidthOutOfBox {
            bandwidth,
            limit: radar_bandwidth,
        });
    }
    Ok(bandwidth / radar_bandwidth)
}

/// JSR per Hz of allocated jamming band.
pub fn jsr_bar(jsr: f64, bandwidth: f64) -> Result<f64> {
    if bandwidth <= 0.0 {
        return Err(Error::ZeroBandwidth { uav: 0, radar: 0 });
    }
    Ok(jsr / bandwidth)
}

/// Saturating jamming effect `exp[-(JSR° / jsr_bar)^L]`.
pub fn effect(jsr_bar: f64, env: &EnvironmentConstants) -> f64 {
    let ratio = env.jsr_requirement / jsr_bar;
    let x = if env.tolerance_factor == 1.0 {
        ratio
    } else {
        ratio.powf(env.tolerance_factor)
    };
    (-x).exp()
}

/// `f(JSR/B)·B/B_m` for one jammer. Zero bandwidth contributes nothing
/// (the product vanishes in the limit).
#[inline]
pub(crate) fn reward_term(jsr: f64, bandwidth: f64, radar_bandwidth: f64, env: &EnvironmentConstants) -> f64 {
    if bandwidth <= 0.0 || jsr <= 0.0 {
        return 0.0;
    }
    let ratio = env.jsr_requirement * bandwidth / jsr;
    let x = if env.tolerance_factor == 1.0 {
        ratio
    } else {
        ratio.powf(env.tolerance_factor)
    };
    (-x).exp() * bandwidth / radar_bandwidth
}

/// Reward of one coalition. `jsr_values[n]` is UAV `n`'s JSR against the
/// coalition's radar.
pub fn coalition_reward(
    coalition: &Coalition,
    bandwidth: &BandwidthAllocation,
    jsr_values: &[f64],
    radar_bandwidth: f64,
    env: &EnvironmentConstants,
) -> Result<f64> {
    let mut total = 0.0;
    for &n in &coalition.members {
        let b = bandwidth.get(n, coalition.radar);
        if b <= 0.0 {
            return Err(Error::ZeroBandwidth {
                uav: n + 1,
                radar: coalition.radar,
            });
        }
        let p = suppression_probability(b, radar_bandwidth)?;
        total += effect(jsr_bar(jsr_values[n], b)?, env) * p;
    }
    Ok(total)
}

/// Fraction of the swarm committed to the coalition.
pub fn coalition_cost(coalition: &Coalition, num_uavs: usize) -> f64 {
    coalition.len() as f64 / num_uavs as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionUtility {
    pub radar: usize,
    pub reward: f64,
    pub cost: f64,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityBreakdown {
    pub coalitions: Vec<CoalitionUtility>,
    pub total: f64,
}

fn breakdown_with<F>(assignment: &TaskAssignment, ctx: &FrameContext, mut reward_of: F) -> UtilityBreakdown
where
    F: FnMut(&Coalition) -> f64,
{
    let n = assignment.num_uavs();
    let lambda = ctx.cost_factor();
    let coalitions: Vec<CoalitionUtility> = coalitions_of(assignment)
        .iter()
        .map(|c| {
            if c.is_empty() {
                return CoalitionUtility {
                    radar: c.radar,
                    reward: 0.0,
                    cost: 0.0,
                    utility: 0.0,
                };
            }
            let reward = reward_of(c);
            let cost = coalition_cost(c, n);
            CoalitionUtility {
                radar: c.radar,
                reward,
                cost,
                utility: reward - lambda * cost,
            }
        })
        .collect();
    let total = coalitions
        .iter()
        .map(|c| ctx.weights[c.radar - 1] * c.utility)
        .sum();
    UtilityBreakdown { coalitions, total }
}

fn check_inputs(assignment: &TaskAssignment, bandwidth: &BandwidthAllocation, ctx: &FrameContext) -> Result<()> {
    check_shapes(assignment, bandwidth, &ctx.radar_bandwidths)?;
    if ctx.num_uavs() != assignment.num_uavs() {
        return Err(Error::Shape {
            expected: format!("{} UAVs in frame context", assignment.num_uavs()),
            got: ctx.num_uavs().to_string(),
        });
    }
    if assignment.frame != bandwidth.frame || assignment.frame != ctx.frame {
        return Err(Error::FrameMismatch {
            assignment: assignment.frame,
            bandwidth: if assignment.frame != bandwidth.frame {
                bandwidth.frame
            } else {
                ctx.frame
            },
        });
    }
    Ok(())
}

/// Weighted total utility of a schedule. The bandwidth need not satisfy the
/// sum constraint; members with zero bandwidth contribute no reward.
pub fn total_utility(
    assignment: &TaskAssignment,
    bandwidth: &BandwidthAllocation,
    ctx: &FrameContext,
) -> Result<UtilityBreakdown> {
    check_inputs(assignment, bandwidth, ctx)?;
    Ok(breakdown_with(assignment, ctx, |c| {
        let bm = ctx.radar_bandwidths[c.radar - 1];
        c.members
            .iter()
            .map(|&n| reward_term(ctx.jsr[n][c.radar - 1], bandwidth.get(n, c.radar), bm, &ctx.env))
            .sum()
    }))
}

/// Scores a schedule planned against `planned.radar_bandwidths` on the radars'
/// true bandwidths in `truth`.
///
/// Only the part of the jamming bands overlapping the true hop band counts:
/// when the planned total `S` exceeds the true `B_m`, each band's overlap is
/// `B_n·B_m/S`. The jammer energy stays spread over its full band `B_n`.
pub fn score_against_true(
    assignment: &TaskAssignment,
    bandwidth: &BandwidthAllocation,
    truth: &FrameContext,
) -> Result<UtilityBreakdown> {
    check_inputs(assignment, bandwidth, truth)?;
    Ok(breakdown_with(assignment, truth, |c| {
        let bm = truth.radar_bandwidths[c.radar - 1];
        let planned: f64 = c.members.iter().map(|&n| bandwidth.get(n, c.radar).max(0.0)).sum();
        let coverage = if planned > bm { bm / planned } else { 1.0 };
        c.members
            .iter()
            .map(|&n| {
                let b = bandwidth.get(n, c.radar);
                // f·p with p on the overlap only
                reward_term(truth.jsr[n][c.radar - 1], b, bm, &truth.env) * coverage
            })
            .sum()
    }))
}

/// Degree of constraint violation in Hz, summed over radars with a nonempty
/// coalition and their members.
///
/// A sum residual within the feasibility tolerance of
/// [`validate_bandwidth`](crate::model::validate_bandwidth) counts as zero, so
/// `G = 0` exactly when the schedule validates.
pub fn constraint_violation(assignment: &TaskAssignment, bandwidth: &BandwidthAllocation, radar_bandwidths: &[f64]) -> f64 {
    coalitions_of(assignment)
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| {
            let values = c.members.iter().map(|&n| bandwidth.get(n, c.radar));
            violation_of(values, radar_bandwidths[c.radar - 1])
        })
        .sum()
}

/// Violation contributed by one coalition's bandwidths against limit `bm`.
#[inline]
pub(crate) fn violation_of<I: IntoIterator<Item = f64>>(values: I, bm: f64) -> f64 {
    let mut sum = 0.0;
    let mut boxed = 0.0;
    for b in values {
        sum += b;
        boxed += f64::max(0.0, -b) + f64::max(0.0, b - bm);
    }
    let residual = f64::max(0.0, (sum - bm).abs());
    let residual = if residual <= feasibility_tolerance(bm) { 0.0 } else { residual };
    residual + boxed
}
