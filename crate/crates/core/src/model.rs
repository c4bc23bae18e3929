//! Assignment and bandwidth matrices, coalitions, and feasibility checks.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the per-radar bandwidth sum: a coalition is
/// feasible when `|Σ B − B_m| <= FEASIBILITY_REL_TOL · B_m`.
pub const FEASIBILITY_REL_TOL: f64 = 1e-6;

pub fn feasibility_tolerance(radar_bandwidth: f64) -> f64 {
    FEASIBILITY_REL_TOL * radar_bandwidth
}

/// Task assignment stored as one task index per UAV (0 = idle, m = radar m).
///
/// This is the canonical form of the N×(M+1) one-hot matrix: every row has
/// exactly one set entry, idle rows have column 0 set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskAssignment {
    tasks: Vec<usize>,
    num_radars: usize,
    pub frame: usize,
}

impl TaskAssignment {
    pub fn new(tasks: Vec<usize>, num_radars: usize, frame: usize) -> Result<Self> {
        if let Some((n, &t)) = tasks.iter().enumerate().find(|(_, &t)| t > num_radars) {
            return Err(Error::Shape {
                expected: format!("task index in 0..={num_radars} for UAV {}", n + 1),
                got: t.to_string(),
            });
        }
        Ok(Self {
            tasks,
            num_radars,
            frame,
        })
    }

    pub fn idle(num_uavs: usize, num_radars: usize, frame: usize) -> Self {
        Self {
            tasks: vec![0; num_uavs],
            num_radars,
            frame,
        }
    }

    /// Builds an assignment from a Boolean matrix. All-zero rows are idle.
    pub fn from_matrix(rows: &[Vec<bool>], frame: usize) -> Result<Self> {
        let width = rows.first().map_or(1, Vec::len);
        if width == 0 {
            return Err(Error::Shape {
                expected: "at least one column".into(),
                got: "0".into(),
            });
        }
        let mut tasks = Vec::with_capacity(rows.len());
        for (n, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Shape {
                    expected: format!("{width} columns"),
                    got: format!("{} in row {}", row.len(), n + 1),
                });
            }
            let count = row.iter().filter(|&&b| b).count();
            if count > 1 {
                return Err(Error::RowSum { uav: n + 1, count });
            }
            tasks.push(row.iter().position(|&b| b).unwrap_or(0));
        }
        Ok(Self {
            tasks,
            num_radars: width - 1,
            frame,
        })
    }

    pub fn to_matrix(&self) -> Vec<Vec<bool>> {
        self.tasks
            .iter()
            .map(|&t| (0..=self.num_radars).map(|m| m == t).collect())
            .collect()
    }

    pub fn tasks(&self) -> &[usize] {
        &self.tasks
    }

    pub fn into_tasks(self) -> Vec<usize> {
        self.tasks
    }

    pub fn task(&self, uav: usize) -> usize {
        self.tasks[uav]
    }

    pub fn num_uavs(&self) -> usize {
        self.tasks.len()
    }

    pub fn num_radars(&self) -> usize {
        self.num_radars
    }

    pub fn working_count(&self) -> usize {
        self.tasks.iter().filter(|&&t| t != 0).count()
    }

    pub fn idle_count(&self) -> usize {
        self.num_uavs() - self.working_count()
    }

    pub fn with_frame(mut self, frame: usize) -> Self {
        self.frame = frame;
        self
    }

    pub fn hamming(&self, other: &TaskAssignment) -> usize {
        self.tasks.iter().zip(&other.tasks).filter(|(a, b)| a != b).count()
    }
}

/// UAVs jamming radar `radar` (1-based). Member ids are 0-based UAV indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coalition {
    pub radar: usize,
    pub members: Vec<usize>,
}

impl Coalition {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }
}

/// One coalition per radar, in radar order; empty coalitions included.
pub fn coalitions_of(assignment: &TaskAssignment) -> Vec<Coalition> {
    let mut out: Vec<Coalition> = (1..=assignment.num_radars())
        .map(|radar| Coalition {
            radar,
            members: Vec::new(),
        })
        .collect();
    for (n, &t) in assignment.tasks().iter().enumerate() {
        if t != 0 {
            out[t - 1].members.push(n);
        }
    }
    out
}

/// N×(M+1) bandwidth matrix in Hz. Column 0 is always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthAllocation {
    matrix: Vec<Vec<f64>>,
    pub frame: usize,
}

impl BandwidthAllocation {
    pub fn zeros(num_uavs: usize, num_radars: usize, frame: usize) -> Self {
        Self {
            matrix: vec![vec![0.0; num_radars + 1]; num_uavs],
            frame,
        }
    }

    pub fn from_matrix(matrix: Vec<Vec<f64>>, frame: usize) -> Result<Self> {
        let width = matrix.first().map_or(1, Vec::len);
        if matrix.iter().any(|r| r.len() != width) {
            return Err(Error::Shape {
                expected: format!("{width} columns in every row"),
                got: "ragged matrix".into(),
            });
        }
        Ok(Self { matrix, frame })
    }

    /// Places `values[n]` on UAV `n`'s assigned column; idle UAVs get nothing.
    pub fn from_assignment(assignment: &TaskAssignment, values: &[f64]) -> Self {
        let mut b = Self::zeros(assignment.num_uavs(), assignment.num_radars(), assignment.frame);
        for (n, &t) in assignment.tasks().iter().enumerate() {
            if t != 0 {
                b.matrix[n][t] = values[n];
            }
        }
        b
    }

    pub fn get(&self, uav: usize, task: usize) -> f64 {
        self.matrix[uav][task]
    }

    pub fn set(&mut self, uav: usize, task: usize, value: f64) {
        self.matrix[uav][task] = value;
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn num_uavs(&self) -> usize {
        self.matrix.len()
    }

    pub fn num_columns(&self) -> usize {
        self.matrix.first().map_or(0, Vec::len)
    }

    /// Sum over UAVs of column `task`.
    pub fn column_sum(&self, task: usize) -> f64 {
        self.matrix.iter().map(|r| r[task]).sum()
    }

    pub fn with_frame(mut self, frame: usize) -> Self {
        self.frame = frame;
        self
    }
}

pub(crate) fn check_shapes(assignment: &TaskAssignment, bandwidth: &BandwidthAllocation, radar_bandwidths: &[f64]) -> Result<()> {
    let expected = (assignment.num_uavs(), assignment.num_radars() + 1);
    let got = (bandwidth.num_uavs(), bandwidth.num_columns());
    if expected != got {
        return Err(Error::Shape {
            expected: format!("{}x{} bandwidth matrix", expected.0, expected.1),
            got: format!("{}x{}", got.0, got.1),
        });
    }
    if radar_bandwidths.len() != assignment.num_radars() {
        return Err(Error::Shape {
            expected: format!("{} radar bandwidths", assignment.num_radars()),
            got: radar_bandwidths.len().to_string(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarFeasibility {
    pub radar: usize,
    pub members: Vec<usize>,
    /// `|Σ_n B[n][m] − B_m|` in Hz.
    pub sum_error: f64,
    pub tolerance: f64,
    /// Members whose bandwidth lies outside `[0, B_m]`.
    pub box_violations: Vec<usize>,
}

impl RadarFeasibility {
    pub fn is_feasible(&self) -> bool {
        self.sum_error <= self.tolerance && self.box_violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Only radars with a nonempty coalition.
    pub radars: Vec<RadarFeasibility>,
    /// `(uav, column)` pairs carrying bandwidth outside the assignment support.
    pub support_violations: Vec<(usize, usize)>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.support_violations.is_empty() && self.radars.iter().all(RadarFeasibility::is_feasible)
    }
}

pub fn validate_bandwidth(
    assignment: &TaskAssignment,
    bandwidth: &BandwidthAllocation,
    radar_bandwidths: &[f64],
) -> Result<FeasibilityReport> {
    check_shapes(assignment, bandwidth, radar_bandwidths)?;
    let mut support_violations = Vec::new();
    for (n, row) in bandwidth.rows().iter().enumerate() {
        for (m, &b) in row.iter().enumerate() {
            let on_support = m != 0 && assignment.task(n) == m;
            if !on_support && b != 0.0 {
                support_violations.push((n, m));
            }
        }
    }
    let radars = coalitions_of(assignment)
        .into_iter()
        .filter(|c| !c.is_empty())
        .map(|c| {
            let limit = radar_bandwidths[c.radar - 1];
            let sum: f64 = c.members.iter().map(|&n| bandwidth.get(n, c.radar)).sum();
            let box_violations = c
                .members
                .iter()
                .copied()
                .filter(|&n| {
                    let b = bandwidth.get(n, c.radar);
                    !(0.0..=limit).contains(&b)
                })
                .collect();
            RadarFeasibility {
                radar: c.radar,
                members: c.members,
                sum_error: (sum - limit).abs(),
                tolerance: feasibility_tolerance(limit),
                box_violations,
            }
        })
        .collect();
    Ok(FeasibilityReport {
        radars,
        support_violations,
    })
}

/// One line of the canonical schedule dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub frame: usize,
    /// 1-based UAV id.
    pub uav: usize,
    /// 0 = idle, m = radar m.
    pub task: usize,
    pub bandwidth_hz: f64,
}

pub fn schedule_rows(assignment: &TaskAssignment, bandwidth: &BandwidthAllocation) -> Vec<ScheduleRow> {
    assignment
        .tasks()
        .iter()
        .enumerate()
        .map(|(n, &t)| ScheduleRow {
            frame: assignment.frame,
            uav: n + 1,
            task: t,
            bandwidth_hz: if t == 0 { 0.0 } else { bandwidth.get(n, t) },
        })
        .collect()
}

/// Writes `frame,uav,task,bandwidth_hz` rows with a header.
pub fn write_schedule_csv<W: Write>(out: W, rows: &[ScheduleRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["frame", "uav", "task", "bandwidth_hz"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<schedule csv>", e))?;
    Ok(())
}
