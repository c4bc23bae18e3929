use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{BandwidthAllocation, TaskAssignment};

/// A truly evaluated assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedPoint {
    pub assignment: TaskAssignment,
    pub utility: f64,
    pub bandwidth: BandwidthAllocation,
    /// The bandwidth schedule satisfies the sum constraints.
    pub feasible: bool,
}

impl EvaluatedPoint {
    /// Surrogate input: the task-index vector as reals.
    pub fn features(&self) -> Vec<f64> {
        encode(&self.assignment)
    }
}

pub fn encode(assignment: &TaskAssignment) -> Vec<f64> {
    assignment.tasks().iter().map(|&t| t as f64).collect()
}

/// Evaluated points with unique task-index vectors, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    points: Vec<EvaluatedPoint>,
    index: HashMap<Vec<usize>, usize>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the point unless its assignment is already present. Returns
    /// whether it was added.
    pub fn insert(&mut self, point: EvaluatedPoint) -> bool {
        let key = point.assignment.tasks().to_vec();
        if self.index.contains_key(&key) {
            return false;
        }
        self.index.insert(key, self.points.len());
        self.points.push(point);
        true
    }

    pub fn contains(&self, assignment: &TaskAssignment) -> bool {
        self.index.contains_key(assignment.tasks())
    }

    pub fn get(&self, assignment: &TaskAssignment) -> Option<&EvaluatedPoint> {
        self.index.get(assignment.tasks()).map(|&i| &self.points[i])
    }

    pub fn points(&self) -> &[EvaluatedPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn clear(&mut self) {
        self.points.clear();
        self.index.clear();
    }

    /// Highest-utility point; feasible points rank above infeasible ones and
    /// the earliest wins ties.
    pub fn best(&self) -> Option<&EvaluatedPoint> {
        let mut best: Option<&EvaluatedPoint> = None;
        for p in &self.points {
            let better = match best {
                None => true,
                Some(b) => (p.feasible && !b.feasible) || (p.feasible == b.feasible && p.utility > b.utility),
            };
            if better {
                best = Some(p);
            }
        }
        best
    }

    pub fn training_data(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        (self.points.iter().map(EvaluatedPoint::features).collect(), self.points.iter().map(|p| p.utility).collect())
    }

    /// CSV with one `t1..tN` column per UAV followed by `utility` and `feasible`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.points.first().map_or(0, |p| p.assignment.num_uavs());
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=n).map(|i| format!("t{i}")).collect();
        header.push("utility".into());
        header.push("feasible".into());
        w.write_record(&header)?;
        for p in &self.points {
            let mut row: Vec<String> = p.assignment.tasks().iter().map(|t| t.to_string()).collect();
            row.push(p.utility.to_string());
            row.push(p.feasible.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| crate::error::Error::io("<dataset csv>", e))?;
        Ok(())
    }
}
