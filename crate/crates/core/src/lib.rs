//! Dynamic task assignment and bandwidth allocation for a swarm of jamming
//! UAVs against a network of frequency-agile radars.
//!
//! The problem is solved per frame by a two-level search: a surrogate-assisted
//! genetic algorithm over task assignments ([`otaa`]) whose candidates are
//! scored by a constrained differential evolution over bandwidths ([`ibaa`]).
//! [`experiments`] runs the seeded comparisons and writes their CSVs.

pub mod budget;
pub mod config;
pub mod error;
pub mod experiments;
pub mod ibaa;
pub mod kriging;
pub mod model;
pub mod otaa;
pub mod scenario;
pub mod utility;

pub use budget::BudgetAccountant;
pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use ibaa::{BandwidthPlanner, DePlanner, EqualSplit, InnerConfig};
pub use model::{BandwidthAllocation, TaskAssignment};
pub use otaa::{run_scenario, solve_frame, FrameResult, OuterConfig};
pub use scenario::{Scenario, TargetState};
pub use utility::FrameContext;
