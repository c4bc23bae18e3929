//! Named experiment presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ExperimentSpec, Profile, Variant, WeightSetting};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reproduction {
    /// Frame-1 utility against the outer population size.
    Table2,
    /// Utility under bandwidth estimation errors.
    Table3,
    /// Surrogate ablation over budgets, and memory ablation over `α`.
    Fig5,
    /// Baselines under the three weight settings.
    Fig6,
    /// Utility and UAV counts against the cost factor.
    Fig9,
    /// Bandwidth schedules at the extreme cost factors.
    Fig10,
}

impl Reproduction {
    pub const ALL: [Reproduction; 6] = [
        Reproduction::Table2,
        Reproduction::Table3,
        Reproduction::Fig5,
        Reproduction::Fig6,
        Reproduction::Fig9,
        Reproduction::Fig10,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Reproduction::Table2 => "table2",
            Reproduction::Table3 => "table3",
            Reproduction::Fig5 => "fig5",
            Reproduction::Fig6 => "fig6",
            Reproduction::Fig9 => "fig9",
            Reproduction::Fig10 => "fig10",
        }
    }
}

impl fmt::Display for Reproduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Reproduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Reproduction::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Full-profile budgets of the surrogate ablation.
pub const FIG5_BUDGETS: [u64; 3] = [50_000_000, 100_000_000, 300_000_000];
pub const FIG5_SHRINKS: [f64; 3] = [0.1, 0.3, 1.0];
pub const COST_FACTORS: [f64; 3] = [0.0, 0.1, 0.3];
pub const SIGMAS: [f64; 4] = [0.0, 0.1, 0.3, 0.5];
pub const POPULATIONS: [usize; 4] = [2, 6, 10, 20];

/// The specs behind `which`; most presets are a single sweep.
pub fn reproduction(which: Reproduction, profile: Profile, scenario: &ScenarioConfig) -> Vec<ExperimentSpec> {
    let base = |suffix: &str| ExperimentSpec::new(format!("{which}{suffix}"), scenario.clone(), profile);
    match which {
        Reproduction::Table2 => {
            let mut spec = base("");
            spec.frames = 1;
            spec.axes.populations = POPULATIONS.to_vec();
            vec![spec]
        }
        Reproduction::Table3 => {
            let mut spec = base("");
            spec.axes.sigmas = SIGMAS.to_vec();
            vec![spec]
        }
        Reproduction::Fig5 => {
            let mut budget = base("_budget");
            budget.frames = 1;
            budget.variants = vec![Variant::Proposed, Variant::Awkm];
            let scale = profile.budget_scale();
            budget.axes.budgets = FIG5_BUDGETS.iter().map(|&b| (b as f64 * scale).round() as u64).collect();
            let mut dynamic = base("_dynamic");
            dynamic.variants = vec![Variant::Proposed, Variant::Awmr];
            dynamic.axes.shrinks = FIG5_SHRINKS.to_vec();
            vec![budget, dynamic]
        }
        Reproduction::Fig6 => {
            let mut spec = base("");
            spec.variants = vec![Variant::Proposed, Variant::Tabe, Variant::Tfba, Variant::Tfbe];
            spec.axes.settings = WeightSetting::ALL.to_vec();
            vec![spec]
        }
        Reproduction::Fig9 => {
            let mut spec = base("");
            spec.axes.cost_factors = COST_FACTORS.to_vec();
            vec![spec]
        }
        Reproduction::Fig10 => {
            let mut spec = base("");
            spec.axes.cost_factors = vec![0.0, 0.3];
            vec![spec]
        }
    }
}
