//! Declarative scenario file (TOML, `version = 1`).
//!
//! Gains are written in dB and converted to linear units by [`ScenarioConfig::build`].
//! [`ScenarioConfig::table1`] holds the reference scenario; the same values
//! ship as `configs/table1.toml`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{EnvironmentConstants, MotionModel, Point, RadarParams, Scenario, TargetState, UavParams};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub version: u32,
    pub target: TargetSection,
    pub motion: MotionSection,
    pub environment: EnvironmentSection,
    pub radars: Vec<RadarSection>,
    pub uavs: Vec<UavSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSection {
    /// `[x, vx, y, vy]` in m and m/s.
    pub initial_state: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSection {
    pub sample_interval_s: f64,
    pub process_noise_std: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSection {
    pub polarization_loss: f64,
    pub target_rcs_m2: f64,
    pub jsr_requirement: f64,
    pub tolerance_factor: f64,
    pub cost_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSection {
    pub position_m: [f64; 2],
    pub transmit_power_w: f64,
    pub mainlobe_gain_db: f64,
    pub bandwidth_hz: f64,
    pub mainlobe_width_rad: f64,
    pub sidelobe_constant: f64,
    pub threat_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavSection {
    pub position_m: [f64; 2],
    pub transmit_power_w: f64,
    pub mainlobe_gain_db: f64,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ScenarioConfig {
    /// Reference scenario: 3 radars, 12 UAVs on a diagonal line, target
    /// inbound from (69 km, 59 km).
    pub fn table1() -> Self {
        let radar = |x: f64, y: f64| RadarSection {
            position_m: [x, y],
            transmit_power_w: 1e4,
            mainlobe_gain_db: 40.0,
            bandwidth_hz: 5e8,
            mainlobe_width_rad: 1.0,
            sidelobe_constant: 0.313,
            threat_weight: 1.0 / 3.0,
        };
        let uavs = (0..12)
            .map(|i| UavSection {
                position_m: [24000.0 - 2000.0 * i as f64, 1000.0 + 2000.0 * i as f64],
                transmit_power_w: 1.0,
                mainlobe_gain_db: 5.0,
            })
            .collect();
        Self {
            version: CONFIG_VERSION,
            target: TargetSection {
                initial_state: [69000.0, -240.0, 59000.0, -240.0],
            },
            motion: MotionSection {
                sample_interval_s: 5.0,
                process_noise_std: [3.0, 3.0],
            },
            environment: EnvironmentSection {
                polarization_loss: 0.5,
                target_rcs_m2: 25.0,
                jsr_requirement: 1e-5,
                tolerance_factor: 1.0,
                cost_factor: 0.0,
                wavelength_m: None,
            },
            radars: vec![radar(0.0, 15000.0), radar(15000.0, 0.0), radar(0.0, 0.0)],
            uavs,
        }
    }

    /// Three UAVs (reference UAVs 3, 6 and 10) against the first two radars,
    /// equally weighted: 27 assignments, small enough to enumerate.
    pub fn toy() -> Self {
        let mut cfg = Self::table1();
        cfg.radars.truncate(2);
        for r in &mut cfg.radars {
            r.threat_weight = 0.5;
        }
        cfg.uavs = [2, 5, 9].iter().map(|&i| cfg.uavs[i].clone()).collect();
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn build(&self) -> Result<Scenario> {
        let radars = self
            .radars
            .iter()
            .enumerate()
            .map(|(i, r)| RadarParams {
                id: i + 1,
                position: Point::new(r.position_m[0], r.position_m[1]),
                transmit_power: r.transmit_power_w,
                mainlobe_gain: db_to_linear(r.mainlobe_gain_db),
                bandwidth: r.bandwidth_hz,
                mainlobe_width: r.mainlobe_width_rad,
                sidelobe_constant: r.sidelobe_constant,
                threat_weight: r.threat_weight,
            })
            .collect();
        let uavs = self
            .uavs
            .iter()
            .enumerate()
            .map(|(i, u)| UavParams {
                id: i + 1,
                position: Point::new(u.position_m[0], u.position_m[1]),
                transmit_power: u.transmit_power_w,
                mainlobe_gain: db_to_linear(u.mainlobe_gain_db),
            })
            .collect();
        let e = &self.environment;
        let scenario = Scenario {
            radars,
            uavs,
            initial_target: TargetState::new(1, self.target.initial_state),
            motion: MotionModel {
                sample_interval: self.motion.sample_interval_s,
                process_noise_std: self.motion.process_noise_std,
            },
            env: EnvironmentConstants {
                polarization_loss: e.polarization_loss,
                target_rcs: e.target_rcs_m2,
                jsr_requirement: e.jsr_requirement,
                tolerance_factor: e.tolerance_factor,
                cost_factor: e.cost_factor,
                wavelength: e.wavelength_m,
            },
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
