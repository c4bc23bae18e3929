//! Physical world model: geometry, target kinematics, antenna gain and
//! jamming-to-signal ratio.
//!
//! Everything here is a pure function of its inputs. Gains are linear
//! (dB values are converted when a config is loaded).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn bearing_to(&self, other: &Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// A frequency-agile radar of the defended network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarParams {
    /// 1-based radar index; task `id` in an assignment row.
    pub id: usize,
    pub position: Point,
    /// Transmit power in watts.
    pub transmit_power: f64,
    /// Linear mainlobe gain.
    pub mainlobe_gain: f64,
    /// Working (hopping) bandwidth in Hz.
    pub bandwidth: f64,
    /// Mainlobe width in radians.
    pub mainlobe_width: f64,
    pub sidelobe_constant: f64,
    pub threat_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavParams {
    /// 1-based UAV index.
    pub id: usize,
    pub position: Point,
    /// Jammer transmit power in watts.
    pub transmit_power: f64,
    /// Linear jammer mainlobe gain.
    pub mainlobe_gain: f64,
}

/// Target state `[x, vx, y, vy]` at a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub frame: usize,
    pub state: [f64; 4],
}

impl TargetState {
    pub fn new(frame: usize, state: [f64; 4]) -> Self {
        Self { frame, state }
    }

    pub fn position(&self) -> Point {
        Point::new(self.state[0], self.state[2])
    }
}

/// Constant-velocity motion with white acceleration noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    /// Frame interval in seconds.
    pub sample_interval: f64,
    /// Per-axis acceleration noise standard deviation, m/s².
    pub process_noise_std: [f64; 2],
}

impl MotionModel {
    pub fn transition(&self) -> [[f64; 4]; 4] {
        let dt = self.sample_interval;
        [
            [1.0, dt, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, dt],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn noise_gain(&self) -> [[f64; 2]; 4] {
        let dt = self.sample_interval;
        let half = 0.5 * dt * dt;
        [[half, 0.0], [dt, 0.0], [0.0, half], [0.0, dt]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentConstants {
    /// Polarization loss of the jamming signal into the radar antenna, in (0, 1].
    pub polarization_loss: f64,
    /// Target radar cross section, m².
    pub target_rcs: f64,
    /// Required bandwidth-normalized JSR.
    pub jsr_requirement: f64,
    /// Steepness of the effect function, > 0.
    pub tolerance_factor: f64,
    /// Weight of the coalition-size cost, in [0, 1].
    pub cost_factor: f64,
    /// Carrier wavelength in meters. Informational only: it cancels out of
    /// the JSR and is never read by the utility stack.
    #[serde(default)]
    pub wavelength: Option<f64>,
}

impl EnvironmentConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = self.polarization_loss > 0.0
            && self.polarization_loss <= 1.0
            && self.target_rcs > 0.0
            && self.jsr_requirement > 0.0
            && self.tolerance_factor > 0.0
            && (0.0..=1.0).contains(&self.cost_factor);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "environment constants out of range: {self:?}"
            )))
        }
    }
}

/// A complete, validated world description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub radars: Vec<RadarParams>,
    pub uavs: Vec<UavParams>,
    pub initial_target: TargetState,
    pub motion: MotionModel,
    pub env: EnvironmentConstants,
}

impl Scenario {
    pub fn num_radars(&self) -> usize {
        self.radars.len()
    }

    pub fn num_uavs(&self) -> usize {
        self.uavs.len()
    }

    pub fn radar_bandwidths(&self) -> Vec<f64> {
        self.radars.iter().map(|r| r.bandwidth).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.radars.iter().map(|r| r.threat_weight).collect()
    }

    /// Replaces the threat weights. The weights must sum to one.
    pub fn with_weights(mut self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.radars.len() {
            return Err(Error::Shape {
                expected: format!("{} weights", self.radars.len()),
                got: format!("{}", weights.len()),
            });
        }
        for (r, &w) in self.radars.iter_mut().zip(weights) {
            r.threat_weight = w;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn with_cost_factor(mut self, cost_factor: f64) -> Result<Self> {
        self.env.cost_factor = cost_factor;
        self.env.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.radars.is_empty() || self.uavs.is_empty() {
            return Err(Error::Config("need at least one radar and one UAV".into()));
        }
        for (i, r) in self.radars.iter().enumerate() {
            if r.id != i + 1 {
                return Err(Error::Config(format!("radar ids must be 1..=M, got {}", r.id)));
            }
            let positive = r.transmit_power > 0.0
                && r.mainlobe_gain > 0.0
                && r.bandwidth > 0.0
                && r.mainlobe_width > 0.0
                && r.sidelobe_constant > 0.0;
            if !positive || !(0.0..=1.0).contains(&r.threat_weight) {
                return Err(Error::Config(format!("radar {} parameters out of range", r.id)));
            }
        }
        let weight_sum: f64 = self.radars.iter().map(|r| r.threat_weight).sum();
        if (weight_sum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "threat weights must sum to 1, got {weight_sum}"
            )));
        }
        for (i, u) in self.uavs.iter().enumerate() {
            if u.id != i + 1 {
                return Err(Error::Config(format!("UAV ids must be 1..=N, got {}", u.id)));
            }
            if !(u.transmit_power > 0.0 && u.mainlobe_gain > 0.0) {
                return Err(Error::Config(format!("UAV {} parameters out of range", u.id)));
            }
        }
        if !self.initial_target.state.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("initial target state must be finite".into()));
        }
        if !(self.motion.sample_interval > 0.0) {
            return Err(Error::Config("sample interval must be positive".into()));
        }
        self.env.validate()
    }

    /// Draws a `frames`-long target trajectory. The first entry is the
    /// initial state; each later entry is one noisy CV step.
    pub fn trajectory<R: Rng + ?Sized>(&self, frames: usize, rng: &mut R) -> Vec<TargetState> {
        let [sx, sy] = self.motion.process_noise_std;
        let nx = Normal::new(0.0, sx).expect("finite noise std");
        let ny = Normal::new(0.0, sy).expect("finite noise std");
        let mut out = Vec::with_capacity(frames);
        let mut current = self.initial_target;
        for k in 0..frames {
            if k > 0 {
                let noise = [nx.sample(rng), ny.sample(rng)];
                current = propagate_target(&current, &self.motion, noise);
            }
            out.push(current);
        }
        out
    }

    /// N×M matrix of JSR values for every UAV/radar pair at `target`.
    pub fn jsr_matrix(&self, target: &TargetState) -> Result<Vec<Vec<f64>>> {
        self.uavs
            .iter()
            .map(|u| {
                self.radars
                    .iter()
                    .map(|r| jsr(u, r, target, &self.env))
                    .collect()
            })
            .collect()
    }
}

/// One CV step: `X(k+1) = F X(k) + Γ ν(k)`.
pub fn propagate_target(state: &TargetState, model: &MotionModel, noise: [f64; 2]) -> TargetState {
    let f = model.transition();
    let g = model.noise_gain();
    let mut next = [0.0; 4];
    for (i, out) in next.iter_mut().enumerate() {
        let drift: f64 = (0..4).map(|j| f[i][j] * state.state[j]).sum();
        *out = drift + g[i][0] * noise[0] + g[i][1] * noise[1];
    }
    TargetState::new(state.frame + 1, next)
}

pub fn distance_target_radar(target: &TargetState, radar: &RadarParams) -> f64 {
    target.position().distance(&radar.position)
}

pub fn distance_uav_radar(uav: &UavParams, radar: &RadarParams) -> f64 {
    uav.position.distance(&radar.position)
}

/// Radar receive gain toward a jammer seen `theta` radians off boresight.
///
/// Mainlobe owns `theta <= width/2`; the flat back region owns `theta >= π/2`.
pub fn radar_gain_toward_uav(radar: &RadarParams, theta: f64) -> Result<f64> {
    if theta < 0.0 || theta.is_nan() {
        return Err(Error::NegativeAngle(theta));
    }
    let width = radar.mainlobe_width;
    let gain = if theta <= width / 2.0 {
        radar.mainlobe_gain
    } else if theta < PI / 2.0 {
        radar.sidelobe_constant * (width / theta).powi(2) * radar.mainlobe_gain
    } else {
        radar.sidelobe_constant * (2.0 * width / PI).powi(2) * radar.mainlobe_gain
    };
    Ok(gain)
}

/// Angle at the radar between its boresight (pointed at the target) and the
/// line of sight to the UAV, in `[0, π]`.
pub fn uav_radar_angle(uav: &UavParams, radar: &RadarParams, target: &TargetState) -> Result<f64> {
    let tp = target.position();
    if tp == radar.position {
        return Err(Error::DegenerateGeometry("target coincides with radar"));
    }
    if uav.position == radar.position {
        return Err(Error::DegenerateGeometry("UAV coincides with radar"));
    }
    let diff = (radar.position.bearing_to(&tp) - radar.position.bearing_to(&uav.position)).abs();
    let diff = diff % (2.0 * PI);
    Ok(if diff > PI { 2.0 * PI - diff } else { diff })
}

/// Jamming-to-signal ratio of `uav` against `radar` while the radar tracks `target`.
pub fn jsr(
    uav: &UavParams,
    radar: &RadarParams,
    target: &TargetState,
    env: &EnvironmentConstants,
) -> Result<f64> {
    let rt = distance_target_radar(target, radar);
    let rj = distance_uav_radar(uav, radar);
    if rt == 0.0 || rj == 0.0 {
        return Err(Error::DegenerateGeometry("zero range in JSR"));
    }
    let theta = uav_radar_angle(uav, radar, target)?;
    let g_toward = radar_gain_toward_uav(radar, theta)?;
    let num = 4.0 * PI * uav.transmit_power * uav.mainlobe_gain * g_toward * env.polarization_loss * rt.powi(4);
    let den = radar.transmit_power * radar.mainlobe_gain.powi(2) * env.target_rcs * rj.powi(2);
    Ok(num / den)
}

/// Target echo power received by the radar, in watts.
pub fn echo_power(radar: &RadarParams, target: &TargetState, env: &EnvironmentConstants, wavelength: f64) -> f64 {
    let rt = distance_target_radar(target, radar);
    radar.transmit_power * radar.mainlobe_gain.powi(2) * wavelength.powi(2) * env.target_rcs
        / ((4.0 * PI).powi(3) * rt.powi(4))
}

/// Jamming power from `uav` received by the radar, in watts.
pub fn jamming_power(
    uav: &UavParams,
    radar: &RadarParams,
    target: &TargetState,
    env: &EnvironmentConstants,
    wavelength: f64,
) -> Result<f64> {
    let rj = distance_uav_radar(uav, radar);
    let theta = uav_radar_angle(uav, radar, target)?;
    let g_toward = radar_gain_toward_uav(radar, theta)?;
    Ok(uav.transmit_power * uav.mainlobe_gain * g_toward * wavelength.powi(2) * env.polarization_loss
        / ((4.0 * PI).powi(2) * rj.powi(2)))
}
