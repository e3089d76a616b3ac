use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::RoadUserType;

use super::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleClass {
    Car,
    Truck,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 2] = [VehicleClass::Car, VehicleClass::Truck];

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::Car => "car",
            VehicleClass::Truck => "truck",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// Footprint length, width and height (m).
    pub fn dimensions(self) -> [f64; 3] {
        match self {
            VehicleClass::Car => [4.5, 1.8, 1.5],
            VehicleClass::Truck => [12.0, 2.5, 3.5],
        }
    }

    pub fn length(self) -> f64 {
        self.dimensions()[0]
    }

    pub fn road_user_type(self) -> RoadUserType {
        match self {
            VehicleClass::Car => RoadUserType::Car,
            VehicleClass::Truck => RoadUserType::Truck,
        }
    }

    /// Simulation class of a recorded road user; non-vehicles have none.
    pub fn from_road_user_type(t: RoadUserType) -> Option<Self> {
        match t {
            RoadUserType::Car | RoadUserType::Motorcycle | RoadUserType::Other => {
                Some(VehicleClass::Car)
            }
            RoadUserType::Truck | RoadUserType::Bus => Some(VehicleClass::Truck),
            RoadUserType::Bicycle | RoadUserType::Pedestrian => None,
        }
    }
}

impl std::fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedDistribution {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneChangeParams {
    /// Minimum bumper gap to the new leader (m).
    pub min_gap_lead: f64,
    /// Minimum bumper gap to the new follower (m).
    pub min_gap_lag: f64,
    /// Speed gain needed before a change is considered (m/s).
    pub speed_advantage_threshold: f64,
}

/// Wiedemann-99 constants plus per-class desired-speed and braking limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Standstill distance (m).
    pub cc0: f64,
    /// Headway time (s).
    pub cc1: f64,
    /// Following oscillation (m).
    pub cc2: f64,
    /// Perception threshold (s).
    pub cc3: f64,
    /// Negative following threshold (m/s).
    pub cc4: f64,
    /// Positive following threshold (m/s).
    pub cc5: f64,
    /// Speed dependency of oscillation (1/(m s)).
    pub cc6: f64,
    /// Oscillation acceleration (m/s^2).
    pub cc7: f64,
    /// Standstill acceleration (m/s^2).
    pub cc8: f64,
    /// Acceleration at 80 km/h (m/s^2).
    pub cc9: f64,
    pub desired_speed: BTreeMap<VehicleClass, SpeedDistribution>,
    /// Positive braking magnitude (m/s^2).
    pub max_decel: BTreeMap<VehicleClass, f64>,
    pub lane_change: LaneChangeParams,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            cc0: 1.5,
            cc1: 0.9,
            cc2: 4.0,
            cc3: -8.0,
            cc4: -0.35,
            cc5: 0.35,
            cc6: 11.44,
            cc7: 0.25,
            cc8: 3.5,
            cc9: 1.5,
            desired_speed: BTreeMap::from([
                (VehicleClass::Car, SpeedDistribution { mean: 33.0, std: 2.0 }),
                (VehicleClass::Truck, SpeedDistribution { mean: 24.0, std: 1.5 }),
            ]),
            max_decel: BTreeMap::from([(VehicleClass::Car, 8.0), (VehicleClass::Truck, 6.0)]),
            lane_change: LaneChangeParams {
                min_gap_lead: 5.0,
                min_gap_lag: 10.0,
                speed_advantage_threshold: 2.0,
            },
        }
    }
}

const CC_NAMES: [&str; 10] = [
    "cc0", "cc1", "cc2", "cc3", "cc4", "cc5", "cc6", "cc7", "cc8", "cc9",
];

impl ModelParams {
    fn cc_mut(&mut self, i: usize) -> &mut f64 {
        match i {
            0 => &mut self.cc0,
            1 => &mut self.cc1,
            2 => &mut self.cc2,
            3 => &mut self.cc3,
            4 => &mut self.cc4,
            5 => &mut self.cc5,
            6 => &mut self.cc6,
            7 => &mut self.cc7,
            8 => &mut self.cc8,
            _ => &mut self.cc9,
        }
    }

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        if let Some(i) = CC_NAMES.iter().position(|n| *n == name) {
            return Some(self.cc_mut(i));
        }
        if let Some(field) = name.strip_prefix("lane_change.") {
            return match field {
                "min_gap_lead" => Some(&mut self.lane_change.min_gap_lead),
                "min_gap_lag" => Some(&mut self.lane_change.min_gap_lag),
                "speed_advantage_threshold" => Some(&mut self.lane_change.speed_advantage_threshold),
                _ => None,
            };
        }
        let (class, field) = name.split_once('.')?;
        let class = VehicleClass::parse(class)?;
        match field {
            "mean" => self.desired_speed.get_mut(&class).map(|d| &mut d.mean),
            "std" => self.desired_speed.get_mut(&class).map(|d| &mut d.std),
            "max_decel" => self.max_decel.get_mut(&class),
            _ => None,
        }
    }

    /// Value of a named parameter: `cc0`..`cc9`, `<class>.mean`,
    /// `<class>.std`, `<class>.max_decel` or `lane_change.<field>`.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.clone().slot(name).map(|v| *v)
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        let slot = self
            .slot(name)
            .ok_or_else(|| ConfigError::InvalidParams(format!("unknown parameter '{name}'")))?;
        *slot = value;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::InvalidParams(m));
        let mut copy = self.clone();
        for (i, name) in CC_NAMES.iter().enumerate() {
            if !copy.cc_mut(i).is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if self.cc0 <= 0.0 {
            return bad("cc0 must be positive".into());
        }
        if self.cc1 <= 0.0 {
            return bad("cc1 must be positive".into());
        }
        for (class, d) in &self.desired_speed {
            if !(d.mean.is_finite() && d.mean > 0.0) {
                return bad(format!("{class}.mean must be positive"));
            }
            if !(d.std.is_finite() && d.std > 0.0) {
                return bad(format!("{class}.std must be positive"));
            }
        }
        for (class, a) in &self.max_decel {
            if !(a.is_finite() && *a > 0.0) {
                return bad(format!("{class}.max_decel must be positive"));
            }
        }
        let lc = &self.lane_change;
        if !(lc.min_gap_lead >= self.cc0 && lc.min_gap_lag >= self.cc0) {
            return bad("lane change minimum gaps must be at least cc0".into());
        }
        if !(lc.speed_advantage_threshold.is_finite() && lc.speed_advantage_threshold >= 0.0) {
            return bad("speed_advantage_threshold must be non-negative".into());
        }
        Ok(())
    }

    pub(crate) fn max_decel_of(&self, class: VehicleClass) -> Result<f64, ConfigError> {
        self.max_decel
            .get(&class)
            .copied()
            .ok_or_else(|| ConfigError::InvalidParams(format!("no max_decel for class {class}")))
    }

    pub(crate) fn desired_of(&self, class: VehicleClass) -> Result<SpeedDistribution, ConfigError> {
        self.desired_speed
            .get(&class)
            .copied()
            .ok_or_else(|| ConfigError::InvalidParams(format!("no desired speed for class {class}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadKind {
    /// Closed loop: the first vehicle of a lane follows the last one.
    Ring,
    /// Vehicles leave past the end and may enter at s = 0.
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inflow {
    /// Entry attempts per lane and second.
    pub rate: f64,
    /// Probability that an entering vehicle is a truck.
    pub truck_share: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadConfig {
    pub kind: RoadKind,
    pub lanes: u32,
    /// Lane length (m).
    pub length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflow: Option<Inflow>,
}

/// Explicit start state of one vehicle; `s` is the front-bumper position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialVehicle {
    pub class: VehicleClass,
    pub lane: u32,
    pub s: f64,
    pub speed: f64,
    /// Overrides the drawn desired speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub desired_speed: Option<f64>,
    /// Participant id used on export.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub road: RoadConfig,
    /// Vehicles placed evenly along the road, per class.
    #[serde(default)]
    pub vehicles: BTreeMap<VehicleClass, usize>,
    /// Explicit start states; exclusive with `vehicles`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial: Vec<InitialVehicle>,
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    #[serde(default = "yes")]
    pub lane_changes: bool,
    /// Spacing of recorded steps (s); a multiple of `dt`. Every step when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_interval: Option<f64>,
}

impl SimConfig {
    /// Ring road with evenly placed vehicles.
    pub fn ring(lanes: u32, length: f64, vehicles: &[(VehicleClass, usize)], dt: f64, duration: f64, seed: u64) -> Self {
        Self {
            road: RoadConfig {
                kind: RoadKind::Ring,
                lanes,
                length,
                inflow: None,
            },
            vehicles: vehicles.iter().copied().collect(),
            initial: Vec::new(),
            dt,
            duration,
            seed,
            lane_changes: true,
            record_interval: None,
        }
    }

    /// Open road with explicit start states and no lane changes.
    pub fn open(lanes: u32, length: f64, initial: Vec<InitialVehicle>, dt: f64, duration: f64, seed: u64) -> Self {
        Self {
            road: RoadConfig {
                kind: RoadKind::Open,
                lanes,
                length,
                inflow: None,
            },
            vehicles: BTreeMap::new(),
            initial,
            dt,
            duration,
            seed,
            lane_changes: false,
            record_interval: None,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Steps between recorded samples.
    pub fn record_stride(&self) -> Result<usize, ConfigError> {
        let Some(iv) = self.record_interval else {
            return Ok(1);
        };
        let k = (iv / self.dt).round();
        if !(iv.is_finite() && k >= 1.0 && (k * self.dt - iv).abs() <= 1e-9 * iv.max(1.0)) {
            return Err(ConfigError::InvalidConfig(format!(
                "record_interval {iv} is not a positive multiple of dt {}",
                self.dt
            )));
        }
        Ok(k as usize)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::InvalidConfig(m));
        if !(self.dt > 0.0 && self.dt <= 0.5) {
            return bad(format!("dt must lie in (0, 0.5], got {}", self.dt));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if self.road.lanes == 0 {
            return bad("road needs at least one lane".into());
        }
        if !(self.road.length.is_finite() && self.road.length > 0.0) {
            return bad("road length must be positive".into());
        }
        if let Some(inflow) = &self.road.inflow {
            if self.road.kind == RoadKind::Ring {
                return bad("inflow requires an open road".into());
            }
            if !(inflow.rate.is_finite() && inflow.rate > 0.0) {
                return bad("inflow rate must be positive".into());
            }
            if !(0.0..=1.0).contains(&inflow.truck_share) {
                return bad("truck_share must lie in [0, 1]".into());
            }
        }
        let generated: usize = self.vehicles.values().sum();
        if generated > 0 && !self.initial.is_empty() {
            return bad("'vehicles' and 'initial' are mutually exclusive".into());
        }
        if generated == 0 && self.initial.is_empty() && self.road.inflow.is_none() {
            return bad("no vehicles configured".into());
        }
        for (i, v) in self.initial.iter().enumerate() {
            if v.lane >= self.road.lanes {
                return bad(format!("initial[{i}]: lane {} out of range", v.lane));
            }
            if !(v.s.is_finite() && v.speed.is_finite() && v.speed >= 0.0) {
                return bad(format!("initial[{i}]: position and speed must be finite, speed >= 0"));
            }
            if let Some(d) = v.desired_speed {
                if !(d.is_finite() && d >= 0.0) {
                    return bad(format!("initial[{i}]: desired speed must be >= 0"));
                }
            }
        }
        self.record_stride().map(|_| ())
    }
}
