//! In-memory scenario model.
//!
//! The structure follows the harmonized labeling levels: a scenario carries
//! static context and participant descriptions, time-bounded events, and a
//! frame sequence with per-participant kinematic state. Metadata and tagging
//! information live together in [`ScenarioMetadata`].
//!
//! All quantities are SI (m, s, m/s, rad). Optional information is modelled
//! with `Option` and is never conflated with zero.

mod validate;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::geometry::{Polygon2D, Vec2};

pub use validate::{validate_scenario, Severity, ValidationReport, Violation};

/// Closed string-valued enumeration with a stable wire name per variant.
macro_rules! wire_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $wire:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $wire)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $wire),+
                }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s {
                    $($wire => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl std::str::FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                Self::parse(s).ok_or_else(|| {
                    let allowed: Vec<&str> = Self::ALL.iter().map(|v| v.as_str()).collect();
                    format!("invalid value '{}', expected one of {}", s, allowed.join(", "))
                })
            }
        }
    };
}

wire_enum!(Weather {
    Clear => "clear",
    Rain => "rain",
    Snow => "snow",
    Fog => "fog",
    Unknown => "unknown",
});

wire_enum!(Lighting {
    Day => "day",
    Twilight => "twilight",
    Night => "night",
    Artificial => "artificial",
    Unknown => "unknown",
});

wire_enum!(TrafficCondition {
    FreeFlow => "free_flow",
    Dense => "dense",
    Congested => "congested",
    Unknown => "unknown",
});

wire_enum!(RoadSurface {
    Dry => "dry",
    Wet => "wet",
    Icy => "icy",
    Unknown => "unknown",
});

wire_enum!(RoadUserType {
    Car => "car",
    Truck => "truck",
    Bus => "bus",
    Motorcycle => "motorcycle",
    Bicycle => "bicycle",
    Pedestrian => "pedestrian",
    Other => "other",
});

impl RoadUserType {
    /// Vehicle types must have strictly positive footprint dimensions.
    pub fn is_vehicle(self) -> bool {
        !matches!(self, RoadUserType::Pedestrian | RoadUserType::Other)
    }
}

wire_enum!(EventType {
    LaneChange => "lane_change",
    CutIn => "cut_in",
    HardBraking => "hard_braking",
    NearMiss => "near_miss",
    Collision => "collision",
    Handover => "handover",
    Other => "other",
});

wire_enum!(AcquisitionMethod {
    StationaryLidar => "stationary_lidar",
    StationaryInfrared => "stationary_infrared",
    AerialRgbVideo => "aerial_rgb_video",
    VehicleSensors => "vehicle_sensors",
    Synthetic => "synthetic",
});

wire_enum!(Origin {
    Reconstructed => "reconstructed",
    Sampled => "sampled",
    Original => "original",
});

wire_enum!(Area {
    Urban => "urban",
    Highway => "highway",
    Rural => "rural",
});

wire_enum!(CoordinateSystemType {
    Static => "static",
    Local => "local",
    Sensor => "sensor",
});

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scenario_id: String,
    pub context: Context,
    pub participants: BTreeMap<String, Participant>,
    /// Keyed by event id.
    pub events: BTreeMap<String, EventRecord>,
    /// Ordered by frame id; frame ids are dense from 0.
    pub frames: Vec<Frame>,
    pub metadata: ScenarioMetadata,
    pub coordinate_systems: CoordinateSystemSet,
    pub resources: ResourceLinks,
    /// Ontologies referenced by id; never inlined.
    pub ontology_refs: Option<BTreeMap<String, OntologyRef>>,
}

impl Scenario {
    /// Time span `(first, last)` covered by the frames.
    pub fn time_span(&self) -> Option<(f64, f64)> {
        Some((self.frames.first()?.timestamp, self.frames.last()?.timestamp))
    }

    /// Frame whose timestamp is closest to `t`.
    pub fn frame_at(&self, t: f64) -> Option<&Frame> {
        self.frames.iter().min_by(|a, b| {
            (a.timestamp - t)
                .abs()
                .total_cmp(&(b.timestamp - t).abs())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Context {
    pub weather: Weather,
    pub lighting: Lighting,
    pub traffic_condition: TrafficCondition,
    pub road_surface: RoadSurface,
}

impl Default for Context {
    fn default() -> Self {
        Self {
            weather: Weather::Unknown,
            lighting: Lighting::Unknown,
            traffic_condition: TrafficCondition::Unknown,
            road_surface: RoadSurface::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Participant {
    pub road_user_type: RoadUserType,
    pub dimensions: Dimensions,
    pub speed_range: ValueRange,
    /// Free-form record; no schema is imposed.
    pub collision_dynamics: Option<serde_json::Map<String, serde_json::Value>>,
    pub steering_wheel_positions: Option<Vec<SteeringSample>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dimensions {
    pub length: f64,
    pub width: f64,
    /// Absent for acquisitions that cannot observe height (e.g. aerial video).
    pub height: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringSample {
    pub t: f64,
    /// Steering wheel angle in rad.
    pub angle: f64,
}

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub min: f64,
    pub max: f64,
}

impl ValueRange {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn overlaps(&self, lo: f64, hi: f64) -> bool {
        self.min <= hi && lo <= self.max
    }

    /// Smallest range containing both `self` and `v`.
    pub fn include(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub event_type: Option<EventType>,
    pub time_interval: (f64, f64),
    /// Involved participants with an optional, uninterpreted movement classification.
    pub involved: BTreeMap<String, Option<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_id: u64,
    /// Scenario-relative seconds.
    pub timestamp: f64,
    pub states: BTreeMap<String, FrameState>,
    /// World-coordinate areas that were not observable in this frame.
    pub unobserved_areas: Vec<Polygon2D>,
}

impl Frame {
    pub fn is_unobserved(&self, p: Vec2) -> bool {
        self.unobserved_areas.iter().any(|a| a.contains(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox3d {
    pub center: [f64; 3],
    /// Length, width, height.
    pub extent: [f64; 3],
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanePosition {
    pub road_id: String,
    pub lane_id: i64,
    /// Longitudinal road coordinate of the reference point.
    pub s: f64,
    /// Lateral offset from the lane reference line.
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameState {
    pub bbox3d: BoundingBox3d,
    pub lane_position: Option<LanePosition>,
    pub world_position: Vec2,
    pub speed: f64,
    pub acceleration: Option<f64>,
    pub yaw_rate: Option<f64>,
    pub pitch: Option<f64>,
    pub roll: Option<f64>,
    pub light_states: Option<BTreeMap<String, bool>>,
    pub speed_limit: Option<f64>,
    pub traffic_condition: Option<TrafficCondition>,
    /// Risks relating to human behavior, carried as data.
    pub behavior_risk: Option<BTreeMap<String, f64>>,
    /// Time-space risk measures toward other participants, keyed by target id.
    pub pairwise_risk: BTreeMap<String, RiskMeasureSet>,
}

impl FrameState {
    /// Minimal state: position, heading, footprint and speed.
    pub fn new(world_position: Vec2, heading: f64, extent: [f64; 3], speed: f64) -> Self {
        Self {
            bbox3d: BoundingBox3d {
                center: [world_position.x, world_position.y, extent[2] / 2.0],
                extent,
                heading,
            },
            lane_position: None,
            world_position,
            speed,
            acceleration: None,
            yaw_rate: None,
            pitch: None,
            roll: None,
            light_states: None,
            speed_limit: None,
            traffic_condition: None,
            behavior_risk: None,
            pairwise_risk: BTreeMap::new(),
        }
    }

    /// Velocity vector from speed and bounding-box heading.
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_heading(self.bbox3d.heading) * self.speed
    }
}

/// Named criticality values from one participant toward another.
/// `None` means undefined in the current geometry.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RiskMeasureSet {
    pub thw: Option<f64>,
    pub dhw: Option<f64>,
    pub ttc: Option<f64>,
    pub gttc: Option<f64>,
    pub pret: Option<f64>,
}

impl RiskMeasureSet {
    pub const NAMES: [&'static str; 5] = ["thw", "dhw", "ttc", "gttc", "pret"];

    pub fn entries(&self) -> [(&'static str, Option<f64>); 5] {
        [
            ("thw", self.thw),
            ("dhw", self.dhw),
            ("ttc", self.ttc),
            ("gttc", self.gttc),
            ("pret", self.pret),
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries()
            .into_iter()
            .find(|(n, _)| *n == name)
            .and_then(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMetadata {
    pub creation_time: DateTime<Utc>,
    pub acquisition_method: AcquisitionMethod,
    pub data_use_restrictions: String,
    pub origin: Origin,
    pub area: Area,
    pub scenario_duration: f64,
    /// Declared ranges of dynamic quantities, e.g. `speed`, `dhw`, `ttc`.
    pub dynamic_ranges: BTreeMap<String, ValueRange>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateSystemSet {
    pub world_epsg: u32,
    pub local_origin: GeoPoint,
    pub systems: BTreeMap<String, CoordinateSystem>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub longitude: f64,
    pub latitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateSystem {
    pub kind: CoordinateSystemType,
    /// `None` attaches the system directly to the world frame.
    pub parent: Option<String>,
    pub transform: RigidTransform2,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidTransform2 {
    pub rotation: f64,
    pub translation: Vec2,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResourceLinks {
    /// Relative path to the OpenDRIVE map.
    pub opendrive_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OntologyRef {
    pub uri: Option<String>,
    /// Subset of terms in use, when only part of the ontology applies.
    pub boundaries: Option<Vec<String>>,
}
