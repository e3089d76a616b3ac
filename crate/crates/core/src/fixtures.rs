//! Hand-built valid scenarios used by tests, examples and the CLI suite.

use std::collections::BTreeMap;

use chrono::{DateTime, TimeZone, Utc};

use crate::geometry::Vec2;
use crate::model::*;

pub const CAR_EXTENT: [f64; 3] = [4.5, 1.8, 1.5];

pub fn fixed_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 5, 17, 9, 30, 0).unwrap()
}

fn base_metadata(duration: f64) -> ScenarioMetadata {
    ScenarioMetadata {
        creation_time: fixed_time(),
        acquisition_method: AcquisitionMethod::AerialRgbVideo,
        data_use_restrictions: "research only".into(),
        origin: Origin::Reconstructed,
        area: Area::Highway,
        scenario_duration: duration,
        dynamic_ranges: BTreeMap::new(),
    }
}

fn base_cs() -> CoordinateSystemSet {
    let mut systems = BTreeMap::new();
    systems.insert(
        "local".to_string(),
        CoordinateSystem {
            kind: CoordinateSystemType::Local,
            parent: None,
            transform: RigidTransform2::default(),
        },
    );
    CoordinateSystemSet {
        world_epsg: 25832,
        local_origin: GeoPoint {
            longitude: 8.4037,
            latitude: 49.0069,
        },
        systems,
    }
}

pub fn car(speed_min: f64, speed_max: f64) -> Participant {
    Participant {
        road_user_type: RoadUserType::Car,
        dimensions: Dimensions {
            length: CAR_EXTENT[0],
            width: CAR_EXTENT[1],
            height: Some(CAR_EXTENT[2]),
        },
        speed_range: ValueRange::new(speed_min, speed_max),
        collision_dynamics: None,
        steering_wheel_positions: None,
    }
}

/// Car state on a straight road along +x; lane `lane_id` is centred at
/// `y = (lane_id + 0.5) * 3.5` for negative ids.
pub fn lane_state(s: f64, lane_id: i64, speed: f64) -> FrameState {
    let y = (lane_id as f64 + 0.5) * 3.5;
    let mut st = FrameState::new(Vec2::new(s, y), 0.0, CAR_EXTENT, speed);
    st.lane_position = Some(LanePosition {
        road_id: "r1".into(),
        lane_id,
        s,
        t: 0.0,
    });
    st
}

/// `C` drifts laterally at 1.75 m/s from the centre of lane -1 to the centre
/// of lane -2 during [1 s, 3 s], crossing the lane boundary at t = 2 s.
fn lane_changer_state(t: f64) -> FrameState {
    let y = -1.75 - 1.75 * (t.clamp(1.0, 3.0) - 1.0);
    let lane_id = if y > -3.5 { -1 } else { -2 };
    let s = 40.0 + 22.0 * t;
    let mut st = lane_state(s, lane_id, 22.0);
    st.world_position.y = y;
    st.bbox3d.center[1] = y;
    if let Some(lp) = st.lane_position.as_mut() {
        lp.t = y - (lane_id as f64 + 0.5) * 3.5;
    }
    st
}

/// One participant, one frame, no events.
pub fn minimal_scenario() -> Scenario {
    let mut participants = BTreeMap::new();
    participants.insert("P1".to_string(), car(10.0, 10.0));
    let mut states = BTreeMap::new();
    states.insert("P1".to_string(), lane_state(0.0, -1, 10.0));
    Scenario {
        scenario_id: "minimal".into(),
        context: Context::default(),
        participants,
        events: BTreeMap::new(),
        frames: vec![Frame {
            frame_id: 0,
            timestamp: 0.0,
            states,
            unobserved_areas: Vec::new(),
        }],
        metadata: base_metadata(0.0),
        coordinate_systems: base_cs(),
        resources: ResourceLinks::default(),
        ontology_refs: None,
    }
}

pub fn minimal_document() -> String {
    String::from_utf8(crate::openlabel::serialize(&minimal_scenario()).unwrap()).unwrap()
}

/// Two cars in lane -1 at 10 Hz: `P1` at 25 m/s starting at s = 0 follows
/// `P2` at 20 m/s starting at s = 40.
pub fn following_scenario(n_frames: usize) -> Scenario {
    let mut participants = BTreeMap::new();
    participants.insert("P1".to_string(), car(25.0, 25.0));
    participants.insert("P2".to_string(), car(20.0, 20.0));
    let frames: Vec<Frame> = (0..n_frames)
        .map(|i| {
            let t = i as f64 * 0.1;
            let mut states = BTreeMap::new();
            states.insert("P1".to_string(), lane_state(25.0 * t, -1, 25.0));
            states.insert("P2".to_string(), lane_state(40.0 + 20.0 * t, -1, 20.0));
            Frame {
                frame_id: i as u64,
                timestamp: t,
                states,
                unobserved_areas: Vec::new(),
            }
        })
        .collect();
    let duration = frames.last().map_or(0.0, |f| f.timestamp);
    let mut metadata = base_metadata(duration);
    metadata
        .dynamic_ranges
        .insert("speed".into(), ValueRange::new(20.0, 25.0));
    Scenario {
        scenario_id: "following".into(),
        context: Context {
            weather: Weather::Clear,
            lighting: Lighting::Day,
            traffic_condition: TrafficCondition::FreeFlow,
            road_surface: RoadSurface::Dry,
        },
        participants,
        events: BTreeMap::new(),
        frames,
        metadata,
        coordinate_systems: base_cs(),
        resources: ResourceLinks {
            opendrive_path: Some("maps/a5_karlsruhe.xodr".into()),
        },
        ontology_refs: None,
    }
}

/// Three cars on a two-lane road at 10 Hz over 4 s. `C` (lane -1, 22 m/s)
/// changes into lane -2 between t = 1 s and t = 3 s, in front of the faster
/// `A` (lane -2, 30 m/s). `B` drives ahead of `C` in lane -1.
pub fn cut_in_scenario() -> Scenario {
    let mut participants = BTreeMap::new();
    participants.insert("A".to_string(), car(30.0, 30.0));
    participants.insert("B".to_string(), car(22.0, 22.0));
    participants.insert("C".to_string(), car(22.0, 22.0));
    let frames: Vec<Frame> = (0..41)
        .map(|i| {
            let t = i as f64 * 0.1;
            let mut states = BTreeMap::new();
            states.insert("A".to_string(), lane_state(30.0 * t, -2, 30.0));
            states.insert("B".to_string(), lane_state(90.0 + 22.0 * t, -1, 22.0));
            states.insert("C".to_string(), lane_changer_state(t));
            Frame {
                frame_id: i as u64,
                timestamp: t,
                states,
                unobserved_areas: Vec::new(),
            }
        })
        .collect();
    let duration = frames.last().unwrap().timestamp;
    let mut involved = BTreeMap::new();
    involved.insert("C".to_string(), Some("lane_change_right".to_string()));
    involved.insert("A".to_string(), Some("approaching".to_string()));
    let mut events = BTreeMap::new();
    events.insert(
        "E1".to_string(),
        EventRecord {
            event_type: Some(EventType::LaneChange),
            time_interval: (1.0, 3.0),
            involved,
        },
    );
    let mut metadata = base_metadata(duration);
    metadata
        .dynamic_ranges
        .insert("speed".into(), ValueRange::new(22.0, 30.0));
    Scenario {
        scenario_id: "cut_in".into(),
        context: Context::default(),
        participants,
        events,
        frames,
        metadata,
        coordinate_systems: base_cs(),
        resources: ResourceLinks::default(),
        ontology_refs: None,
    }
}
