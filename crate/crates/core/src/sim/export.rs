use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use chrono::DateTime;

use crate::geometry::Vec2;
use crate::model::*;

use super::{RoadKind, SimTrace, LANE_CHANGE_DURATION};

/// Lane width used for world coordinates (m).
pub const LANE_WIDTH: f64 = 3.5;

fn road_id(kind: RoadKind) -> &'static str {
    match kind {
        RoadKind::Ring => "ring",
        RoadKind::Open => "open",
    }
}

/// Centre position and heading of a vehicle. Lane `k` has lane id `-(k + 1)`;
/// on the open road it runs along +x at `y = -(k + 0.5) * LANE_WIDTH`, on the
/// ring it is a counter-clockwise circle with lane 0 innermost.
fn world_pose(trace: &SimTrace, lane: u32, s_center: f64, lateral: f64) -> (Vec2, f64) {
    let lane_y = -(lane as f64 + 0.5) * LANE_WIDTH + lateral;
    match trace.road.kind {
        RoadKind::Open => (Vec2::new(s_center, lane_y), 0.0),
        RoadKind::Ring => {
            let r_ref = trace.road.length / (2.0 * PI);
            let mid = -(trace.road.lanes as f64) * LANE_WIDTH / 2.0;
            let r = r_ref + (mid - lane_y);
            let theta = s_center / r_ref;
            (Vec2::new(r * theta.cos(), r * theta.sin()), theta + FRAC_PI_2)
        }
    }
}

/// Converts a simulation trace into a valid sampled scenario.
///
/// Every recorded step becomes a frame. Lane changes and collisions become
/// events. The creation time is the Unix epoch so exports are reproducible.
pub fn trace_to_scenario(trace: &SimTrace, scenario_id: &str) -> Scenario {
    let rid = road_id(trace.road.kind);
    let mut frames = Vec::with_capacity(trace.steps.len());
    let mut speed_ranges: BTreeMap<usize, ValueRange> = BTreeMap::new();
    let mut dyn_speed: Option<ValueRange> = None;
    let mut dyn_accel: Option<ValueRange> = None;
    for (k, step) in trace.steps.iter().enumerate() {
        let mut states = BTreeMap::new();
        for snap in &step.vehicles {
            let info = &trace.vehicles[snap.vehicle];
            let mut s_center = snap.s - info.length / 2.0;
            if trace.road.kind == RoadKind::Ring {
                s_center = s_center.rem_euclid(trace.road.length);
            }
            let (pos, heading) = world_pose(trace, snap.lane, s_center, snap.lateral);
            let mut st = FrameState::new(pos, heading, [info.length, info.width, info.height], snap.speed);
            st.lane_position = Some(LanePosition {
                road_id: rid.to_string(),
                lane_id: -(snap.lane as i64 + 1),
                s: s_center,
                t: snap.lateral,
            });
            st.acceleration = Some(snap.acceleration);
            states.insert(info.label.clone(), st);
            speed_ranges
                .entry(snap.vehicle)
                .or_insert(ValueRange::new(snap.speed, snap.speed))
                .include(snap.speed);
            dyn_speed
                .get_or_insert(ValueRange::new(snap.speed, snap.speed))
                .include(snap.speed);
            dyn_accel
                .get_or_insert(ValueRange::new(snap.acceleration, snap.acceleration))
                .include(snap.acceleration);
        }
        frames.push(Frame {
            frame_id: k as u64,
            timestamp: step.t,
            states,
            unobserved_areas: Vec::new(),
        });
    }
    let (t0, t_end) = (trace.steps[0].t, trace.final_step().t);

    let participants = speed_ranges
        .iter()
        .map(|(&i, r)| {
            let info = &trace.vehicles[i];
            let p = Participant {
                road_user_type: info.class.road_user_type(),
                dimensions: Dimensions {
                    length: info.length,
                    width: info.width,
                    height: Some(info.height),
                },
                speed_range: *r,
                collision_dynamics: None,
                steering_wheel_positions: None,
            };
            (info.label.clone(), p)
        })
        .collect();

    let mut events = BTreeMap::new();
    let observed = |i: usize| speed_ranges.contains_key(&i);
    for (n, lc) in trace.lane_changes.iter().enumerate() {
        if !observed(lc.vehicle) || lc.t > t_end {
            continue;
        }
        let direction = if lc.to > lc.from { "lane_change_right" } else { "lane_change_left" };
        let involved = BTreeMap::from([(trace.vehicles[lc.vehicle].label.clone(), Some(direction.to_string()))]);
        events.insert(
            format!("LC{n:04}"),
            EventRecord {
                event_type: Some(EventType::LaneChange),
                time_interval: (lc.t.max(t0), (lc.t + LANE_CHANGE_DURATION).min(t_end)),
                involved,
            },
        );
    }
    for (n, c) in trace.collisions.iter().enumerate() {
        if !observed(c.follower) || !observed(c.leader) || c.t > t_end {
            continue;
        }
        let involved = BTreeMap::from([
            (trace.vehicles[c.follower].label.clone(), Some("rear".to_string())),
            (trace.vehicles[c.leader].label.clone(), Some("front".to_string())),
        ]);
        events.insert(
            format!("CO{n:04}"),
            EventRecord {
                event_type: Some(EventType::Collision),
                time_interval: (c.t, c.t),
                involved,
            },
        );
    }

    let mut dynamic_ranges = BTreeMap::new();
    if let Some(r) = dyn_speed {
        dynamic_ranges.insert("speed".to_string(), r);
    }
    if let Some(r) = dyn_accel {
        dynamic_ranges.insert("acceleration".to_string(), r);
    }
    let systems = BTreeMap::from([(
        "local".to_string(),
        CoordinateSystem {
            kind: CoordinateSystemType::Local,
            parent: None,
            transform: RigidTransform2::default(),
        },
    )]);
    Scenario {
        scenario_id: scenario_id.to_string(),
        context: Context::default(),
        participants,
        events,
        frames,
        metadata: ScenarioMetadata {
            creation_time: DateTime::UNIX_EPOCH,
            acquisition_method: AcquisitionMethod::Synthetic,
            data_use_restrictions: "none".into(),
            origin: Origin::Sampled,
            area: Area::Highway,
            scenario_duration: t_end - t0,
            dynamic_ranges,
        },
        coordinate_systems: CoordinateSystemSet {
            world_epsg: 25832,
            local_origin: GeoPoint {
                longitude: 0.0,
                latitude: 0.0,
            },
            systems,
        },
        resources: ResourceLinks::default(),
        ontology_refs: None,
    }
}
