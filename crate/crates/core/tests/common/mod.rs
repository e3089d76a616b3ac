//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use aveas_core::geometry::{Polygon2D, Vec2};
use aveas_core::metrics::{KinematicPair, Kinematics};
use aveas_core::model::*;
use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pick<T: Copy>(r: &mut ChaCha8Rng, xs: &[T]) -> T {
    xs[r.random_range(0..xs.len())]
}

fn maybe<T>(r: &mut ChaCha8Rng, f: impl FnOnce(&mut ChaCha8Rng) -> T) -> Option<T> {
    if r.random_bool(0.5) {
        Some(f(r))
    } else {
        None
    }
}

fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.random::<f64>()
}

const USER_TYPES: [RoadUserType; 7] = [
    RoadUserType::Car,
    RoadUserType::Truck,
    RoadUserType::Bus,
    RoadUserType::Motorcycle,
    RoadUserType::Bicycle,
    RoadUserType::Pedestrian,
    RoadUserType::Other,
];
pub const EVENT_TYPES: [EventType; 7] = [
    EventType::LaneChange,
    EventType::CutIn,
    EventType::HardBraking,
    EventType::NearMiss,
    EventType::Collision,
    EventType::Handover,
    EventType::Other,
];
pub const METHODS: [AcquisitionMethod; 5] = [
    AcquisitionMethod::StationaryLidar,
    AcquisitionMethod::StationaryInfrared,
    AcquisitionMethod::AerialRgbVideo,
    AcquisitionMethod::VehicleSensors,
    AcquisitionMethod::Synthetic,
];
pub const ORIGINS: [Origin; 3] = [Origin::Reconstructed, Origin::Sampled, Origin::Original];
pub const AREAS: [Area; 3] = [Area::Urban, Area::Highway, Area::Rural];
pub const RESTRICTIONS: [&str; 4] = ["none", "Research use only", "non-commercial, no redistribution", "Open Data"];
const PARTICIPANT_IDS: [&str; 7] = ["A", "B", "ego", "P1", "P10", "truck_7", "ped-3"];
const TRAFFIC: [TrafficCondition; 4] = [
    TrafficCondition::FreeFlow,
    TrafficCondition::Dense,
    TrafficCondition::Congested,
    TrafficCondition::Unknown,
];

fn free_form(r: &mut ChaCha8Rng) -> serde_json::Map<String, serde_json::Value> {
    let mut m = serde_json::Map::new();
    m.insert("delta_v".into(), serde_json::json!(uniform(r, 0.0, 20.0)));
    if r.random_bool(0.5) {
        m.insert("impact_point".into(), serde_json::json!([uniform(r, -2.0, 2.0), uniform(r, -1.0, 1.0)]));
    }
    if r.random_bool(0.5) {
        m.insert("note".into(), serde_json::json!("rear impact, \"estimated\""));
    }
    if r.random_bool(0.5) {
        m.insert("nested".into(), serde_json::json!({"severity": r.random_range(0..4), "airbag": r.random_bool(0.5)}));
    }
    m
}

fn simple_polygon(r: &mut ChaCha8Rng) -> Polygon2D {
    let c = Vec2::new(uniform(r, -100.0, 100.0), uniform(r, -100.0, 100.0));
    let n = r.random_range(3..7);
    let start = uniform(r, 0.0, 2.0 * PI);
    // Vertices at increasing angles around a centre form a simple polygon.
    let vertices = (0..n)
        .map(|k| {
            let a = start + 2.0 * PI * k as f64 / n as f64;
            let rad = uniform(r, 1.0, 15.0);
            Vec2::new(c.x + rad * a.cos(), c.y + rad * a.sin())
        })
        .collect();
    Polygon2D::new(vertices)
}

fn risk_set(r: &mut ChaCha8Rng) -> RiskMeasureSet {
    RiskMeasureSet {
        thw: maybe(r, |r| uniform(r, 0.0, 10.0)),
        dhw: maybe(r, |r| uniform(r, 0.0, 200.0)),
        ttc: maybe(r, |r| uniform(r, 0.0, 30.0)),
        gttc: maybe(r, |r| uniform(r, 0.0, 20.0)),
        pret: maybe(r, |r| uniform(r, 0.0, 5.0)),
    }
}

fn state(r: &mut ChaCha8Rng, p: &Participant, others: &[String]) -> FrameState {
    let pos = Vec2::new(uniform(r, -500.0, 500.0), uniform(r, -500.0, 500.0));
    let heading = uniform(r, -PI, PI);
    let extent = [p.dimensions.length, p.dimensions.width, p.dimensions.height.unwrap_or(1.5)];
    let speed = if r.random_bool(0.1) { 0.0 } else { uniform(r, 0.0, 40.0) };
    let mut st = FrameState::new(pos, heading, extent, speed);
    st.bbox3d.center[2] = uniform(r, 0.0, 3.0);
    st.lane_position = maybe(r, |r| LanePosition {
        road_id: pick(r, &["r1", "road-2", "A9"]).to_string(),
        lane_id: r.random_range(-4..4),
        s: uniform(r, 0.0, 2000.0),
        t: uniform(r, -1.75, 1.75),
    });
    st.acceleration = maybe(r, |r| uniform(r, -8.0, 4.0));
    st.yaw_rate = maybe(r, |r| uniform(r, -0.5, 0.5));
    st.pitch = maybe(r, |r| uniform(r, -0.1, 0.1));
    st.roll = maybe(r, |r| uniform(r, -0.1, 0.1));
    st.light_states = maybe(r, |r| {
        let mut m = BTreeMap::new();
        for k in ["brake_light", "indicator_left", "indicator_right", "hazard"] {
            if r.random_bool(0.6) {
                m.insert(k.to_string(), r.random_bool(0.5));
            }
        }
        m
    });
    st.speed_limit = maybe(r, |r| {
        let any = uniform(r, 5.0, 40.0);
        pick(r, &[13.89, 27.78, 36.11, any])
    });
    st.traffic_condition = maybe(r, |r| pick(r, &TRAFFIC));
    st.behavior_risk = maybe(r, |r| {
        let mut m = BTreeMap::new();
        m.insert("distraction".to_string(), uniform(r, 0.0, 1.0));
        if r.random_bool(0.5) {
            m.insert("a_req".to_string(), uniform(r, 0.0, 9.0));
        }
        m
    });
    for o in others {
        if r.random_bool(0.5) {
            st.pairwise_risk.insert(o.clone(), risk_set(r));
        }
    }
    st
}

/// A valid scenario exercising every optional field somewhere across seeds.
pub fn random_scenario(seed: u64) -> Scenario {
    let r = &mut rng(seed);
    let n_part = r.random_range(1..=PARTICIPANT_IDS.len().min(5));
    let mut ids: Vec<String> = PARTICIPANT_IDS.iter().map(|s| s.to_string()).collect();
    for i in (1..ids.len()).rev() {
        ids.swap(i, r.random_range(0..=i));
    }
    ids.truncate(n_part);

    let mut participants: BTreeMap<String, Participant> = BTreeMap::new();
    for id in &ids {
        let t = pick(r, &USER_TYPES);
        let dims = if t.is_vehicle() {
            Dimensions {
                length: uniform(r, 1.5, 18.0),
                width: uniform(r, 0.6, 2.6),
                height: maybe(r, |r| uniform(r, 1.0, 4.0)),
            }
        } else {
            Dimensions {
                length: uniform(r, 0.0, 1.0),
                width: uniform(r, 0.0, 1.0),
                height: maybe(r, |r| uniform(r, 0.0, 2.0)),
            }
        };
        participants.insert(
            id.clone(),
            Participant {
                road_user_type: t,
                dimensions: dims,
                speed_range: ValueRange::new(0.0, 0.0),
                collision_dynamics: maybe(r, free_form),
                steering_wheel_positions: maybe(r, |r| {
                    let n = r.random_range(0..5);
                    (0..n)
                        .map(|k| SteeringSample {
                            t: k as f64 * 0.1,
                            angle: uniform(r, -3.0, 3.0),
                        })
                        .collect()
                }),
            },
        );
    }

    let n_frames = r.random_range(1..=6);
    let mut t = if r.random_bool(0.5) { 0.0 } else { uniform(r, 0.0, 100.0) };
    let mut frames = Vec::new();
    for k in 0..n_frames {
        if k > 0 {
            t += uniform(r, 0.01, 0.5);
        }
        let mut states = BTreeMap::new();
        for id in &ids {
            if r.random_bool(0.8) {
                let others: Vec<String> = ids.iter().filter(|o| *o != id).cloned().collect();
                states.insert(id.clone(), state(r, &participants[id], &others));
            }
        }
        let unobserved_areas = (0..r.random_range(0..3)).map(|_| simple_polygon(r)).collect();
        frames.push(Frame {
            frame_id: k as u64,
            timestamp: t,
            states,
            unobserved_areas,
        });
    }
    let (first, last) = (frames[0].timestamp, frames[n_frames - 1].timestamp);

    // Speed ranges enclose every observed speed.
    for (id, p) in participants.iter_mut() {
        let speeds: Vec<f64> = frames.iter().filter_map(|f| f.states.get(id)).map(|s| s.speed).collect();
        let (lo, hi) = if speeds.is_empty() {
            let lo = uniform(r, 0.0, 20.0);
            (lo, lo + uniform(r, 0.0, 10.0))
        } else {
            let lo = speeds.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = speeds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        };
        p.speed_range = ValueRange::new(lo, hi);
    }

    let mut events = BTreeMap::new();
    for k in 0..r.random_range(0..4) {
        let a = uniform(r, first, last);
        let b = uniform(r, a, last);
        let mut involved = BTreeMap::new();
        for id in &ids {
            if r.random_bool(0.5) {
                involved.insert(id.clone(), maybe(r, |r| pick(r, &["lane_change_left", "braking", "approaching"]).to_string()));
            }
        }
        events.insert(
            format!("E{k}"),
            EventRecord {
                event_type: maybe(r, |r| pick(r, &EVENT_TYPES)),
                time_interval: (a, b),
                involved,
            },
        );
    }

    let acquisition_method = pick(r, &METHODS);
    let origin = if acquisition_method == AcquisitionMethod::Synthetic {
        Origin::Sampled
    } else {
        pick(r, &[Origin::Reconstructed, Origin::Original])
    };
    let mut dynamic_ranges = BTreeMap::new();
    let all_speeds: Vec<f64> = frames.iter().flat_map(|f| f.states.values().map(|s| s.speed)).collect();
    if !all_speeds.is_empty() && r.random_bool(0.8) {
        let lo = all_speeds.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = all_speeds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        dynamic_ranges.insert("speed".into(), ValueRange::new(lo - uniform(r, 0.0, 1.0), hi + uniform(r, 0.0, 1.0)));
    }
    let accels: Vec<f64> = frames.iter().flat_map(|f| f.states.values().filter_map(|s| s.acceleration)).collect();
    if !accels.is_empty() && r.random_bool(0.5) {
        let lo = accels.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = accels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        dynamic_ranges.insert("acceleration".into(), ValueRange::new(lo, hi));
    }
    if r.random_bool(0.5) {
        let lo = uniform(r, -2.0, 0.0);
        dynamic_ranges.insert("lateral_offset".into(), ValueRange::new(lo, lo + uniform(r, 0.0, 3.0)));
    }
    let secs = r.random_range(1_500_000_000i64..1_900_000_000);
    let nanos = if r.random_bool(0.5) { 0 } else { r.random_range(0..1_000_000_000u32) };

    let mut systems = BTreeMap::new();
    let n_sys = r.random_range(0..4);
    for k in 0..n_sys {
        let parent = if k > 0 && r.random_bool(0.6) {
            Some(format!("cs{}", r.random_range(0..k)))
        } else {
            None
        };
        systems.insert(
            format!("cs{k}"),
            CoordinateSystem {
                kind: pick(r, &[CoordinateSystemType::Static, CoordinateSystemType::Local, CoordinateSystemType::Sensor]),
                parent,
                transform: RigidTransform2 {
                    rotation: uniform(r, -PI, PI),
                    translation: Vec2::new(uniform(r, -50.0, 50.0), uniform(r, -50.0, 50.0)),
                },
            },
        );
    }

    Scenario {
        scenario_id: format!("gen-{seed}"),
        context: Context {
            weather: pick(r, &[Weather::Clear, Weather::Rain, Weather::Snow, Weather::Fog, Weather::Unknown]),
            lighting: pick(r, &[Lighting::Day, Lighting::Twilight, Lighting::Night, Lighting::Artificial, Lighting::Unknown]),
            traffic_condition: pick(r, &TRAFFIC),
            road_surface: pick(r, &[RoadSurface::Dry, RoadSurface::Wet, RoadSurface::Icy, RoadSurface::Unknown]),
        },
        participants,
        events,
        frames,
        metadata: ScenarioMetadata {
            creation_time: DateTime::<Utc>::from_timestamp(secs, nanos).unwrap(),
            acquisition_method,
            data_use_restrictions: pick(r, &RESTRICTIONS).to_string(),
            origin,
            area: pick(r, &AREAS),
            scenario_duration: last - first,
            dynamic_ranges,
        },
        coordinate_systems: CoordinateSystemSet {
            world_epsg: pick(r, &[25832, 25833, 4326, 3857]),
            local_origin: GeoPoint {
                longitude: uniform(r, -180.0, 180.0),
                latitude: uniform(r, -90.0, 90.0),
            },
            systems,
        },
        resources: ResourceLinks {
            opendrive_path: maybe(r, |r| pick(r, &["maps/a9.xodr", "town01.xodr", "../shared/map.xodr"]).to_string()),
        },
        ontology_refs: maybe(r, |r| {
            let mut m = BTreeMap::new();
            for k in 0..r.random_range(0..3) {
                m.insert(
                    format!("onto{k}"),
                    OntologyRef {
                        uri: maybe(r, |_| format!("https://example.org/ontology/{k}")),
                        boundaries: maybe(r, |r| (0..r.random_range(0..3)).map(|i| format!("term_{i}")).collect()),
                    },
                );
            }
            m
        }),
    }
}

/// Rectangle corners of a footprint at time `t` under constant velocity.
fn corners_at(k: &Kinematics, t: f64) -> [Vec2; 4] {
    let (c, s) = (k.heading.cos(), k.heading.sin());
    let (hl, hw) = (k.length / 2.0, k.width / 2.0);
    let p = Vec2::new(k.position.x + k.velocity.x * t, k.position.y + k.velocity.y * t);
    [(hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)].map(|(a, b)| Vec2::new(p.x + a * c - b * s, p.y + a * s + b * c))
}

fn projections_overlap(a: &[Vec2; 4], b: &[Vec2; 4], axis: Vec2) -> bool {
    let proj = |pts: &[Vec2; 4]| {
        pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let d = p.x * axis.x + p.y * axis.y;
            (lo.min(d), hi.max(d))
        })
    };
    let (a0, a1) = proj(a);
    let (b0, b1) = proj(b);
    a0 <= b1 && b0 <= a1
}

/// Closed-set overlap of two rectangles by the separating axis theorem.
pub fn rectangles_overlap(a: &[Vec2; 4], b: &[Vec2; 4]) -> bool {
    let axes = [
        Vec2::new(a[1].x - a[0].x, a[1].y - a[0].y),
        Vec2::new(a[3].x - a[0].x, a[3].y - a[0].y),
        Vec2::new(b[1].x - b[0].x, b[1].y - b[0].y),
        Vec2::new(b[3].x - b[0].x, b[3].y - b[0].y),
    ];
    axes.iter().all(|ax| projections_overlap(a, b, *ax))
}

/// First time step `k * dt <= horizon` at which the footprints overlap.
pub fn brute_force_gttc(pair: &KinematicPair, horizon: f64, dt: f64) -> Option<f64> {
    let (e, t) = (&pair.ego, &pair.target);
    let reach = (e.length.hypot(e.width) + t.length.hypot(t.width)) / 2.0;
    let rel_p = Vec2::new(t.position.x - e.position.x, t.position.y - e.position.y);
    let rel_v = Vec2::new(t.velocity.x - e.velocity.x, t.velocity.y - e.velocity.y);
    let n = (horizon / dt).floor() as usize;
    for k in 0..=n {
        let tk = k as f64 * dt;
        let d = Vec2::new(rel_p.x + rel_v.x * tk, rel_p.y + rel_v.y * tk);
        let dist = d.x.hypot(d.y);
        if dist > reach {
            // Centre distance is convex in time; once growing beyond the
            // bounding circles it never returns.
            if d.x * rel_v.x + d.y * rel_v.y >= 0.0 {
                return None;
            }
            continue;
        }
        if rectangles_overlap(&corners_at(e, tk), &corners_at(t, tk)) {
            return Some(tk);
        }
    }
    None
}

/// A pair that is likely, but not certain, to collide within ten seconds.
pub fn random_pair(r: &mut ChaCha8Rng) -> KinematicPair {
    let meet = Vec2::new(uniform(r, -50.0, 50.0), uniform(r, -50.0, 50.0));
    let t_meet = uniform(r, 0.0, 10.0);
    let make = |r: &mut ChaCha8Rng| {
        let heading = uniform(r, -PI, PI);
        let speed = uniform(r, 0.0, 30.0);
        let motion = uniform(r, -PI, PI);
        let v = Vec2::new(speed * motion.cos(), speed * motion.sin());
        let miss = Vec2::new(uniform(r, -6.0, 6.0), uniform(r, -6.0, 6.0));
        let pos = Vec2::new(meet.x - v.x * t_meet + miss.x, meet.y - v.y * t_meet + miss.y);
        Kinematics::new(pos, v, heading, uniform(r, 0.5, 12.0), uniform(r, 0.5, 2.6))
    };
    let ego = make(r);
    let target = make(r);
    KinematicPair::new(ego, target)
}

/// Ego following target on one straight line with arbitrary orientation.
/// Returns the pair and the expected ttc, when closing.
pub fn collinear_pair(r: &mut ChaCha8Rng) -> (KinematicPair, f64) {
    let heading = uniform(r, -PI, PI);
    let dir = Vec2::from_heading(heading);
    let (le, lt) = (uniform(r, 0.5, 12.0), uniform(r, 0.5, 12.0));
    let gap = uniform(r, 0.5, 80.0);
    let ve = uniform(r, 1.0, 40.0);
    let vt = uniform(r, 0.0, ve - 0.1);
    let p0 = Vec2::new(uniform(r, -100.0, 100.0), uniform(r, -100.0, 100.0));
    let d = gap + (le + lt) / 2.0;
    let ego = Kinematics::moving(p0, heading, ve, le, 1.8);
    let target = Kinematics::moving(Vec2::new(p0.x + dir.x * d, p0.y + dir.y * d), heading, vt, lt, 1.8);
    (KinematicPair::new(ego, target), gap / (ve - vt))
}

/// Straight paths crossing at a random point, reached at `t1` and `t2`.
pub fn crossing_pair(r: &mut ChaCha8Rng) -> (KinematicPair, f64) {
    let c = Vec2::new(uniform(r, -100.0, 100.0), uniform(r, -100.0, 100.0));
    let h1 = uniform(r, -PI, PI);
    let mut h2 = uniform(r, -PI, PI);
    while (h1 - h2).sin().abs() < 0.2 {
        h2 = uniform(r, -PI, PI);
    }
    let (v1, v2) = (uniform(r, 1.0, 30.0), uniform(r, 1.0, 30.0));
    let (t1, t2) = (uniform(r, 0.0, 10.0), uniform(r, 0.0, 10.0));
    let start = |h: f64, v: f64, t: f64| {
        let d = Vec2::from_heading(h);
        Vec2::new(c.x - d.x * v * t, c.y - d.y * v * t)
    };
    let ego = Kinematics::moving(start(h1, v1, t1), h1, v1, 4.5, 1.8);
    let target = Kinematics::moving(start(h2, v2, t2), h2, v2, 4.5, 1.8);
    (KinematicPair::new(ego, target), (t1 - t2).abs())
}

/// Metadata predicates evaluated straight off a parsed scenario.
#[derive(Debug, Clone, Default)]
pub struct BruteFilter {
    pub areas: Vec<Area>,
    pub methods: Vec<AcquisitionMethod>,
    pub origins: Vec<Origin>,
    pub event_types: Vec<EventType>,
    pub duration: Option<(f64, f64)>,
    pub ranges: Vec<(String, f64, f64)>,
    pub text: Option<String>,
}

impl BruteFilter {
    pub fn random(r: &mut ChaCha8Rng) -> Self {
        let mut f = BruteFilter::default();
        let subset = |r: &mut ChaCha8Rng, n: usize| -> Vec<usize> {
            (0..n).filter(|_| r.random_bool(0.5)).collect()
        };
        if r.random_bool(0.4) {
            f.areas = subset(r, AREAS.len()).into_iter().map(|i| AREAS[i]).collect();
        }
        if r.random_bool(0.4) {
            f.methods = subset(r, METHODS.len()).into_iter().map(|i| METHODS[i]).collect();
        }
        if r.random_bool(0.3) {
            f.origins = subset(r, ORIGINS.len()).into_iter().map(|i| ORIGINS[i]).collect();
        }
        if r.random_bool(0.4) {
            f.event_types = subset(r, EVENT_TYPES.len()).into_iter().map(|i| EVENT_TYPES[i]).collect();
        }
        if r.random_bool(0.4) {
            let lo = uniform(r, 0.0, 2.0);
            f.duration = Some((lo, lo + uniform(r, 0.0, 2.0)));
        }
        for _ in 0..r.random_range(0..3) {
            if r.random_bool(0.5) {
                let q = pick(r, &["speed", "acceleration", "lateral_offset", "ttc"]);
                let lo = uniform(r, -10.0, 40.0);
                f.ranges.push((q.to_string(), lo, lo + uniform(r, 0.0, 10.0)));
            }
        }
        if r.random_bool(0.3) {
            f.text = Some(pick(r, &["RESEARCH", "non-comm", "open", "none", "zzz"]).to_string());
        }
        f
    }

    pub fn matches(&self, s: &Scenario) -> bool {
        let m = &s.metadata;
        if !self.areas.is_empty() && !self.areas.contains(&m.area) {
            return false;
        }
        if !self.methods.is_empty() && !self.methods.contains(&m.acquisition_method) {
            return false;
        }
        if !self.origins.is_empty() && !self.origins.contains(&m.origin) {
            return false;
        }
        if !self.event_types.is_empty() {
            let present: BTreeSet<EventType> = s.events.values().filter_map(|e| e.event_type).collect();
            if !self.event_types.iter().any(|t| present.contains(t)) {
                return false;
            }
        }
        if let Some((lo, hi)) = self.duration {
            if m.scenario_duration < lo || m.scenario_duration > hi {
                return false;
            }
        }
        for (q, lo, hi) in &self.ranges {
            match m.dynamic_ranges.get(q) {
                Some(r) if r.min <= *hi && *lo <= r.max => {}
                _ => return false,
            }
        }
        if let Some(t) = &self.text {
            if !m.data_use_restrictions.to_lowercase().contains(&t.to_lowercase()) {
                return false;
            }
        }
        true
    }

    pub fn to_query(&self) -> aveas_core::store::QueryFilter {
        aveas_core::store::QueryFilter {
            areas: self.areas.iter().copied().collect(),
            acquisition_methods: self.methods.iter().copied().collect(),
            origins: self.origins.iter().copied().collect(),
            event_types: self.event_types.iter().copied().collect(),
            duration: self.duration,
            ranges: self
                .ranges
                .iter()
                .map(|(q, lo, hi)| aveas_core::store::RangePredicate {
                    quantity: q.clone(),
                    lo: *lo,
                    hi: *hi,
                })
                .collect(),
            text: self.text.clone(),
        }
    }
}

/// Every scenario file under `root`, parsed straight from disk.
pub fn scan_files(root: &std::path::Path) -> Vec<Scenario> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.to_string_lossy().ends_with(".aveas.json") {
                out.push(aveas_core::openlabel::parse(&std::fs::read(&p).unwrap()).unwrap());
            }
        }
    }
    out
}

/// Ingests 20 generated scenarios into a fresh store under `dir`.
pub fn fixture_store(dir: &std::path::Path) -> aveas_core::store::ScenarioStore {
    let mut store = aveas_core::store::ScenarioStore::open_or_create(dir).unwrap();
    for seed in 0..20 {
        let s = random_scenario(1000 + seed);
        store.ingest(&aveas_core::openlabel::serialize(&s).unwrap()).unwrap();
    }
    store
}
