//! Structural decoding of the profile document into the scenario model.
//!
//! The decoder keeps going after a violation so that a single pass reports
//! every structural problem; a scenario is only produced when none occurred.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde_json::{Map, Value};

use crate::geometry::{Polygon2D, Vec2};
use crate::model::*;

pub(crate) const TOP_KEYS: &[&str] = &[
    "metadata",
    "coordinate_systems",
    "resources",
    "ontologies",
    "contexts",
    "objects",
    "events",
    "frames",
];

#[derive(Default)]
pub(crate) struct Decoder {
    pub report: ValidationReport,
}

trait WireEnum: Sized {
    fn from_wire(s: &str) -> Option<Self>;
    fn allowed() -> Vec<&'static str>;
}

macro_rules! impl_wire {
    ($($t:ty),*) => {$(
        impl WireEnum for $t {
            fn from_wire(s: &str) -> Option<Self> {
                <$t>::parse(s)
            }
            fn allowed() -> Vec<&'static str> {
                <$t>::ALL.iter().map(|v| v.as_str()).collect()
            }
        }
    )*};
}

impl_wire!(
    Weather,
    Lighting,
    TrafficCondition,
    RoadSurface,
    RoadUserType,
    EventType,
    AcquisitionMethod,
    Origin,
    Area,
    CoordinateSystemType
);

fn join(path: &str, key: &str) -> String {
    format!("{path}.{key}")
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

impl Decoder {
    fn err(&mut self, path: impl Into<String>, msg: impl Into<String>) {
        self.report.error(path, msg);
    }

    fn type_err<T>(&mut self, path: &str, expected: &str, v: &Value) -> Option<T> {
        self.err(path, format!("expected {expected}, found {}", kind(v)));
        None
    }

    fn obj<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Map<String, Value>> {
        match v {
            Value::Object(m) => Some(m),
            other => self.type_err(path, "object", other),
        }
    }

    fn arr<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Vec<Value>> {
        match v {
            Value::Array(a) => Some(a),
            other => self.type_err(path, "array", other),
        }
    }

    fn num(&mut self, v: &Value, path: &str) -> Option<f64> {
        match v {
            Value::Number(n) => n.as_f64().filter(|x| x.is_finite()).or_else(|| {
                self.err(path, "number out of range");
                None
            }),
            other => self.type_err(path, "number", other),
        }
    }

    fn string(&mut self, v: &Value, path: &str) -> Option<String> {
        match v {
            Value::String(s) => Some(s.clone()),
            other => self.type_err(path, "string", other),
        }
    }

    fn boolean(&mut self, v: &Value, path: &str) -> Option<bool> {
        match v {
            Value::Bool(b) => Some(*b),
            other => self.type_err(path, "boolean", other),
        }
    }

    fn integer(&mut self, v: &Value, path: &str) -> Option<i64> {
        match v {
            Value::Number(n) => n.as_i64().or_else(|| {
                self.err(path, "expected integer");
                None
            }),
            other => self.type_err(path, "integer", other),
        }
    }

    fn wire<E: WireEnum>(&mut self, v: &Value, path: &str) -> Option<E> {
        let s = self.string(v, path)?;
        E::from_wire(&s).or_else(|| {
            self.err(
                path,
                format!("invalid value '{s}', expected one of {}", E::allowed().join(", ")),
            );
            None
        })
    }

    fn fixed_nums<const N: usize>(&mut self, v: &Value, path: &str) -> Option<[f64; N]> {
        let a = self.arr(v, path)?;
        if a.len() != N {
            self.err(path, format!("expected array of {N} numbers, found {}", a.len()));
            return None;
        }
        let mut out = [0.0; N];
        let mut ok = true;
        for (i, x) in a.iter().enumerate() {
            match self.num(x, &join(path, &i.to_string())) {
                Some(n) => out[i] = n,
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn vec2(&mut self, v: &Value, path: &str) -> Option<Vec2> {
        self.fixed_nums::<2>(v, path).map(|[x, y]| Vec2::new(x, y))
    }

    fn range(&mut self, v: &Value, path: &str) -> Option<ValueRange> {
        self.fixed_nums::<2>(v, path).map(|[a, b]| ValueRange::new(a, b))
    }

    fn check_keys(&mut self, m: &Map<String, Value>, allowed: &[&str], path: &str) {
        for k in m.keys() {
            if !allowed.contains(&k.as_str()) {
                self.err(join(path, k), format!("unknown key '{k}'"));
            }
        }
    }

    fn req<'a>(&mut self, m: &'a Map<String, Value>, key: &str, path: &str) -> Option<&'a Value> {
        let v = m.get(key);
        if v.is_none() {
            self.err(path, format!("missing required key '{key}'"));
        }
        v
    }

    fn req_num(&mut self, m: &Map<String, Value>, key: &str, path: &str) -> Option<f64> {
        let v = self.req(m, key, path)?;
        self.num(v, &join(path, key))
    }

    fn opt_num(&mut self, m: &Map<String, Value>, key: &str, path: &str, ok: &mut bool) -> Option<f64> {
        let v = m.get(key)?;
        let r = self.num(v, &join(path, key));
        *ok &= r.is_some();
        r
    }

    // ---- document level ----

    pub fn document(&mut self, root: &Value) -> Option<Scenario> {
        let top = self.obj(root, "$")?;
        self.check_keys(top, &["openlabel"], "$");
        let ol = self.req(top, "openlabel", "$")?;
        let path = "$.openlabel";
        let ol = self.obj(ol, path)?;
        self.check_keys(ol, TOP_KEYS, path);

        let metadata = self
            .req(ol, "metadata", path)
            .and_then(|v| self.metadata(v, &join(path, "metadata")));
        let coordinate_systems = self
            .req(ol, "coordinate_systems", path)
            .and_then(|v| self.coordinate_systems(v, &join(path, "coordinate_systems")));
        let resources = self
            .req(ol, "resources", path)
            .and_then(|v| self.resources(v, &join(path, "resources")));
        let ontology_refs = match ol.get("ontologies") {
            None => Some(None),
            Some(v) => self.ontologies(v, &join(path, "ontologies")).map(Some),
        };
        let context = self
            .req(ol, "contexts", path)
            .and_then(|v| self.contexts(v, &join(path, "contexts")));
        let participants = self
            .req(ol, "objects", path)
            .and_then(|v| self.participants(v, &join(path, "objects")));
        let events = self
            .req(ol, "events", path)
            .and_then(|v| self.events(v, &join(path, "events")));
        let frames = self
            .req(ol, "frames", path)
            .and_then(|v| self.frames(v, &join(path, "frames")));

        let (scenario_id, context) = context?;
        let scenario = Scenario {
            scenario_id,
            context,
            participants: participants?,
            events: events?,
            frames: frames?,
            metadata: metadata?,
            coordinate_systems: coordinate_systems?,
            resources: resources?,
            ontology_refs: ontology_refs?,
        };
        self.report.is_valid().then_some(scenario)
    }

    pub fn metadata(&mut self, v: &Value, path: &str) -> Option<ScenarioMetadata> {
        let m = self.obj(v, path)?;
        self.check_keys(
            m,
            &[
                "creation_time",
                "acquisition_method",
                "data_use_restrictions",
                "origin",
                "area",
                "scenario_duration",
                "dynamic_ranges",
            ],
            path,
        );
        let creation_time = self.req(m, "creation_time", path).and_then(|v| {
            let p = join(path, "creation_time");
            let s = self.string(v, &p)?;
            match DateTime::parse_from_rfc3339(&s) {
                Ok(t) => Some(t.with_timezone(&Utc)),
                Err(e) => {
                    self.err(p, format!("invalid RFC 3339 timestamp: {e}"));
                    None
                }
            }
        });
        let acquisition_method = self
            .req(m, "acquisition_method", path)
            .and_then(|v| self.wire(v, &join(path, "acquisition_method")));
        let data_use_restrictions = self
            .req(m, "data_use_restrictions", path)
            .and_then(|v| self.string(v, &join(path, "data_use_restrictions")));
        let origin = self
            .req(m, "origin", path)
            .and_then(|v| self.wire(v, &join(path, "origin")));
        let area = self
            .req(m, "area", path)
            .and_then(|v| self.wire(v, &join(path, "area")));
        let scenario_duration = self.req_num(m, "scenario_duration", path);
        let dynamic_ranges = self.req(m, "dynamic_ranges", path).and_then(|v| {
            let p = join(path, "dynamic_ranges");
            let dm = self.obj(v, &p)?;
            let mut out = BTreeMap::new();
            let mut ok = true;
            for (q, r) in dm {
                match self.range(r, &join(&p, q)) {
                    Some(r) => {
                        out.insert(q.clone(), r);
                    }
                    None => ok = false,
                }
            }
            ok.then_some(out)
        });
        Some(ScenarioMetadata {
            creation_time: creation_time?,
            acquisition_method: acquisition_method?,
            data_use_restrictions: data_use_restrictions?,
            origin: origin?,
            area: area?,
            scenario_duration: scenario_duration?,
            dynamic_ranges: dynamic_ranges?,
        })
    }

    fn coordinate_systems(&mut self, v: &Value, path: &str) -> Option<CoordinateSystemSet> {
        let m = self.obj(v, path)?;
        self.check_keys(m, &["world_epsg", "local_origin", "systems"], path);
        let world_epsg = self.req(m, "world_epsg", path).and_then(|v| {
            let p = join(path, "world_epsg");
            let n = self.integer(v, &p)?;
            u32::try_from(n).ok().or_else(|| {
                self.err(p, "EPSG code out of range");
                None
            })
        });
        let local_origin = self.req(m, "local_origin", path).and_then(|v| {
            let p = join(path, "local_origin");
            let o = self.obj(v, &p)?;
            self.check_keys(o, &["longitude", "latitude"], &p);
            let lon = self.req_num(o, "longitude", &p);
            let lat = self.req_num(o, "latitude", &p);
            Some(GeoPoint {
                longitude: lon?,
                latitude: lat?,
            })
        });
        let systems = self.req(m, "systems", path).and_then(|v| {
            let p = join(path, "systems");
            let sm = self.obj(v, &p)?;
            let mut out = BTreeMap::new();
            let mut ok = true;
            for (id, sv) in sm {
                match self.coordinate_system(sv, &join(&p, id)) {
                    Some(cs) => {
                        out.insert(id.clone(), cs);
                    }
                    None => ok = false,
                }
            }
            ok.then_some(out)
        });
        Some(CoordinateSystemSet {
            world_epsg: world_epsg?,
            local_origin: local_origin?,
            systems: systems?,
        })
    }

    fn coordinate_system(&mut self, v: &Value, path: &str) -> Option<CoordinateSystem> {
        let m = self.obj(v, path)?;
        self.check_keys(m, &["type", "parent", "transform"], path);
        let kind = self
            .req(m, "type", path)
            .and_then(|v| self.wire(v, &join(path, "type")));
        let parent = match m.get("parent") {
            None => Some(None),
            Some(v) => self.string(v, &join(path, "parent")).map(Some),
        };
        let transform = self.req(m, "transform", path).and_then(|v| {
            let p = join(path, "transform");
            let t = self.obj(v, &p)?;
            self.check_keys(t, &["rotation", "translation"], &p);
            let rotation = self.req_num(t, "rotation", &p);
            let translation = self
                .req(t, "translation", &p)
                .and_then(|v| self.vec2(v, &join(&p, "translation")));
            Some(RigidTransform2 {
                rotation: rotation?,
                translation: translation?,
            })
        });
        Some(CoordinateSystem {
            kind: kind?,
            parent: parent?,
            transform: transform?,
        })
    }

    fn resources(&mut self, v: &Value, path: &str) -> Option<ResourceLinks> {
        let m = self.obj(v, path)?;
        self.check_keys(m, &["opendrive_path"], path);
        let opendrive_path = match m.get("opendrive_path") {
            None => None,
            Some(v) => Some(self.string(v, &join(path, "opendrive_path"))?),
        };
        Some(ResourceLinks { opendrive_path })
    }

    fn ontologies(&mut self, v: &Value, path: &str) -> Option<BTreeMap<String, OntologyRef>> {
        let m = self.obj(v, path)?;
        let mut out = BTreeMap::new();
        let mut ok = true;
        for (id, ov) in m {
            let p = join(path, id);
            let Some(o) = self.obj(ov, &p) else {
                ok = false;
                continue;
            };
            self.check_keys(o, &["uri", "boundaries"], &p);
            let uri = match o.get("uri") {
                None => Some(None),
                Some(v) => self.string(v, &join(&p, "uri")).map(Some),
            };
            let boundaries = match o.get("boundaries") {
                None => Some(None),
                Some(v) => self.string_list(v, &join(&p, "boundaries")).map(Some),
            };
            match (uri, boundaries) {
                (Some(uri), Some(boundaries)) => {
                    out.insert(id.clone(), OntologyRef { uri, boundaries });
                }
                _ => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn string_list(&mut self, v: &Value, path: &str) -> Option<Vec<String>> {
        let a = self.arr(v, path)?;
        let mut out = Vec::with_capacity(a.len());
        let mut ok = true;
        for (i, x) in a.iter().enumerate() {
            match self.string(x, &join(path, &i.to_string())) {
                Some(s) => out.push(s),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn contexts(&mut self, v: &Value, path: &str) -> Option<(String, Context)> {
        let m = self.obj(v, path)?;
        if m.len() != 1 {
            self.err(
                path,
                format!("expected exactly one context keyed by scenario id, found {}", m.len()),
            );
            return None;
        }
        let (id, cv) = m.iter().next()?;
        let p = join(path, id);
        let c = self.obj(cv, &p)?;
        self.check_keys(
            c,
            &["weather", "lighting", "traffic_condition", "road_surface"],
            &p,
        );
        let weather = self.req(c, "weather", &p).and_then(|v| self.wire(v, &join(&p, "weather")));
        let lighting = self.req(c, "lighting", &p).and_then(|v| self.wire(v, &join(&p, "lighting")));
        let traffic_condition = self
            .req(c, "traffic_condition", &p)
            .and_then(|v| self.wire(v, &join(&p, "traffic_condition")));
        let road_surface = self
            .req(c, "road_surface", &p)
            .and_then(|v| self.wire(v, &join(&p, "road_surface")));
        Some((
            id.clone(),
            Context {
                weather: weather?,
                lighting: lighting?,
                traffic_condition: traffic_condition?,
                road_surface: road_surface?,
            },
        ))
    }

    fn participants(&mut self, v: &Value, path: &str) -> Option<BTreeMap<String, Participant>> {
        let m = self.obj(v, path)?;
        let mut out = BTreeMap::new();
        let mut ok = true;
        for (pid, pv) in m {
            match self.participant(pv, &join(path, pid)) {
                Some(p) => {
                    out.insert(pid.clone(), p);
                }
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn participant(&mut self, v: &Value, path: &str) -> Option<Participant> {
        let m = self.obj(v, path)?;
        self.check_keys(
            m,
            &[
                "road_user_type",
                "dimensions",
                "speed_range",
                "collision_dynamics",
                "steering_wheel_positions",
            ],
            path,
        );
        let road_user_type = self
            .req(m, "road_user_type", path)
            .and_then(|v| self.wire(v, &join(path, "road_user_type")));
        let dimensions = self.req(m, "dimensions", path).and_then(|v| {
            let p = join(path, "dimensions");
            let d = self.obj(v, &p)?;
            self.check_keys(d, &["length", "width", "height"], &p);
            let length = self.req_num(d, "length", &p);
            let width = self.req_num(d, "width", &p);
            let mut ok = true;
            let height = self.opt_num(d, "height", &p, &mut ok);
            ok.then_some(())?;
            Some(Dimensions {
                length: length?,
                width: width?,
                height,
            })
        });
        let speed_range = self
            .req(m, "speed_range", path)
            .and_then(|v| self.range(v, &join(path, "speed_range")));
        let collision_dynamics = match m.get("collision_dynamics") {
            None => Some(None),
            Some(v) => self.obj(v, &join(path, "collision_dynamics")).cloned().map(Some),
        };
        let steering_wheel_positions = match m.get("steering_wheel_positions") {
            None => Some(None),
            Some(v) => {
                let p = join(path, "steering_wheel_positions");
                self.arr(v, &p).and_then(|a| {
                    let mut out = Vec::with_capacity(a.len());
                    let mut ok = true;
                    for (i, x) in a.iter().enumerate() {
                        match self.fixed_nums::<2>(x, &join(&p, &i.to_string())) {
                            Some([t, angle]) => out.push(SteeringSample { t, angle }),
                            None => ok = false,
                        }
                    }
                    ok.then_some(Some(out))
                })
            }
        };
        Some(Participant {
            road_user_type: road_user_type?,
            dimensions: dimensions?,
            speed_range: speed_range?,
            collision_dynamics: collision_dynamics?,
            steering_wheel_positions: steering_wheel_positions?,
        })
    }

    fn events(&mut self, v: &Value, path: &str) -> Option<BTreeMap<String, EventRecord>> {
        let m = self.obj(v, path)?;
        let mut out = BTreeMap::new();
        let mut ok = true;
        for (eid, ev) in m {
            match self.event(ev, &join(path, eid)) {
                Some(e) => {
                    out.insert(eid.clone(), e);
                }
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn event(&mut self, v: &Value, path: &str) -> Option<EventRecord> {
        let m = self.obj(v, path)?;
        self.check_keys(m, &["event_type", "time_interval", "objects"], path);
        let event_type = match m.get("event_type") {
            None => Some(None),
            Some(v) => self.wire(v, &join(path, "event_type")).map(Some),
        };
        let time_interval = self
            .req(m, "time_interval", path)
            .and_then(|v| self.fixed_nums::<2>(v, &join(path, "time_interval")))
            .map(|[a, b]| (a, b));
        let involved = self.req(m, "objects", path).and_then(|v| {
            let p = join(path, "objects");
            let om = self.obj(v, &p)?;
            let mut out = BTreeMap::new();
            let mut ok = true;
            for (pid, iv) in om {
                let ip = join(&p, pid);
                let Some(io) = self.obj(iv, &ip) else {
                    ok = false;
                    continue;
                };
                self.check_keys(io, &["movement_classification"], &ip);
                match io.get("movement_classification") {
                    None => {
                        out.insert(pid.clone(), None);
                    }
                    Some(c) => match self.string(c, &join(&ip, "movement_classification")) {
                        Some(c) => {
                            out.insert(pid.clone(), Some(c));
                        }
                        None => ok = false,
                    },
                }
            }
            ok.then_some(out)
        });
        Some(EventRecord {
            event_type: event_type?,
            time_interval: time_interval?,
            involved: involved?,
        })
    }

    fn frames(&mut self, v: &Value, path: &str) -> Option<Vec<Frame>> {
        let m = self.obj(v, path)?;
        let mut keyed: Vec<(u64, &Value)> = Vec::with_capacity(m.len());
        let mut ok = true;
        for (k, fv) in m {
            match parse_frame_key(k) {
                Some(n) => keyed.push((n, fv)),
                None => {
                    self.err(join(path, k), format!("frame key '{k}' is not a decimal integer"));
                    ok = false;
                }
            }
        }
        if !ok {
            return None;
        }
        keyed.sort_by_key(|(n, _)| *n);
        if keyed.iter().enumerate().any(|(i, (n, _))| *n != i as u64) {
            self.err(path, "non-dense frame keys: frame ids must run 0, 1, 2, ...");
            return None;
        }
        let mut out = Vec::with_capacity(keyed.len());
        for (n, fv) in keyed {
            match self.frame(n, fv, &join(path, &n.to_string())) {
                Some(f) => out.push(f),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn frame(&mut self, frame_id: u64, v: &Value, path: &str) -> Option<Frame> {
        let m = self.obj(v, path)?;
        self.check_keys(m, &["timestamp", "objects", "unobserved_areas"], path);
        let timestamp = self.req_num(m, "timestamp", path);
        let states = self.req(m, "objects", path).and_then(|v| {
            let p = join(path, "objects");
            let om = self.obj(v, &p)?;
            let mut out = BTreeMap::new();
            let mut ok = true;
            for (pid, sv) in om {
                match self.frame_state(sv, &join(&p, pid)) {
                    Some(s) => {
                        out.insert(pid.clone(), s);
                    }
                    None => ok = false,
                }
            }
            ok.then_some(out)
        });
        let unobserved_areas = match m.get("unobserved_areas") {
            None => Some(Vec::new()),
            Some(v) => {
                let p = join(path, "unobserved_areas");
                self.arr(v, &p).and_then(|polys| {
                    let mut out = Vec::with_capacity(polys.len());
                    let mut ok = true;
                    for (i, pv) in polys.iter().enumerate() {
                        let pp = join(&p, &i.to_string());
                        let Some(pts) = self.arr(pv, &pp) else {
                            ok = false;
                            continue;
                        };
                        let mut verts = Vec::with_capacity(pts.len());
                        for (j, pt) in pts.iter().enumerate() {
                            match self.vec2(pt, &join(&pp, &j.to_string())) {
                                Some(v) => verts.push(v),
                                None => ok = false,
                            }
                        }
                        out.push(Polygon2D::new(verts));
                    }
                    ok.then_some(out)
                })
            }
        };
        Some(Frame {
            frame_id,
            timestamp: timestamp?,
            states: states?,
            unobserved_areas: unobserved_areas?,
        })
    }

    fn frame_state(&mut self, v: &Value, path: &str) -> Option<FrameState> {
        let m = self.obj(v, path)?;
        self.check_keys(
            m,
            &[
                "bbox3d",
                "lane_position",
                "world_position",
                "speed",
                "acceleration",
                "yaw_rate",
                "pitch",
                "roll",
                "light_states",
                "speed_limit",
                "traffic_condition",
                "behavior_risk",
                "pairwise_risk",
            ],
            path,
        );
        let bbox3d = self.req(m, "bbox3d", path).and_then(|v| {
            let p = join(path, "bbox3d");
            let b = self.obj(v, &p)?;
            self.check_keys(b, &["center", "extent", "heading"], &p);
            let center = self
                .req(b, "center", &p)
                .and_then(|v| self.fixed_nums::<3>(v, &join(&p, "center")));
            let extent = self
                .req(b, "extent", &p)
                .and_then(|v| self.fixed_nums::<3>(v, &join(&p, "extent")));
            let heading = self.req_num(b, "heading", &p);
            Some(BoundingBox3d {
                center: center?,
                extent: extent?,
                heading: heading?,
            })
        });
        let lane_position = match m.get("lane_position") {
            None => Some(None),
            Some(v) => {
                let p = join(path, "lane_position");
                self.obj(v, &p).and_then(|l| {
                    self.check_keys(l, &["road_id", "lane_id", "s", "t"], &p);
                    let road_id = self
                        .req(l, "road_id", &p)
                        .and_then(|v| self.string(v, &join(&p, "road_id")));
                    let lane_id = self
                        .req(l, "lane_id", &p)
                        .and_then(|v| self.integer(v, &join(&p, "lane_id")));
                    let s = self.req_num(l, "s", &p);
                    let t = self.req_num(l, "t", &p);
                    Some(Some(LanePosition {
                        road_id: road_id?,
                        lane_id: lane_id?,
                        s: s?,
                        t: t?,
                    }))
                })
            }
        };
        let world_position = self
            .req(m, "world_position", path)
            .and_then(|v| self.vec2(v, &join(path, "world_position")));
        let speed = self.req_num(m, "speed", path);
        let mut ok = true;
        let acceleration = self.opt_num(m, "acceleration", path, &mut ok);
        let yaw_rate = self.opt_num(m, "yaw_rate", path, &mut ok);
        let pitch = self.opt_num(m, "pitch", path, &mut ok);
        let roll = self.opt_num(m, "roll", path, &mut ok);
        let speed_limit = self.opt_num(m, "speed_limit", path, &mut ok);
        let light_states = match m.get("light_states") {
            None => Some(None),
            Some(v) => {
                let p = join(path, "light_states");
                self.obj(v, &p).and_then(|lm| {
                    let mut out = BTreeMap::new();
                    let mut ok = true;
                    for (k, b) in lm {
                        match self.boolean(b, &join(&p, k)) {
                            Some(b) => {
                                out.insert(k.clone(), b);
                            }
                            None => ok = false,
                        }
                    }
                    ok.then_some(Some(out))
                })
            }
        };
        let traffic_condition = match m.get("traffic_condition") {
            None => Some(None),
            Some(v) => self.wire(v, &join(path, "traffic_condition")).map(Some),
        };
        let behavior_risk = match m.get("behavior_risk") {
            None => Some(None),
            Some(v) => self.num_map(v, &join(path, "behavior_risk")).map(Some),
        };
        let pairwise_risk = match m.get("pairwise_risk") {
            None => Some(BTreeMap::new()),
            Some(v) => {
                let p = join(path, "pairwise_risk");
                self.obj(v, &p).and_then(|pm| {
                    let mut out = BTreeMap::new();
                    let mut ok = true;
                    for (target, rv) in pm {
                        match self.risk_set(rv, &join(&p, target)) {
                            Some(r) => {
                                out.insert(target.clone(), r);
                            }
                            None => ok = false,
                        }
                    }
                    ok.then_some(out)
                })
            }
        };
        ok.then_some(())?;
        Some(FrameState {
            bbox3d: bbox3d?,
            lane_position: lane_position?,
            world_position: world_position?,
            speed: speed?,
            acceleration,
            yaw_rate,
            pitch,
            roll,
            light_states: light_states?,
            speed_limit,
            traffic_condition: traffic_condition?,
            behavior_risk: behavior_risk?,
            pairwise_risk: pairwise_risk?,
        })
    }

    fn num_map(&mut self, v: &Value, path: &str) -> Option<BTreeMap<String, f64>> {
        let m = self.obj(v, path)?;
        let mut out = BTreeMap::new();
        let mut ok = true;
        for (k, x) in m {
            match self.num(x, &join(path, k)) {
                Some(n) => {
                    out.insert(k.clone(), n);
                }
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn risk_set(&mut self, v: &Value, path: &str) -> Option<RiskMeasureSet> {
        let m = self.obj(v, path)?;
        self.check_keys(m, &RiskMeasureSet::NAMES, path);
        let mut ok = true;
        let set = RiskMeasureSet {
            thw: self.opt_num(m, "thw", path, &mut ok),
            dhw: self.opt_num(m, "dhw", path, &mut ok),
            ttc: self.opt_num(m, "ttc", path, &mut ok),
            gttc: self.opt_num(m, "gttc", path, &mut ok),
            pret: self.opt_num(m, "pret", path, &mut ok),
        };
        ok.then_some(set)
    }
}

/// Canonical decimal: no sign, no leading zeros (except "0" itself).
fn parse_frame_key(k: &str) -> Option<u64> {
    if k.is_empty() || !k.bytes().all(|b| b.is_ascii_digit()) || (k.len() > 1 && k.starts_with('0')) {
        return None;
    }
    k.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::parse_frame_key;

    #[test]
    fn frame_keys_must_be_canonical_decimals() {
        assert_eq!(parse_frame_key("0"), Some(0));
        assert_eq!(parse_frame_key("12"), Some(12));
        assert_eq!(parse_frame_key("012"), None);
        assert_eq!(parse_frame_key("-1"), None);
        assert_eq!(parse_frame_key("1.0"), None);
        assert_eq!(parse_frame_key(""), None);
    }
}
