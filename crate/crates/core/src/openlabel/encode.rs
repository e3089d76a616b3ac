use std::collections::BTreeMap;

use chrono::SecondsFormat;
use serde_json::{Map, Number, Value};

use crate::geometry::Vec2;
use crate::model::*;

use super::SerializeError;

type Result<T> = std::result::Result<T, SerializeError>;

pub(crate) fn num(x: f64, path: &str) -> Result<Value> {
    Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| SerializeError::NonFinite(path.to_string()))
}

fn nums(xs: &[f64], path: &str) -> Result<Value> {
    xs.iter()
        .map(|x| num(*x, path))
        .collect::<Result<Vec<_>>>()
        .map(Value::Array)
}

fn vec2(v: Vec2, path: &str) -> Result<Value> {
    nums(&[v.x, v.y], path)
}

fn s(x: &str) -> Value {
    Value::String(x.to_string())
}

#[derive(Default)]
struct Obj(Map<String, Value>);

impl Obj {
    fn put(&mut self, k: &str, v: Value) -> &mut Self {
        self.0.insert(k.to_string(), v);
        self
    }

    fn put_opt_num(&mut self, k: &str, v: Option<f64>, path: &str) -> Result<&mut Self> {
        if let Some(v) = v {
            self.put(k, num(v, &format!("{path}.{k}"))?);
        }
        Ok(self)
    }

    fn done(self) -> Value {
        Value::Object(self.0)
    }
}

pub(crate) fn document(sc: &Scenario) -> Result<Value> {
    let root = "$.openlabel";
    let mut ol = Obj::default();
    ol.put("metadata", metadata(&sc.metadata, &format!("{root}.metadata"))?);
    ol.put("coordinate_systems", coordinate_systems(&sc.coordinate_systems)?);
    let mut res = Obj::default();
    if let Some(p) = &sc.resources.opendrive_path {
        res.put("opendrive_path", s(p));
    }
    ol.put("resources", res.done());
    if let Some(onts) = &sc.ontology_refs {
        let mut m = Obj::default();
        for (id, o) in onts {
            let mut e = Obj::default();
            if let Some(uri) = &o.uri {
                e.put("uri", s(uri));
            }
            if let Some(b) = &o.boundaries {
                e.put("boundaries", Value::Array(b.iter().map(|x| s(x)).collect()));
            }
            m.put(id, e.done());
        }
        ol.put("ontologies", m.done());
    }
    let mut ctx = Obj::default();
    ctx.put("weather", s(sc.context.weather.as_str()))
        .put("lighting", s(sc.context.lighting.as_str()))
        .put("traffic_condition", s(sc.context.traffic_condition.as_str()))
        .put("road_surface", s(sc.context.road_surface.as_str()));
    let mut contexts = Obj::default();
    contexts.put(&sc.scenario_id, ctx.done());
    ol.put("contexts", contexts.done());

    let mut objects = Obj::default();
    for (pid, p) in &sc.participants {
        objects.put(pid, participant(p, &format!("{root}.objects.{pid}"))?);
    }
    ol.put("objects", objects.done());

    let mut events = Obj::default();
    for (eid, e) in &sc.events {
        events.put(eid, event(e, &format!("{root}.events.{eid}"))?);
    }
    ol.put("events", events.done());

    let mut frames = Obj::default();
    for f in &sc.frames {
        let key = f.frame_id.to_string();
        frames.put(&key, frame(f, &format!("{root}.frames.{key}"))?);
    }
    ol.put("frames", frames.done());

    let mut top = Obj::default();
    top.put("openlabel", ol.done());
    Ok(top.done())
}

pub(crate) fn metadata(m: &ScenarioMetadata, path: &str) -> Result<Value> {
    let mut o = Obj::default();
    o.put(
        "creation_time",
        s(&m.creation_time.to_rfc3339_opts(SecondsFormat::AutoSi, true)),
    )
    .put("acquisition_method", s(m.acquisition_method.as_str()))
    .put("data_use_restrictions", s(&m.data_use_restrictions))
    .put("origin", s(m.origin.as_str()))
    .put("area", s(m.area.as_str()))
    .put(
        "scenario_duration",
        num(m.scenario_duration, &format!("{path}.scenario_duration"))?,
    );
    o.put("dynamic_ranges", ranges(&m.dynamic_ranges, &format!("{path}.dynamic_ranges"))?);
    Ok(o.done())
}

pub(crate) fn ranges(r: &BTreeMap<String, ValueRange>, path: &str) -> Result<Value> {
    let mut o = Obj::default();
    for (q, r) in r {
        o.put(q, nums(&[r.min, r.max], &format!("{path}.{q}"))?);
    }
    Ok(o.done())
}

fn coordinate_systems(cs: &CoordinateSystemSet) -> Result<Value> {
    let path = "$.openlabel.coordinate_systems";
    let mut o = Obj::default();
    o.put("world_epsg", Value::Number(cs.world_epsg.into()));
    let mut origin = Obj::default();
    origin
        .put("longitude", num(cs.local_origin.longitude, path)?)
        .put("latitude", num(cs.local_origin.latitude, path)?);
    o.put("local_origin", origin.done());
    let mut systems = Obj::default();
    for (id, sys) in &cs.systems {
        let sp = format!("{path}.systems.{id}");
        let mut e = Obj::default();
        e.put("type", s(sys.kind.as_str()));
        if let Some(p) = &sys.parent {
            e.put("parent", s(p));
        }
        let mut t = Obj::default();
        t.put("rotation", num(sys.transform.rotation, &sp)?)
            .put("translation", vec2(sys.transform.translation, &sp)?);
        e.put("transform", t.done());
        systems.put(id, e.done());
    }
    o.put("systems", systems.done());
    Ok(o.done())
}

fn participant(p: &Participant, path: &str) -> Result<Value> {
    let mut o = Obj::default();
    o.put("road_user_type", s(p.road_user_type.as_str()));
    let mut d = Obj::default();
    d.put("length", num(p.dimensions.length, path)?)
        .put("width", num(p.dimensions.width, path)?);
    d.put_opt_num("height", p.dimensions.height, path)?;
    o.put("dimensions", d.done());
    o.put("speed_range", nums(&[p.speed_range.min, p.speed_range.max], path)?);
    if let Some(cd) = &p.collision_dynamics {
        o.put("collision_dynamics", Value::Object(cd.clone()));
    }
    if let Some(sw) = &p.steering_wheel_positions {
        let arr = sw
            .iter()
            .map(|x| nums(&[x.t, x.angle], path))
            .collect::<Result<Vec<_>>>()?;
        o.put("steering_wheel_positions", Value::Array(arr));
    }
    Ok(o.done())
}

fn event(e: &EventRecord, path: &str) -> Result<Value> {
    let mut o = Obj::default();
    if let Some(t) = e.event_type {
        o.put("event_type", s(t.as_str()));
    }
    o.put(
        "time_interval",
        nums(&[e.time_interval.0, e.time_interval.1], path)?,
    );
    let mut inv = Obj::default();
    for (pid, class) in &e.involved {
        let mut io = Obj::default();
        if let Some(c) = class {
            io.put("movement_classification", s(c));
        }
        inv.put(pid, io.done());
    }
    o.put("objects", inv.done());
    Ok(o.done())
}

fn frame(f: &Frame, path: &str) -> Result<Value> {
    let mut o = Obj::default();
    o.put("timestamp", num(f.timestamp, &format!("{path}.timestamp"))?);
    let mut objs = Obj::default();
    for (pid, st) in &f.states {
        objs.put(pid, frame_state(st, &format!("{path}.objects.{pid}"))?);
    }
    o.put("objects", objs.done());
    if !f.unobserved_areas.is_empty() {
        let polys = f
            .unobserved_areas
            .iter()
            .map(|poly| {
                poly.vertices
                    .iter()
                    .map(|v| vec2(*v, path))
                    .collect::<Result<Vec<_>>>()
                    .map(Value::Array)
            })
            .collect::<Result<Vec<_>>>()?;
        o.put("unobserved_areas", Value::Array(polys));
    }
    Ok(o.done())
}

fn frame_state(st: &FrameState, path: &str) -> Result<Value> {
    let mut o = Obj::default();
    let mut b = Obj::default();
    b.put("center", nums(&st.bbox3d.center, path)?)
        .put("extent", nums(&st.bbox3d.extent, path)?)
        .put("heading", num(st.bbox3d.heading, path)?);
    o.put("bbox3d", b.done());
    if let Some(lp) = &st.lane_position {
        let mut l = Obj::default();
        l.put("road_id", s(&lp.road_id))
            .put("lane_id", Value::Number(lp.lane_id.into()))
            .put("s", num(lp.s, path)?)
            .put("t", num(lp.t, path)?);
        o.put("lane_position", l.done());
    }
    o.put("world_position", vec2(st.world_position, path)?);
    o.put("speed", num(st.speed, &format!("{path}.speed"))?);
    o.put_opt_num("acceleration", st.acceleration, path)?
        .put_opt_num("yaw_rate", st.yaw_rate, path)?
        .put_opt_num("pitch", st.pitch, path)?
        .put_opt_num("roll", st.roll, path)?
        .put_opt_num("speed_limit", st.speed_limit, path)?;
    if let Some(ls) = &st.light_states {
        let m = ls.iter().map(|(k, v)| (k.clone(), Value::Bool(*v))).collect();
        o.put("light_states", Value::Object(m));
    }
    if let Some(tc) = st.traffic_condition {
        o.put("traffic_condition", s(tc.as_str()));
    }
    if let Some(br) = &st.behavior_risk {
        let mut m = Obj::default();
        for (k, v) in br {
            m.put(k, num(*v, &format!("{path}.behavior_risk.{k}"))?);
        }
        o.put("behavior_risk", m.done());
    }
    if !st.pairwise_risk.is_empty() {
        let mut pr = Obj::default();
        for (target, r) in &st.pairwise_risk {
            let rp = format!("{path}.pairwise_risk.{target}");
            let mut e = Obj::default();
            for (name, v) in r.entries() {
                e.put_opt_num(name, v, &rp)?;
            }
            pr.put(target, e.done());
        }
        o.put("pairwise_risk", pr.done());
    }
    Ok(o.done())
}
