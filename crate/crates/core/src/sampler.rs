//! Critical cut-in sampling.
//!
//! A recorded lane change is the starting point: the cutter (the involved
//! participant whose lane changes), the approacher (the nearest vehicle
//! behind it in the target lane) and the neighbours around them. Each grid
//! point re-places the approacher behind the cutter at the moment the cutter
//! enters the target lane, with a chosen bumper gap and closing speed, and
//! simulates the rest without lane changes. The approacher crashes when the
//! required deceleration at that moment exceeds its class's maximum.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::*;
use crate::sim::{
    required_deceleration, simulate, trace_to_scenario, ConfigError, InitialVehicle, ModelParams,
    SimConfig, SimTrace, VehicleClass,
};

/// Neighbours farther than this from the cutter are not simulated (m).
pub const NEIGHBOUR_RANGE: f64 = 200.0;
/// Free road behind the rearmost vehicle (m).
const REAR_MARGIN: f64 = 10.0;
/// Time tolerance when matching frame timestamps (s).
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("no lane change event '{0}' in the scenario")]
    NoSuchEvent(String),
    #[error("participant '{participant}' has no state with a lane position at t = {t}")]
    MissingStates { participant: String, t: f64 },
    #[error("event '{0}': no involved participant changes lane")]
    NoLaneChange(String),
    #[error("event '{0}': no vehicle behind the cutter in the target lane")]
    NoApproacher(String),
    #[error("participant '{0}' cannot be simulated: {1}")]
    Unsupported(String, String),
    #[error("invalid variation: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Simulation(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioType {
    LaneChangeCutIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariedParameter {
    /// Bumper gap from approacher to cutter when the cutter enters the lane (m).
    CutInGap,
    /// Approacher speed minus cutter speed at that moment (m/s).
    ApproachSpeedDelta,
}

impl VariedParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            VariedParameter::CutInGap => "cut_in_gap",
            VariedParameter::ApproachSpeedDelta => "approach_speed_delta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueSpec {
    List(Vec<f64>),
    /// `n_steps` evenly spaced values from `lo` to `hi` inclusive.
    Grid { lo: f64, hi: f64, n_steps: usize },
    /// As `Grid` over a `dynamic_ranges` entry of the base scenario.
    DynamicRange { from_dynamic_range: String, n_steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variation {
    pub parameter: VariedParameter,
    pub values: ValueSpec,
}

fn default_horizon() -> f64 {
    15.0
}

fn default_dt() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationSpec {
    pub base_scenario_id: String,
    pub scenario_type: ScenarioType,
    /// Lane change event to start from; the first one by id when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_id: Option<String>,
    pub varied: Vec<Variation>,
    #[serde(default)]
    pub params: ModelParams,
    /// Simulated time after the cut-in (s).
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

/// Recorded situation around one lane change, in simulation coordinates:
/// lane `k` is lane id `-(k + 1)` and `s` is the front bumper.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartState {
    pub event_id: String,
    pub road_id: String,
    pub cutter: String,
    pub approacher: String,
    pub target_lane: u32,
    pub t_start: f64,
    /// Involved and neighbouring vehicles at `t_start`.
    pub at_start: Vec<InitialVehicle>,
    /// First frame with the cutter in the target lane.
    pub t_cut_in: f64,
    pub at_cut_in: Vec<InitialVehicle>,
    /// Recorded bumper gap and closing speed at `t_cut_in`.
    pub cut_in_gap: f64,
    pub approach_speed_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalityOutcome {
    pub cut_in_gap: f64,
    pub approach_speed_delta: f64,
    /// Required deceleration of the approacher at the cut-in (m/s²).
    pub a_req: f64,
    pub crashed: bool,
    /// Smallest bumper gap of the approacher to its leader; negative on contact.
    pub min_gap: f64,
    pub min_ttc: Option<f64>,
    #[serde(skip)]
    pub trace: SimTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub base_scenario_id: String,
    pub base_area: Area,
    pub base_context: Context,
    pub start: StartState,
    pub approacher_max_decel: f64,
    /// One outcome per grid point in grid order.
    pub outcomes: Vec<CriticalityOutcome>,
}

fn lane_index(participant: &str, lp: &LanePosition) -> Result<u32, SamplerError> {
    if lp.lane_id >= 0 {
        return Err(SamplerError::Unsupported(
            participant.to_string(),
            format!("lane id {} is not a right-hand lane", lp.lane_id),
        ));
    }
    Ok((-lp.lane_id - 1) as u32)
}

fn class_of(s: &Scenario, pid: &str) -> Result<VehicleClass, SamplerError> {
    let p = s
        .participants
        .get(pid)
        .ok_or_else(|| SamplerError::Unsupported(pid.to_string(), "not a declared participant".into()))?;
    VehicleClass::from_road_user_type(p.road_user_type).ok_or_else(|| {
        SamplerError::Unsupported(pid.to_string(), format!("road user type {}", p.road_user_type.as_str()))
    })
}

fn frame_at(s: &Scenario, t: f64) -> Option<&Frame> {
    s.frames.iter().find(|f| f.timestamp >= t - TIME_EPS)
}

fn lane_state<'a>(frame: &'a Frame, pid: &str) -> Result<(&'a FrameState, &'a LanePosition), SamplerError> {
    frame
        .states
        .get(pid)
        .and_then(|st| st.lane_position.as_ref().map(|lp| (st, lp)))
        .ok_or_else(|| SamplerError::MissingStates {
            participant: pid.to_string(),
            t: frame.timestamp,
        })
}

/// Vehicles on `road_id` within [`NEIGHBOUR_RANGE`] of `centre`, plus every
/// id in `required`, as simulation start states; `s` is the lane centre
/// position shifted to the front bumper of the class footprint.
fn vehicles_in(
    s: &Scenario,
    frame: &Frame,
    road_id: &str,
    centre: f64,
    required: &[&str],
) -> Result<Vec<InitialVehicle>, SamplerError> {
    let mut out = Vec::new();
    for pid in required {
        lane_state(frame, pid)?;
    }
    for (pid, st) in &frame.states {
        let Some(lp) = st.lane_position.as_ref().filter(|lp| lp.road_id == road_id) else {
            continue;
        };
        let needed = required.contains(&pid.as_str());
        if !needed && (lp.s - centre).abs() > NEIGHBOUR_RANGE {
            continue;
        }
        let class = match class_of(s, pid) {
            Ok(c) => c,
            Err(e) if needed => return Err(e),
            Err(_) => continue,
        };
        let lane = match lane_index(pid, lp) {
            Ok(l) => l,
            Err(e) if needed => return Err(e),
            Err(_) => continue,
        };
        out.push(InitialVehicle {
            class,
            lane,
            s: lp.s + class.length() / 2.0,
            speed: st.speed,
            desired_speed: Some(st.speed),
            label: Some(pid.clone()),
        });
    }
    Ok(out)
}

/// Start state of the lane change `event_id`, or of the first lane change
/// event by id.
pub fn extract_start_state(s: &Scenario, event_id: Option<&str>) -> Result<StartState, SamplerError> {
    let (eid, event) = match event_id {
        Some(id) => s
            .events
            .get_key_value(id)
            .filter(|(_, e)| e.event_type == Some(EventType::LaneChange))
            .ok_or_else(|| SamplerError::NoSuchEvent(id.to_string()))?,
        None => s
            .events
            .iter()
            .find(|(_, e)| e.event_type == Some(EventType::LaneChange))
            .ok_or_else(|| SamplerError::NoSuchEvent("<any>".to_string()))?,
    };
    let (t0, t1) = event.time_interval;
    let start = frame_at(s, t0).ok_or(SamplerError::MissingStates {
        participant: event.involved.keys().next().cloned().unwrap_or_default(),
        t: t0,
    })?;
    let involved: Vec<&str> = event.involved.keys().map(String::as_str).collect();
    for pid in &involved {
        lane_state(start, pid)?;
    }

    // The cutter is the first involved participant whose lane changes.
    let mut cut = None;
    'outer: for pid in &involved {
        let (_, lp0) = lane_state(start, pid)?;
        for f in s.frames.iter().filter(|f| f.timestamp >= start.timestamp && f.timestamp <= t1 + TIME_EPS) {
            if let Some(lp) = f.states.get(*pid).and_then(|st| st.lane_position.as_ref()) {
                if lp.road_id == lp0.road_id && lp.lane_id != lp0.lane_id {
                    cut = Some((*pid, f, lp0.road_id.clone()));
                    break 'outer;
                }
            }
        }
    }
    let (cutter, cut_frame, road_id) = cut.ok_or_else(|| SamplerError::NoLaneChange(eid.clone()))?;
    let (c_state, c_lp) = lane_state(cut_frame, cutter)?;
    let target_lane = lane_index(cutter, c_lp)?;

    let approacher = cut_frame
        .states
        .iter()
        .filter(|(pid, _)| pid.as_str() != cutter)
        .filter_map(|(pid, st)| st.lane_position.as_ref().map(|lp| (pid, lp)))
        .filter(|(_, lp)| lp.road_id == road_id && lp.lane_id == c_lp.lane_id && lp.s < c_lp.s)
        .filter(|(pid, _)| class_of(s, pid).is_ok())
        .max_by(|a, b| a.1.s.total_cmp(&b.1.s))
        .map(|(pid, _)| pid.clone())
        .ok_or_else(|| SamplerError::NoApproacher(eid.clone()))?;
    let (a_state, a_lp) = lane_state(cut_frame, &approacher)?;
    lane_state(start, &approacher)?;

    let (c_class, a_class) = (class_of(s, cutter)?, class_of(s, &approacher)?);
    let gap = (c_lp.s - a_lp.s) - (c_class.length() + a_class.length()) / 2.0;

    let (_, c_lp0) = lane_state(start, cutter)?;
    let mut required = involved.clone();
    required.push(approacher.as_str());
    required.sort_unstable();
    required.dedup();
    let at_start = vehicles_in(s, start, &road_id, c_lp0.s, &required)?;
    let at_cut_in = vehicles_in(s, cut_frame, &road_id, c_lp.s, &[cutter, approacher.as_str()])?;
    Ok(StartState {
        event_id: eid.clone(),
        road_id,
        cutter: cutter.to_string(),
        approacher: approacher.clone(),
        target_lane,
        t_start: start.timestamp,
        at_start,
        t_cut_in: cut_frame.timestamp,
        at_cut_in,
        cut_in_gap: gap,
        approach_speed_delta: a_state.speed - c_state.speed,
    })
}

fn grid_values(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, SamplerError> {
    if n < 2 {
        return Err(SamplerError::InvalidSpec(format!("n_steps must be at least 2, got {n}")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(SamplerError::InvalidSpec(format!("grid bounds [{lo}, {hi}] are invalid")));
    }
    Ok((0..n)
        .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect())
}

impl VariationSpec {
    /// Grid points as (cut_in_gap, approach_speed_delta); the first varied
    /// parameter is the outer loop. Unvaried parameters keep their base value.
    pub fn grid(&self, base: &Scenario, start: &StartState) -> Result<Vec<(f64, f64)>, SamplerError> {
        let bad = |m: String| Err(SamplerError::InvalidSpec(m));
        if self.varied.is_empty() {
            return bad("no varied parameters".into());
        }
        let mut axes: Vec<(VariedParameter, Vec<f64>)> = Vec::new();
        for v in &self.varied {
            if axes.iter().any(|(p, _)| *p == v.parameter) {
                return bad(format!("parameter {} varied twice", v.parameter.as_str()));
            }
            let values = match &v.values {
                ValueSpec::List(xs) => xs.clone(),
                ValueSpec::Grid { lo, hi, n_steps } => grid_values(*lo, *hi, *n_steps)?,
                ValueSpec::DynamicRange {
                    from_dynamic_range,
                    n_steps,
                } => {
                    let Some(r) = base.metadata.dynamic_ranges.get(from_dynamic_range) else {
                        return bad(format!("base scenario has no dynamic range '{from_dynamic_range}'"));
                    };
                    grid_values(r.min, r.max, *n_steps)?
                }
            };
            if values.is_empty() {
                return bad(format!("no values for {}", v.parameter.as_str()));
            }
            for x in &values {
                let ok = match v.parameter {
                    VariedParameter::CutInGap => x.is_finite() && *x > 0.0,
                    VariedParameter::ApproachSpeedDelta => x.is_finite(),
                };
                if !ok {
                    return bad(format!("{} = {x} is not physically valid", v.parameter.as_str()));
                }
            }
            axes.push((v.parameter, values));
        }
        let mut points = vec![BTreeMap::new()];
        for (param, values) in &axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |x| {
                        let mut q = p.clone();
                        q.insert(*param, *x);
                        q
                    })
                })
                .collect();
        }
        Ok(points
            .into_iter()
            .map(|p| {
                (
                    p.get(&VariedParameter::CutInGap).copied().unwrap_or(start.cut_in_gap),
                    p.get(&VariedParameter::ApproachSpeedDelta)
                        .copied()
                        .unwrap_or(start.approach_speed_delta),
                )
            })
            .collect())
    }

    fn validate(&self) -> Result<(), SamplerError> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(SamplerError::InvalidSpec(format!("horizon must be positive, got {}", self.horizon)));
        }
        self.params.validate()?;
        Ok(())
    }
}

/// Open-road configuration for one grid point.
pub fn cut_in_config(
    start: &StartState,
    params: &ModelParams,
    gap: f64,
    delta_v: f64,
    horizon: f64,
    dt: f64,
) -> Result<SimConfig, SamplerError> {
    let find = |id: &str| {
        start
            .at_cut_in
            .iter()
            .find(|v| v.label.as_deref() == Some(id))
            .cloned()
            .expect("cutter and approacher are extracted")
    };
    let cutter = find(&start.cutter);
    let mut approacher = find(&start.approacher);
    approacher.speed = cutter.speed + delta_v;
    if approacher.speed < 0.0 {
        return Err(SamplerError::InvalidSpec(format!(
            "approach_speed_delta {delta_v} gives a negative approacher speed"
        )));
    }
    approacher.desired_speed = Some(approacher.speed);
    approacher.s = cutter.s - cutter.class.length() - gap;

    // Neighbours overlapping the pair's stretch of the target lane are dropped.
    let lo = approacher.s - approacher.class.length() - params.cc0;
    let hi = cutter.s + params.cc0;
    let mut vehicles = vec![cutter.clone(), approacher.clone()];
    for v in &start.at_cut_in {
        let id = v.label.as_deref();
        if id == Some(start.cutter.as_str()) || id == Some(start.approacher.as_str()) {
            continue;
        }
        if v.lane == start.target_lane && v.s > lo && v.s - v.class.length() < hi {
            continue;
        }
        vehicles.push(v.clone());
    }
    let rear = vehicles
        .iter()
        .map(|v| v.s - v.class.length())
        .fold(f64::INFINITY, f64::min);
    let shift = REAR_MARGIN - rear;
    for v in &mut vehicles {
        v.s += shift;
    }
    let front = vehicles.iter().map(|v| v.s).fold(0.0, f64::max);
    let vmax = vehicles.iter().map(|v| v.speed).fold(0.0, f64::max);
    let lanes = vehicles.iter().map(|v| v.lane).max().unwrap_or(0) + 1;
    let mut cfg = SimConfig::open(lanes, front + vmax * horizon + 100.0, vehicles, dt, horizon, 0);
    cfg.lane_changes = false;
    Ok(cfg)
}

fn outcome(
    start: &StartState,
    params: &ModelParams,
    max_decel: f64,
    gap: f64,
    delta_v: f64,
    horizon: f64,
    dt: f64,
) -> Result<CriticalityOutcome, SamplerError> {
    let cfg = cut_in_config(start, params, gap, delta_v, horizon, dt)?;
    let trace = simulate(&cfg, params)?;
    let a_req = required_deceleration(gap, delta_v, params.cc0);
    // The approacher is vehicle 1 by construction.
    let mut min_gap = f64::INFINITY;
    let mut min_ttc: Option<f64> = None;
    for step in &trace.steps {
        let Some(a) = step.vehicles.iter().find(|v| v.vehicle == 1) else {
            continue;
        };
        let (Some(g), Some(j)) = (a.gap, a.leader) else {
            continue;
        };
        min_gap = min_gap.min(g);
        let lead_speed = step.vehicles.iter().find(|v| v.vehicle == j).map_or(a.speed, |v| v.speed);
        let closing = a.speed - lead_speed;
        if g > 0.0 && closing > 0.0 {
            let ttc = g / closing;
            min_ttc = Some(min_ttc.map_or(ttc, |m| m.min(ttc)));
        }
    }
    Ok(CriticalityOutcome {
        cut_in_gap: gap,
        approach_speed_delta: delta_v,
        a_req,
        crashed: a_req > max_decel,
        min_gap,
        min_ttc,
        trace,
    })
}

/// Simulates every grid point of `spec` against the base scenario.
pub fn sweep(spec: &VariationSpec, base: &Scenario) -> Result<Sweep, SamplerError> {
    spec.validate()?;
    let start = extract_start_state(base, spec.event_id.as_deref())?;
    let points = spec.grid(base, &start)?;
    let approacher_class = start
        .at_cut_in
        .iter()
        .find(|v| v.label.as_deref() == Some(start.approacher.as_str()))
        .map(|v| v.class)
        .expect("approacher is extracted");
    let max_decel = spec.params.max_decel_of(approacher_class)?;
    let outcomes = points
        .par_iter()
        .map(|&(g, dv)| outcome(&start, &spec.params, max_decel, g, dv, spec.horizon, spec.dt))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sweep {
        base_scenario_id: base.scenario_id.clone(),
        base_area: base.metadata.area,
        base_context: base.context,
        start,
        approacher_max_decel: max_decel,
        outcomes,
    })
}

/// Id of the scenario emitted for grid point `index`.
pub fn sample_id(base_id: &str, index: usize) -> String {
    format!("{base_id}-sample-{index:04}")
}

/// Scenarios for the outcomes with `a_req >= threshold`, each tagged with a
/// cut-in event and the approacher's `a_req` and crash flag as behavior risk
/// at the cut-in frame. A non-finite threshold emits nothing.
pub fn emit_samples(sweep: &Sweep, threshold: f64) -> Vec<(usize, Scenario)> {
    if !threshold.is_finite() {
        return Vec::new();
    }
    let (cutter, approacher) = (&sweep.start.cutter, &sweep.start.approacher);
    sweep
        .outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.a_req >= threshold)
        .map(|(i, o)| {
            let mut s = trace_to_scenario(&o.trace, &sample_id(&sweep.base_scenario_id, i));
            s.metadata.area = sweep.base_area;
            s.context = sweep.base_context;
            let t0 = s.frames[0].timestamp;
            s.events.insert(
                "CI0000".to_string(),
                EventRecord {
                    event_type: Some(EventType::CutIn),
                    time_interval: (t0, t0),
                    involved: BTreeMap::from([
                        (cutter.clone(), Some("cut_in".to_string())),
                        (approacher.clone(), Some("approaching".to_string())),
                    ]),
                },
            );
            let mut risk = BTreeMap::from([("crash".to_string(), if o.crashed { 1.0 } else { 0.0 })]);
            if o.a_req.is_finite() {
                risk.insert("a_req".to_string(), o.a_req);
            }
            if let Some(st) = s.frames[0].states.get_mut(approacher) {
                st.behavior_risk = Some(risk);
            }
            (i, s)
        })
        .collect()
}
