//! Frame-discrete time-space risk measures between ordered participant pairs.
//!
//! * `dhw`/`thw`/`ttc` need a following geometry: same road and lane with the
//!   target ahead, or, without lane positions, the target ahead along the ego
//!   heading with lateral offset below the half-width sum.
//! * `gttc` is the first time both footprints overlap when each participant
//!   keeps its velocity and heading. Oriented rectangles under pure translation
//!   overlap exactly when their projections overlap on all four edge normals,
//!   so the overlap times are an intersection of per-axis intervals.
//! * `pret` is the difference of the arrival times of both reference points at
//!   the crossing point of their straight-line paths.

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::Vec2;
use crate::model::*;

/// Look-ahead beyond which a collision course counts as not critical.
pub const DEFAULT_HORIZON: f64 = 20.0;

/// Slack when intersecting per-axis overlap intervals (s).
const TIME_EPS: f64 = 1e-9;
/// Distance at which reference points count as coincident (m).
const COINCIDENCE_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("scenario is invalid:\n{0}")]
    Validation(ValidationReport),
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneRef {
    pub road_id: String,
    pub lane_id: i64,
    pub s: f64,
}

/// Planar kinematic state of one participant with a rectangular footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub position: Vec2,
    pub velocity: Vec2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
    pub lane: Option<LaneRef>,
}

impl Kinematics {
    pub fn new(position: Vec2, velocity: Vec2, heading: f64, length: f64, width: f64) -> Self {
        Self {
            position,
            velocity,
            heading,
            length,
            width,
            lane: None,
        }
    }

    /// Moving along `heading` at `speed`.
    pub fn moving(position: Vec2, heading: f64, speed: f64, length: f64, width: f64) -> Self {
        Self::new(position, Vec2::from_heading(heading) * speed, heading, length, width)
    }

    pub fn with_lane(mut self, road_id: &str, lane_id: i64, s: f64) -> Self {
        self.lane = Some(LaneRef {
            road_id: road_id.to_string(),
            lane_id,
            s,
        });
        self
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    pub fn from_state(st: &FrameState) -> Self {
        let k = Self::new(
            st.world_position,
            st.velocity(),
            st.bbox3d.heading,
            st.bbox3d.extent[0],
            st.bbox3d.extent[1],
        );
        match &st.lane_position {
            Some(lp) => k.with_lane(&lp.road_id, lp.lane_id, lp.s),
            None => k,
        }
    }

    /// Footprint corners: front-left, front-right, rear-right, rear-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let u = Vec2::from_heading(self.heading) * (self.length / 2.0);
        let n = Vec2::from_heading(self.heading).perp() * (self.width / 2.0);
        let c = self.position;
        [c + u + n, c + u - n, c - u - n, c - u + n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicPair {
    pub ego: Kinematics,
    pub target: Kinematics,
}

impl KinematicPair {
    pub fn new(ego: Kinematics, target: Kinematics) -> Self {
        Self { ego, target }
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.target.clone(), self.ego.clone())
    }
}

/// How participants are represented for `gttc`/`pret`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FootprintMode {
    /// Oriented rectangle of length x width.
    #[default]
    Footprint,
    /// Reference point only.
    ReferencePoint,
}

/// Bumper-to-bumper gap from ego to a target it follows, or `None` when the
/// pair is not in a following geometry.
pub fn following_gap(pair: &KinematicPair) -> Option<f64> {
    let (e, t) = (&pair.ego, &pair.target);
    let half_lengths = (e.length + t.length) / 2.0;
    let center_distance = match (&e.lane, &t.lane) {
        (Some(le), Some(lt)) => {
            if le.road_id != lt.road_id || le.lane_id != lt.lane_id || lt.s <= le.s {
                return None;
            }
            lt.s - le.s
        }
        _ => {
            let dir = Vec2::from_heading(e.heading);
            let d = t.position - e.position;
            let longitudinal = d.dot(dir);
            let lateral = d.cross(dir).abs();
            if longitudinal <= 0.0 || lateral >= (e.width + t.width) / 2.0 {
                return None;
            }
            longitudinal
        }
    };
    Some((center_distance - half_lengths).max(0.0))
}

pub fn dhw(pair: &KinematicPair) -> Option<f64> {
    following_gap(pair)
}

pub fn thw(pair: &KinematicPair) -> Option<f64> {
    let gap = following_gap(pair)?;
    let v = pair.ego.speed();
    (v > 0.0).then(|| gap / v)
}

pub fn ttc(pair: &KinematicPair) -> Option<f64> {
    let gap = following_gap(pair)?;
    let closing = pair.ego.speed() - pair.target.speed();
    (closing > 0.0).then(|| gap / closing)
}

/// Footprint-mode generalized time-to-collision.
pub fn gttc(pair: &KinematicPair, horizon: f64) -> Option<f64> {
    gttc_with(pair, horizon, FootprintMode::Footprint)
}

pub fn gttc_with(pair: &KinematicPair, horizon: f64, mode: FootprintMode) -> Option<f64> {
    match mode {
        FootprintMode::Footprint => first_overlap(&pair.ego, &pair.target, horizon),
        FootprintMode::ReferencePoint => first_coincidence(&pair.ego, &pair.target, horizon),
    }
}

fn first_overlap(e: &Kinematics, t: &Kinematics, horizon: f64) -> Option<f64> {
    let rel_pos = t.position - e.position;
    let rel_vel = t.velocity - e.velocity;
    let (ue, ut) = (Vec2::from_heading(e.heading), Vec2::from_heading(t.heading));
    let axes = [ue, ue.perp(), ut, ut.perp()];
    let radius = |k: &Kinematics, u: Vec2, axis: Vec2| {
        k.length / 2.0 * u.dot(axis).abs() + k.width / 2.0 * u.perp().dot(axis).abs()
    };

    let (mut lo, mut hi) = (0.0_f64, horizon);
    for axis in axes {
        let reach = radius(e, ue, axis) + radius(t, ut, axis);
        let d = rel_pos.dot(axis);
        let rate = rel_vel.dot(axis);
        if rate == 0.0 {
            if d.abs() > reach {
                return None;
            }
            continue;
        }
        let (a, b) = ((-reach - d) / rate, (reach - d) / rate);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
        if lo > hi + TIME_EPS {
            return None;
        }
    }
    Some(lo)
}

fn first_coincidence(e: &Kinematics, t: &Kinematics, horizon: f64) -> Option<f64> {
    let d = t.position - e.position;
    let v = t.velocity - e.velocity;
    let vv = v.dot(v);
    let when = if vv == 0.0 { 0.0 } else { (-d.dot(v) / vv).max(0.0) };
    let miss = (d + v * when).norm();
    (when <= horizon && miss <= COINCIDENCE_EPS).then_some(when)
}

/// Reference-point predicted encroachment time.
pub fn pret(pair: &KinematicPair) -> Option<f64> {
    pret_with(pair, FootprintMode::ReferencePoint)
}

/// In footprint mode each participant occupies the conflict point for its
/// length divided by its speed, and the result is the gap between the two
/// occupation intervals (0 when they overlap).
pub fn pret_with(pair: &KinematicPair, mode: FootprintMode) -> Option<f64> {
    let (e, t) = (&pair.ego, &pair.target);
    let (ve, vt) = (e.velocity, t.velocity);
    let (se, st) = (ve.norm(), vt.norm());
    if se == 0.0 || st == 0.0 {
        return None;
    }
    let cross = ve.cross(vt);
    if cross.abs() <= 1e-12 * se * st {
        return None;
    }
    let d = t.position - e.position;
    let t_ego = d.cross(vt) / cross;
    let t_target = d.cross(ve) / cross;
    if !(t_ego >= 0.0 && t_target >= 0.0) {
        return None;
    }
    let diff = (t_ego - t_target).abs();
    Some(match mode {
        FootprintMode::ReferencePoint => diff,
        FootprintMode::Footprint => {
            (diff - e.length / (2.0 * se) - t.length / (2.0 * st)).max(0.0)
        }
    })
}

/// All measures for one ordered pair.
pub fn risk_measures(pair: &KinematicPair, horizon: f64) -> RiskMeasureSet {
    RiskMeasureSet {
        thw: thw(pair),
        dhw: dhw(pair),
        ttc: ttc(pair),
        gttc: gttc(pair, horizon),
        pret: pret(pair),
    }
}

fn annotate_frame(frame: &mut Frame, horizon: f64) {
    let observed: Vec<(String, Kinematics)> = frame
        .states
        .iter()
        .filter(|(_, st)| !frame.is_unobserved(st.world_position))
        .map(|(pid, st)| (pid.clone(), Kinematics::from_state(st)))
        .collect();
    for st in frame.states.values_mut() {
        st.pairwise_risk.clear();
    }
    for (ego_id, ego) in &observed {
        let st = frame.states.get_mut(ego_id).expect("observed state exists");
        for (target_id, target) in &observed {
            if target_id == ego_id {
                continue;
            }
            let pair = KinematicPair::new(ego.clone(), target.clone());
            st.pairwise_risk
                .insert(target_id.clone(), risk_measures(&pair, horizon));
        }
    }
}

/// Returns a copy of `s` with `pairwise_risk` recomputed for every ordered
/// pair of observed participants in every frame.
///
/// Existing measures are replaced. Pairs where either participant lies in an
/// unobserved area get no entry. Declared dynamic ranges of the risk
/// quantities are widened to cover the new values.
pub fn annotate_scenario(s: &Scenario, horizon: f64) -> Result<Scenario, MetricsError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(MetricsError::InvalidHorizon(horizon));
    }
    let report = validate_scenario(s);
    if !report.is_valid() {
        return Err(MetricsError::Validation(report));
    }
    let mut out = s.clone();
    out.frames
        .par_iter_mut()
        .for_each(|f| annotate_frame(f, horizon));

    for frame in &out.frames {
        for st in frame.states.values() {
            for risk in st.pairwise_risk.values() {
                for (name, v) in risk.entries() {
                    if let Some(v) = v {
                        out.metadata
                            .dynamic_ranges
                            .entry(name.to_string())
                            .and_modify(|r| r.include(v))
                            .or_insert(ValueRange::new(v, v));
                    }
                }
            }
        }
    }
    Ok(out)
}
