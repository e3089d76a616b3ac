//! Deterministic microscopic traffic simulation.
//!
//! Car following uses the Wiedemann-99 regime model with constants CC0 to
//! CC9 and no stochastic terms; lane changing is a gap-acceptance rule that
//! moves a vehicle to an adjacent lane promising a higher speed. Desired
//! speeds are drawn once per vehicle from a truncated class Gaussian, using a
//! ChaCha20 stream per vehicle index so draws do not depend on iteration order.
//!
//! Positions `s` are front-bumper coordinates along the lane; gaps are bumper
//! to bumper. Integration is semi-implicit Euler with speeds clamped at zero.

mod export;
mod params;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

pub use export::{trace_to_scenario, LANE_WIDTH};
pub use params::{
    InitialVehicle, Inflow, LaneChangeParams, ModelParams, RoadConfig, RoadKind, SimConfig,
    SpeedDistribution, VehicleClass,
};

/// Minimum time between two lane changes of one vehicle (s).
pub const LANE_CHANGE_COOLDOWN: f64 = 5.0;
/// Time over which the lateral offset of a lane change decays (s).
pub const LANE_CHANGE_DURATION: f64 = 2.0;
/// Leaders farther ahead than this do not limit a lane's anticipated speed (m).
pub const LOOKAHEAD: f64 = 200.0;
/// Speed at which the free acceleration reaches `cc9` (80 km/h).
const CC9_SPEED: f64 = 80.0 / 3.6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("infeasible density in lane {lane}: vehicles need {needed:.1} m but the lane is {available:.1} m long")]
    InfeasibleDensity {
        lane: u32,
        needed: f64,
        available: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleInfo {
    pub label: String,
    pub class: VehicleClass,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub desired_speed: f64,
    pub max_decel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleSnapshot {
    pub vehicle: usize,
    pub lane: u32,
    pub s: f64,
    pub speed: f64,
    /// Acceleration applied over the following step.
    pub acceleration: f64,
    /// Lateral offset from the lane centre, positive towards lower lane indices (m).
    pub lateral: f64,
    /// Bumper gap to the leader in the same lane.
    pub gap: Option<f64>,
    pub leader: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub t: f64,
    pub vehicles: Vec<VehicleSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaneChangeRecord {
    pub t: f64,
    pub vehicle: usize,
    pub from: u32,
    pub to: u32,
}

/// A negative bumper gap after a step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionRecord {
    pub t: f64,
    pub follower: usize,
    pub leader: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    pub road: RoadConfig,
    pub dt: f64,
    pub seed: u64,
    pub cc0: f64,
    pub vehicles: Vec<VehicleInfo>,
    pub steps: Vec<TraceStep>,
    pub lane_changes: Vec<LaneChangeRecord>,
    pub collisions: Vec<CollisionRecord>,
}

impl SimTrace {
    /// Trajectory of one vehicle as (t, snapshot) pairs.
    pub fn track(&self, vehicle: usize) -> impl Iterator<Item = (f64, &VehicleSnapshot)> {
        self.steps.iter().filter_map(move |st| {
            st.vehicles
                .iter()
                .find(|v| v.vehicle == vehicle)
                .map(|v| (st.t, v))
        })
    }

    pub fn final_step(&self) -> &TraceStep {
        self.steps.last().expect("a trace records at least t = 0")
    }
}

/// Minimal constant deceleration of the rear vehicle that keeps the gap at or
/// above `cc0`, the front vehicle holding its speed. `closing_speed` is rear
/// minus front speed. Infinite when the gap is already at `cc0` or below
/// while closing.
pub fn required_deceleration(gap: f64, closing_speed: f64, cc0: f64) -> f64 {
    if closing_speed <= 0.0 {
        return 0.0;
    }
    let room = gap - cc0;
    if room <= 0.0 {
        return f64::INFINITY;
    }
    closing_speed * closing_speed / (2.0 * room)
}

/// Desired speed of vehicle `index`: class Gaussian truncated to
/// `[0.5 mean, 1.5 mean]` by rejection, from the vehicle's own stream.
pub fn draw_desired_speed(seed: u64, index: u64, dist: SpeedDistribution) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    loop {
        let z: f64 = StandardNormal.sample(&mut rng);
        let v = dist.mean + dist.std * z;
        if v >= 0.5 * dist.mean && v <= 1.5 * dist.mean {
            return v;
        }
    }
}

/// Independent seed number `index` derived from `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone)]
struct Vehicle {
    length: f64,
    vdes: f64,
    max_decel: f64,
    lane: u32,
    s: f64,
    v: f64,
    a: f64,
    lateral: f64,
    last_change: f64,
    active: bool,
}

/// Wiedemann-99 acceleration. `leader` is (bumper gap, speed, acceleration).
fn w99_acceleration(
    p: &ModelParams,
    v: f64,
    vdes: f64,
    prev_a: f64,
    leader: Option<(f64, f64, f64)>,
    dt: f64,
) -> f64 {
    let a_max = p.cc8 + (p.cc9 - p.cc8) * v.min(CC9_SPEED) / CC9_SPEED;
    let free = (vdes - v) / dt;
    let Some((dx, vl, al)) = leader else {
        return a_max.min(free);
    };
    let dv = vl - v;
    let v_slower = if dv >= 0.0 { v } else { vl };
    let sdxc = p.cc0 + p.cc1 * v_slower;
    let sdxo = sdxc + p.cc2;
    let sdxv = sdxo + p.cc3 * (dv - p.cc4);
    let sdv = p.cc6 * dx * dx / 10_000.0;
    let sdvc = if v > 0.0 { p.cc4 - sdv } else { 0.0 };
    let sdvo = if vl > p.cc5 { sdv + p.cc5 } else { sdv };

    let a = if dv < sdvo && dx <= sdxc {
        // Closer than the safe distance: decelerate to increase the gap.
        let mut a: f64 = 0.0;
        if dv < 0.0 {
            a = if dx > p.cc0 {
                (al + dv * dv / (p.cc0 - dx)).min(0.0)
            } else {
                (al + 0.5 * (dv - sdvo)).min(0.0)
            };
        }
        a.min(-p.cc7)
    } else if dv < sdvc && dx < sdxv {
        // Approaching: decelerate towards the safe distance.
        0.5 * dv * dv / (sdxc - dx - 0.1)
    } else if dv < sdvo && dx < sdxo {
        // Unconscious following: keep the sign of the last acceleration.
        if prev_a <= 0.0 {
            -p.cc7
        } else {
            p.cc7.min(a_max)
        }
    } else if dx > sdxc {
        if dx < sdxo {
            (dv * dv / (sdxo - dx)).min(a_max)
        } else {
            a_max
        }
    } else {
        0.0
    };
    a.min(free)
}

/// Vehicle index and bumper gap.
type Neighbour = (usize, f64);

struct Engine<'a> {
    p: &'a ModelParams,
    cfg: &'a SimConfig,
    veh: Vec<Vehicle>,
    info: Vec<VehicleInfo>,
    lanes: Vec<Vec<usize>>,
    t: f64,
}

impl Engine<'_> {
    fn ring_length(&self) -> Option<f64> {
        (self.cfg.road.kind == RoadKind::Ring).then_some(self.cfg.road.length)
    }

    fn sort_lanes(&mut self) {
        for l in &mut self.lanes {
            l.clear();
        }
        for (i, v) in self.veh.iter().enumerate() {
            if v.active {
                self.lanes[v.lane as usize].push(i);
            }
        }
        let veh = &self.veh;
        for l in &mut self.lanes {
            l.sort_by(|&a, &b| veh[a].s.total_cmp(&veh[b].s).then(a.cmp(&b)));
        }
    }

    /// Bumper gap from a front bumper at `s` to the rear of vehicle `lead`.
    fn gap_to(&self, s: f64, lead: usize, wrapped: bool) -> f64 {
        let mut d = self.veh[lead].s - self.veh[lead].length - s;
        if wrapped {
            d += self.ring_length().unwrap_or(0.0);
        }
        d
    }

    /// Leader of vehicle `i` in its own lane with the bumper gap.
    fn leader(&self, i: usize) -> Option<(usize, f64)> {
        let list = &self.lanes[self.veh[i].lane as usize];
        let pos = list.iter().position(|&j| j == i)?;
        if pos + 1 < list.len() {
            let j = list[pos + 1];
            Some((j, self.gap_to(self.veh[i].s, j, false)))
        } else if self.ring_length().is_some() && list.len() > 1 {
            let j = list[0];
            Some((j, self.gap_to(self.veh[i].s, j, true)))
        } else {
            None
        }
    }

    /// Would-be leader and follower of vehicle `i` if it were in `lane`,
    /// each with its bumper gap.
    fn neighbours_in(&self, i: usize, lane: u32) -> (Option<Neighbour>, Option<Neighbour>) {
        let me = &self.veh[i];
        let list: Vec<usize> = self.lanes[lane as usize]
            .iter()
            .copied()
            .filter(|&j| j != i)
            .collect();
        if list.is_empty() {
            return (None, None);
        }
        let p = list.partition_point(|&j| self.veh[j].s < me.s);
        let ring = self.ring_length();
        let lead = if p < list.len() {
            Some((list[p], self.gap_to(me.s, list[p], false)))
        } else {
            ring.map(|_| (list[0], self.gap_to(me.s, list[0], true)))
        };
        let lag_gap = |j: usize, wrapped: bool| {
            let mut d = me.s - me.length - self.veh[j].s;
            if wrapped {
                d += ring.unwrap_or(0.0);
            }
            d
        };
        let lag = if p > 0 {
            Some((list[p - 1], lag_gap(list[p - 1], false)))
        } else {
            ring.map(|_| (list[list.len() - 1], lag_gap(list[list.len() - 1], true)))
        };
        (lead, lag)
    }

    fn anticipated_speed(&self, i: usize, lead: Option<(usize, f64)>) -> f64 {
        let vdes = self.veh[i].vdes;
        match lead {
            Some((j, gap)) if gap <= LOOKAHEAD => vdes.min(self.veh[j].v),
            _ => vdes,
        }
    }

    fn lane_change_phase(&mut self, log: &mut Vec<LaneChangeRecord>) {
        let lc = self.p.lane_change;
        let n_lanes = self.cfg.road.lanes;
        for i in 0..self.veh.len() {
            let v = &self.veh[i];
            if !v.active
                || v.vdes - v.v <= lc.speed_advantage_threshold
                || self.t - v.last_change < LANE_CHANGE_COOLDOWN
            {
                continue;
            }
            let current = self.anticipated_speed(i, self.leader(i));
            let from = v.lane;
            let mut best: Option<(u32, f64)> = None;
            // Higher target lane index wins ties.
            for to in [from.checked_sub(1), Some(from + 1).filter(|l| *l < n_lanes)]
                .into_iter()
                .flatten()
            {
                let (lead, lag) = self.neighbours_in(i, to);
                if lead.is_some_and(|(_, g)| g < lc.min_gap_lead)
                    || lag.is_some_and(|(_, g)| g < lc.min_gap_lag)
                {
                    continue;
                }
                let target = self.anticipated_speed(i, lead);
                if target > current + lc.speed_advantage_threshold
                    && best.is_none_or(|(_, b)| target >= b)
                {
                    best = Some((to, target));
                }
            }
            if let Some((to, _)) = best {
                let veh = &mut self.veh[i];
                veh.lane = to;
                veh.last_change = self.t;
                veh.lateral += (to as f64 - from as f64) * LANE_WIDTH;
                self.lanes[from as usize].retain(|&j| j != i);
                let veh = &self.veh;
                let list = &mut self.lanes[to as usize];
                let p = list.partition_point(|&j| {
                    veh[j].s.total_cmp(&veh[i].s).then(j.cmp(&i)).is_lt()
                });
                list.insert(p, i);
                log.push(LaneChangeRecord {
                    t: self.t,
                    vehicle: i,
                    from,
                    to,
                });
            }
        }
    }

    fn acceleration_phase(&mut self) -> Vec<Option<(usize, f64)>> {
        let leaders: Vec<Option<(usize, f64)>> = (0..self.veh.len())
            .map(|i| if self.veh[i].active { self.leader(i) } else { None })
            .collect();
        let accels: Vec<f64> = (0..self.veh.len())
            .map(|i| {
                let v = &self.veh[i];
                if !v.active {
                    return 0.0;
                }
                let lead = leaders[i].map(|(j, gap)| (gap, self.veh[j].v, self.veh[j].a));
                let a = w99_acceleration(self.p, v.v, v.vdes, v.a, lead, self.cfg.dt).max(-v.max_decel);
                // Speeds never go negative, so the applied acceleration is capped too.
                a.max(-v.v / self.cfg.dt)
            })
            .collect();
        for (v, a) in self.veh.iter_mut().zip(accels) {
            v.a = a;
        }
        leaders
    }

    fn snapshot(&self, leaders: &[Option<(usize, f64)>]) -> TraceStep {
        let vehicles = self
            .veh
            .iter()
            .enumerate()
            .filter(|(_, v)| v.active)
            .map(|(i, v)| VehicleSnapshot {
                vehicle: i,
                lane: v.lane,
                s: v.s,
                speed: v.v,
                acceleration: v.a,
                lateral: v.lateral,
                gap: leaders[i].map(|(_, g)| g),
                leader: leaders[i].map(|(j, _)| j),
            })
            .collect();
        TraceStep { t: self.t, vehicles }
    }

    fn integrate(&mut self) {
        let dt = self.cfg.dt;
        let decay = LANE_WIDTH / LANE_CHANGE_DURATION * dt;
        let ring = self.ring_length();
        for v in self.veh.iter_mut().filter(|v| v.active) {
            v.v = (v.v + v.a * dt).max(0.0);
            v.s += v.v * dt;
            if let Some(l) = ring {
                v.s = v.s.rem_euclid(l);
            }
            v.lateral = if v.lateral.abs() <= decay {
                0.0
            } else {
                v.lateral - decay * v.lateral.signum()
            };
        }
        if ring.is_none() {
            let end = self.cfg.road.length;
            for v in self.veh.iter_mut().filter(|v| v.active) {
                if v.s - v.length > end {
                    v.active = false;
                }
            }
        }
    }

    fn detect_collisions(&self, log: &mut Vec<CollisionRecord>) {
        for list in &self.lanes {
            for &i in list {
                if let Some((j, gap)) = self.leader(i) {
                    if gap < 0.0 {
                        log.push(CollisionRecord {
                            t: self.t,
                            follower: i,
                            leader: j,
                            gap,
                        });
                    }
                }
            }
        }
    }
}

fn initial_vehicles(cfg: &SimConfig, p: &ModelParams) -> Result<Vec<InitialVehicle>, ConfigError> {
    if !cfg.initial.is_empty() {
        return Ok(cfg.initial.clone());
    }
    let total: usize = cfg.vehicles.values().sum();
    if total == 0 {
        return Ok(Vec::new());
    }
    // Interleave classes so each prefix keeps the configured proportions.
    let mut assigned: Vec<(VehicleClass, usize, usize)> =
        cfg.vehicles.iter().map(|(c, n)| (*c, *n, 0)).collect();
    let mut classes = Vec::with_capacity(total);
    for k in 0..total {
        let (idx, _) = assigned
            .iter()
            .enumerate()
            .map(|(idx, (_, n, got))| (idx, (*n * (k + 1)) as f64 / total as f64 - *got as f64))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        assigned[idx].2 += 1;
        classes.push(assigned[idx].0);
    }
    let lanes = cfg.road.lanes as usize;
    let longest = classes.iter().map(|c| c.length()).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(total);
    for lane in 0..lanes {
        let members: Vec<VehicleClass> = classes.iter().copied().skip(lane).step_by(lanes).collect();
        if members.is_empty() {
            continue;
        }
        let n = members.len() as f64;
        let spacing = cfg.road.length / n;
        let needed = n * (longest + p.cc0);
        if needed > cfg.road.length {
            return Err(ConfigError::InfeasibleDensity {
                lane: lane as u32,
                needed,
                available: cfg.road.length,
            });
        }
        let safe_speed = ((spacing - longest - p.cc0) / p.cc1).max(0.0);
        let offset = spacing * lane as f64 / lanes as f64;
        for (j, class) in members.into_iter().enumerate() {
            let desired = p.desired_of(class)?;
            out.push(InitialVehicle {
                class,
                lane: lane as u32,
                s: offset + j as f64 * spacing + class.length(),
                speed: safe_speed.min(desired.mean),
                desired_speed: None,
                label: None,
            });
        }
    }
    // Vehicle indices follow the interleaved class sequence.
    let mut ordered: Vec<InitialVehicle> = Vec::with_capacity(total);
    let mut per_lane: Vec<std::collections::VecDeque<InitialVehicle>> = vec![Default::default(); lanes];
    for v in out {
        per_lane[v.lane as usize].push_back(v);
    }
    for k in 0..total {
        ordered.push(per_lane[k % lanes].pop_front().expect("lane sizes match"));
    }
    Ok(ordered)
}

fn check_overlaps(cfg: &SimConfig, p: &ModelParams, veh: &[Vehicle]) -> Result<(), ConfigError> {
    let mut e = Engine {
        p,
        cfg,
        veh: veh.to_vec(),
        info: Vec::new(),
        lanes: vec![Vec::new(); cfg.road.lanes as usize],
        t: 0.0,
    };
    e.sort_lanes();
    for lane in 0..cfg.road.lanes as usize {
        for &i in &e.lanes[lane] {
            if let Some((j, gap)) = e.leader(i) {
                if gap < 0.0 {
                    return Err(ConfigError::InvalidConfig(format!(
                        "initial vehicles {i} and {j} overlap in lane {lane}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Runs one simulation. Deterministic in `(cfg, params)`.
pub fn simulate(cfg: &SimConfig, params: &ModelParams) -> Result<SimTrace, ConfigError> {
    params.validate()?;
    cfg.validate()?;
    let stride = cfg.record_stride()?;
    let ring = cfg.road.kind == RoadKind::Ring;
    let mut veh = Vec::new();
    let mut info = Vec::new();
    for (i, iv) in initial_vehicles(cfg, params)?.into_iter().enumerate() {
        let dims = iv.class.dimensions();
        let vdes = match iv.desired_speed {
            Some(d) => d,
            None => draw_desired_speed(cfg.seed, i as u64, params.desired_of(iv.class)?),
        };
        let max_decel = params.max_decel_of(iv.class)?;
        if !ring && !(iv.s >= dims[0] && iv.s - dims[0] <= cfg.road.length) {
            return Err(ConfigError::InvalidConfig(format!(
                "vehicle {i} lies outside the road [0, {}]",
                cfg.road.length
            )));
        }
        let s = if ring { iv.s.rem_euclid(cfg.road.length) } else { iv.s };
        veh.push(Vehicle {
            length: dims[0],
            vdes,
            max_decel,
            lane: iv.lane,
            s,
            v: iv.speed,
            a: 0.0,
            lateral: 0.0,
            last_change: f64::NEG_INFINITY,
            active: true,
        });
        info.push(VehicleInfo {
            label: iv.label.clone().unwrap_or_else(|| format!("V{i:03}")),
            class: iv.class,
            length: dims[0],
            width: dims[1],
            height: dims[2],
            desired_speed: vdes,
            max_decel,
        });
    }
    check_overlaps(cfg, params, &veh)?;
    if let Some(inflow) = cfg.road.inflow {
        for c in VehicleClass::ALL {
            if c == VehicleClass::Truck && inflow.truck_share == 0.0 {
                continue;
            }
            if c == VehicleClass::Car && inflow.truck_share == 1.0 {
                continue;
            }
            params.desired_of(c)?;
            params.max_decel_of(c)?;
        }
    }

    let mut engine = Engine {
        p: params,
        cfg,
        veh,
        info,
        lanes: vec![Vec::new(); cfg.road.lanes as usize],
        t: 0.0,
    };
    let mut inflow = cfg.road.inflow.map(|f| InflowState::new(cfg, f));
    let mut steps = Vec::new();
    let mut lane_changes = Vec::new();
    let mut collisions = Vec::new();
    let n = cfg.n_steps();
    for k in 0..=n {
        engine.t = k as f64 * cfg.dt;
        engine.sort_lanes();
        if cfg.lane_changes && cfg.road.lanes > 1 {
            engine.lane_change_phase(&mut lane_changes);
        }
        let leaders = engine.acceleration_phase();
        if k % stride == 0 || k == n {
            steps.push(engine.snapshot(&leaders));
        }
        if k == n {
            break;
        }
        engine.integrate();
        engine.t = (k + 1) as f64 * cfg.dt;
        engine.sort_lanes();
        engine.detect_collisions(&mut collisions);
        if let Some(state) = inflow.as_mut() {
            state.admit(&mut engine)?;
        }
    }
    Ok(SimTrace {
        road: cfg.road,
        dt: cfg.dt,
        seed: cfg.seed,
        cc0: params.cc0,
        vehicles: engine.info,
        steps,
        lane_changes,
        collisions,
    })
}

/// Per-lane entry timers and class draws for an open road.
struct InflowState {
    inflow: Inflow,
    timers: Vec<f64>,
    rngs: Vec<ChaCha20Rng>,
}

impl InflowState {
    fn new(cfg: &SimConfig, inflow: Inflow) -> Self {
        let rngs = (0..cfg.road.lanes)
            .map(|lane| {
                let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
                rng.set_stream(u64::MAX - lane as u64);
                rng
            })
            .collect();
        Self {
            inflow,
            timers: vec![0.0; cfg.road.lanes as usize],
            rngs,
        }
    }

    fn admit(&mut self, e: &mut Engine) -> Result<(), ConfigError> {
        let period = 1.0 / self.inflow.rate;
        for lane in 0..e.cfg.road.lanes {
            let l = lane as usize;
            self.timers[l] += e.cfg.dt;
            if self.timers[l] + 1e-12 < period {
                continue;
            }
            let u = (self.rngs[l].next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            let class = if u < self.inflow.truck_share {
                VehicleClass::Truck
            } else {
                VehicleClass::Car
            };
            let index = e.veh.len();
            let vdes = draw_desired_speed(e.cfg.seed, index as u64, e.p.desired_of(class)?);
            let dims = class.dimensions();
            let last = e.lanes[l].first().copied();
            let speed = match last {
                Some(j) if e.veh[j].s - e.veh[j].length < LOOKAHEAD => vdes.min(e.veh[j].v),
                _ => vdes,
            };
            let room = last.map_or(f64::INFINITY, |j| e.veh[j].s - e.veh[j].length - dims[0]);
            if room < e.p.cc0 + e.p.cc1 * speed {
                // Blocked entries retry on the next step.
                continue;
            }
            self.timers[l] -= period;
            let max_decel = e.p.max_decel_of(class)?;
            e.veh.push(Vehicle {
                length: dims[0],
                vdes,
                max_decel,
                lane,
                s: dims[0],
                v: speed,
                a: 0.0,
                lateral: 0.0,
                last_change: f64::NEG_INFINITY,
                active: true,
            });
            e.info.push(VehicleInfo {
                label: format!("V{index:03}"),
                class,
                length: dims[0],
                width: dims[1],
                height: dims[2],
                desired_speed: vdes,
                max_decel,
            });
            e.lanes[l].insert(0, index);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lone(class: VehicleClass, lane: u32, s: f64, speed: f64, vdes: Option<f64>) -> InitialVehicle {
        InitialVehicle {
            class,
            lane,
            s,
            speed,
            desired_speed: vdes,
            label: None,
        }
    }

    #[test]
    fn required_deceleration_formula() {
        assert_eq!(required_deceleration(26.5, 10.0, 1.5), 2.0);
        assert_eq!(required_deceleration(10.0, -1.0, 1.5), 0.0);
        assert_eq!(required_deceleration(10.0, 0.0, 1.5), 0.0);
        assert_eq!(required_deceleration(1.5, 3.0, 1.5), f64::INFINITY);
    }

    #[test]
    fn free_flow_reaches_desired_speed() {
        let cfg = SimConfig::open(1, 5000.0, vec![lone(VehicleClass::Car, 0, 10.0, 0.0, None)], 0.1, 60.0, 7);
        let trace = simulate(&cfg, &ModelParams::default()).unwrap();
        let vdes = trace.vehicles[0].desired_speed;
        let last = &trace.final_step().vehicles[0];
        assert!((last.speed - vdes).abs() < 0.1, "{} vs {vdes}", last.speed);
    }

    #[test]
    fn desired_speed_is_truncated_and_stream_local() {
        let d = SpeedDistribution { mean: 10.0, std: 100.0 };
        for i in 0..200 {
            let v = draw_desired_speed(3, i, d);
            assert!((5.0..=15.0).contains(&v));
        }
        assert_eq!(draw_desired_speed(3, 17, d), draw_desired_speed(3, 17, d));
        assert_ne!(draw_desired_speed(3, 17, d), draw_desired_speed(3, 18, d));
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }

    #[test]
    fn overfull_ring_is_infeasible() {
        let cfg = SimConfig::ring(1, 100.0, &[(VehicleClass::Car, 20)], 0.1, 10.0, 1);
        assert!(matches!(
            simulate(&cfg, &ModelParams::default()),
            Err(ConfigError::InfeasibleDensity { .. })
        ));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let p = ModelParams {
            cc0: 0.0,
            ..Default::default()
        };
        let cfg = SimConfig::ring(1, 1000.0, &[(VehicleClass::Car, 2)], 0.1, 10.0, 1);
        assert!(matches!(simulate(&cfg, &p), Err(ConfigError::InvalidParams(_))));
        let mut cfg2 = cfg.clone();
        cfg2.dt = 0.6;
        assert!(matches!(
            simulate(&cfg2, &ModelParams::default()),
            Err(ConfigError::InvalidConfig(_))
        ));
        let mut p = ModelParams::default();
        p.lane_change.min_gap_lag = 1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn named_parameters_round_trip() {
        let mut p = ModelParams::default();
        assert_eq!(p.get("truck.std"), Some(1.5));
        p.set("car.mean", 30.0).unwrap();
        p.set("cc7", 0.3).unwrap();
        p.set("lane_change.min_gap_lag", 12.0).unwrap();
        assert_eq!(p.desired_speed[&VehicleClass::Car].mean, 30.0);
        assert_eq!(p.get("cc7"), Some(0.3));
        assert_eq!(p.lane_change.min_gap_lag, 12.0);
        assert!(p.set("bus.mean", 1.0).is_err());
        assert_eq!(p.get("cc10"), None);
    }

    #[test]
    fn ring_wraps_positions_and_keeps_classes_interleaved() {
        let cfg = SimConfig::ring(2, 1000.0, &[(VehicleClass::Car, 6), (VehicleClass::Truck, 2)], 0.2, 30.0, 5);
        let trace = simulate(&cfg, &ModelParams::default()).unwrap();
        assert_eq!(trace.vehicles.len(), 8);
        let trucks: Vec<usize> = (0..8).filter(|&i| trace.vehicles[i].class == VehicleClass::Truck).collect();
        assert_eq!(trucks.len(), 2);
        for st in &trace.steps {
            for v in &st.vehicles {
                assert!((0.0..1000.0).contains(&v.s));
                assert!(v.speed >= 0.0);
            }
        }
        assert!(trace.collisions.is_empty());
    }

    #[test]
    fn open_road_inflow_admits_and_drops_vehicles() {
        let mut cfg = SimConfig::open(1, 400.0, Vec::new(), 0.2, 60.0, 9);
        cfg.road.inflow = Some(Inflow {
            rate: 0.5,
            truck_share: 0.2,
        });
        let trace = simulate(&cfg, &ModelParams::default()).unwrap();
        assert!(trace.vehicles.len() > 10);
        let last = trace.final_step();
        assert!(last.vehicles.len() < trace.vehicles.len());
        assert!(trace.collisions.is_empty());
    }
}
