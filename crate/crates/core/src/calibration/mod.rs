//! Likelihood-based calibration of the traffic model.
//!
//! One objective evaluation sets the free parameters, runs `n_sim_repeats`
//! simulations with seeds derived from the configured master seed, extracts
//! the observable from each trace and averages the log-likelihood of the
//! recorded sample under each simulated sample. Nelder-Mead maximizes it.
//! The derived seeds are fixed across evaluations (common random numbers),
//! so the objective is a deterministic function of the parameters.

mod kde;
mod nelder_mead;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{following_gap, KinematicPair, Kinematics};
use crate::model::Scenario;
use crate::sim::{derive_seed, simulate, ConfigError, ModelParams, SimConfig, SimTrace, VehicleClass};

pub use kde::{
    gaussian_log_likelihood, log_likelihood, silverman_bandwidth, Kde, LikelihoodModel,
    BANDWIDTH_FLOOR, DENSITY_FLOOR,
};
pub use nelder_mead::{nelder_mead, NelderMeadOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("empty sample: {0}")]
    EmptySample(String),
    #[error("invalid objective: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Simulation(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Speed (m/s).
    Speed,
    /// Bumper gap to the leader in the same lane (m).
    Gap,
    /// Time headway to the leader in the same lane (s).
    Thw,
}

fn three() -> usize {
    3
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub observable: Observable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_filter: Option<VehicleClass>,
    /// Names accepted by [`ModelParams::get`], e.g. `car.mean`.
    pub free_params: Vec<String>,
    /// `[lo, hi]` per free parameter.
    pub bounds: Vec<[f64; 2]>,
    /// Template; its seed is the master seed of the derived repeat seeds.
    pub sim_config: SimConfig,
    #[serde(default = "three")]
    pub n_sim_repeats: usize,
    /// Samples before this time are discarded (s).
    #[serde(default)]
    pub warmup: f64,
    /// Spacing of samples after the warmup (s).
    #[serde(default = "one")]
    pub sample_interval: f64,
    #[serde(default)]
    pub likelihood: LikelihoodModel,
    /// Sum per-class likelihoods when the recorded data carries classes.
    #[serde(default = "yes")]
    pub stratify: bool,
    #[serde(default)]
    pub optimizer: NelderMeadOptions,
}

impl ObjectiveSpec {
    pub fn validate(&self, params0: &ModelParams) -> Result<(), CalibrationError> {
        let bad = |m: String| Err(CalibrationError::InvalidSpec(m));
        if self.free_params.is_empty() {
            return bad("free_params is empty".into());
        }
        if self.bounds.len() != self.free_params.len() {
            return bad(format!(
                "{} bounds for {} free parameters",
                self.bounds.len(),
                self.free_params.len()
            ));
        }
        for (i, name) in self.free_params.iter().enumerate() {
            if self.free_params[..i].contains(name) {
                return bad(format!("parameter '{name}' listed twice"));
            }
            let Some(v) = params0.get(name) else {
                return bad(format!("unknown parameter '{name}'"));
            };
            let [lo, hi] = self.bounds[i];
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("bounds for '{name}' must be finite with lo < hi"));
            }
            if !(v >= lo && v <= hi) {
                return bad(format!("start value {v} of '{name}' lies outside [{lo}, {hi}]"));
            }
        }
        if self.n_sim_repeats == 0 {
            return bad("n_sim_repeats must be at least 1".into());
        }
        if !(self.warmup.is_finite() && self.warmup >= 0.0) {
            return bad("warmup must be non-negative".into());
        }
        if !(self.sample_interval.is_finite() && self.sample_interval > 0.0) {
            return bad("sample_interval must be positive".into());
        }
        params0.validate()?;
        self.sim_config.validate()?;
        Ok(())
    }
}

/// Recorded data to calibrate against.
// Built once per calibration, so the unboxed scenario costs nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum Recorded {
    Scenario(Scenario),
    /// Observable values without class labels.
    Sample(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub param_names: Vec<String>,
    pub best_params: Vec<f64>,
    pub best_loglik: f64,
    pub n_evals: usize,
    pub n_iterations: usize,
    pub n_shrinks: usize,
    pub converged: bool,
    /// Best objective value so far, once per iteration.
    pub trace: Vec<f64>,
}

impl CalibrationResult {
    pub fn params(&self) -> BTreeMap<String, f64> {
        self.param_names
            .iter()
            .cloned()
            .zip(self.best_params.iter().copied())
            .collect()
    }
}

/// Observable values grouped by vehicle class; `None` holds unlabeled values.
pub type Observations = BTreeMap<Option<VehicleClass>, Vec<f64>>;

/// Keeps the first sample at or after each point of the schedule
/// `warmup, warmup + interval, ...`, times taken relative to `t0`.
struct Schedule {
    next: f64,
    interval: f64,
}

impl Schedule {
    fn new(warmup: f64, interval: f64) -> Self {
        Self {
            next: warmup,
            interval,
        }
    }

    fn take(&mut self, t: f64) -> bool {
        if t + 1e-9 < self.next {
            return false;
        }
        while self.next <= t + 1e-9 {
            self.next += self.interval;
        }
        true
    }
}

/// Observable values from a simulation trace.
pub fn trace_observations(
    trace: &SimTrace,
    observable: Observable,
    class_filter: Option<VehicleClass>,
    warmup: f64,
    interval: f64,
) -> Observations {
    let mut out = Observations::new();
    let mut schedule = Schedule::new(warmup, interval);
    let t0 = trace.steps.first().map_or(0.0, |s| s.t);
    for step in &trace.steps {
        if !schedule.take(step.t - t0) {
            continue;
        }
        for v in &step.vehicles {
            let class = trace.vehicles[v.vehicle].class;
            if class_filter.is_some_and(|c| c != class) {
                continue;
            }
            let value = match observable {
                Observable::Speed => Some(v.speed),
                Observable::Gap => v.gap,
                Observable::Thw => v.gap.filter(|_| v.speed > 0.0).map(|g| g / v.speed),
            };
            if let Some(x) = value {
                out.entry(Some(class)).or_default().push(x);
            }
        }
    }
    out
}

/// Observable values from a recorded scenario; participants that are not
/// vehicles are skipped. Gaps come from the following geometry per frame.
pub fn scenario_observations(
    s: &Scenario,
    observable: Observable,
    class_filter: Option<VehicleClass>,
    warmup: f64,
    interval: f64,
) -> Observations {
    let mut out = Observations::new();
    let mut schedule = Schedule::new(warmup, interval);
    let t0 = s.frames.first().map_or(0.0, |f| f.timestamp);
    for frame in &s.frames {
        if !schedule.take(frame.timestamp - t0) {
            continue;
        }
        for (pid, st) in &frame.states {
            let Some(class) = s
                .participants
                .get(pid)
                .and_then(|p| VehicleClass::from_road_user_type(p.road_user_type))
            else {
                continue;
            };
            if class_filter.is_some_and(|c| c != class) {
                continue;
            }
            let gap = || {
                let ego = Kinematics::from_state(st);
                frame
                    .states
                    .iter()
                    .filter(|(other, _)| *other != pid)
                    .filter_map(|(_, t)| following_gap(&KinematicPair::new(ego.clone(), Kinematics::from_state(t))))
                    .min_by(f64::total_cmp)
            };
            let value = match observable {
                Observable::Speed => Some(st.speed),
                Observable::Gap => gap(),
                Observable::Thw => gap().filter(|_| st.speed > 0.0).map(|g| g / st.speed),
            };
            if let Some(x) = value {
                out.entry(Some(class)).or_default().push(x);
            }
        }
    }
    out
}

fn pooled(obs: &Observations) -> Vec<f64> {
    obs.values().flatten().copied().collect()
}

/// Applies named parameter values to a copy of `base`.
pub fn with_params(base: &ModelParams, names: &[String], values: &[f64]) -> Result<ModelParams, CalibrationError> {
    let mut p = base.clone();
    for (name, v) in names.iter().zip(values) {
        p.set(name, *v)?;
    }
    Ok(p)
}

/// Calibration objective: a deterministic function of the free parameters.
pub struct Objective<'a> {
    spec: &'a ObjectiveSpec,
    base: &'a ModelParams,
    recorded: Observations,
    seeds: Vec<u64>,
}

impl<'a> Objective<'a> {
    pub fn new(spec: &'a ObjectiveSpec, recorded: &Recorded, base: &'a ModelParams) -> Result<Self, CalibrationError> {
        spec.validate(base)?;
        let mut obs = match recorded {
            Recorded::Scenario(s) => scenario_observations(
                s,
                spec.observable,
                spec.class_filter,
                spec.warmup,
                spec.sample_interval,
            ),
            Recorded::Sample(xs) => Observations::from([(None, xs.clone())]),
        };
        obs.retain(|_, v| !v.is_empty());
        if obs.is_empty() {
            return Err(CalibrationError::EmptySample(format!(
                "no recorded {:?} values{}",
                spec.observable,
                spec.class_filter.map(|c| format!(" for class {c}")).unwrap_or_default()
            )));
        }
        if !spec.stratify || spec.class_filter.is_some() {
            obs = Observations::from([(None, pooled(&obs))]);
        }
        let seeds = (0..spec.n_sim_repeats as u64)
            .map(|r| derive_seed(spec.sim_config.seed, r))
            .collect();
        Ok(Self {
            spec,
            base,
            recorded: obs,
            seeds,
        })
    }

    pub fn recorded(&self) -> &Observations {
        &self.recorded
    }

    fn one_repeat(&self, params: &ModelParams, seed: u64) -> Result<f64, CalibrationError> {
        let mut cfg = self.spec.sim_config.clone();
        cfg.seed = seed;
        let trace = simulate(&cfg, params)?;
        let sim = trace_observations(
            &trace,
            self.spec.observable,
            self.spec.class_filter,
            self.spec.warmup,
            self.spec.sample_interval,
        );
        let mut total = 0.0;
        for (key, rec) in &self.recorded {
            let simulated = match key {
                Some(class) => sim.get(&Some(*class)).cloned().unwrap_or_default(),
                None => pooled(&sim),
            };
            if simulated.is_empty() {
                return Err(CalibrationError::EmptySample(format!(
                    "simulation produced no {:?} values{}",
                    self.spec.observable,
                    key.map(|c| format!(" for class {c}")).unwrap_or_default()
                )));
            }
            total += self.spec.likelihood.log_likelihood(rec, &simulated)?;
        }
        Ok(total)
    }

    /// Mean log-likelihood over the repeats, combined in seed order.
    pub fn evaluate(&self, values: &[f64]) -> Result<f64, CalibrationError> {
        let params = with_params(self.base, &self.spec.free_params, values)?;
        params.validate()?;
        let per_repeat: Vec<Result<f64, CalibrationError>> = self
            .seeds
            .par_iter()
            .map(|seed| self.one_repeat(&params, *seed))
            .collect();
        let mut sum = 0.0;
        for r in per_repeat {
            sum += r?;
        }
        Ok(sum / self.seeds.len() as f64)
    }
}

/// Calibrates the free parameters of `params0` against `recorded`.
pub fn calibrate(
    spec: &ObjectiveSpec,
    recorded: &Recorded,
    params0: &ModelParams,
) -> Result<CalibrationResult, CalibrationError> {
    let objective = Objective::new(spec, recorded, params0)?;
    let x0: Vec<f64> = spec
        .free_params
        .iter()
        .map(|n| params0.get(n).expect("validated"))
        .collect();
    let bounds: Vec<(f64, f64)> = spec.bounds.iter().map(|[lo, hi]| (*lo, *hi)).collect();
    let mut result = nelder_mead(|x| objective.evaluate(x), &x0, &bounds, &spec.optimizer)?;
    result.param_names = spec.free_params.clone();
    Ok(result)
}
