use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::*;

/// Tolerance on `metadata.scenario_duration` against the frame time span.
pub const DURATION_TOLERANCE: f64 = 1e-3;
/// Slack on a participant's declared speed range.
pub const SPEED_RANGE_EPSILON: f64 = 0.01;
/// Allowed mismatch between reported speed and finite-difference speed.
pub const SPEED_CONSISTENCY_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub severity: Severity,
    /// JSON-path-style location inside the profile document.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Warning)
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    pub fn warning_count(&self) -> usize {
        self.warnings().count()
    }

    pub fn is_valid(&self) -> bool {
        self.error_count() == 0
    }

    pub fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn warning(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let sev = match v.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            write!(f, "{sev}: {}: {}", v.path, v.message)?;
        }
        Ok(())
    }
}

const ROOT: &str = "$.openlabel";

/// Checks every scenario invariant and reports all violations found.
///
/// Never fails; an empty error list means the scenario is valid. Speed
/// consistency against finite-difference positions is reported as warnings.
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut r = ValidationReport::default();
    if s.scenario_id.is_empty() {
        r.error(format!("{ROOT}.contexts"), "empty scenario id");
    }
    check_metadata(s, &mut r);
    check_participants(s, &mut r);
    check_frames(s, &mut r);
    check_events(s, &mut r);
    check_dynamic_ranges(s, &mut r);
    check_coordinate_systems(&s.coordinate_systems, &mut r);
    check_resources(&s.resources, &mut r);
    check_speed_consistency(s, &mut r);
    r
}

fn check_metadata(s: &Scenario, r: &mut ValidationReport) {
    let m = &s.metadata;
    let path = format!("{ROOT}.metadata");
    let synthetic = m.acquisition_method == AcquisitionMethod::Synthetic;
    let sampled = m.origin == Origin::Sampled;
    if synthetic != sampled {
        r.error(
            format!("{path}.origin"),
            "acquisition_method 'synthetic' requires origin 'sampled' and vice versa",
        );
    }
    if !m.scenario_duration.is_finite() || m.scenario_duration < 0.0 {
        r.error(
            format!("{path}.scenario_duration"),
            "scenario duration must be finite and non-negative",
        );
    }
    if let Some((first, last)) = s.time_span() {
        let span = last - first;
        if (m.scenario_duration - span).abs() > DURATION_TOLERANCE {
            r.error(
                format!("{path}.scenario_duration"),
                format!(
                    "scenario duration {} does not match frame time span {}",
                    m.scenario_duration, span
                ),
            );
        }
    }
}

fn check_participants(s: &Scenario, r: &mut ValidationReport) {
    for (pid, p) in &s.participants {
        let path = format!("{ROOT}.objects.{pid}");
        if pid.is_empty() {
            r.error(&path, "empty participant id");
        }
        let d = p.dimensions;
        let dims_ok = if p.road_user_type.is_vehicle() {
            d.length > 0.0 && d.width > 0.0 && d.height.is_none_or(|h| h > 0.0)
        } else {
            d.length >= 0.0 && d.width >= 0.0 && d.height.is_none_or(|h| h >= 0.0)
        };
        let finite = d.length.is_finite() && d.width.is_finite() && d.height.is_none_or(f64::is_finite);
        if !dims_ok || !finite {
            r.error(
                format!("{path}.dimensions"),
                format!("invalid dimensions for {}", p.road_user_type),
            );
        }
        let sr = p.speed_range;
        if !(sr.min.is_finite() && sr.max.is_finite()) || sr.min < 0.0 || sr.min > sr.max {
            r.error(
                format!("{path}.speed_range"),
                "speed range must satisfy 0 <= min <= max",
            );
        }
        if let Some(samples) = &p.steering_wheel_positions {
            if samples.iter().any(|x| !x.t.is_finite() || !x.angle.is_finite()) {
                r.error(
                    format!("{path}.steering_wheel_positions"),
                    "non-finite steering sample",
                );
            }
        }
    }
}

fn check_frames(s: &Scenario, r: &mut ValidationReport) {
    if s.frames.is_empty() {
        r.error(format!("{ROOT}.frames"), "scenario has no frames");
        return;
    }
    let mut prev: Option<f64> = None;
    for (idx, frame) in s.frames.iter().enumerate() {
        let fpath = format!("{ROOT}.frames.{idx}");
        if frame.frame_id != idx as u64 {
            r.error(
                &fpath,
                format!("frame ids not dense: expected {idx}, found {}", frame.frame_id),
            );
        }
        if !frame.timestamp.is_finite() {
            r.error(format!("{fpath}.timestamp"), "non-finite timestamp");
        } else if let Some(p) = prev {
            if frame.timestamp <= p {
                r.error(
                    format!("{fpath}.timestamp"),
                    "timestamps not strictly increasing",
                );
            }
        }
        prev = Some(frame.timestamp);

        for (ai, area) in frame.unobserved_areas.iter().enumerate() {
            if !area.is_simple() {
                r.error(
                    format!("{fpath}.unobserved_areas.{ai}"),
                    "unobserved area is not a simple polygon",
                );
            }
        }

        for (pid, st) in &frame.states {
            let spath = format!("{fpath}.objects.{pid}");
            let Some(participant) = s.participants.get(pid) else {
                r.error(&spath, format!("unknown participant '{pid}'"));
                continue;
            };
            check_state(st, &spath, r);
            let sr = participant.speed_range;
            if st.speed.is_finite()
                && (st.speed < sr.min - SPEED_RANGE_EPSILON || st.speed > sr.max + SPEED_RANGE_EPSILON)
            {
                r.error(
                    format!("{spath}.speed"),
                    format!(
                        "speed {} outside participant speed range [{}, {}]",
                        st.speed, sr.min, sr.max
                    ),
                );
            }
            for (target, risk) in &st.pairwise_risk {
                let rpath = format!("{spath}.pairwise_risk.{target}");
                if target == pid {
                    r.error(&rpath, "pairwise risk keyed by own participant id");
                } else if !s.participants.contains_key(target) {
                    r.error(&rpath, format!("unknown participant '{target}'"));
                }
                for (name, v) in risk.entries() {
                    if let Some(v) = v {
                        if !v.is_finite() || v < 0.0 {
                            r.error(
                                format!("{rpath}.{name}"),
                                "risk measure must be finite and non-negative",
                            );
                        }
                    }
                }
            }
        }
    }
}

fn check_state(st: &FrameState, path: &str, r: &mut ValidationReport) {
    if !st.speed.is_finite() || st.speed < 0.0 {
        r.error(format!("{path}.speed"), "speed must be finite and non-negative");
    }
    if !st.world_position.is_finite() {
        r.error(format!("{path}.world_position"), "non-finite world position");
    }
    let b = &st.bbox3d;
    if b.center.iter().any(|v| !v.is_finite()) || !b.heading.is_finite() {
        r.error(format!("{path}.bbox3d"), "non-finite bounding box");
    }
    if b.extent.iter().any(|v| !v.is_finite() || *v < 0.0) {
        r.error(format!("{path}.bbox3d.extent"), "extent must be non-negative");
    }
    if let Some(lp) = &st.lane_position {
        if !lp.s.is_finite() || !lp.t.is_finite() {
            r.error(format!("{path}.lane_position"), "non-finite lane position");
        }
    }
    let optionals = [
        ("acceleration", st.acceleration),
        ("yaw_rate", st.yaw_rate),
        ("pitch", st.pitch),
        ("roll", st.roll),
    ];
    for (name, v) in optionals {
        if v.is_some_and(|v| !v.is_finite()) {
            r.error(format!("{path}.{name}"), "non-finite value");
        }
    }
    if st.speed_limit.is_some_and(|v| !v.is_finite() || v < 0.0) {
        r.error(format!("{path}.speed_limit"), "speed limit must be non-negative");
    }
    if let Some(br) = &st.behavior_risk {
        for (name, v) in br {
            if !v.is_finite() {
                r.error(format!("{path}.behavior_risk.{name}"), "non-finite value");
            }
        }
    }
}

fn check_events(s: &Scenario, r: &mut ValidationReport) {
    let span = s.time_span();
    for (eid, ev) in &s.events {
        let path = format!("{ROOT}.events.{eid}");
        let (t0, t1) = ev.time_interval;
        if !(t0.is_finite() && t1.is_finite()) || t0 > t1 {
            r.error(format!("{path}.time_interval"), "event interval must satisfy t_start <= t_end");
        } else if let Some((first, last)) = span {
            if t0 < first || t1 > last {
                r.error(
                    format!("{path}.time_interval"),
                    format!("event interval [{t0}, {t1}] outside frame span [{first}, {last}]"),
                );
            }
        }
        for pid in ev.involved.keys() {
            if !s.participants.contains_key(pid) {
                r.error(
                    format!("{path}.objects.{pid}"),
                    format!("unknown participant '{pid}'"),
                );
            }
        }
    }
}

/// Observed per-frame values for the dynamic quantities the validator knows.
pub(crate) fn observed_values(s: &Scenario) -> BTreeMap<&'static str, Vec<f64>> {
    let mut out: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    for frame in &s.frames {
        for st in frame.states.values() {
            out.entry("speed").or_default().push(st.speed);
            if let Some(a) = st.acceleration {
                out.entry("acceleration").or_default().push(a);
            }
            for risk in st.pairwise_risk.values() {
                for (name, v) in risk.entries() {
                    if let Some(v) = v {
                        out.entry(name).or_default().push(v);
                    }
                }
            }
        }
    }
    out
}

fn check_dynamic_ranges(s: &Scenario, r: &mut ValidationReport) {
    let observed = observed_values(s);
    for (quantity, range) in &s.metadata.dynamic_ranges {
        let path = format!("{ROOT}.metadata.dynamic_ranges.{quantity}");
        if !(range.min.is_finite() && range.max.is_finite()) || range.min > range.max {
            r.error(&path, "range must satisfy min <= max");
            continue;
        }
        let Some(values) = observed.get(quantity.as_str()) else {
            continue;
        };
        let outside = values.iter().filter(|v| !range.contains(**v)).count();
        if outside > 0 {
            r.error(
                &path,
                format!(
                    "{outside} observed '{quantity}' values outside declared range [{}, {}]",
                    range.min, range.max
                ),
            );
        }
    }
}

fn check_coordinate_systems(cs: &CoordinateSystemSet, r: &mut ValidationReport) {
    let path = format!("{ROOT}.coordinate_systems");
    if !(cs.local_origin.longitude.is_finite()
        && cs.local_origin.latitude.is_finite()
        && (-180.0..=180.0).contains(&cs.local_origin.longitude)
        && (-90.0..=90.0).contains(&cs.local_origin.latitude))
    {
        r.error(format!("{path}.local_origin"), "local origin is not a valid longitude/latitude");
    }
    for (id, sys) in &cs.systems {
        let spath = format!("{path}.systems.{id}");
        let t = sys.transform;
        if !t.rotation.is_finite() || !t.translation.is_finite() {
            r.error(format!("{spath}.transform"), "non-finite transform");
        }
        match &sys.parent {
            Some(parent) if !cs.systems.contains_key(parent) => {
                r.error(format!("{spath}.parent"), format!("unknown parent system '{parent}'"));
            }
            _ => {}
        }
    }
    // Walk each chain of parents; revisiting a node means a cycle.
    let mut reported: BTreeSet<&str> = BTreeSet::new();
    for id in cs.systems.keys() {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut cur = id.as_str();
        while let Some(parent) = cs.systems.get(cur).and_then(|s| s.parent.as_deref()) {
            if !seen.insert(cur) {
                if reported.insert(id.as_str()) {
                    r.error(format!("{path}.systems.{id}.parent"), "coordinate system parents form a cycle");
                }
                break;
            }
            cur = parent;
        }
    }
}

fn check_resources(res: &ResourceLinks, r: &mut ValidationReport) {
    if let Some(p) = &res.opendrive_path {
        if p.is_empty() || is_absolute_path(p) {
            r.error(
                format!("{ROOT}.resources.opendrive_path"),
                "OpenDRIVE path must be a non-empty relative path",
            );
        }
    }
}

fn is_absolute_path(p: &str) -> bool {
    let bytes = p.as_bytes();
    p.starts_with('/')
        || p.starts_with('\\')
        || p.contains("://")
        || (bytes.len() >= 2 && bytes[0].is_ascii_alphabetic() && bytes[1] == b':')
}

fn check_speed_consistency(s: &Scenario, r: &mut ValidationReport) {
    if s.frames.len() < 3 {
        return;
    }
    for i in 1..s.frames.len() - 1 {
        let (prev, cur, next) = (&s.frames[i - 1], &s.frames[i], &s.frames[i + 1]);
        let dt = next.timestamp - prev.timestamp;
        // Also skips NaN spacing.
        if dt.is_nan() || dt <= 0.0 {
            continue;
        }
        for (pid, st) in &cur.states {
            let (Some(a), Some(b)) = (prev.states.get(pid), next.states.get(pid)) else {
                continue;
            };
            let fd_speed = (b.world_position - a.world_position).norm() / dt;
            if (fd_speed - st.speed).abs() > SPEED_CONSISTENCY_TOLERANCE {
                r.warning(
                    format!("{ROOT}.frames.{i}.objects.{pid}.speed"),
                    format!(
                        "speed {:.3} inconsistent with finite-difference speed {:.3}",
                        st.speed, fd_speed
                    ),
                );
            }
        }
    }
}
