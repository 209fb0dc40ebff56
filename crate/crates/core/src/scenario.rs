//! Scenario files, validation and worst-K benchmark selection.
//!
//! One scenario is a UTF-8 JSON document:
//!
//! ```json
//! {
//!   "format": "dualad-scn-1",
//!   "id": "free_road_01",
//!   "centerline": [[0, 0], [300, 0]],
//!   "speed_limit_mps": 13.9,
//!   "ego_init": [0, 0, 0, 10],
//!   "agents": [
//!     {"id": "veh_1", "kind": "vehicle", "width_m": 2.0, "length_m": 4.5,
//!      "states": [[0, 30, 0, 0, 8], [15, 150, 0, 0, 8]]}
//!   ],
//!   "duration_s": 15,
//!   "traffic_lights": [{"t": 0, "stop_line_s": 120, "state": "red"}],
//!   "ego_log": [[0, 0, 0, 0, 10], [15, 150, 0, 0, 10]]
//! }
//! ```
//!
//! `traffic_lights` and `ego_log` are optional. Agent states are
//! `[t, x, y, theta, speed]` rows, strictly increasing in `t`.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geom::{normalize_angle, CartesianPose, GeomError, OrientedBox, ReferencePath};

pub const SCENARIO_FORMAT: &str = "dualad-scn-1";
/// Simulation grid every scenario is resampled onto.
pub const GRID_STEP: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("I/O error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario JSON: {0}")]
    Parse(String),
    #[error("schema error at `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("validation error at `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("requested {k} scenarios but only {available} results")]
    InsufficientResults { k: usize, available: usize },
    #[error("invalid score {score} for scenario `{id}`")]
    InvalidScore { id: String, score: f64 },
    #[error("duplicate scenario id `{0}`")]
    DuplicateId(String),
}

impl ScenarioError {
    fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Vehicle,
    Pedestrian,
    Bicycle,
    StaticObject,
}

impl AgentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AgentKind::Vehicle => "vehicle",
            AgentKind::Pedestrian => "pedestrian",
            AgentKind::Bicycle => "bicycle",
            AgentKind::StaticObject => "static_object",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub speed: f64,
}

impl AgentState {
    pub fn pose(&self) -> CartesianPose {
        CartesianPose::new(self.x, self.y, self.theta)
    }

    fn from_row(row: [f64; 5]) -> Self {
        Self {
            t: row[0],
            x: row[1],
            y: row[2],
            theta: row[3],
            speed: row[4],
        }
    }

    fn to_row(self) -> [f64; 5] {
        [self.t, self.x, self.y, self.theta, self.speed]
    }

    fn lerp(&self, other: &AgentState, t: f64) -> AgentState {
        let span = other.t - self.t;
        let u = if span > 0.0 { (t - self.t) / span } else { 0.0 };
        let dtheta = normalize_angle(other.theta - self.theta);
        AgentState {
            t,
            x: self.x + u * (other.x - self.x),
            y: self.y + u * (other.y - self.y),
            theta: self.theta + u * dtheta,
            speed: self.speed + u * (other.speed - self.speed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    pub id: String,
    pub kind: AgentKind,
    pub width: f64,
    pub length: f64,
    /// States exactly as logged in the file.
    pub logged_states: Vec<AgentState>,
    /// Logged states resampled onto the simulation grid.
    pub track: Vec<AgentState>,
}

impl AgentRecord {
    /// State at grid index `k`, clamped to the last grid sample.
    pub fn state_at_index(&self, k: usize) -> AgentState {
        self.track[k.min(self.track.len() - 1)]
    }

    /// Logged state at arbitrary time, interpolated, clamped outside the log.
    pub fn state_at(&self, t: f64) -> AgentState {
        sample_log(&self.logged_states, t)
    }

    pub fn box_at(&self, state: &AgentState) -> OrientedBox {
        OrientedBox::new(state.pose(), self.width, self.length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightState {
    Red,
    Green,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficLightState {
    pub t: f64,
    pub stop_line_s: f64,
    pub state: LightState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoInit {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub centerline: ReferencePath,
    pub speed_limit: f64,
    pub ego_init: EgoInit,
    pub agents: Vec<AgentRecord>,
    pub duration: f64,
    pub traffic_lights: Vec<TrafficLightState>,
    /// Human reference drive, used for progress scoring.
    pub ego_log: Option<Vec<AgentState>>,
}

impl Scenario {
    /// Number of grid samples covering `[0, duration]`.
    pub fn grid_len(&self) -> usize {
        grid_len(self.duration)
    }

    /// Stop lines that are red at time `t`, as absolute centerline stations.
    /// Each stop line keeps the state of its latest entry at or before `t`.
    pub fn red_stop_lines(&self, t: f64) -> Vec<f64> {
        let mut lines: Vec<f64> = self.traffic_lights.iter().map(|l| l.stop_line_s).collect();
        lines.sort_by(f64::total_cmp);
        lines.dedup();
        lines
            .into_iter()
            .filter(|&line| {
                self.traffic_lights
                    .iter()
                    .filter(|l| l.stop_line_s == line && l.t <= t + 1e-9)
                    .max_by(|a, b| a.t.total_cmp(&b.t))
                    .is_some_and(|l| l.state == LightState::Red)
            })
            .collect()
    }

    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        check_schema(&value)?;
        let raw: RawScenario = serde_json::from_value(value)
            .map_err(|e| ScenarioError::schema("<document>", e.to_string()))?;
        raw.into_scenario()
    }

    /// Indented JSON with every numeric row (points, states) on one line.
    pub fn to_json_string(&self) -> String {
        let value = serde_json::to_value(RawScenario::from(self)).expect("scenario serializes");
        let mut out = String::new();
        write_json(&value, 0, &mut out);
        out
    }
}

fn write_json(value: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match value {
        Value::Array(items) if items.iter().all(|v| !v.is_array() && !v.is_object()) => {
            let parts: Vec<String> = items.iter().map(Value::to_string).collect();
            out.push('[');
            out.push_str(&parts.join(", "));
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_json(item, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (key, item)) in map.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_json(item, indent + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

pub fn grid_len(duration: f64) -> usize {
    (duration / GRID_STEP + 1e-6).floor() as usize + 1
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json_str(&text)
}

/// Interpolates a time-sorted log at `t`, holding the endpoints outside it.
pub fn sample_log(log: &[AgentState], t: f64) -> AgentState {
    let first = log[0];
    let last = log[log.len() - 1];
    if t <= first.t {
        return AgentState { t, ..first };
    }
    if t >= last.t {
        return AgentState { t, ..last };
    }
    let i = log.partition_point(|s| s.t <= t);
    log[i - 1].lerp(&log[i], t)
}

fn resample(log: &[AgentState], duration: f64) -> Vec<AgentState> {
    (0..grid_len(duration))
        .map(|k| {
            let mut s = sample_log(log, k as f64 * GRID_STEP);
            s.theta = normalize_angle(s.theta);
            s
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct RawAgent {
    id: String,
    kind: AgentKind,
    width_m: f64,
    length_m: f64,
    states: Vec<[f64; 5]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawScenario {
    format: String,
    id: String,
    centerline: Vec<[f64; 2]>,
    speed_limit_mps: f64,
    ego_init: [f64; 4],
    agents: Vec<RawAgent>,
    duration_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    traffic_lights: Vec<TrafficLightState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ego_log: Option<Vec<[f64; 5]>>,
}

const REQUIRED_TOP: [&str; 7] = [
    "format",
    "id",
    "centerline",
    "speed_limit_mps",
    "ego_init",
    "agents",
    "duration_s",
];
const REQUIRED_AGENT: [&str; 5] = ["id", "kind", "width_m", "length_m", "states"];

fn check_schema(value: &Value) -> Result<(), ScenarioError> {
    let obj = value
        .as_object()
        .ok_or_else(|| ScenarioError::schema("<document>", "expected a JSON object"))?;
    for key in REQUIRED_TOP {
        if !obj.contains_key(key) {
            return Err(ScenarioError::schema(key, "missing required field"));
        }
    }
    if obj["format"].as_str() != Some(SCENARIO_FORMAT) {
        return Err(ScenarioError::schema(
            "format",
            format!("expected \"{SCENARIO_FORMAT}\""),
        ));
    }
    let agents = obj["agents"]
        .as_array()
        .ok_or_else(|| ScenarioError::schema("agents", "expected a list"))?;
    for (i, agent) in agents.iter().enumerate() {
        let a = agent
            .as_object()
            .ok_or_else(|| ScenarioError::schema(format!("agents[{i}]"), "expected an object"))?;
        for key in REQUIRED_AGENT {
            if !a.contains_key(key) {
                return Err(ScenarioError::schema(
                    format!("agents[{i}].{key}"),
                    "missing required field",
                ));
            }
        }
    }
    // field-level type checks so errors name the offending key
    let typed: [(&str, fn(&Value) -> bool); 6] = [
        ("id", Value::is_string),
        ("centerline", Value::is_array),
        ("speed_limit_mps", Value::is_number),
        ("ego_init", Value::is_array),
        ("duration_s", Value::is_number),
        ("agents", Value::is_array),
    ];
    for (key, ok) in typed {
        if !ok(&obj[key]) {
            return Err(ScenarioError::schema(key, "wrong type"));
        }
    }
    Ok(())
}

fn check_states(field: &str, rows: &[[f64; 5]]) -> Result<Vec<AgentState>, ScenarioError> {
    if rows.is_empty() {
        return Err(ScenarioError::validation(
            field,
            "at least one state required",
        ));
    }
    let states: Vec<AgentState> = rows.iter().copied().map(AgentState::from_row).collect();
    for (i, s) in states.iter().enumerate() {
        if rows[i].iter().any(|v| !v.is_finite()) {
            return Err(ScenarioError::validation(
                format!("{field}[{i}]"),
                "non-finite value",
            ));
        }
        if s.speed < 0.0 {
            return Err(ScenarioError::validation(
                format!("{field}[{i}]"),
                "speed must be >= 0",
            ));
        }
        if i > 0 && s.t <= states[i - 1].t {
            return Err(ScenarioError::validation(
                format!("{field}[{i}]"),
                "time must be strictly increasing",
            ));
        }
    }
    Ok(states)
}

impl RawScenario {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(ScenarioError::validation("duration_s", "must be > 0"));
        }
        if !(self.speed_limit_mps.is_finite() && self.speed_limit_mps > 0.0) {
            return Err(ScenarioError::validation("speed_limit_mps", "must be > 0"));
        }
        if self.ego_init.iter().any(|v| !v.is_finite()) || self.ego_init[3] < 0.0 {
            return Err(ScenarioError::validation(
                "ego_init",
                "must be finite with speed >= 0",
            ));
        }
        let centerline = ReferencePath::new(self.centerline).map_err(|e| match e {
            GeomError::InvalidPath(m) => ScenarioError::validation("centerline", m),
            other => ScenarioError::validation("centerline", other.to_string()),
        })?;

        let mut seen = HashSet::new();
        let mut agents = Vec::with_capacity(self.agents.len());
        for (i, a) in self.agents.into_iter().enumerate() {
            if !seen.insert(a.id.clone()) {
                return Err(ScenarioError::validation(
                    format!("agents[{i}].id"),
                    format!("duplicate agent id `{}`", a.id),
                ));
            }
            if !(a.width_m > 0.0 && a.length_m > 0.0) {
                return Err(ScenarioError::validation(
                    format!("agents[{i}].width_m"),
                    "width and length must be > 0",
                ));
            }
            let logged = check_states(&format!("agents[{i}].states"), &a.states)?;
            let track = resample(&logged, self.duration_s);
            agents.push(AgentRecord {
                id: a.id,
                kind: a.kind,
                width: a.width_m,
                length: a.length_m,
                logged_states: logged,
                track,
            });
        }

        for (i, l) in self.traffic_lights.iter().enumerate() {
            if !(l.t.is_finite() && l.stop_line_s.is_finite()) {
                return Err(ScenarioError::validation(
                    format!("traffic_lights[{i}]"),
                    "non-finite value",
                ));
            }
        }

        let ego_log = self
            .ego_log
            .as_deref()
            .map(|rows| check_states("ego_log", rows))
            .transpose()?;

        let [x, y, theta, speed] = self.ego_init;
        Ok(Scenario {
            id: self.id,
            centerline,
            speed_limit: self.speed_limit_mps,
            ego_init: EgoInit { x, y, theta, speed },
            agents,
            duration: self.duration_s,
            traffic_lights: self.traffic_lights,
            ego_log,
        })
    }
}

impl From<&Scenario> for RawScenario {
    fn from(s: &Scenario) -> Self {
        RawScenario {
            format: SCENARIO_FORMAT.to_string(),
            id: s.id.clone(),
            centerline: s.centerline.points().to_vec(),
            speed_limit_mps: s.speed_limit,
            ego_init: [
                s.ego_init.x,
                s.ego_init.y,
                s.ego_init.theta,
                s.ego_init.speed,
            ],
            agents: s
                .agents
                .iter()
                .map(|a| RawAgent {
                    id: a.id.clone(),
                    kind: a.kind,
                    width_m: a.width,
                    length_m: a.length,
                    states: a.logged_states.iter().map(|st| st.to_row()).collect(),
                })
                .collect(),
            duration_s: s.duration,
            traffic_lights: s.traffic_lights.clone(),
            ego_log: s
                .ego_log
                .as_ref()
                .map(|log| log.iter().map(|st| st.to_row()).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    RCls,
    NrCls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSet {
    pub name: String,
    pub scenario_ids: Vec<String>,
    pub selection_metric: SelectionMetric,
    pub k: usize,
}

/// The `k` lowest-scoring scenarios, ascending by score, ties by id.
pub fn select_worst_k(
    results: &[(String, f64)],
    k: usize,
    metric: SelectionMetric,
) -> Result<BenchmarkSet, ScenarioError> {
    if k > results.len() {
        return Err(ScenarioError::InsufficientResults {
            k,
            available: results.len(),
        });
    }
    let mut seen = HashSet::new();
    for (id, score) in results {
        if !seen.insert(id.as_str()) {
            return Err(ScenarioError::DuplicateId(id.clone()));
        }
        if !(0.0..=100.0).contains(score) {
            return Err(ScenarioError::InvalidScore {
                id: id.clone(),
                score: *score,
            });
        }
    }
    let mut sorted: Vec<&(String, f64)> = results.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let prefix = match metric {
        SelectionMetric::RCls => "r_cls",
        SelectionMetric::NrCls => "nr_cls",
    };
    Ok(BenchmarkSet {
        name: format!("worst-{k}-{prefix}"),
        scenario_ids: sorted.iter().take(k).map(|(id, _)| id.clone()).collect(),
        selection_metric: metric,
        k,
    })
}
