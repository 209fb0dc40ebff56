//! The bundled synthetic scenario corpus.
//!
//! Every scenario is generated here from a handful of motion primitives and
//! committed as JSON under `corpus/scenarios/`. The generator is the source
//! of truth; a test checks the committed files against it.
//!
//! Roads run along +x. The ego lane is the centerline at `y = 0`; the
//! opposite lane is at `y = +LANE_WIDTH` and the curb at `y = -2.5`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::geom::ReferencePath;
use crate::scenario::{load_scenario, Scenario, ScenarioError, GRID_STEP, SCENARIO_FORMAT};

pub const LANE_WIDTH: f64 = 3.5;
pub const CORPUS_DURATION: f64 = 15.0;
pub const CRITICAL_SUITE_NAME: &str = "critical";

/// Scenarios whose hazard the bare planners mishandle.
pub const CRITICAL_SUITE: [&str; 10] = [
    "crossing_pedestrian_01",
    "crossing_pedestrian_02",
    "crossing_pedestrian_03",
    "crossing_pedestrian_04",
    "hard_brake_leader_01",
    "hard_brake_leader_02",
    "hard_brake_leader_03",
    "oncoming_vehicle_01",
    "oncoming_vehicle_02",
    "oncoming_vehicle_03",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteFile {
    pub name: String,
    pub scenario_ids: Vec<String>,
}

impl SuiteFile {
    pub fn critical() -> Self {
        Self {
            name: CRITICAL_SUITE_NAME.into(),
            scenario_ids: CRITICAL_SUITE.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite serializes")
    }
}

/// Speed change starting at `start`: accelerate at `accel` until `target`.
#[derive(Debug, Clone, Copy)]
struct Phase {
    start: f64,
    accel: f64,
    target: f64,
}

/// An agent moving along a polyline with a piecewise-constant acceleration.
#[derive(Debug, Clone)]
struct Motion {
    path: Vec<[f64; 2]>,
    v0: f64,
    phases: Vec<Phase>,
}

impl Motion {
    fn line(from: [f64; 2], heading: f64, v0: f64) -> Self {
        let far = 1000.0;
        Self {
            path: vec![
                from,
                [from[0] + far * heading.cos(), from[1] + far * heading.sin()],
            ],
            v0,
            phases: Vec::new(),
        }
    }

    fn stationary(at: [f64; 2], heading: f64) -> Self {
        Self::line(at, heading, 0.0)
    }

    fn along(path: Vec<[f64; 2]>, v0: f64) -> Self {
        Self {
            path,
            v0,
            phases: Vec::new(),
        }
    }

    fn then(mut self, start: f64, accel: f64, target: f64) -> Self {
        self.phases.push(Phase {
            start,
            accel,
            target,
        });
        self
    }

    /// `[t, x, y, theta, speed]` rows on the simulation grid.
    fn rows(&self) -> Vec<[f64; 5]> {
        let path = ReferencePath::new(self.path.clone()).expect("motion path is valid");
        if self.v0 == 0.0 && self.phases.is_empty() {
            let p = path.point_at(0.0);
            let heading = round(path.heading_at(0.0), 4);
            let (x, y) = (round(p[0], 3), round(p[1], 3));
            return vec![[0.0, x, y, heading, 0.0], [CORPUS_DURATION, x, y, heading, 0.0]];
        }
        let fine = 0.01;
        let per_grid = (GRID_STEP / fine).round() as usize;
        let samples = (CORPUS_DURATION / fine).round() as usize;
        let (mut s, mut v) = (0.0_f64, self.v0);
        let mut rows = Vec::new();
        for i in 0..=samples {
            let t = i as f64 * fine;
            if i % per_grid == 0 {
                let p = path.point_at(s);
                rows.push([
                    round(t, 2),
                    round(p[0], 3),
                    round(p[1], 3),
                    round(path.heading_at(s), 4),
                    round(v, 3),
                ]);
            }
            let accel = self
                .phases
                .iter()
                .rev()
                .find(|ph| ph.start <= t + 1e-9)
                .map_or(0.0, |ph| {
                    let remaining = ph.target - v;
                    if remaining.abs() < 1e-12 || remaining.signum() != ph.accel.signum() {
                        0.0
                    } else {
                        ph.accel.signum() * ph.accel.abs().min(remaining.abs() / fine)
                    }
                });
            let nv = (v + accel * fine).max(0.0);
            s += 0.5 * (v + nv) * fine;
            v = nv;
        }
        rows
    }
}

fn round(x: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    let r = (x * f).round() / f;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Points every meter from `x_from` to `x_to` with `y` blending smoothly
/// from `y_from` to `y_to` while `x` crosses the `blend` interval. Works in
/// both travel directions.
fn lane_shift(x_from: f64, x_to: f64, y_from: f64, y_to: f64, blend: (f64, f64)) -> Vec<[f64; 2]> {
    let n = (x_to - x_from).abs().round() as usize;
    let dir = (x_to - x_from).signum();
    (0..=n)
        .map(|i| {
            let x = x_from + dir * i as f64;
            let (a, b) = blend;
            let u = ((x - a) / (b - a)).clamp(0.0, 1.0);
            let w = 0.5 - 0.5 * (std::f64::consts::PI * u).cos();
            [x, y_from + w * (y_to - y_from)]
        })
        .collect()
}

struct AgentSpec {
    id: String,
    kind: &'static str,
    width: f64,
    length: f64,
    motion: Motion,
}

struct Builder {
    id: String,
    centerline: Vec<[f64; 2]>,
    speed_limit: f64,
    ego_speed: f64,
    agents: Vec<AgentSpec>,
    lights: Vec<serde_json::Value>,
    ego_log: Option<Motion>,
}

impl Builder {
    fn straight(id: impl Into<String>, speed_limit: f64, ego_speed: f64) -> Self {
        Self {
            id: id.into(),
            centerline: vec![[0.0, 0.0], [400.0, 0.0]],
            speed_limit,
            ego_speed,
            agents: Vec::new(),
            lights: Vec::new(),
            ego_log: None,
        }
    }

    fn centerline(mut self, points: Vec<[f64; 2]>) -> Self {
        self.centerline = points;
        self
    }

    fn agent(mut self, id: &str, kind: &'static str, motion: Motion) -> Self {
        let (width, length) = match kind {
            "pedestrian" => (0.6, 0.6),
            "bicycle" => (0.8, 1.8),
            "static_object" => (2.0, 2.0),
            _ => (2.0, 4.6),
        };
        self.agents.push(AgentSpec {
            id: id.into(),
            kind,
            width,
            length,
            motion,
        });
        self
    }

    fn sized(mut self, width: f64, length: f64) -> Self {
        let last = self.agents.last_mut().expect("an agent was added");
        last.width = width;
        last.length = length;
        self
    }

    fn red_light(mut self, stop_line_s: f64, green_at: Option<f64>) -> Self {
        self.lights
            .push(json!({"t": 0.0, "stop_line_s": stop_line_s, "state": "red"}));
        if let Some(t) = green_at {
            self.lights
                .push(json!({"t": t, "stop_line_s": stop_line_s, "state": "green"}));
        }
        self
    }

    /// Reference drive along the centerline with the given speed changes.
    fn expert(mut self, phases: &[(f64, f64, f64)]) -> Self {
        let mut m = Motion::along(self.centerline.clone(), self.ego_speed);
        for &(start, accel, target) in phases {
            m = m.then(start, accel, target);
        }
        self.ego_log = Some(m);
        self
    }

    fn build(self) -> Scenario {
        let path = ReferencePath::new(self.centerline.clone()).expect("centerline is valid");
        let start = path.point_at(0.0);
        let agents: Vec<_> = self
            .agents
            .iter()
            .map(|a| {
                json!({
                    "id": a.id,
                    "kind": a.kind,
                    "width_m": a.width,
                    "length_m": a.length,
                    "states": a.motion.rows(),
                })
            })
            .collect();
        let mut doc = json!({
            "format": SCENARIO_FORMAT,
            "id": self.id,
            "centerline": self.centerline,
            "speed_limit_mps": self.speed_limit,
            "ego_init": [start[0], start[1], round(path.heading_at(0.0), 4), self.ego_speed],
            "agents": agents,
            "duration_s": CORPUS_DURATION,
        });
        if !self.lights.is_empty() {
            doc["traffic_lights"] = json!(self.lights);
        }
        let log = self
            .ego_log
            .unwrap_or_else(|| Motion::along(self.centerline.clone(), self.ego_speed));
        doc["ego_log"] = json!(log.rows());
        Scenario::from_json_str(&doc.to_string()).expect("generated scenario is valid")
    }
}

/// Oncoming traffic in the opposite lane, one car every `spacing` meters.
fn oncoming_stream(mut b: Builder, first_x: f64, spacing: f64, count: usize, speed: f64) -> Builder {
    for i in 0..count {
        let x = first_x + i as f64 * spacing;
        b = b.agent(
            &format!("onc_{}", i + 1),
            "vehicle",
            Motion::line([x, LANE_WIDTH], std::f64::consts::PI, speed),
        );
    }
    b
}

/// Parked cars along the curb between `from_x` and `to_x`.
fn parked_row(mut b: Builder, from_x: f64, to_x: f64, spacing: f64) -> Builder {
    let mut x = from_x;
    let mut i = 1;
    while x <= to_x {
        b = b.agent(&format!("parked_{i}"), "vehicle", Motion::stationary([x, -3.2], 0.0));
        x += spacing;
        i += 1;
    }
    b
}

fn free_road() -> Vec<Scenario> {
    let curve: Vec<[f64; 2]> = (0..=80)
        .map(|i| {
            let a = i as f64 / 80.0 * 1.6;
            [120.0 * a.sin(), 120.0 * (1.0 - a.cos())]
        })
        .collect();
    let s_curve: Vec<[f64; 2]> = (0..=400)
        .map(|i| {
            let x = i as f64;
            [x, 6.0 * (x / 40.0).sin()]
        })
        .collect();
    vec![
        Builder::straight("free_road_01", 13.9, 10.0).build(),
        Builder::straight("free_road_02", 11.1, 0.0)
            .expert(&[(0.0, 1.5, 11.1)])
            .build(),
        Builder::straight("free_road_03", 13.9, 13.9)
            .centerline(curve)
            .build(),
        Builder::straight("free_road_04", 11.1, 8.0)
            .centerline(s_curve)
            .expert(&[(0.0, 1.0, 11.1)])
            .build(),
        Builder::straight("free_road_05", 13.9, 12.0)
            .agent("veh_1", "vehicle", Motion::line([80.0, 0.0], 0.0, 13.0))
            .build(),
    ]
}

fn stopped_traffic() -> Vec<Scenario> {
    let queue = |b: Builder, front_x: f64, n: usize| {
        (0..n).fold(b, |b, i| {
            b.agent(
                &format!("queue_{}", i + 1),
                "vehicle",
                Motion::stationary([front_x - 7.0 * i as f64, 0.0], 0.0),
            )
        })
    };
    let stop_at = |v: f64, gap: f64| {
        // decelerate to reach the standstill point `gap` meters ahead
        let decel = v * v / (2.0 * gap);
        vec![(0.0, -decel, 0.0)]
    };
    vec![
        queue(Builder::straight("stopped_traffic_01", 13.9, 10.0), 90.0, 3)
            .expert(&stop_at(10.0, 90.0 - 14.0 - 4.6 - 3.0))
            .build(),
        queue(Builder::straight("stopped_traffic_02", 13.9, 12.0), 130.0, 4)
            .expert(&[(2.0, -1.5, 0.0)])
            .build(),
        Builder::straight("stopped_traffic_03", 13.9, 10.0)
            .red_light(70.0, None)
            .expert(&stop_at(10.0, 66.0))
            .build(),
        Builder::straight("stopped_traffic_04", 13.9, 10.0)
            .red_light(60.0, Some(9.0))
            .expert(&[(0.0, -1.0, 3.0), (9.0, 1.5, 13.9)])
            .build(),
        queue(Builder::straight("stopped_traffic_05", 11.1, 8.0), 60.0, 2)
            .agent("veh_leader", "vehicle", Motion::line([20.0, 0.0], 0.0, 8.0).then(1.0, -2.0, 0.0))
            .expert(&[(1.0, -2.0, 0.0)])
            .build(),
    ]
}

/// Leader `gap` meters ahead at `speed`, braking at `decel` from `t_brake`,
/// with the opposite lane and the curb occupied.
fn hard_brake_leader(id: &str, ego_speed: f64, speed: f64, gap: f64, t_brake: f64, decel: f64) -> Scenario {
    let b = Builder::straight(id, 13.9, ego_speed).agent(
        "veh_lead",
        "vehicle",
        Motion::line([gap + 4.7, 0.0], 0.0, speed).then(t_brake, -decel, 0.0),
    );
    let b = oncoming_stream(b, 40.0, 22.0, 10, 10.0);
    let b = parked_row(b, 15.0, 260.0, 7.0);
    b.expert(&[(0.0, -1.0, speed.min(ego_speed)), (t_brake, -decel.min(5.0), 0.0)])
        .build()
}

/// Narrow street lined with parked cars on both sides. A pedestrian walks
/// out of a gap between them at `cross_x`, breaking into a run at `t_run`.
fn crossing_pedestrian(id: &str, ego_speed: f64, cross_x: f64, y0: f64, walk: f64, t_run: f64, run: f64) -> Scenario {
    let mut b = Builder::straight(id, 13.9, ego_speed).agent(
        "ped_1",
        "pedestrian",
        Motion::line([cross_x, y0], std::f64::consts::FRAC_PI_2, walk).then(t_run, 3.0, run),
    );
    let mut i = 1;
    for side in [-3.0, 3.0] {
        let mut x = cross_x - 45.0;
        while x <= cross_x + 40.0 {
            if (x - cross_x).abs() > 4.0 {
                b = b.agent(&format!("parked_{i}"), "vehicle", Motion::stationary([x, side], 0.0));
                i += 1;
            }
            x += 6.5;
        }
    }
    b.expert(&[(0.0, -1.0, 6.0), (t_run + 3.0, 1.5, 13.9)]).build()
}

/// Oncoming car overtaking a slow one through the ego lane, back in its own
/// lane after `x_out`.
fn oncoming_vehicle(id: &str, ego_speed: f64, start_x: f64, speed: f64, x_out: f64) -> Scenario {
    let path = lane_shift(start_x, start_x - 500.0, 0.0, LANE_WIDTH, (x_out, x_out - 15.0));
    let b = Builder::straight(id, 13.9, ego_speed)
        .agent("veh_overtaker", "vehicle", Motion::along(path, speed))
        .agent(
            "veh_slow",
            "vehicle",
            Motion::line([start_x - 10.0, LANE_WIDTH], std::f64::consts::PI, speed - 4.0),
        );
    let b = parked_row(b, 10.0, 200.0, 7.0);
    b.expert(&[(0.0, -1.5, 4.0), (6.0, 1.5, 13.9)]).build()
}

/// A car pulls out from behind a parked truck into the ego lane.
fn occluded_merge(id: &str, ego_speed: f64, truck_x: f64, t_go: f64, target: f64) -> Scenario {
    let merge = lane_shift(truck_x + 6.0, truck_x + 400.0, -3.2, 0.0, (truck_x + 6.0, truck_x + 26.0));
    Builder::straight(id, 13.9, ego_speed)
        .agent("truck", "vehicle", Motion::stationary([truck_x, -3.2], 0.0))
        .sized(2.5, 10.0)
        .agent(
            "veh_merge",
            "vehicle",
            Motion::along(merge, 0.0).then(t_go, 2.5, target),
        )
        .expert(&[(t_go, -1.5, target)])
        .build()
}

pub fn generate() -> Vec<Scenario> {
    let mut out = Vec::new();
    out.extend(free_road());
    out.extend(stopped_traffic());
    out.extend([
        hard_brake_leader("hard_brake_leader_01", 12.0, 5.0, 30.0, 3.0, 8.0),
        hard_brake_leader("hard_brake_leader_02", 12.0, 5.0, 45.0, 3.0, 8.0),
        hard_brake_leader("hard_brake_leader_03", 12.0, 5.0, 60.0, 4.0, 8.0),
        hard_brake_leader("hard_brake_leader_04", 9.0, 9.0, 30.0, 4.5, 5.0),
        hard_brake_leader("hard_brake_leader_05", 10.0, 6.0, 25.0, 7.5, 3.0),
    ]);
    out.extend([
        crossing_pedestrian("crossing_pedestrian_01", 12.0, 70.0, -10.0, 1.4, 3.0, 3.0),
        crossing_pedestrian("crossing_pedestrian_02", 12.0, 70.0, -6.0, 1.0, 4.0, 3.0),
        crossing_pedestrian("crossing_pedestrian_03", 10.0, 70.0, -6.0, 1.0, 5.0, 3.0),
        crossing_pedestrian("crossing_pedestrian_04", 12.0, 70.0, -8.0, 1.4, 4.0, 3.0),
        crossing_pedestrian("crossing_pedestrian_05", 8.0, 100.0, -5.0, 1.2, 2.0, 1.2),
    ]);
    out.extend([
        oncoming_vehicle("oncoming_vehicle_01", 12.0, 200.0, 12.0, 110.0),
        oncoming_vehicle("oncoming_vehicle_02", 10.0, 180.0, 14.0, 95.0),
        oncoming_vehicle("oncoming_vehicle_03", 13.0, 230.0, 11.0, 120.0),
        oncoming_vehicle("oncoming_vehicle_04", 8.0, 260.0, 10.0, 200.0),
        oncoming_vehicle("oncoming_vehicle_05", 11.0, 160.0, 12.0, 150.0),
    ]);
    out.extend([
        occluded_merge("occluded_merge_01", 12.0, 70.0, 3.5, 8.0),
        occluded_merge("occluded_merge_02", 10.0, 50.0, 2.0, 6.0),
        occluded_merge("occluded_merge_03", 13.0, 110.0, 5.0, 10.0),
        occluded_merge("occluded_merge_04", 9.0, 40.0, 0.5, 9.0),
        occluded_merge("occluded_merge_05", 11.0, 90.0, 6.0, 5.0),
    ]);
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

pub fn critical_suite() -> Vec<Scenario> {
    generate()
        .into_iter()
        .filter(|s| CRITICAL_SUITE.contains(&s.id.as_str()))
        .collect()
}

/// Writes `scenarios/<id>.json` and `critical_suite.json` under `dir`.
pub fn write_corpus(dir: impl AsRef<Path>) -> std::io::Result<()> {
    let dir = dir.as_ref();
    let scenarios = dir.join("scenarios");
    std::fs::create_dir_all(&scenarios)?;
    for s in generate() {
        std::fs::write(scenarios.join(format!("{}.json", s.id)), s.to_json_string() + "\n")?;
    }
    std::fs::write(
        dir.join("critical_suite.json"),
        SuiteFile::critical().to_json_string() + "\n",
    )
}

/// Loads every `*.json` scenario in `dir`, sorted by id.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Vec<Scenario>, ScenarioError> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|source| ScenarioError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| ScenarioError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let path = entry.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    let mut out = paths
        .iter()
        .map(load_scenario)
        .collect::<Result<Vec<_>, _>>()?;
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}
