//! Fine-step IDM oracle and the closed-loop IDM fixtures.

use dualad_core::frame::{AgentSnapshot, EgoSnapshot, Frame, EGO_LENGTH};
use dualad_core::geom::{CartesianPose, ReferencePath};
use dualad_core::planners::{
    idm_plan, predict_agents, IdmParams, IdmPlanner, PlanningContext, PredictionSource,
};
use dualad_core::scenario::AgentKind;
use dualad_core::sim::{run, SimConfig, SimMode, SimTrace};
use dualad_core::Scenario;

pub const ORACLE_STEP: f64 = 0.001;
pub const HORIZON: f64 = 8.0;

/// One straight-road IDM case: ego speed, road limit and an optional leader
/// `(center distance ahead, speed, length)`.
#[derive(Debug, Clone, Copy)]
pub struct IdmCase {
    pub name: &'static str,
    pub ego_speed: f64,
    pub speed_limit: f64,
    pub leader: Option<(f64, f64, f64)>,
}

pub const CASES: [IdmCase; 4] = [
    IdmCase { name: "free road from standstill", ego_speed: 0.0, speed_limit: 13.9, leader: None },
    IdmCase { name: "free road above target", ego_speed: 15.0, speed_limit: 11.1, leader: None },
    IdmCase { name: "stationary leader", ego_speed: 10.0, speed_limit: 13.9, leader: Some((30.0, 0.0, 4.6)) },
    IdmCase { name: "slower moving leader", ego_speed: 12.0, speed_limit: 13.9, leader: Some((35.0, 6.0, 4.6)) },
];

/// IDM law written out directly: `a (1 - (v/v0)^4 - (s*/s)^2)`, clamped.
fn law(v: f64, gap: Option<f64>, v0: f64, p: &IdmParams) -> f64 {
    let interaction = match gap {
        None => 0.0,
        Some(g) if g <= 0.0 => return -p.max_brake,
        Some(g) => (p.s_star / g).powi(2),
    };
    let raw = p.a * (1.0 - (v / v0).powi(4) - interaction);
    raw.max(-p.max_brake).min(p.a)
}

/// Ego speed every 0.1 s over the horizon, integrating the law at 1 ms.
pub fn oracle_speeds(case: &IdmCase, p: &IdmParams) -> Vec<f64> {
    let v0 = case.speed_limit;
    let ticks = (HORIZON / ORACLE_STEP).round() as usize;
    let per_sample = (0.1 / ORACLE_STEP).round() as usize;
    let (mut x, mut v) = (0.0_f64, case.ego_speed);
    let mut out = Vec::new();
    for i in 0..=ticks {
        if i % per_sample == 0 {
            out.push(v);
        }
        let t = i as f64 * ORACLE_STEP;
        let gap = case.leader.map(|(ahead, speed, length)| {
            ahead + speed * t - x - 0.5 * EGO_LENGTH - 0.5 * length - p.min_gap_floor
        });
        let a = law(v, gap, v0, p);
        let nv = v + a * ORACLE_STEP;
        if nv < 0.0 {
            x += v * v / (2.0 * -a);
            v = 0.0;
        } else {
            x += 0.5 * (v + nv) * ORACLE_STEP;
            v = nv;
        }
    }
    out
}

fn straight_road() -> ReferencePath {
    ReferencePath::new(vec![[0.0, 0.0], [500.0, 0.0]]).unwrap()
}

/// Planned speed profile for the case.
pub fn planned_speeds(case: &IdmCase, p: &IdmParams) -> Vec<f64> {
    let path = straight_road();
    let agents = case
        .leader
        .map(|(ahead, speed, length)| AgentSnapshot {
            id: "lead".into(),
            kind: AgentKind::Vehicle,
            pose: CartesianPose::new(ahead, 0.0, 0.0),
            speed,
            width: 2.0,
            length,
        })
        .into_iter()
        .collect();
    let frame = Frame {
        t: 0.0,
        ego: EgoSnapshot::new(CartesianPose::new(0.0, 0.0, 0.0), case.ego_speed),
        agents,
    };
    let predictions = predict_agents(&frame, HORIZON, PredictionSource::ConstantVelocity);
    let ctx = PlanningContext {
        frame: &frame,
        path: &path,
        speed_limit: case.speed_limit,
        cap: f64::INFINITY,
        red_stop_lines: &[],
        predictions: &predictions,
        horizon: HORIZON,
    };
    idm_plan(&ctx, p)
        .expect("idm plans")
        .states
        .iter()
        .map(|s| s.speed)
        .collect()
}

/// Largest speed difference between the planner and the oracle over the
/// horizon.
pub fn max_oracle_deviation(case: &IdmCase, p: &IdmParams) -> f64 {
    let planned = planned_speeds(case, p);
    let oracle = oracle_speeds(case, p);
    assert_eq!(planned.len(), oracle.len(), "{}", case.name);
    planned
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// A 15 s straight-road scenario with optional extra agents JSON.
pub fn road_scenario(id: &str, speed_limit: f64, ego_speed: f64, agents: &str) -> Scenario {
    let json = format!(
        r#"{{
  "format": "dualad-scn-1",
  "id": "{id}",
  "centerline": [[0, 0], [400, 0]],
  "speed_limit_mps": {speed_limit},
  "ego_init": [0, 0, 0, {ego_speed}],
  "agents": [{agents}],
  "duration_s": 15
}}"#
    );
    Scenario::from_json_str(&json).expect("fixture scenario is valid")
}

pub fn simulate_idm(scenario: &Scenario, mode: SimMode) -> SimTrace {
    let cfg = SimConfig {
        mode,
        duration: scenario.duration,
        ..Default::default()
    };
    run(scenario, &IdmPlanner::new(IdmParams::default()), None, &cfg)
}

/// Final ego speed on an empty road, entered at `ego_speed`.
pub fn free_road_final_speed(speed_limit: f64, ego_speed: f64) -> f64 {
    let scenario = road_scenario("idm_free_road", speed_limit, ego_speed, "");
    let trace = simulate_idm(&scenario, SimMode::NonReactive);
    trace.records.last().expect("trace is non-empty").ego.v
}

/// Bumper-to-bumper distance from the ego to the parked car at the start.
pub const PARKED_GAP: f64 = 30.0;
const PARKED_LENGTH: f64 = 4.6;

/// A car parked in the ego lane 30 m ahead, approached at `ego_speed`.
pub fn stationary_leader_scenario(ego_speed: f64) -> Scenario {
    let x = PARKED_GAP + 0.5 * EGO_LENGTH + 0.5 * PARKED_LENGTH;
    let lead = format!(
        r#"{{"id": "veh_parked", "kind": "vehicle", "width_m": 2.0, "length_m": {PARKED_LENGTH},
           "states": [[0, {x}, 0, 0, 0], [15, {x}, 0, 0, 0]]}}"#
    );
    road_scenario("idm_stationary_leader", 13.9, ego_speed, &lead)
}

/// Bumper gap to the parked car at the end of the run, the smallest gap
/// seen, and whether the simulator flagged a collision.
pub fn stationary_leader_outcome(ego_speed: f64, mode: SimMode) -> (f64, f64, bool) {
    let scenario = stationary_leader_scenario(ego_speed);
    let x_lead = scenario.agents[0].track[0].x;
    let trace = simulate_idm(&scenario, mode);
    let gaps: Vec<f64> = trace
        .records
        .iter()
        .map(|r| x_lead - r.ego.x - 0.5 * EGO_LENGTH - 0.5 * PARKED_LENGTH)
        .collect();
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    (*gaps.last().expect("trace is non-empty"), min_gap, trace.collided())
}
