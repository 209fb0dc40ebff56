//! Closed-loop simulation.
//!
//! Each step the planner replans (every `plan_period`), the upper layer is
//! consulted (every `call_period`), the ego tracks the plan and background
//! agents advance. Collisions are recorded but never stop the run.

mod background;
mod control;
mod trace;

use serde::{Deserialize, Serialize};

use crate::encoder::{encode_scene, EncoderConfig};
use crate::frame::{EgoSnapshot, Frame};
use crate::geom::{boxes_collide, OrientedBox};
use crate::planners::{
    braking_trajectory, predict_agents, PlanningContext, Planner, PredictionSource, Trajectory,
    DEFAULT_HORIZON,
};
use crate::reasoner::{arbitrate, build_prompt, Reasoner, ReasonerDecision, ReasonerRequest};
use crate::scenario::Scenario;

pub use background::{Background, BackgroundConfig};
pub use control::{
    lqr_gain, snap_to, tracking_errors, EgoDynamicsState, LqrWeights, Tracker, VehicleParams,
};
pub use trace::{
    AgentRecordOut, EgoRecord, SimTrace, TraceError, TraceRecord, TRACE_FORMAT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    NonReactive,
    Reactive,
}

impl SimMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimMode::NonReactive => "non_reactive",
            SimMode::Reactive => "reactive",
        }
    }
}

impl std::str::FromStr for SimMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "non_reactive" => Ok(Self::NonReactive),
            "reactive" => Ok(Self::Reactive),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Lqr,
    PerfectTracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    ConstantVelocity,
    LogReplay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub step: f64,
    pub duration: f64,
    pub mode: SimMode,
    pub controller: ControllerKind,
    /// Recorded in the trace; the simulation itself draws no random numbers.
    pub seed: u64,
    /// Seconds between replans.
    pub plan_period: f64,
    pub planning_horizon: f64,
    pub prediction: PredictionMode,
    pub vehicle: VehicleParams,
    pub lqr: LqrWeights,
    pub background: BackgroundConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step: 0.1,
            duration: 15.0,
            mode: SimMode::NonReactive,
            controller: ControllerKind::Lqr,
            seed: 0,
            plan_period: 0.1,
            planning_horizon: DEFAULT_HORIZON,
            prediction: PredictionMode::ConstantVelocity,
            vehicle: VehicleParams::default(),
            lqr: LqrWeights::default(),
            background: BackgroundConfig::default(),
        }
    }
}

/// Whole number of `step`s in `period`, or `None` if it is not a multiple.
fn steps_in(period: f64, step: f64) -> Option<usize> {
    let n = (period / step).round();
    ((period / step - n).abs() < 1e-6 && n >= 1.0).then_some(n as usize)
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.step > 0.0) {
            return Err("sim.step must be > 0".into());
        }
        if !(self.duration > 0.0) || steps_in(self.duration, self.step).is_none() {
            return Err("sim.duration must be a positive multiple of sim.step".into());
        }
        if steps_in(self.plan_period, self.step).is_none() {
            return Err("sim.plan_period must be a positive multiple of sim.step".into());
        }
        if !(self.planning_horizon >= self.plan_period) {
            return Err("sim.planning_horizon must cover the plan period".into());
        }
        let v = &self.vehicle;
        if !(v.wheelbase > 0.0 && v.max_steer > 0.0 && v.width > 0.0 && v.length > 0.0) {
            return Err("sim.vehicle dimensions must be > 0".into());
        }
        if !(v.max_accel > 0.0 && v.max_decel > 0.0 && v.speed_gain > 0.0) {
            return Err("sim.vehicle limits must be > 0".into());
        }
        if !(self.lqr.q.iter().all(|&q| q >= 0.0) && self.lqr.r > 0.0) {
            return Err("sim.lqr weights: q >= 0, r > 0".into());
        }
        Ok(())
    }

    /// Number of trace records, `duration / step + 1`.
    pub fn record_count(&self) -> usize {
        steps_in(self.duration, self.step).unwrap_or(0) + 1
    }
}

/// Upper-layer wiring for a run.
pub struct UpperLayer<'a> {
    pub reasoner: &'a mut dyn Reasoner,
    pub encoder: EncoderConfig,
    pub call_period: f64,
    pub max_prompt_chars: usize,
}

/// One step of the ego under the configured controller. Builds the LQR
/// schedule on every call; [`run`] builds it once.
pub fn step_ego(state: &EgoDynamicsState, target: &Trajectory, cfg: &SimConfig) -> EgoDynamicsState {
    match cfg.controller {
        ControllerKind::PerfectTracking => snap_to(target, 0.0, cfg.step, &cfg.vehicle),
        ControllerKind::Lqr => Tracker::new(cfg.vehicle, &cfg.lqr, cfg.step).step(state, target, 0.0),
    }
}

fn footprint(state: &EgoDynamicsState, v: &VehicleParams) -> OrientedBox {
    OrientedBox::new(state.pose(), v.width, v.length)
}

/// Runs one closed-loop simulation.
pub fn run(
    scenario: &Scenario,
    planner: &dyn Planner,
    mut upper: Option<UpperLayer<'_>>,
    cfg: &SimConfig,
) -> SimTrace {
    let dt = cfg.step;
    let steps = cfg.record_count() - 1;
    let plan_every = steps_in(cfg.plan_period, dt).unwrap_or(1);
    let call_every = upper
        .as_ref()
        .map(|u| steps_in(u.call_period, dt).unwrap_or(1).max(1));
    let tracker = Tracker::new(cfg.vehicle, &cfg.lqr, dt);
    let path = &scenario.centerline;
    let v_rule = planner.desired_speed(scenario.speed_limit);

    let init = scenario.ego_init;
    let mut ego = EgoDynamicsState {
        x: init.x,
        y: init.y,
        theta: init.theta,
        v: init.speed.max(0.0),
        steering_angle: 0.0,
    };
    let mut ego_accel = 0.0;
    let mut background = Background::new(scenario, cfg.mode == SimMode::Reactive);
    let mut decision: Option<ReasonerDecision> = None;
    let mut plan: Option<(Trajectory, usize)> = None;
    let mut trace = SimTrace::new(scenario, planner.name(), cfg);
    let mut last_plan_info = trace::PlanInfo::idle(v_rule);

    for k in 0..=steps {
        let t = k as f64 * dt;
        let frame = Frame {
            t,
            ego: EgoSnapshot {
                pose: ego.pose(),
                speed: ego.v,
                accel: ego_accel,
                curvature: ego.steering_angle.tan() / cfg.vehicle.wheelbase,
                width: cfg.vehicle.width,
                length: cfg.vehicle.length,
            },
            agents: background.snapshots(scenario),
        };
        let ego_box = frame.ego.footprint();
        let collisions: Vec<String> = frame
            .agents
            .iter()
            .filter(|a| boxes_collide(&ego_box, &a.footprint()))
            .map(|a| a.id.clone())
            .collect();

        let mut called = None;
        if k < steps {
            if let (Some(u), Some(every)) = (upper.as_mut(), call_every) {
                if k % every == 0 {
                    let descriptions = encode_scene(&frame, path, &u.encoder).unwrap_or_default();
                    let prompt = build_prompt(
                        &descriptions,
                        ego.v,
                        scenario.speed_limit,
                        u.max_prompt_chars,
                    );
                    let req = ReasonerRequest {
                        step: k,
                        frame: &frame,
                        path,
                        prompt: &prompt,
                    };
                    decision = Some(u.reasoner.decide(&req));
                    called = Some(prompt.hash());
                }
            }
        }
        let cap = decision.as_ref().map_or(v_rule, |d| arbitrate(v_rule, d));
        let hard_brake = decision.as_ref().is_some_and(|d| d.is_hard_brake());

        if k < steps {
            let replan = k % plan_every == 0 || plan.is_none() || called.is_some();
            if replan {
                let red = scenario.red_stop_lines(t);
                let source = match cfg.prediction {
                    PredictionMode::ConstantVelocity => PredictionSource::ConstantVelocity,
                    PredictionMode::LogReplay => PredictionSource::LogReplay(scenario),
                };
                let predictions = predict_agents(&frame, cfg.planning_horizon, source);
                let ctx = PlanningContext {
                    frame: &frame,
                    path,
                    speed_limit: scenario.speed_limit,
                    cap,
                    red_stop_lines: &red,
                    predictions: &predictions,
                    horizon: cfg.planning_horizon,
                };
                let mut info = trace::PlanInfo::idle(v_rule);
                info.cap = cap;
                let traj = if hard_brake {
                    info.hard_brake = true;
                    braking_trajectory(&frame, cfg.vehicle.max_decel, cfg.planning_horizon)
                } else {
                    match planner.plan(&ctx) {
                        Ok(out) => {
                            info.candidate = out.candidate;
                            info.fallback = out.fallback;
                            out.trajectory
                        }
                        Err(e) => {
                            log::debug!("{}: planner failed at t={t:.1}: {e}", scenario.id);
                            info.emergency_brake = true;
                            info.plan_error = Some(e.to_string());
                            braking_trajectory(&frame, cfg.vehicle.max_decel, cfg.planning_horizon)
                        }
                    }
                };
                last_plan_info = info;
                plan = Some((traj, k));
            } else {
                last_plan_info.cap = cap;
            }
        }

        let failures = upper.as_ref().map_or(0, |u| u.reasoner.failures());
        trace.record(
            k,
            &ego,
            ego_accel,
            &last_plan_info,
            decision.clone(),
            called,
            failures,
            &frame,
            collisions,
        );

        if k == steps {
            break;
        }
        let (traj, planned_at) = plan.as_ref().expect("a plan exists before stepping");
        let offset = (k - planned_at) as f64 * dt;
        let next = match cfg.controller {
            ControllerKind::PerfectTracking => snap_to(traj, offset, dt, &cfg.vehicle),
            ControllerKind::Lqr => tracker.step(&ego, traj, offset),
        };
        ego_accel = (next.v - ego.v) / dt;
        ego = next;
        background.step(scenario, t, dt, &footprint(&ego, &cfg.vehicle), &cfg.background);
    }
    trace
}
