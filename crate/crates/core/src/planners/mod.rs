//! Bottom-layer rule-based planners.
//!
//! All planners share [`Planner`]: given the current frame, agent predictions
//! and a speed cap, emit a [`Trajectory`] sampled every 0.1 s over the
//! planning horizon.

mod frenet;
pub mod idm;
pub mod lattice;
pub mod poly;
pub mod prediction;
pub mod sampling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::Frame;
use crate::geom::{CartesianPose, GeomError, ReferencePath};

pub use idm::{idm_accel, idm_plan, DesiredGap, IdmParams, IdmPlanner};
pub use lattice::{lattice_plan, LatticeConfig, LatticePlanner};
pub use prediction::{predict_agents, AgentPrediction, PredictionSource};
pub use sampling::{sampling_plan, SamplingPlanner, SamplingPlannerConfig};

/// Time between trajectory samples.
pub const PLAN_STEP: f64 = 0.1;
/// Default planning horizon.
pub const DEFAULT_HORIZON: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no feasible trajectory: {0}")]
    NoFeasibleTrajectory(String),
    #[error("non-positive gap {0} m to leader")]
    NonPositiveGap(f64),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub t: f64,
    pub pose: CartesianPose,
    pub speed: f64,
    pub accel: f64,
    /// Signed path curvature (1/m), used as steering feedforward.
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<TrajectoryState>,
    pub horizon: f64,
}

pub fn step_count(horizon: f64) -> usize {
    (horizon / PLAN_STEP + 1e-6).floor() as usize
}

impl Trajectory {
    /// Checks the time grid and speed invariants.
    pub fn validate(&self) -> Result<(), String> {
        let n = step_count(self.horizon);
        if self.states.len() != n + 1 {
            return Err(format!(
                "expected {} states for horizon {}, got {}",
                n + 1,
                self.horizon,
                self.states.len()
            ));
        }
        for (k, st) in self.states.iter().enumerate() {
            if (st.t - k as f64 * PLAN_STEP).abs() > 1e-9 {
                return Err(format!("state {k} at t={} off the grid", st.t));
            }
            if !(st.speed >= 0.0) || !st.pose.is_finite() {
                return Err(format!("state {k} has invalid speed or pose"));
            }
        }
        Ok(())
    }

    pub fn max_speed(&self) -> f64 {
        self.states.iter().map(|s| s.speed).fold(0.0, f64::max)
    }

    /// Linear interpolation of the state at time `t`, clamped to the horizon.
    pub fn sample(&self, t: f64) -> TrajectoryState {
        let last = self.states.len() - 1;
        let x = (t / PLAN_STEP).clamp(0.0, last as f64);
        let i = (x.floor() as usize).min(last);
        if i == last {
            return self.states[last];
        }
        let u = x - i as f64;
        let (a, b) = (&self.states[i], &self.states[i + 1]);
        let dth = crate::geom::normalize_angle(b.pose.theta - a.pose.theta);
        TrajectoryState {
            t,
            pose: CartesianPose::new(
                a.pose.x + u * (b.pose.x - a.pose.x),
                a.pose.y + u * (b.pose.y - a.pose.y),
                a.pose.theta + u * dth,
            ),
            speed: a.speed + u * (b.speed - a.speed),
            accel: a.accel + u * (b.accel - a.accel),
            curvature: a.curvature + u * (b.curvature - a.curvature),
        }
    }
}

/// Kinematic limits checked on every non-fallback trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinematicLimits {
    pub max_curvature: f64,
    pub max_accel: f64,
    pub max_lat_accel: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        Self {
            max_curvature: 0.2,
            max_accel: 4.0,
            max_lat_accel: 4.0,
        }
    }
}

/// Everything a planner sees in one cycle.
#[derive(Debug, Clone, Copy)]
pub struct PlanningContext<'a> {
    pub frame: &'a Frame,
    /// Route centerline.
    pub path: &'a ReferencePath,
    pub speed_limit: f64,
    /// Arbitrated speed cap from the upper layer.
    pub cap: f64,
    /// Absolute centerline stations of currently red stop lines.
    pub red_stop_lines: &'a [f64],
    pub predictions: &'a [AgentPrediction],
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalState {
    pub d_end: f64,
    pub t_end: f64,
    pub v_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutput {
    pub trajectory: Trajectory,
    /// Speed the planner would aim for without any cap (`v_rule`).
    pub desired_speed: f64,
    /// Index of the selected candidate in enumeration order.
    pub candidate: Option<usize>,
    /// Terminal state of the selected candidate.
    pub terminal: Option<TerminalState>,
    /// True when a candidate planner fell back to IDM.
    pub fallback: bool,
}

pub trait Planner: Send + Sync {
    fn name(&self) -> &'static str;

    /// Uncapped target speed for a road with the given limit.
    fn desired_speed(&self, speed_limit: f64) -> f64;

    fn plan(&self, ctx: &PlanningContext<'_>) -> Result<PlanOutput, PlanError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Idm,
    Lattice,
    Sampling,
}

impl PlannerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerKind::Idm => "idm",
            PlannerKind::Lattice => "lattice",
            PlannerKind::Sampling => "sampling",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "idm" => Ok(Self::Idm),
            "lattice" => Ok(Self::Lattice),
            "sampling" => Ok(Self::Sampling),
            other => Err(format!("unknown planner `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfigs {
    pub idm: IdmParams,
    pub lattice: LatticeConfig,
    pub sampling: SamplingPlannerConfig,
}

pub fn build_planner(kind: PlannerKind, cfg: &PlannerConfigs) -> Box<dyn Planner> {
    match kind {
        PlannerKind::Idm => Box::new(IdmPlanner::new(cfg.idm.clone())),
        PlannerKind::Lattice => Box::new(LatticePlanner::new(cfg.lattice.clone(), cfg.idm.clone())),
        PlannerKind::Sampling => {
            Box::new(SamplingPlanner::new(cfg.sampling.clone(), cfg.idm.clone()))
        }
    }
}

/// Straight-line braking along the current heading at `decel` until standstill.
pub fn braking_trajectory(frame: &Frame, decel: f64, horizon: f64) -> Trajectory {
    let n = step_count(horizon);
    let ego = &frame.ego;
    let (sin, cos) = ego.pose.theta.sin_cos();
    let mut states = Vec::with_capacity(n + 1);
    let (mut dist, mut v) = (0.0, ego.speed);
    for k in 0..=n {
        let accel = if v > 0.0 { -decel } else { 0.0 };
        states.push(TrajectoryState {
            t: k as f64 * PLAN_STEP,
            pose: CartesianPose::new(
                ego.pose.x + dist * cos,
                ego.pose.y + dist * sin,
                ego.pose.theta,
            ),
            speed: v,
            accel,
            curvature: 0.0,
        });
        let (dd, nv) = advance(v, accel, PLAN_STEP);
        dist += dd;
        v = nv;
    }
    Trajectory { states, horizon }
}

/// Integrates one step of constant acceleration, stopping at zero speed.
/// Returns `(distance, new_speed)`.
pub fn advance(v: f64, accel: f64, dt: f64) -> (f64, f64) {
    let nv = v + accel * dt;
    if nv >= 0.0 {
        (v * dt + 0.5 * accel * dt * dt, nv)
    } else if accel < 0.0 {
        (v * v / (-2.0 * accel), 0.0)
    } else {
        (0.0, 0.0)
    }
}
