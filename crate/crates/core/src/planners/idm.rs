//! Intelligent Driver Model along the route centerline.

use serde::{Deserialize, Serialize};

use crate::geom::{to_cartesian, FrenetPose};

use super::frenet::AgentFrenetCache;
use super::{
    advance, step_count, PlanError, PlanOutput, Planner, PlanningContext, Trajectory,
    TrajectoryState, DEFAULT_HORIZON, PLAN_STEP,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DesiredGap {
    /// `s*` is the fixed safety distance.
    Constant,
    /// Classical `s0 + vT + v dv / (2 sqrt(ab))` with `s0 = s_star`.
    Dynamic {
        time_headway: f64,
        comfortable_decel: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    /// Acceleration limit (m/s^2).
    pub a: f64,
    /// Target speed (m/s); replaced by the road limit when `v0_from_speed_limit`.
    pub v0: f64,
    pub v0_from_speed_limit: bool,
    /// Safety distance (m).
    pub s_star: f64,
    pub delta: f64,
    /// Bumper gap that is never planned into (m).
    pub min_gap_floor: f64,
    /// Braking bound (m/s^2, positive).
    pub max_brake: f64,
    /// Agents whose center is within this lateral distance are leaders.
    pub half_lane_width: f64,
    pub desired_gap: DesiredGap,
    pub horizon: f64,
    /// Integration step inside each 0.1 s plan step (s).
    pub integration_step: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            a: 1.5,
            v0: 15.0,
            v0_from_speed_limit: true,
            s_star: 10.0,
            delta: 4.0,
            min_gap_floor: 2.0,
            max_brake: 4.0,
            half_lane_width: 1.5,
            desired_gap: DesiredGap::Constant,
            horizon: DEFAULT_HORIZON,
            integration_step: 0.001,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.a > 0.0 && self.v0 > 0.0 && self.s_star > 0.0 && self.delta > 0.0) {
            return Err("idm: a, v0, s_star and delta must be > 0".into());
        }
        if !(self.max_brake > 0.0 && self.min_gap_floor >= 0.0 && self.horizon > 0.0) {
            return Err("idm: max_brake and horizon must be > 0, min_gap_floor >= 0".into());
        }
        let sub = PLAN_STEP / self.integration_step;
        if !(self.integration_step > 0.0 && (sub - sub.round()).abs() < 1e-6) {
            return Err("idm: integration_step must divide the 0.1 s plan step".into());
        }
        Ok(())
    }

    pub fn target_speed(&self, speed_limit: f64) -> f64 {
        if self.v0_from_speed_limit {
            speed_limit
        } else {
            self.v0
        }
    }
}

/// IDM acceleration for speed `v` and leader gap `s` (use `f64::INFINITY`
/// without a leader), clamped to `[-max_brake, a]`.
pub fn idm_accel(v: f64, s: f64, p: &IdmParams) -> Result<f64, PlanError> {
    idm_accel_approaching(v, s, 0.0, p)
}

/// As [`idm_accel`] with the closing speed to the leader, used by the
/// dynamic desired-gap mode.
pub fn idm_accel_approaching(
    v: f64,
    s: f64,
    approach_rate: f64,
    p: &IdmParams,
) -> Result<f64, PlanError> {
    if s <= 0.0 || s.is_nan() {
        return Err(PlanError::NonPositiveGap(s));
    }
    if p.v0 <= 1e-9 {
        // nowhere to go: stop and stay stopped
        return Ok(if v > 0.0 { -p.max_brake } else { 0.0 });
    }
    let free = (v / p.v0).powf(p.delta);
    let gap_term = if s.is_infinite() {
        0.0
    } else {
        let desired = match p.desired_gap {
            DesiredGap::Constant => p.s_star,
            DesiredGap::Dynamic {
                time_headway,
                comfortable_decel,
            } => {
                let dyn_part =
                    v * time_headway + v * approach_rate / (2.0 * (p.a * comfortable_decel).sqrt());
                p.s_star + dyn_part.max(0.0)
            }
        };
        (desired / s).powi(2)
    };
    let raw = p.a * (1.0 - free - gap_term);
    Ok(raw.clamp(-p.max_brake, p.a))
}

/// Forward-integrates IDM along the centerline (lateral offset zero).
pub fn idm_plan(ctx: &PlanningContext<'_>, p: &IdmParams) -> Result<Trajectory, PlanError> {
    let cache = AgentFrenetCache::build(ctx.path, ctx.predictions);
    idm_plan_with_cache(ctx, p, &cache)
}

pub(super) fn idm_plan_with_cache(
    ctx: &PlanningContext<'_>,
    p: &IdmParams,
    cache: &AgentFrenetCache,
) -> Result<Trajectory, PlanError> {
    let path = ctx.path;
    let n = step_count(ctx.horizon);
    let ego = &ctx.frame.ego;
    let (mut s, _) = path.project(ego.pose.x, ego.pose.y);
    let mut v = ego.speed;
    let mut params = p.clone();
    params.v0 = p.target_speed(ctx.speed_limit).min(ctx.cap).max(0.0);
    let length = path.length();

    let substeps = ((PLAN_STEP / p.integration_step).round() as usize).max(1);
    let tau = PLAN_STEP / substeps as f64;
    let mut states = Vec::with_capacity(n + 1);
    for k in 0..=n {
        // The leader keeps its current speed over the step.
        let leader = cache.leader(k, s, 0.0, p.half_lane_width, ego.length, ctx.red_stop_lines);
        let (mut s_sub, mut v_sub) = (s, v);
        for j in 0..substeps {
            let accel = match &leader {
                Some(l) => {
                    let gap = l.gap - p.min_gap_floor - (s_sub - s) + l.speed * j as f64 * tau;
                    if gap <= 0.0 {
                        -p.max_brake
                    } else {
                        idm_accel_approaching(v_sub, gap, v_sub - l.speed, &params)?
                    }
                }
                None => idm_accel(v_sub, f64::INFINITY, &params)?,
            };
            let (ds, nv) = advance(v_sub, accel, tau);
            s_sub += ds;
            v_sub = nv;
        }
        let s_clamped = s.min(length);
        let pose = to_cartesian(path, &FrenetPose::new(s_clamped, 0.0, 0.0), 0.0)?;
        states.push(TrajectoryState {
            t: k as f64 * PLAN_STEP,
            pose,
            speed: v,
            accel: (v_sub - v) / PLAN_STEP,
            curvature: path.curvature_at(s_clamped),
        });
        s = s_sub;
        v = v_sub;
    }
    Ok(Trajectory {
        states,
        horizon: n as f64 * PLAN_STEP,
    })
}

#[derive(Debug, Clone)]
pub struct IdmPlanner {
    pub params: IdmParams,
}

impl IdmPlanner {
    pub fn new(params: IdmParams) -> Self {
        Self { params }
    }
}

impl Planner for IdmPlanner {
    fn name(&self) -> &'static str {
        "idm"
    }

    fn desired_speed(&self, speed_limit: f64) -> f64 {
        self.params.target_speed(speed_limit)
    }

    fn plan(&self, ctx: &PlanningContext<'_>) -> Result<PlanOutput, PlanError> {
        Ok(PlanOutput {
            trajectory: idm_plan(ctx, &self.params)?,
            desired_speed: self.desired_speed(ctx.speed_limit),
            candidate: None,
            terminal: None,
            fallback: false,
        })
    }
}
