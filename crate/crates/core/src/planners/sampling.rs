//! Sampling planner in the style of Frenetix: many polynomial candidates
//! varying in end offset, end speed and horizon, ranked by a weighted sum of
//! five cost terms.

use serde::{Deserialize, Serialize};

use super::frenet::{
    initial_collision, integrate, proximity_cost, search, AgentFrenetCache, FrenetStart,
    SearchSetup, TerminalGrid,
};
use super::idm::idm_plan_with_cache;
use super::{
    IdmParams, KinematicLimits, PlanError, PlanOutput, Planner, PlanningContext, DEFAULT_HORIZON,
    PLAN_STEP,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingWeights {
    pub lateral_accel: f64,
    pub longitudinal_accel: f64,
    pub velocity_deviation: f64,
    pub route_distance: f64,
    pub collision_risk: f64,
}

impl Default for SamplingWeights {
    fn default() -> Self {
        Self {
            lateral_accel: 1.0,
            longitudinal_accel: 1.0,
            velocity_deviation: 2.0,
            route_distance: 1.0,
            collision_risk: 5.0,
        }
    }
}

impl SamplingWeights {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.lateral_accel,
            self.longitudinal_accel,
            self.velocity_deviation,
            self.route_distance,
            self.collision_risk,
        ]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            lateral_accel: self.lateral_accel * factor,
            longitudinal_accel: self.longitudinal_accel * factor,
            velocity_deviation: self.velocity_deviation * factor,
            route_distance: self.route_distance * factor,
            collision_risk: self.collision_risk * factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingPlannerConfig {
    pub cost_weights: SamplingWeights,
    pub lateral_end_offsets: Vec<f64>,
    pub include_current_offset: bool,
    pub horizon_set: Vec<f64>,
    pub end_speed_set: Vec<f64>,
    pub constraint_limits: KinematicLimits,
    pub safety_margin: f64,
    pub risk_sigma: f64,
    pub target_speed: Option<f64>,
    pub horizon: f64,
}

impl Default for SamplingPlannerConfig {
    fn default() -> Self {
        Self {
            cost_weights: SamplingWeights::default(),
            lateral_end_offsets: (-3..=3).map(f64::from).collect(),
            include_current_offset: true,
            horizon_set: vec![3.0, 5.0, 8.0],
            end_speed_set: (0..=15).map(f64::from).collect(),
            constraint_limits: KinematicLimits::default(),
            safety_margin: 0.2,
            risk_sigma: 2.0,
            target_speed: None,
            horizon: DEFAULT_HORIZON,
        }
    }
}

impl SamplingPlannerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let w = self.cost_weights.as_array();
        if w.iter().any(|&x| !(x >= 0.0)) || !w.iter().any(|&x| x > 0.0) {
            return Err("sampling: cost_weights must be >= 0 with at least one > 0".into());
        }
        if self.lateral_end_offsets.is_empty()
            || self.horizon_set.is_empty()
            || self.end_speed_set.is_empty()
        {
            return Err("sampling: candidate sets must be non-empty".into());
        }
        if self.horizon_set.iter().any(|&t| !(t > 0.0))
            || self.end_speed_set.iter().any(|&v| !(v >= 0.0))
        {
            return Err("sampling: horizons must be > 0 and end speeds >= 0".into());
        }
        let l = &self.constraint_limits;
        if !(l.max_curvature > 0.0 && l.max_accel > 0.0 && l.max_lat_accel > 0.0) {
            return Err("sampling: constraint_limits must be positive".into());
        }
        if !(self.safety_margin >= 0.0 && self.risk_sigma > 0.0 && self.horizon > 0.0) {
            return Err("sampling: safety_margin >= 0, risk_sigma and horizon > 0".into());
        }
        Ok(())
    }

    pub fn desired_speed(&self, speed_limit: f64) -> f64 {
        self.target_speed.unwrap_or(speed_limit)
    }
}

/// Samples, filters and ranks candidates; IDM fallback when none survives.
pub fn sampling_plan(
    ctx: &PlanningContext<'_>,
    cfg: &SamplingPlannerConfig,
    idm: &IdmParams,
) -> Result<PlanOutput, PlanError> {
    let cache = AgentFrenetCache::build(ctx.path, ctx.predictions);
    let desired = cfg.desired_speed(ctx.speed_limit);
    let v_des = desired.min(ctx.cap).max(0.0);
    let start = FrenetStart::from_context(ctx);

    let mut offsets = cfg.lateral_end_offsets.clone();
    if cfg.include_current_offset && !offsets.iter().any(|&d| (d - start.d).abs() < 1e-9) {
        offsets.push(start.d);
    }
    let grid = TerminalGrid {
        offsets,
        times: cfg.horizon_set.clone(),
        speeds: cfg.end_speed_set.clone(),
    };
    let setup = SearchSetup {
        ctx,
        cache: &cache,
        limits: &cfg.constraint_limits,
        margin: cfg.safety_margin,
        speed_ceiling: v_des,
    };
    let w = cfg.cost_weights;
    let ego = &ctx.frame.ego;
    let selection = search(&setup, &grid, |cand, traj, agents| {
        let lat = integrate(cand, |p| p.d_dd * p.d_dd);
        let lon = integrate(cand, |p| p.s_dd * p.s_dd);
        let vel = traj
            .states
            .iter()
            .map(|st| (st.speed - v_des).powi(2))
            .sum::<f64>()
            * PLAN_STEP;
        let route = integrate(cand, |p| p.d * p.d);
        let risk = if w.collision_risk > 0.0 {
            proximity_cost(traj, ego.width, ego.length, &cache, agents, cfg.risk_sigma)
        } else {
            0.0
        };
        w.lateral_accel * lat
            + w.longitudinal_accel * lon
            + w.velocity_deviation * vel
            + w.route_distance * route
            + w.collision_risk * risk
    });

    match selection {
        Some(sel) => Ok(PlanOutput {
            trajectory: sel.trajectory,
            desired_speed: desired,
            candidate: Some(sel.index),
            terminal: Some(sel.terminal),
            fallback: false,
        }),
        None => {
            if initial_collision(ctx, &cache) {
                return Err(PlanError::NoFeasibleTrajectory(
                    "ego already overlaps an agent".into(),
                ));
            }
            let mut params = idm.clone();
            params.v0 = desired;
            params.v0_from_speed_limit = false;
            Ok(PlanOutput {
                trajectory: idm_plan_with_cache(ctx, &params, &cache)?,
                desired_speed: desired,
                candidate: None,
                terminal: None,
                fallback: true,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplingPlanner {
    pub config: SamplingPlannerConfig,
    pub fallback: IdmParams,
}

impl SamplingPlanner {
    pub fn new(config: SamplingPlannerConfig, fallback: IdmParams) -> Self {
        Self { config, fallback }
    }
}

impl Planner for SamplingPlanner {
    fn name(&self) -> &'static str {
        "sampling"
    }

    fn desired_speed(&self, speed_limit: f64) -> f64 {
        self.config.desired_speed(speed_limit)
    }

    fn plan(&self, ctx: &PlanningContext<'_>) -> Result<PlanOutput, PlanError> {
        sampling_plan(ctx, &self.config, &self.fallback)
    }
}
