//! Lattice planner: a fixed grid of terminal Frenet states connected to the
//! current state, searched for the cheapest feasible connection.

use serde::{Deserialize, Serialize};

use super::frenet::{
    initial_collision, integrate, proximity_cost, search, AgentFrenetCache, FrenetStart,
    SearchSetup, TerminalGrid,
};
use super::idm::idm_plan_with_cache;
use super::{
    IdmParams, KinematicLimits, PlanError, PlanOutput, Planner, PlanningContext, DEFAULT_HORIZON,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransitionWeights {
    pub smoothness: f64,
    pub offset: f64,
    pub obstacle: f64,
}

impl Default for TransitionWeights {
    fn default() -> Self {
        Self {
            smoothness: 0.1,
            offset: 1.0,
            obstacle: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatticeConfig {
    pub terminal_lateral_offsets: Vec<f64>,
    /// Also offer the current lateral offset as a terminal.
    pub include_current_offset: bool,
    pub terminal_times: Vec<f64>,
    pub terminal_speeds: Vec<f64>,
    /// Also offer the capped desired speed as a terminal.
    pub include_desired_speed: bool,
    pub transition_cost_weights: TransitionWeights,
    /// Weight of the squared deviation from the capped desired speed.
    pub speed_weight: f64,
    pub constraint_limits: KinematicLimits,
    pub safety_margin: f64,
    pub obstacle_sigma: f64,
    /// Desired speed; the road limit when unset.
    pub target_speed: Option<f64>,
    pub horizon: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            terminal_lateral_offsets: vec![-3.0, -1.5, 0.0, 1.5, 3.0],
            include_current_offset: true,
            terminal_times: vec![3.0, 5.0, 8.0],
            terminal_speeds: vec![0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0],
            include_desired_speed: true,
            transition_cost_weights: TransitionWeights::default(),
            speed_weight: 1.0,
            constraint_limits: KinematicLimits::default(),
            safety_margin: 0.2,
            obstacle_sigma: 2.0,
            target_speed: None,
            horizon: DEFAULT_HORIZON,
        }
    }
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.terminal_lateral_offsets.is_empty()
            || self.terminal_times.is_empty()
            || self.terminal_speeds.is_empty()
        {
            return Err("lattice: terminal lists must be non-empty".into());
        }
        if self.terminal_times.iter().any(|&t| !(t > 0.0)) {
            return Err("lattice: terminal_times must be > 0".into());
        }
        if self.terminal_speeds.iter().any(|&v| !(v >= 0.0)) {
            return Err("lattice: terminal_speeds must be >= 0".into());
        }
        let l = &self.constraint_limits;
        if !(l.max_curvature > 0.0 && l.max_accel > 0.0 && l.max_lat_accel > 0.0) {
            return Err("lattice: constraint_limits must be positive".into());
        }
        let w = &self.transition_cost_weights;
        if [w.smoothness, w.offset, w.obstacle, self.speed_weight]
            .iter()
            .any(|&x| !(x >= 0.0))
        {
            return Err("lattice: weights must be >= 0".into());
        }
        if !(self.safety_margin >= 0.0 && self.obstacle_sigma > 0.0 && self.horizon > 0.0) {
            return Err("lattice: safety_margin >= 0, obstacle_sigma and horizon > 0".into());
        }
        Ok(())
    }

    pub fn desired_speed(&self, speed_limit: f64) -> f64 {
        self.target_speed.unwrap_or(speed_limit)
    }
}

/// Runs the lattice search; falls back to IDM along the centerline when no
/// candidate survives the constraints.
pub fn lattice_plan(
    ctx: &PlanningContext<'_>,
    cfg: &LatticeConfig,
    idm: &IdmParams,
) -> Result<PlanOutput, PlanError> {
    let cache = AgentFrenetCache::build(ctx.path, ctx.predictions);
    let desired = cfg.desired_speed(ctx.speed_limit);
    let v_target = desired.min(ctx.cap).max(0.0);
    let start = FrenetStart::from_context(ctx);

    let mut offsets = cfg.terminal_lateral_offsets.clone();
    if cfg.include_current_offset && !offsets.iter().any(|&d| (d - start.d).abs() < 1e-9) {
        offsets.push(start.d);
    }
    let mut speeds: Vec<f64> = cfg
        .terminal_speeds
        .iter()
        .copied()
        .filter(|&v| v <= v_target + 1e-9)
        .collect();
    if cfg.include_desired_speed && !speeds.iter().any(|&v| (v - v_target).abs() < 1e-9) {
        speeds.push(v_target);
    }
    let grid = TerminalGrid {
        offsets,
        times: cfg.terminal_times.clone(),
        speeds,
    };
    let setup = SearchSetup {
        ctx,
        cache: &cache,
        limits: &cfg.constraint_limits,
        margin: cfg.safety_margin,
        speed_ceiling: v_target,
    };
    let w = cfg.transition_cost_weights;
    let ego = &ctx.frame.ego;
    let selection = search(&setup, &grid, |cand, traj, agents| {
        let smooth = integrate(cand, |p| p.s_ddd * p.s_ddd + p.d_ddd * p.d_ddd);
        let offset = integrate(cand, |p| p.d * p.d);
        let speed = integrate(cand, |p| (p.s_d - v_target).powi(2));
        let obstacle = if w.obstacle > 0.0 {
            proximity_cost(
                traj,
                ego.width,
                ego.length,
                &cache,
                agents,
                cfg.obstacle_sigma,
            )
        } else {
            0.0
        };
        w.smoothness * smooth + w.offset * offset + w.obstacle * obstacle + cfg.speed_weight * speed
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
pub struct LatticePlanner {
    pub config: LatticeConfig,
    pub fallback: IdmParams,
}

impl LatticePlanner {
    pub fn new(config: LatticeConfig, fallback: IdmParams) -> Self {
        Self { config, fallback }
    }
}

impl Planner for LatticePlanner {
    fn name(&self) -> &'static str {
        "lattice"
    }

    fn desired_speed(&self, speed_limit: f64) -> f64 {
        self.config.desired_speed(speed_limit)
    }

    fn plan(&self, ctx: &PlanningContext<'_>) -> Result<PlanOutput, PlanError> {
        lattice_plan(ctx, &self.config, &self.fallback)
    }
}
