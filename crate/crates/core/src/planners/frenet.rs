//! Candidate generation and evaluation shared by the lattice and sampling
//! planners.

use crate::geom::{
    box_distance, boxes_collide, normalize_angle, to_cartesian, FrenetPose, OrientedBox,
    ReferencePath,
};

use super::poly::{QuarticPolynomial, QuinticPolynomial};
use super::{
    AgentPrediction, KinematicLimits, PlanError, PlanningContext, TerminalState, Trajectory,
    TrajectoryState, PLAN_STEP,
};

/// One predicted agent step expressed along the reference path.
#[derive(Debug, Clone, Copy)]
struct AgentStation {
    s: f64,
    d: f64,
    /// Speed component along the path.
    speed: f64,
    /// Half extent of the footprint measured along the path.
    half_along: f64,
}

pub(super) struct Leader {
    /// Bumper-to-bumper distance (m).
    pub gap: f64,
    pub speed: f64,
}

/// Predicted agents, projected once per planning cycle.
pub(super) struct AgentFrenetCache {
    stations: Vec<Vec<AgentStation>>,
    boxes: Vec<Vec<OrientedBox>>,
}

impl AgentFrenetCache {
    pub fn build(path: &ReferencePath, predictions: &[AgentPrediction]) -> Self {
        let mut stations = Vec::with_capacity(predictions.len());
        let mut boxes = Vec::with_capacity(predictions.len());
        for pred in predictions {
            let row = pred
                .states
                .iter()
                .map(|st| {
                    let (s, d) = path.project(st.x, st.y);
                    let rel = normalize_angle(st.theta - path.heading_at(s));
                    let (sin, cos) = rel.sin_cos();
                    AgentStation {
                        s,
                        d,
                        speed: st.speed * cos,
                        half_along: 0.5 * (pred.length * cos.abs() + pred.width * sin.abs()),
                    }
                })
                .collect();
            stations.push(row);
            boxes.push(pred.boxes());
        }
        Self { stations, boxes }
    }

    fn station(&self, agent: usize, k: usize) -> &AgentStation {
        let row = &self.stations[agent];
        &row[k.min(row.len() - 1)]
    }

    pub fn box_at(&self, agent: usize, k: usize) -> &OrientedBox {
        let row = &self.boxes[agent];
        &row[k.min(row.len() - 1)]
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    /// Nearest agent (or red stop line) ahead of an ego at station `ego_s`
    /// driving at lateral offset `lane_d`.
    pub fn leader(
        &self,
        k: usize,
        ego_s: f64,
        lane_d: f64,
        half_lane_width: f64,
        ego_length: f64,
        red_stop_lines: &[f64],
    ) -> Option<Leader> {
        let mut best: Option<Leader> = None;
        let mut offer = |gap: f64, speed: f64| {
            if best.as_ref().is_none_or(|b| gap < b.gap) {
                best = Some(Leader { gap, speed });
            }
        };
        for i in 0..self.len() {
            let st = self.station(i, k);
            let ds = st.s - ego_s;
            if ds > 0.0 && (st.d - lane_d).abs() <= half_lane_width {
                offer(ds - 0.5 * ego_length - st.half_along, st.speed.max(0.0));
            }
        }
        for &line in red_stop_lines {
            let ds = line - ego_s;
            if ds > 0.0 {
                offer(ds - 0.5 * ego_length, 0.0);
            }
        }
        best
    }

    /// Agents that the ego could run into: everything except traffic behind
    /// the ego travelling the same way.
    pub fn relevant(&self, ego_s: f64, ego_length: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let st = self.station(i, 0);
                let behind = st.s + st.half_along < ego_s - 0.5 * ego_length;
                !(behind && st.speed > 0.0)
            })
            .collect()
    }
}

/// Ego state in Frenet coordinates at the start of the cycle.
#[derive(Debug, Clone, Copy)]
pub(super) struct FrenetStart {
    pub s: f64,
    pub d: f64,
    pub s_d: f64,
    pub s_dd: f64,
    pub d_d: f64,
    pub d_dd: f64,
}

impl FrenetStart {
    pub fn from_context(ctx: &PlanningContext<'_>) -> Self {
        let ego = &ctx.frame.ego;
        let (s, d) = ctx.path.project(ego.pose.x, ego.pose.y);
        let rel = normalize_angle(ego.pose.theta - ctx.path.heading_at(s));
        let (sin, cos) = rel.sin_cos();
        Self {
            s,
            d,
            s_d: (ego.speed * cos).max(0.0),
            s_dd: ego.accel * cos,
            d_d: ego.speed * sin,
            d_dd: ego.accel * sin
                + ego.speed * ego.speed * (ego.curvature * cos - ctx.path.curvature_at(s)),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(super) struct FrenetSample {
    pub s: f64,
    pub d: f64,
    pub s_d: f64,
    pub s_dd: f64,
    pub s_ddd: f64,
    pub d_d: f64,
    pub d_dd: f64,
    pub d_ddd: f64,
}

/// A candidate over the full horizon; after its own end time it holds the
/// terminal offset and speed.
pub(super) struct Candidate {
    pub d_end: f64,
    pub t_end: f64,
    pub v_end: f64,
    pub samples: Vec<FrenetSample>,
}

pub(super) fn build_candidate(
    start: &FrenetStart,
    d_end: f64,
    t_end: f64,
    v_end: f64,
    steps: usize,
) -> Candidate {
    let lat = QuinticPolynomial::new(start.d, start.d_d, start.d_dd, d_end, 0.0, 0.0, t_end);
    let lon = QuarticPolynomial::new(start.s, start.s_d, start.s_dd, v_end, 0.0, t_end);
    let s_end = lon.position(t_end);
    let samples = (0..=steps)
        .map(|k| {
            let t = k as f64 * PLAN_STEP;
            if t <= t_end {
                FrenetSample {
                    s: lon.position(t),
                    d: lat.position(t),
                    s_d: lon.velocity(t),
                    s_dd: lon.acceleration(t),
                    s_ddd: lon.jerk(t),
                    d_d: lat.velocity(t),
                    d_dd: lat.acceleration(t),
                    d_ddd: lat.jerk(t),
                }
            } else {
                FrenetSample {
                    s: s_end + v_end * (t - t_end),
                    d: d_end,
                    s_d: v_end,
                    ..Default::default()
                }
            }
        })
        .collect();
    Candidate {
        d_end,
        t_end,
        v_end,
        samples,
    }
}

/// Cheap checks in the Frenet domain, before any Cartesian conversion.
pub(super) fn frenet_feasible(
    c: &Candidate,
    limits: &KinematicLimits,
    speed_ceiling: f64,
    stop_line: Option<f64>,
    ego_length: f64,
) -> bool {
    let first = &c.samples[0];
    let ceiling = speed_ceiling.max(first.s_d.hypot(first.d_d));
    c.samples.iter().all(|p| {
        p.s_d >= -1e-6
            && p.s_dd.abs() <= limits.max_accel + 1e-9
            && p.s_d.hypot(p.d_d) <= ceiling + 1e-6
            && stop_line.is_none_or(|line| p.s + 0.5 * ego_length <= line)
    })
}

/// Converts a candidate into a Cartesian trajectory.
pub(super) fn realize(
    path: &ReferencePath,
    c: &Candidate,
    start_heading: f64,
) -> Result<Trajectory, PlanError> {
    let length = path.length();
    let mut states: Vec<TrajectoryState> = Vec::with_capacity(c.samples.len());
    let mut heading = start_heading;
    for (k, p) in c.samples.iter().enumerate() {
        let s = p.s.clamp(0.0, length);
        let kappa = path.curvature_at(s);
        let along = p.s_d * (1.0 - kappa * p.d);
        let speed = along.hypot(p.d_d);
        let base = path.heading_at(s);
        if speed > 1e-3 {
            heading = base + p.d_d.atan2(along);
        } else if k == 0 {
            heading = start_heading;
        }
        let pose = to_cartesian(path, &FrenetPose::new(s, p.d, 0.0), 0.0)?;
        states.push(TrajectoryState {
            t: k as f64 * PLAN_STEP,
            pose: crate::geom::CartesianPose::new(pose.x, pose.y, normalize_angle(heading)),
            speed,
            accel: p.s_dd,
            curvature: kappa,
        });
    }
    for k in 0..states.len().saturating_sub(1) {
        let (a, b) = (states[k].pose, states[k + 1].pose);
        let arc = a.distance(&b);
        if arc > 1e-3 {
            states[k].curvature = normalize_angle(b.theta - a.theta) / arc;
        }
    }
    let horizon = (states.len() - 1) as f64 * PLAN_STEP;
    Ok(Trajectory { states, horizon })
}

/// Speed, curvature and lateral acceleration on the Cartesian samples.
pub(super) fn cartesian_feasible(
    traj: &Trajectory,
    limits: &KinematicLimits,
    speed_ceiling: f64,
) -> bool {
    let ceiling = speed_ceiling.max(traj.states[0].speed);
    if traj.states.iter().any(|st| st.speed > ceiling + 1e-6) {
        return false;
    }
    traj.states.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        let dth = normalize_angle(b.pose.theta - a.pose.theta).abs();
        let arc = a.pose.distance(&b.pose);
        let yaw_rate = dth / PLAN_STEP;
        dth <= limits.max_curvature * arc + 1e-3
            && a.speed.max(b.speed) * yaw_rate <= limits.max_lat_accel + 1e-6
    })
}

fn ego_box(st: &TrajectoryState, width: f64, length: f64) -> OrientedBox {
    OrientedBox::new(st.pose, width, length)
}

pub(super) fn collides(
    traj: &Trajectory,
    width: f64,
    length: f64,
    cache: &AgentFrenetCache,
    agents: &[usize],
    margin: f64,
) -> bool {
    traj.states.iter().enumerate().any(|(k, st)| {
        let ego = ego_box(st, width, length);
        agents.iter().any(|&i| {
            let other = cache.box_at(i, k);
            let reach = ego.circumradius() + other.circumradius() + margin;
            if ego.center.distance(&other.center) > reach {
                return false;
            }
            boxes_collide(&ego, &other.inflated(margin))
        })
    })
}

/// `sum_k sum_agents exp(-dist^2 / sigma^2)` over the horizon.
pub(super) fn proximity_cost(
    traj: &Trajectory,
    width: f64,
    length: f64,
    cache: &AgentFrenetCache,
    agents: &[usize],
    sigma: f64,
) -> f64 {
    let cutoff = 6.0 * sigma;
    let mut total = 0.0;
    for (k, st) in traj.states.iter().enumerate() {
        let ego = ego_box(st, width, length);
        for &i in agents {
            let other = cache.box_at(i, k);
            let gap =
                ego.center.distance(&other.center) - ego.circumradius() - other.circumradius();
            if gap > cutoff {
                continue;
            }
            let dist = box_distance(&ego, other);
            total += (-(dist * dist) / (sigma * sigma)).exp();
        }
    }
    total
}

/// The red stop line the ego still has to respect, if any.
pub(super) fn binding_stop_line(ego_s: f64, ego_length: f64, red: &[f64]) -> Option<f64> {
    red.iter()
        .copied()
        .filter(|&line| line - (ego_s + 0.5 * ego_length) > 0.0)
        .min_by(f64::total_cmp)
}

/// Argmin with a relative tolerance so that uniformly scaled costs pick the
/// same index; earlier indices win ties.
pub(super) fn better(cost: f64, best: Option<f64>) -> bool {
    match best {
        None => true,
        Some(b) => cost < b - 1e-9 * b.abs(),
    }
}

pub(super) fn initial_collision(ctx: &PlanningContext<'_>, cache: &AgentFrenetCache) -> bool {
    let ego = ctx.frame.ego.footprint();
    (0..cache.len()).any(|i| boxes_collide(&ego, cache.box_at(i, 0)))
}

/// Terminal-state grid, enumerated offset-major, then time, then speed.
pub(super) struct TerminalGrid {
    pub offsets: Vec<f64>,
    pub times: Vec<f64>,
    pub speeds: Vec<f64>,
}

pub(super) struct Selection {
    pub index: usize,
    pub terminal: TerminalState,
    pub trajectory: Trajectory,
}

pub(super) struct SearchSetup<'a> {
    pub ctx: &'a PlanningContext<'a>,
    pub cache: &'a AgentFrenetCache,
    pub limits: &'a KinematicLimits,
    pub margin: f64,
    pub speed_ceiling: f64,
}

/// Evaluates every feasible, collision-free candidate and returns the
/// cheapest. `cost` sees the candidate, its Cartesian trajectory and the
/// indices of agents that matter.
pub(super) fn search<F>(setup: &SearchSetup<'_>, grid: &TerminalGrid, cost: F) -> Option<Selection>
where
    F: Fn(&Candidate, &Trajectory, &[usize]) -> f64,
{
    let ctx = setup.ctx;
    let ego = &ctx.frame.ego;
    let start = FrenetStart::from_context(ctx);
    let steps = super::step_count(ctx.horizon);
    let stop_line = binding_stop_line(start.s, ego.length, ctx.red_stop_lines);
    let agents = setup.cache.relevant(start.s, ego.length);
    let mut best: Option<(f64, Selection)> = None;
    let mut index = 0;
    for &d_end in &grid.offsets {
        for &t_end in &grid.times {
            let t_end = t_end.min(ctx.horizon);
            for &v_end in &grid.speeds {
                let this = index;
                index += 1;
                let cand = build_candidate(&start, d_end, t_end, v_end, steps);
                if !frenet_feasible(
                    &cand,
                    setup.limits,
                    setup.speed_ceiling,
                    stop_line,
                    ego.length,
                ) {
                    continue;
                }
                let Ok(traj) = realize(ctx.path, &cand, ego.pose.theta) else {
                    continue;
                };
                if !cartesian_feasible(&traj, setup.limits, setup.speed_ceiling) {
                    continue;
                }
                if collides(
                    &traj,
                    ego.width,
                    ego.length,
                    setup.cache,
                    &agents,
                    setup.margin,
                ) {
                    continue;
                }
                let c = cost(&cand, &traj, &agents);
                if better(c, best.as_ref().map(|b| b.0)) {
                    best = Some((
                        c,
                        Selection {
                            index: this,
                            terminal: TerminalState {
                                d_end: cand.d_end,
                                t_end: cand.t_end,
                                v_end: cand.v_end,
                            },
                            trajectory: traj,
                        },
                    ));
                }
            }
        }
    }
    best.map(|b| b.1)
}

/// Integral of `f` over the samples with the planning step.
pub(super) fn integrate<F: Fn(&FrenetSample) -> f64>(c: &Candidate, f: F) -> f64 {
    c.samples.iter().map(f).sum::<f64>() * PLAN_STEP
}
