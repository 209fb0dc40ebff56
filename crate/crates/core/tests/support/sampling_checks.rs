//! Checks on the sampling planner shared by the planner tests and the
//! acceptance run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dualad_core::frame::{AgentSnapshot, EgoSnapshot, Frame};
use dualad_core::geom::{boxes_collide, normalize_angle, CartesianPose, OrientedBox, ReferencePath};
use dualad_core::planners::{
    predict_agents, sampling_plan, AgentPrediction, IdmParams, PlanOutput, PlanningContext,
    PredictionSource, SamplingPlannerConfig, DEFAULT_HORIZON, PLAN_STEP,
};
use dualad_core::scenario::{AgentKind, Scenario};

pub struct Scene {
    pub path: ReferencePath,
    pub frame: Frame,
    pub speed_limit: f64,
    pub predictions: Vec<AgentPrediction>,
}

impl Scene {
    pub fn plan(&self, cfg: &SamplingPlannerConfig, cap: f64) -> PlanOutput {
        let ctx = PlanningContext {
            frame: &self.frame,
            path: &self.path,
            speed_limit: self.speed_limit,
            cap,
            red_stop_lines: &[],
            predictions: &self.predictions,
            horizon: DEFAULT_HORIZON,
        };
        sampling_plan(&ctx, cfg, &IdmParams::default()).expect("sampling plans")
    }
}

fn random_path(rng: &mut ChaCha8Rng) -> ReferencePath {
    let heading: f64 = rng.gen_range(-3.0..3.0);
    let origin = [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)];
    if rng.gen_bool(0.4) {
        return ReferencePath::straight(origin, heading, 300.0).unwrap();
    }
    // constant-curvature arc, radius well above the curvature limit
    let radius: f64 = rng.gen_range(60.0..400.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let n = 300;
    let points = (0..=n)
        .map(|i| {
            let s = i as f64;
            let a = s / radius;
            let (lx, ly) = (radius * a.sin(), radius * (1.0 - a.cos()));
            let (sin, cos) = heading.sin_cos();
            [origin[0] + lx * cos - ly * sin, origin[1] + lx * sin + ly * cos]
        })
        .collect();
    ReferencePath::new(points).unwrap()
}

/// A random road, ego near its start, and up to six agents ahead.
pub fn random_scene(rng: &mut ChaCha8Rng) -> Scene {
    let path = random_path(rng);
    let ego_s = rng.gen_range(5.0..20.0);
    let ego_d = rng.gen_range(-0.5..0.5);
    let p = path.point_at(ego_s);
    let h = path.heading_at(ego_s);
    let (nx, ny) = (-h.sin(), h.cos());
    let ego = EgoSnapshot::new(
        CartesianPose::new(p[0] + ego_d * nx, p[1] + ego_d * ny, h + rng.gen_range(-0.05..0.05)),
        rng.gen_range(0.0..14.0),
    );
    let count = rng.gen_range(0..=6);
    let agents = (0..count)
        .map(|i| {
            let s = ego_s + rng.gen_range(12.0..90.0);
            let d = rng.gen_range(-6.0..6.0);
            let q = path.point_at(s);
            let hq = path.heading_at(s);
            let (kind, width, length, speed) = match rng.gen_range(0..3) {
                0 => (AgentKind::Vehicle, 2.0, 4.6, rng.gen_range(0.0..12.0)),
                1 => (AgentKind::Pedestrian, 0.6, 0.6, rng.gen_range(0.0..2.0)),
                _ => (AgentKind::Bicycle, 0.8, 1.8, rng.gen_range(0.0..6.0)),
            };
            AgentSnapshot {
                id: format!("agent_{i}"),
                kind,
                pose: CartesianPose::new(
                    q[0] - d * hq.sin(),
                    q[1] + d * hq.cos(),
                    hq + rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                ),
                speed,
                width,
                length,
            }
        })
        .collect();
    let frame = Frame { t: 0.0, ego, agents };
    let predictions = predict_agents(&frame, DEFAULT_HORIZON, PredictionSource::ConstantVelocity);
    Scene {
        path,
        frame,
        speed_limit: rng.gen_range(8.0..15.0),
        predictions,
    }
}

/// Plans `scenes` random scenes with the default weights and with several
/// uniformly scaled copies, and requires the same selection every time.
/// Returns how many scenes selected a candidate rather than the fallback.
pub fn check_scale_invariance(scenes: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = SamplingPlannerConfig::default();
    let mut selected = 0;
    for n in 0..scenes {
        let scene = random_scene(&mut rng);
        let cap = if rng.gen_bool(0.3) { rng.gen_range(0.0..15.0) } else { f64::INFINITY };
        let reference = scene.plan(&base, cap);
        if reference.candidate.is_some() {
            selected += 1;
        }
        for _ in 0..3 {
            let factor = 10f64.powf(rng.gen_range(-3.0..3.0));
            let cfg = SamplingPlannerConfig {
                cost_weights: base.cost_weights.scaled(factor),
                ..base.clone()
            };
            let out = scene.plan(&cfg, cap);
            if out.candidate != reference.candidate || out.fallback != reference.fallback {
                return Err(format!(
                    "scene {n}: scaling weights by {factor} moved the selection from {:?} to {:?}",
                    reference.candidate, out.candidate
                ));
            }
        }
    }
    Ok(selected)
}

/// Agents a trajectory must keep clear of: everything but traffic behind
/// the ego moving the same way.
fn must_clear(path: &ReferencePath, ego: &EgoSnapshot, p: &AgentPrediction) -> bool {
    let (ego_s, _) = path.project(ego.pose.x, ego.pose.y);
    let st = &p.states[0];
    let (s, _) = path.project(st.x, st.y);
    let along = 0.5
        * (p.length * normalize_angle(st.theta - path.heading_at(s)).cos().abs()
            + p.width * normalize_angle(st.theta - path.heading_at(s)).sin().abs());
    let behind = s + along < ego_s - 0.5 * ego.length;
    !(behind && st.speed > 0.0)
}

/// Validates one selected trajectory against the configured limits and
/// clearance margin.
pub fn check_selected(scene: &Scene, out: &PlanOutput, cfg: &SamplingPlannerConfig) -> Result<(), String> {
    let limits = &cfg.constraint_limits;
    let states = &out.trajectory.states;
    let ceiling = cfg
        .desired_speed(scene.speed_limit)
        .max(states[0].speed)
        + 1e-6;
    for st in states {
        if st.speed < 0.0 || st.speed > ceiling {
            return Err(format!("t={:.1}: speed {} outside [0, {ceiling}]", st.t, st.speed));
        }
        if st.accel.abs() > limits.max_accel + 1e-9 {
            return Err(format!("t={:.1}: accel {}", st.t, st.accel));
        }
    }
    for w in states.windows(2) {
        let dth = normalize_angle(w[1].pose.theta - w[0].pose.theta).abs();
        let arc = w[0].pose.distance(&w[1].pose);
        if dth > limits.max_curvature * arc + 1e-3 {
            return Err(format!("t={:.1}: heading change {dth} over {arc} m", w[0].t));
        }
        let lat = w[0].speed.max(w[1].speed) * dth / PLAN_STEP;
        if lat > limits.max_lat_accel + 1e-6 {
            return Err(format!("t={:.1}: lateral accel {lat}", w[0].t));
        }
    }
    let ego = &scene.frame.ego;
    for p in scene.predictions.iter().filter(|p| must_clear(&scene.path, ego, p)) {
        for (k, st) in states.iter().enumerate() {
            let ego_box = OrientedBox::new(st.pose, ego.width, ego.length);
            if boxes_collide(&ego_box, &p.box_at(k).inflated(cfg.safety_margin)) {
                return Err(format!("t={:.1}: within {} m of {}", st.t, cfg.safety_margin, p.id));
            }
        }
    }
    Ok(())
}

pub struct CorpusSweep {
    pub plans: usize,
    pub selected: usize,
}

/// Plans from the logged scene every second of every scenario and checks
/// each selected trajectory.
pub fn check_corpus_selections(scenarios: &[Scenario]) -> Result<CorpusSweep, String> {
    let cfg = SamplingPlannerConfig::default();
    let mut sweep = CorpusSweep { plans: 0, selected: 0 };
    for scenario in scenarios {
        let mut t = 0.0;
        while t < scenario.duration {
            let frame = Frame::logged(scenario, t);
            let predictions =
                predict_agents(&frame, DEFAULT_HORIZON, PredictionSource::LogReplay(scenario));
            let scene = Scene {
                path: scenario.centerline.clone(),
                frame,
                speed_limit: scenario.speed_limit,
                predictions,
            };
            let ctx = PlanningContext {
                frame: &scene.frame,
                path: &scene.path,
                speed_limit: scene.speed_limit,
                cap: f64::INFINITY,
                red_stop_lines: &[],
                predictions: &scene.predictions,
                horizon: DEFAULT_HORIZON,
            };
            sweep.plans += 1;
            if let Ok(out) = sampling_plan(&ctx, &cfg, &IdmParams::default()) {
                if !out.fallback {
                    sweep.selected += 1;
                    check_selected(&scene, &out, &cfg)
                        .map_err(|e| format!("{} at t={t}: {e}", scenario.id))?;
                }
            }
            t += 1.0;
        }
    }
    Ok(sweep)
}
