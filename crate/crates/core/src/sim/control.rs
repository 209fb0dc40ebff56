//! Ego vehicle model and trajectory tracking.

use serde::{Deserialize, Serialize};

use crate::geom::{normalize_angle, CartesianPose};
use crate::planners::{advance, Trajectory, TrajectoryState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoDynamicsState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub steering_angle: f64,
}

impl EgoDynamicsState {
    pub fn pose(&self) -> CartesianPose {
        CartesianPose::new(self.x, self.y, self.theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub max_steer: f64,
    pub width: f64,
    pub length: f64,
    pub max_accel: f64,
    /// Deceleration used for emergency and reasoner-requested hard braking.
    pub max_decel: f64,
    /// Proportional gain on the speed error (1/s).
    pub speed_gain: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.7,
            max_steer: 0.6,
            width: crate::frame::EGO_WIDTH,
            length: crate::frame::EGO_LENGTH,
            max_accel: 4.0,
            max_decel: 6.0,
            speed_gain: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LqrWeights {
    /// Diagonal of Q over (lateral error, heading error, steering offset).
    pub q: [f64; 3],
    /// Weight on steering rate.
    pub r: f64,
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self {
            q: [1.0, 1.0, 0.1],
            r: 0.1,
        }
    }
}

type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// Infinite-horizon discrete LQR gain for the error model at speed `v`,
/// from the Riccati recursion iterated until the update is below `tol`.
pub fn lqr_gain(v: f64, wheelbase: f64, dt: f64, w: &LqrWeights, tol: f64) -> [f64; 3] {
    let a: Mat3 = [
        [1.0, v * dt, 0.0],
        [0.0, 1.0, v * dt / wheelbase],
        [0.0, 0.0, 1.0],
    ];
    let b = [0.0, 0.0, dt];
    let at = transpose(&a);
    let mut p: Mat3 = [[w.q[0], 0.0, 0.0], [0.0, w.q[1], 0.0], [0.0, 0.0, w.q[2]]];
    let gain_of = |p: &Mat3| {
        // K = (R + B'PB)^-1 B'PA, with B = dt e3
        let pb: [f64; 3] = [p[0][2] * dt, p[1][2] * dt, p[2][2] * dt];
        let denom = w.r + b[2] * pb[2];
        let mut k = [0.0; 3];
        for (j, kj) in k.iter_mut().enumerate() {
            *kj = (0..3).map(|i| pb[i] * a[i][j]).sum::<f64>() / denom;
        }
        (k, pb)
    };
    for _ in 0..1_000_000 {
        let (k, pb) = gain_of(&p);
        let apa = mat_mul(&at, &mat_mul(&p, &a));
        // A'PB as a column
        let apb: [f64; 3] = [
            (0..3).map(|i| a[i][0] * pb[i]).sum(),
            (0..3).map(|i| a[i][1] * pb[i]).sum(),
            (0..3).map(|i| a[i][2] * pb[i]).sum(),
        ];
        let mut next = [[0.0; 3]; 3];
        let mut delta: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let q = if i == j { w.q[i] } else { 0.0 };
                next[i][j] = q + apa[i][j] - apb[i] * k[j];
                delta = delta.max((next[i][j] - p[i][j]).abs());
            }
        }
        p = next;
        if delta < tol {
            break;
        }
    }
    gain_of(&p).0
}

/// LQR lateral tracking with a gain schedule over speed, plus proportional
/// speed tracking.
#[derive(Debug, Clone)]
pub struct Tracker {
    vehicle: VehicleParams,
    dt: f64,
    speeds: Vec<f64>,
    gains: Vec<[f64; 3]>,
}

const SCHEDULE_STEP: f64 = 0.5;
const SCHEDULE_MAX: f64 = 25.0;

impl Tracker {
    pub fn new(vehicle: VehicleParams, weights: &LqrWeights, dt: f64) -> Self {
        let n = (SCHEDULE_MAX / SCHEDULE_STEP) as usize;
        let speeds: Vec<f64> = (1..=n).map(|i| i as f64 * SCHEDULE_STEP).collect();
        let gains = speeds
            .iter()
            .map(|&v| lqr_gain(v, vehicle.wheelbase, dt, weights, 1e-9))
            .collect();
        Self {
            vehicle,
            dt,
            speeds,
            gains,
        }
    }

    pub fn gain(&self, v: f64) -> [f64; 3] {
        let x = (v / SCHEDULE_STEP - 1.0).clamp(0.0, (self.speeds.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.speeds.len() - 2);
        let u = x - i as f64;
        let (a, b) = (self.gains[i], self.gains[i + 1]);
        [
            a[0] + u * (b[0] - a[0]),
            a[1] + u * (b[1] - a[1]),
            a[2] + u * (b[2] - a[2]),
        ]
    }

    /// Advances the ego one step towards `target`, which was planned
    /// `t_offset` seconds ago.
    pub fn step(&self, state: &EgoDynamicsState, target: &Trajectory, t_offset: f64) -> EgoDynamicsState {
        let veh = &self.vehicle;
        let dt = self.dt;
        let (e_y, e_theta, kappa) = tracking_errors(state, target);
        let delta_ff = (veh.wheelbase * kappa).atan();
        let k = self.gain(state.v);
        let x = [e_y, e_theta, state.steering_angle - delta_ff];
        let rate = -(k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
        let steer = (state.steering_angle + rate * dt).clamp(-veh.max_steer, veh.max_steer);

        let v_ref = target.sample(t_offset + dt).speed;
        let accel = (veh.speed_gain * (v_ref - state.v)).clamp(-veh.max_decel, veh.max_accel);
        integrate_bicycle(state, steer, accel, veh.wheelbase, dt)
    }
}

fn integrate_bicycle(
    state: &EgoDynamicsState,
    steer: f64,
    accel: f64,
    wheelbase: f64,
    dt: f64,
) -> EgoDynamicsState {
    let (dist, v_new) = advance(state.v, accel, dt);
    let dtheta = dist * steer.tan() / wheelbase;
    let mid = state.theta + 0.5 * dtheta;
    EgoDynamicsState {
        x: state.x + dist * mid.cos(),
        y: state.y + dist * mid.sin(),
        theta: normalize_angle(state.theta + dtheta),
        v: v_new,
        steering_angle: steer,
    }
}

/// Lateral error (left positive), heading error and reference curvature
/// against the nearest point of the trajectory polyline.
pub fn tracking_errors(state: &EgoDynamicsState, target: &Trajectory) -> (f64, f64, f64) {
    let p = [state.x, state.y];
    let mut best: Option<(f64, f64, f64, f64)> = None; // (dist2, e_y, theta_ref, kappa)
    for w in target.states.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let e = [b.pose.x - a.pose.x, b.pose.y - a.pose.y];
        let len2 = e[0] * e[0] + e[1] * e[1];
        if len2 < 1e-12 {
            continue;
        }
        let r = [p[0] - a.pose.x, p[1] - a.pose.y];
        let u = ((r[0] * e[0] + r[1] * e[1]) / len2).clamp(0.0, 1.0);
        let q = [a.pose.x + u * e[0], a.pose.y + u * e[1]];
        let dist2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        if best.is_some_and(|b| b.0 <= dist2) {
            continue;
        }
        let len = len2.sqrt();
        let e_y = (e[0] * (p[1] - q[1]) - e[1] * (p[0] - q[0])) / len;
        let theta_ref =
            a.pose.theta + u * normalize_angle(b.pose.theta - a.pose.theta);
        let kappa = a.curvature + u * (b.curvature - a.curvature);
        best = Some((dist2, e_y, theta_ref, kappa));
    }
    match best {
        Some((_, e_y, theta_ref, kappa)) => (e_y, normalize_angle(state.theta - theta_ref), kappa),
        None => {
            let s0: &TrajectoryState = &target.states[0];
            (0.0, normalize_angle(state.theta - s0.pose.theta), 0.0)
        }
    }
}

/// Places the ego exactly on the trajectory sample one step ahead.
pub fn snap_to(target: &Trajectory, t_offset: f64, dt: f64, vehicle: &VehicleParams) -> EgoDynamicsState {
    let st = target.sample(t_offset + dt);
    EgoDynamicsState {
        x: st.pose.x,
        y: st.pose.y,
        theta: st.pose.theta,
        v: st.speed.max(0.0),
        steering_angle: (vehicle.wheelbase * st.curvature)
            .atan()
            .clamp(-vehicle.max_steer, vehicle.max_steer),
    }
}
