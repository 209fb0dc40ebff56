//! Rule-based scene-to-text encoder.
//!
//! Every agent inside the attention radius is projected into the Frenet frame
//! of the reference path (station relative to the ego) and rendered as a
//! five-line block:
//!
//! ```text
//! ID: veh_1
//! Position: (10.0, 0.0) meters (10.0 meters ahead, directly in line with the ego)
//! Size: Width: 2.0 m, Length: 4.5 m
//! Speed: 5.0 m/s
//! Orientation: 0.00 rad (moving in the same direction as the ego vehicle)
//! ```
//!
//! The block layout is a stable external format; golden files under
//! `tests/golden/` pin it byte for byte.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::frame::Frame;
use crate::geom::{normalize_angle, to_frenet, GeomError, ReferencePath};

/// Orientation phrases indexed by case; `{W}` is "moving" or "facing".
pub const ORIENTATION_PHRASES: [&str; 4] = [
    "in the same direction as the ego vehicle",
    "in the opposite direction of the ego vehicle",
    "towards the ego vehicle's planned trajectory",
    "away from the ego vehicle's planned trajectory",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    /// Half-width of the "same direction" heading band (rad).
    pub alpha: f64,
    /// Heading magnitude above which an agent counts as opposing (rad).
    pub beta: f64,
    /// Lateral offset beyond which crossing headings count as approaching (m).
    pub gamma: f64,
    pub lon_lat_threshold: f64,
    pub moving_speed_threshold: f64,
    pub attention_radius: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            alpha: 0.06,
            beta: 3.08,
            gamma: 1.0,
            lon_lat_threshold: 1.0,
            moving_speed_threshold: 0.01,
            attention_radius: 50.0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0 < self.alpha && self.alpha < self.beta && self.beta < std::f64::consts::PI) {
            return Err("encoder: require 0 < alpha < beta < pi".into());
        }
        if !(self.gamma > 0.0
            && self.lon_lat_threshold > 0.0
            && self.moving_speed_threshold > 0.0
            && self.attention_radius > 0.0)
        {
            return Err("encoder: thresholds must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDescription {
    pub agent_id: String,
    pub text: String,
}

/// Fixed-point rendering with halves rounded away from zero. Never emits
/// a negative zero.
pub fn format_fixed(value: f64, decimals: usize) -> String {
    let scale = 10f64.powi(decimals as i32);
    let rounded = (value * scale).round() / scale;
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded:.decimals$}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LongitudinalCase {
    Ahead,
    Behind,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LateralCase {
    Left,
    Right,
    InLine,
}

/// Index into [`ORIENTATION_PHRASES`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrientationCase {
    Same = 0,
    Opposite = 1,
    Towards = 2,
    Away = 3,
}

pub fn longitudinal_case(s: f64, threshold: f64) -> LongitudinalCase {
    if s > threshold {
        LongitudinalCase::Ahead
    } else if s < -threshold {
        LongitudinalCase::Behind
    } else {
        LongitudinalCase::Parallel
    }
}

pub fn lateral_case(d: f64, threshold: f64) -> LateralCase {
    if d > threshold {
        LateralCase::Left
    } else if d < -threshold {
        LateralCase::Right
    } else {
        LateralCase::InLine
    }
}

/// First matching row of the orientation table. Boundary values shared by
/// two rows (for instance `o = -alpha` with `d >= gamma`) take the earlier row.
pub fn orientation_case(o_norm: f64, d: f64, cfg: &EncoderConfig) -> OrientationCase {
    let (alpha, beta, gamma) = (cfg.alpha, cfg.beta, cfg.gamma);
    if -alpha <= o_norm && o_norm <= alpha {
        OrientationCase::Same
    } else if o_norm <= -beta || o_norm >= beta {
        OrientationCase::Opposite
    } else if (d >= gamma && -beta <= o_norm && o_norm <= -alpha)
        || (d <= -gamma && alpha <= o_norm && o_norm <= beta)
    {
        OrientationCase::Towards
    } else {
        OrientationCase::Away
    }
}

pub fn describe_longitudinal(s: f64) -> String {
    describe_longitudinal_with(s, EncoderConfig::default().lon_lat_threshold)
}

pub fn describe_longitudinal_with(s: f64, threshold: f64) -> String {
    match longitudinal_case(s, threshold) {
        LongitudinalCase::Ahead => format!("{} meters ahead", format_fixed(s, 1)),
        LongitudinalCase::Behind => format!("{} meters behind", format_fixed(s.abs(), 1)),
        LongitudinalCase::Parallel => "parallel with the ego".to_string(),
    }
}

pub fn describe_lateral(d: f64) -> String {
    describe_lateral_with(d, EncoderConfig::default().lon_lat_threshold)
}

pub fn describe_lateral_with(d: f64, threshold: f64) -> String {
    match lateral_case(d, threshold) {
        LateralCase::Left => format!("{} meters left", format_fixed(d, 1)),
        LateralCase::Right => format!("{} meters right", format_fixed(d.abs(), 1)),
        LateralCase::InLine => "directly in line with the ego".to_string(),
    }
}

/// `(theta + pi) mod 2pi - pi` with a non-negative remainder.
pub fn normalize_orientation(theta_fren: f64) -> f64 {
    normalize_angle(theta_fren)
}

pub fn describe_orientation(o_norm: f64, d: f64, speed: f64, cfg: &EncoderConfig) -> String {
    let verb = if speed >= cfg.moving_speed_threshold {
        "moving"
    } else {
        "facing"
    };
    let case = orientation_case(o_norm, d, cfg);
    format!("{verb} {}", ORIENTATION_PHRASES[case as usize])
}

/// Renders one agent block from already-projected quantities.
#[allow(clippy::too_many_arguments)]
pub fn render_block(
    id: &str,
    s: f64,
    d: f64,
    width: f64,
    length: f64,
    speed: f64,
    o_norm: f64,
    cfg: &EncoderConfig,
) -> String {
    let mut out = String::with_capacity(256);
    let _ = writeln!(out, "ID: {id}");
    let _ = writeln!(
        out,
        "Position: ({}, {}) meters ({}, {})",
        format_fixed(s, 1),
        format_fixed(d, 1),
        describe_longitudinal_with(s, cfg.lon_lat_threshold),
        describe_lateral_with(d, cfg.lon_lat_threshold)
    );
    let _ = writeln!(
        out,
        "Size: Width: {} m, Length: {} m",
        format_fixed(width, 1),
        format_fixed(length, 1)
    );
    let _ = writeln!(out, "Speed: {} m/s", format_fixed(speed, 1));
    let _ = write!(
        out,
        "Orientation: {} rad ({})",
        format_fixed(o_norm, 2),
        describe_orientation(o_norm, d, speed, cfg)
    );
    out
}

/// Describes every agent within the attention radius, nearest station first.
pub fn encode_scene(
    frame: &Frame,
    path: &ReferencePath,
    cfg: &EncoderConfig,
) -> Result<Vec<AgentDescription>, GeomError> {
    let ego_s = path.project(frame.ego.pose.x, frame.ego.pose.y).0;
    let mut rows = Vec::new();
    for agent in &frame.agents {
        if agent.pose.distance(&frame.ego.pose) > cfg.attention_radius {
            continue;
        }
        let fp = to_frenet(path, &agent.pose, ego_s)?;
        let o_norm = normalize_orientation(fp.theta);
        let text = render_block(
            &agent.id,
            fp.s,
            fp.d,
            agent.width,
            agent.length,
            agent.speed,
            o_norm,
            cfg,
        );
        rows.push((fp.s.abs(), agent.id.clone(), text));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(rows
        .into_iter()
        .map(|(_, agent_id, text)| AgentDescription { agent_id, text })
        .collect())
}
