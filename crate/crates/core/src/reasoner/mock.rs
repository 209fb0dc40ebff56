//! Offline stand-in for the language model: a time-to-collision rule.

use serde::{Deserialize, Serialize};

use crate::frame::Frame;
use crate::geom::{boxes_collide, to_cartesian, to_frenet, FrenetPose, OrientedBox, ReferencePath};

use super::{DecisionSource, Reasoner, ReasonerDecision, ReasonerRequest, MAX_SUGGESTED_SPEED};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockReasonerConfig {
    /// Below this TTC (s) the mock intervenes.
    pub ttc_threshold: f64,
    /// Suggested speed per second of TTC.
    pub gain: f64,
    /// Coarse sampling step of the TTC search (s).
    pub sample_step: f64,
}

impl Default for MockReasonerConfig {
    fn default() -> Self {
        Self {
            ttc_threshold: 4.0,
            gain: 2.0,
            sample_step: 0.1,
        }
    }
}

/// Earliest time within `horizon` at which the ego footprint, moving along the
/// path at its current speed and offset, touches the constant-velocity
/// footprint of an agent ahead. Returns `(ttc, agent_id)`.
pub fn time_to_collision(
    frame: &Frame,
    path: &ReferencePath,
    horizon: f64,
    sample_step: f64,
) -> Option<(f64, String)> {
    let ego = &frame.ego;
    let (s0, d0) = path.project(ego.pose.x, ego.pose.y);
    let length = path.length();
    let ego_box = |t: f64| -> OrientedBox {
        let s = (s0 + ego.speed * t).clamp(0.0, length);
        let pose = to_cartesian(path, &FrenetPose::new(s, d0, 0.0), 0.0)
            .expect("station clamped to the path");
        OrientedBox::new(pose, ego.width, ego.length)
    };
    let mut best: Option<(f64, String)> = None;
    for agent in &frame.agents {
        let ahead = to_frenet(path, &agent.pose, s0)
            .map(|fp| fp.s > 0.0)
            .unwrap_or(false);
        if !ahead {
            continue;
        }
        let (sin, cos) = agent.pose.theta.sin_cos();
        let agent_box = |t: f64| {
            let mut pose = agent.pose;
            pose.x += agent.speed * t * cos;
            pose.y += agent.speed * t * sin;
            OrientedBox::new(pose, agent.width, agent.length)
        };
        let hits = |t: f64| boxes_collide(&ego_box(t), &agent_box(t));
        let limit = best.as_ref().map_or(horizon, |b| b.0.min(horizon));
        let steps = (limit / sample_step).ceil() as usize;
        let mut prev = 0.0;
        for k in 0..=steps {
            let t = (k as f64 * sample_step).min(limit);
            if hits(t) {
                let ttc = if k == 0 {
                    0.0
                } else {
                    let (mut lo, mut hi) = (prev, t);
                    for _ in 0..50 {
                        let mid = 0.5 * (lo + hi);
                        if hits(mid) {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    hi
                };
                if best.as_ref().is_none_or(|b| ttc < b.0) {
                    best = Some((ttc, agent.id.clone()));
                }
                break;
            }
            prev = t;
        }
    }
    best
}

#[derive(Debug, Clone, Default)]
pub struct MockReasoner {
    pub config: MockReasonerConfig,
}

impl MockReasoner {
    pub fn new(config: MockReasonerConfig) -> Self {
        Self { config }
    }

    pub fn reason(&self, frame: &Frame, path: &ReferencePath) -> ReasonerDecision {
        let cfg = &self.config;
        match time_to_collision(frame, path, cfg.ttc_threshold, cfg.sample_step) {
            Some((ttc, id)) if ttc < cfg.ttc_threshold => ReasonerDecision::new(
                (cfg.gain * ttc).clamp(0.0, MAX_SUGGESTED_SPEED),
                format!("time to collision with {id} is {ttc:.2} s"),
                DecisionSource::Mock,
            ),
            _ => ReasonerDecision::new(
                MAX_SUGGESTED_SPEED,
                "no conflict predicted",
                DecisionSource::Mock,
            ),
        }
    }
}

impl Reasoner for MockReasoner {
    fn name(&self) -> &'static str {
        "mock"
    }

    fn decide(&mut self, request: &ReasonerRequest<'_>) -> ReasonerDecision {
        self.reason(request.frame, request.path)
    }

    fn failures(&self) -> usize {
        0
    }
}
