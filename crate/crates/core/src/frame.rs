//! Snapshot of the world at one simulation instant.

use serde::{Deserialize, Serialize};

use crate::geom::{CartesianPose, OrientedBox};
use crate::scenario::{sample_log, AgentKind, AgentState, Scenario};

pub const EGO_WIDTH: f64 = 2.0;
pub const EGO_LENGTH: f64 = 4.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoSnapshot {
    pub pose: CartesianPose,
    pub speed: f64,
    pub accel: f64,
    /// Signed path curvature the ego is currently driving (1/m, left positive).
    #[serde(default)]
    pub curvature: f64,
    pub width: f64,
    pub length: f64,
}

impl EgoSnapshot {
    pub fn new(pose: CartesianPose, speed: f64) -> Self {
        Self {
            pose,
            speed,
            accel: 0.0,
            curvature: 0.0,
            width: EGO_WIDTH,
            length: EGO_LENGTH,
        }
    }

    pub fn footprint(&self) -> OrientedBox {
        OrientedBox::new(self.pose, self.width, self.length)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub id: String,
    pub kind: AgentKind,
    pub pose: CartesianPose,
    pub speed: f64,
    pub width: f64,
    pub length: f64,
}

impl AgentSnapshot {
    pub fn footprint(&self) -> OrientedBox {
        OrientedBox::new(self.pose, self.width, self.length)
    }

    pub fn state(&self, t: f64) -> AgentState {
        AgentState {
            t,
            x: self.pose.x,
            y: self.pose.y,
            theta: self.pose.theta,
            speed: self.speed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub ego: EgoSnapshot,
    pub agents: Vec<AgentSnapshot>,
}

impl Frame {
    /// The scene as logged at time `t`: agents from their logs and the ego
    /// from the reference drive, or parked at its initial pose without one.
    pub fn logged(scenario: &Scenario, t: f64) -> Self {
        let ego = match &scenario.ego_log {
            Some(log) => {
                let st = sample_log(log, t);
                EgoSnapshot::new(st.pose(), st.speed)
            }
            None => {
                let e = scenario.ego_init;
                EgoSnapshot::new(CartesianPose::new(e.x, e.y, e.theta), e.speed)
            }
        };
        let agents = scenario
            .agents
            .iter()
            .map(|rec| {
                let st = rec.state_at(t);
                AgentSnapshot {
                    id: rec.id.clone(),
                    kind: rec.kind,
                    pose: st.pose(),
                    speed: st.speed,
                    width: rec.width,
                    length: rec.length,
                }
            })
            .collect();
        Self { t, ego, agents }
    }
}
