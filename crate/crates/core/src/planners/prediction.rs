//! Agent motion prediction over the planning horizon.

use crate::frame::Frame;
use crate::geom::OrientedBox;
use crate::scenario::{AgentKind, AgentState, Scenario};

use super::{step_count, PLAN_STEP};

#[derive(Debug, Clone, Copy)]
pub enum PredictionSource<'a> {
    /// Constant speed along the current heading.
    ConstantVelocity,
    /// Future states taken from the scenario log.
    LogReplay(&'a Scenario),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPrediction {
    pub id: String,
    pub kind: AgentKind,
    pub width: f64,
    pub length: f64,
    /// One state per planning step, starting at the frame time.
    pub states: Vec<AgentState>,
}

impl AgentPrediction {
    pub fn box_at(&self, k: usize) -> OrientedBox {
        let st = &self.states[k.min(self.states.len() - 1)];
        OrientedBox::new(st.pose(), self.width, self.length)
    }

    pub fn boxes(&self) -> Vec<OrientedBox> {
        (0..self.states.len()).map(|k| self.box_at(k)).collect()
    }
}

pub fn predict_agents(
    frame: &Frame,
    horizon: f64,
    source: PredictionSource<'_>,
) -> Vec<AgentPrediction> {
    let n = step_count(horizon);
    frame
        .agents
        .iter()
        .map(|agent| {
            let record = match source {
                PredictionSource::LogReplay(scn) => scn.agents.iter().find(|a| a.id == agent.id),
                PredictionSource::ConstantVelocity => None,
            };
            let states = (0..=n)
                .map(|k| {
                    let dt = k as f64 * PLAN_STEP;
                    match record {
                        Some(rec) => rec.state_at(frame.t + dt),
                        None => {
                            let (sin, cos) = agent.pose.theta.sin_cos();
                            AgentState {
                                t: frame.t + dt,
                                x: agent.pose.x + agent.speed * dt * cos,
                                y: agent.pose.y + agent.speed * dt * sin,
                                theta: agent.pose.theta,
                                speed: agent.speed,
                            }
                        }
                    }
                })
                .collect();
            AgentPrediction {
                id: agent.id.clone(),
                kind: agent.kind,
                width: agent.width,
                length: agent.length,
                states,
            }
        })
        .collect()
}
