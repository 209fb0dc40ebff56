//! Fixed inputs for the benchmarks.

use dualad_core::corpus::generate;
use dualad_core::frame::Frame;
use dualad_core::planners::{predict_agents, AgentPrediction, PredictionSource, DEFAULT_HORIZON};
use dualad_core::{ReferencePath, Scenario};

/// One planning cycle's inputs, taken from a logged corpus scene.
pub struct PlanningInput {
    pub scenario: Scenario,
    pub frame: Frame,
    pub predictions: Vec<AgentPrediction>,
}

impl PlanningInput {
    pub fn path(&self) -> &ReferencePath {
        &self.scenario.centerline
    }
}

pub fn corpus_scenario(id: &str) -> Scenario {
    generate()
        .into_iter()
        .find(|s| s.id == id)
        .unwrap_or_else(|| panic!("no corpus scenario `{id}`"))
}

/// The logged scene of `id` at time `t`, with log-replay predictions.
pub fn planning_input(id: &str, t: f64) -> PlanningInput {
    let scenario = corpus_scenario(id);
    let frame = Frame::logged(&scenario, t);
    let predictions = predict_agents(&frame, DEFAULT_HORIZON, PredictionSource::LogReplay(&scenario));
    PlanningInput {
        scenario,
        frame,
        predictions,
    }
}
