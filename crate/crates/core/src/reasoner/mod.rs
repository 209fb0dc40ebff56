//! Upper layer: turns the encoded scene into a speed suggestion and
//! arbitrates it against the planner's own target speed.
//!
//! Backends:
//! - [`MockReasoner`]: deterministic time-to-collision heuristic, no network.
//! - [`RemoteReasoner`]: OpenAI-compatible chat-completions endpoint.
//! - [`ReplayReasoner`]: answers from a file recorded by a remote run.
//!
//! No backend ever returns an error. Anything that goes wrong becomes a
//! fallback decision of 15 m/s (no intervention) and bumps the failure count.

mod mock;
mod prompt;
mod remote;
mod replay;

use serde::{Deserialize, Serialize};

use crate::frame::Frame;
use crate::geom::ReferencePath;

pub use mock::{time_to_collision, MockReasoner, MockReasonerConfig};
pub use prompt::{
    build_prompt, parse_reply, Prompt, ReplyError, NO_AGENTS_SENTINEL, SYSTEM_INSTRUCTIONS,
};
pub use remote::RemoteReasoner;
pub use replay::{ReplayEntry, ReplayReasoner, ReplayRecorder};

/// Upper end of the suggestion range (m/s).
pub const MAX_SUGGESTED_SPEED: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    RemoteLlm,
    Mock,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonerDecision {
    pub suggested_speed: f64,
    pub rationale: String,
    pub source: DecisionSource,
    /// The backend answered outside `[0, 15]` and the value was clamped.
    #[serde(default)]
    pub clamped: bool,
}

impl ReasonerDecision {
    /// Builds a decision, clamping the speed into range.
    pub fn new(speed: f64, rationale: impl Into<String>, source: DecisionSource) -> Self {
        let clamped_speed = if speed.is_nan() {
            MAX_SUGGESTED_SPEED
        } else {
            speed.clamp(0.0, MAX_SUGGESTED_SPEED)
        };
        Self {
            suggested_speed: clamped_speed,
            rationale: rationale.into(),
            source,
            clamped: clamped_speed != speed || speed.is_nan(),
        }
    }

    pub fn fallback(reason: impl Into<String>) -> Self {
        Self::new(MAX_SUGGESTED_SPEED, reason, DecisionSource::Fallback)
    }

    /// A suggestion of zero asks for maximum braking rather than a cap.
    pub fn is_hard_brake(&self) -> bool {
        self.suggested_speed <= 0.0
    }
}

/// `min(v_rule, suggestion)`: the reasoner can only slow the vehicle.
pub fn arbitrate(v_rule: f64, decision: &ReasonerDecision) -> f64 {
    if decision.suggested_speed <= v_rule {
        decision.suggested_speed
    } else {
        v_rule
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReasonerBackendConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env_var: String,
    /// Per-request timeout (s).
    pub timeout: f64,
    pub max_retries: u32,
    /// Seconds between upper-layer calls.
    pub call_period: f64,
    pub max_prompt_chars: usize,
}

impl Default for ReasonerBackendConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model_name: "gpt-4o".into(),
            api_key_env_var: "DUALAD_API_KEY".into(),
            timeout: 30.0,
            max_retries: 2,
            call_period: 1.0,
            max_prompt_chars: 8000,
        }
    }
}

impl ReasonerBackendConfig {
    pub fn validate(&self, sim_step: f64) -> Result<(), String> {
        if !(self.timeout > 0.0) {
            return Err("reasoner.timeout must be > 0".into());
        }
        if !(self.call_period >= sim_step - 1e-9) {
            return Err(format!(
                "reasoner.call_period must be >= the simulation step ({sim_step} s)"
            ));
        }
        if self.max_prompt_chars < 256 {
            return Err("reasoner.max_prompt_chars must be >= 256".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasonerKind {
    None,
    Mock,
    Remote,
    Replay,
}

impl ReasonerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReasonerKind::None => "none",
            ReasonerKind::Mock => "mock",
            ReasonerKind::Remote => "remote",
            ReasonerKind::Replay => "replay",
        }
    }
}

impl std::str::FromStr for ReasonerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "mock" => Ok(Self::Mock),
            "remote" => Ok(Self::Remote),
            "replay" => Ok(Self::Replay),
            other => Err(format!("unknown reasoner `{other}`")),
        }
    }
}

/// What a backend is given on each call.
#[derive(Debug, Clone, Copy)]
pub struct ReasonerRequest<'a> {
    pub step: usize,
    pub frame: &'a Frame,
    pub path: &'a ReferencePath,
    pub prompt: &'a Prompt,
}

pub trait Reasoner: Send {
    fn name(&self) -> &'static str;

    fn decide(&mut self, request: &ReasonerRequest<'_>) -> ReasonerDecision;

    /// Calls that ended in a fallback decision so far.
    fn failures(&self) -> usize;
}
