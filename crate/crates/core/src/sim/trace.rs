//! Simulation trace: one JSON record per step, written as JSON lines.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::frame::Frame;
use crate::reasoner::ReasonerDecision;
use crate::scenario::Scenario;

use super::{EgoDynamicsState, SimConfig};

pub const TRACE_FORMAT: &str = "dualad-trace-1";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: expected format `{TRACE_FORMAT}`, found `{found}`")]
    Format { line: usize, found: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoRecord {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub steering_angle: f64,
    pub accel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecordOut {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub speed: f64,
}

/// Planner outcome in force at a step.
#[derive(Debug, Clone, PartialEq)]
pub(super) struct PlanInfo {
    pub desired_speed: f64,
    pub cap: f64,
    pub candidate: Option<usize>,
    pub fallback: bool,
    pub hard_brake: bool,
    pub emergency_brake: bool,
    pub plan_error: Option<String>,
}

impl PlanInfo {
    pub fn idle(desired_speed: f64) -> Self {
        Self {
            desired_speed,
            cap: desired_speed,
            candidate: None,
            fallback: false,
            hard_brake: false,
            emergency_brake: false,
            plan_error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub format: String,
    pub scenario_id: String,
    pub planner: String,
    pub mode: String,
    pub seed: u64,
    pub step: usize,
    pub t: f64,
    pub ego: EgoRecord,
    /// Enumeration index of the selected candidate (candidate planners only).
    pub trajectory_id: Option<usize>,
    pub fallback: bool,
    /// Reasoner asked for a full stop.
    pub hard_brake: bool,
    /// Planner failed and the ego brakes at its limit.
    pub emergency_brake: bool,
    pub plan_error: Option<String>,
    /// Planner's own uncapped target speed.
    pub desired_speed: f64,
    /// Arbitrated speed cap in force.
    pub cap: f64,
    pub decision: Option<ReasonerDecision>,
    pub reasoner_called: bool,
    pub prompt_hash: Option<String>,
    /// Cumulative reasoner failures.
    pub reasoner_failures: usize,
    pub agents: Vec<AgentRecordOut>,
    /// Ids of agents overlapping the ego at this step.
    pub collisions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub scenario_id: String,
    pub planner: String,
    pub mode: String,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
}

impl SimTrace {
    pub(super) fn new(scenario: &Scenario, planner: &str, cfg: &SimConfig) -> Self {
        Self {
            scenario_id: scenario.id.clone(),
            planner: planner.to_string(),
            mode: cfg.mode.as_str().to_string(),
            seed: cfg.seed,
            records: Vec::with_capacity(cfg.record_count()),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(super) fn record(
        &mut self,
        step: usize,
        ego: &EgoDynamicsState,
        accel: f64,
        plan: &PlanInfo,
        decision: Option<ReasonerDecision>,
        prompt_hash: Option<String>,
        reasoner_failures: usize,
        frame: &Frame,
        collisions: Vec<String>,
    ) {
        self.records.push(TraceRecord {
            format: TRACE_FORMAT.to_string(),
            scenario_id: self.scenario_id.clone(),
            planner: self.planner.clone(),
            mode: self.mode.clone(),
            seed: self.seed,
            step,
            t: frame.t,
            ego: EgoRecord {
                x: ego.x,
                y: ego.y,
                theta: ego.theta,
                v: ego.v,
                steering_angle: ego.steering_angle,
                accel,
            },
            trajectory_id: plan.candidate,
            fallback: plan.fallback,
            hard_brake: plan.hard_brake,
            emergency_brake: plan.emergency_brake,
            plan_error: plan.plan_error.clone(),
            desired_speed: plan.desired_speed,
            cap: plan.cap,
            decision,
            reasoner_called: prompt_hash.is_some(),
            prompt_hash,
            reasoner_failures,
            agents: frame
                .agents
                .iter()
                .map(|a| AgentRecordOut {
                    id: a.id.clone(),
                    x: a.pose.x,
                    y: a.pose.y,
                    theta: a.pose.theta,
                    speed: a.speed,
                })
                .collect(),
            collisions,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn collided(&self) -> bool {
        self.records.iter().any(|r| !r.collisions.is_empty())
    }

    /// Distinct agents the ego touched during the run.
    pub fn collision_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .records
            .iter()
            .flat_map(|r| r.collisions.iter().cloned())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn reasoner_failures(&self) -> usize {
        self.records.last().map_or(0, |r| r.reasoner_failures)
    }

    pub fn emergency_brakes(&self) -> usize {
        self.records.iter().filter(|r| r.emergency_brake).count()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }

    /// Lowercase hex SHA-256 of the JSON-lines serialization.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: TraceRecord = serde_json::from_str(line).map_err(|e| TraceError::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
            if rec.format != TRACE_FORMAT {
                return Err(TraceError::Format {
                    line: n + 1,
                    found: rec.format,
                });
            }
            records.push(rec);
        }
        let first = records.first();
        Ok(Self {
            scenario_id: first.map(|r| r.scenario_id.clone()).unwrap_or_default(),
            planner: first.map(|r| r.planner.clone()).unwrap_or_default(),
            mode: first.map(|r| r.mode.clone()).unwrap_or_default(),
            seed: first.map_or(0, |r| r.seed),
            records,
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<(), TraceError> {
        let io = |source| TraceError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut f = std::fs::File::create(path).map_err(io)?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(io)
    }

    pub fn read_from(path: &Path) -> Result<Self, TraceError> {
        let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_jsonl(&text)
    }
}
