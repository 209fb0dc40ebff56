//! Run configuration: one TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dualad_core::encoder::EncoderConfig;
use dualad_core::metrics::MetricsConfig;
use dualad_core::planners::{PlannerConfigs, PlannerKind};
use dualad_core::reasoner::{MockReasonerConfig, ReasonerBackendConfig, ReasonerKind};
use dualad_core::sim::{SimConfig, SimMode};

use crate::CliError;

pub const DEFAULT_OUT_DIR: &str = "dualad-out";

/// Everything a run needs. Every key is optional in the file; missing
/// sections take their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    /// JSON file with a `scenario_ids` list restricting a benchmark.
    pub suite: Option<PathBuf>,
    pub planner: Option<String>,
    pub reasoner: Option<String>,
    pub mode: Option<String>,
    pub k: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub time: Option<f64>,
    /// Recorded replies for the replay reasoner: a file for `run`, the
    /// recording directory for `bench`.
    pub replay: Option<PathBuf>,
    pub sim: SimConfig,
    pub planners: PlannerConfigs,
    pub encoder: EncoderConfig,
    pub backend: ReasonerBackendConfig,
    pub mock: MockReasonerConfig,
    pub metrics: MetricsConfig,
}

/// Values given on the command line. Each one, when present, replaces the
/// file's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scenario: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub suite: Option<PathBuf>,
    pub planner: Option<String>,
    pub reasoner: Option<String>,
    pub mode: Option<String>,
    pub k: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub time: Option<f64>,
    pub replay: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn apply(&mut self, o: Overrides) {
        macro_rules! take {
            ($($field:ident),*) => {$(
                if o.$field.is_some() {
                    self.$field = o.$field;
                }
            )*};
        }
        take!(scenario, corpus, suite, planner, reasoner, mode, k, out, workers, seed, time, replay);
    }

    /// Parses the enum-valued keys and validates every section.
    pub fn resolve(self) -> Result<Resolved, CliError> {
        let planner = parse_field("planner", self.planner.as_deref().unwrap_or("idm"))?;
        let reasoner = parse_field("reasoner", self.reasoner.as_deref().unwrap_or("none"))?;
        let mode = parse_field("mode", self.mode.as_deref().unwrap_or("non_reactive"))?;

        let mut sim = self.sim;
        if let Some(seed) = self.seed {
            sim.seed = seed;
        }
        sim.validate().map_err(CliError::Config)?;
        self.planners.idm.validate().map_err(CliError::Config)?;
        self.planners.lattice.validate().map_err(CliError::Config)?;
        self.planners.sampling.validate().map_err(CliError::Config)?;
        self.encoder
            .validate()
            .map_err(|e| CliError::Config(format!("encoder: {e}")))?;
        if reasoner == ReasonerKind::Remote || reasoner == ReasonerKind::Replay {
            self.backend
                .validate(sim.step)
                .map_err(CliError::Config)?;
        }
        if !(self.backend.call_period >= sim.step - 1e-9) {
            return Err(CliError::Config(
                "backend.call_period must be >= sim.step".into(),
            ));
        }
        self.metrics
            .weights
            .validate()
            .map_err(|e| CliError::Config(format!("metrics.weights: {e}")))?;
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be >= 1".into()));
        }
        if reasoner == ReasonerKind::Replay && self.replay.is_none() {
            return Err(CliError::Config(
                "reasoner `replay` needs a recording (--replay)".into(),
            ));
        }

        Ok(Resolved {
            scenario: self.scenario,
            corpus: self.corpus,
            suite: self.suite,
            planner,
            reasoner,
            mode,
            k: self.k.unwrap_or(0),
            out: self.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
            workers: self.workers,
            time: self.time,
            replay: self.replay,
            sim,
            planners: self.planners,
            encoder: self.encoder,
            backend: self.backend,
            mock: self.mock,
            metrics: self.metrics,
        })
    }
}

fn parse_field<T: std::str::FromStr<Err = String>>(field: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|e: String| CliError::Config(format!("{field}: {e}")))
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub suite: Option<PathBuf>,
    pub planner: PlannerKind,
    pub reasoner: ReasonerKind,
    pub mode: SimMode,
    pub k: usize,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub time: Option<f64>,
    pub replay: Option<PathBuf>,
    pub sim: SimConfig,
    pub planners: PlannerConfigs,
    pub encoder: EncoderConfig,
    pub backend: ReasonerBackendConfig,
    pub mock: MockReasonerConfig,
    pub metrics: MetricsConfig,
}

impl Resolved {
    /// File-name stem for a planner/reasoner pair, e.g. `lattice_mock`.
    pub fn stem(&self) -> String {
        format!("{}_{}", self.planner.as_str(), self.reasoner.as_str())
    }
}
