//! The `run`, `bench` and `encode` commands.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use dualad_core::corpus::load_corpus;
use dualad_core::encoder::encode_scene;
use dualad_core::metrics::{score_benchmark, score_trace, BenchmarkReport, ScoreCard};
use dualad_core::planners::build_planner;
use dualad_core::reasoner::{
    MockReasoner, Reasoner, ReasonerKind, RemoteReasoner, ReplayReasoner, ReplayRecorder,
};
use dualad_core::scenario::{load_scenario, select_worst_k, ScenarioError, SelectionMetric};
use dualad_core::sim::{run, SimMode, SimTrace, UpperLayer};
use dualad_core::{Frame, Scenario};

use crate::config::Resolved;
use crate::CliError;

/// One finished simulation.
pub struct Outcome {
    pub trace: SimTrace,
    pub card: ScoreCard,
    /// Raw replies of a remote run.
    pub replay: Option<ReplayRecorder>,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn scenario_error(e: ScenarioError) -> CliError {
    match e {
        ScenarioError::Io { .. } => CliError::Io(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("missing --{flag}")))
}

/// Simulates one scenario and scores it. `replay` is the recording to answer
/// from when the reasoner is `replay`.
pub fn simulate(
    scenario: &Scenario,
    cfg: &Resolved,
    mode: SimMode,
    replay: Option<&Path>,
) -> Result<Outcome, CliError> {
    let mut sim = cfg.sim.clone();
    sim.mode = mode;
    sim.duration = scenario.duration;
    sim.validate()
        .map_err(|e| CliError::Config(format!("{}: {e}", scenario.id)))?;
    let planner = build_planner(cfg.planner, &cfg.planners);

    let (mut mock, mut remote, mut replayed) = (None, None, None);
    let reasoner: Option<&mut dyn Reasoner> = match cfg.reasoner {
        ReasonerKind::None => None,
        ReasonerKind::Mock => Some(mock.insert(MockReasoner::new(cfg.mock.clone()))),
        ReasonerKind::Remote => Some(remote.insert(
            RemoteReasoner::new(cfg.backend.clone()).with_recorder(ReplayRecorder::new()),
        )),
        ReasonerKind::Replay => {
            let path = replay.ok_or_else(|| CliError::Config("missing --replay".into()))?;
            let loaded = ReplayReasoner::load(path).map_err(|e| io_error(path, e))?;
            Some(replayed.insert(loaded))
        }
    };
    let upper = reasoner.map(|reasoner| UpperLayer {
        reasoner,
        encoder: cfg.encoder.clone(),
        call_period: cfg.backend.call_period,
        max_prompt_chars: cfg.backend.max_prompt_chars,
    });
    let trace = run(scenario, planner.as_ref(), upper, &sim);
    let card = score_trace(&trace, scenario, &cfg.metrics)
        .map_err(|e| CliError::Config(format!("{}: {e}", scenario.id)))?;
    let replay = remote.as_mut().and_then(RemoteReasoner::take_recorder);
    Ok(Outcome { trace, card, replay })
}

/// Runs one scenario, writing `<id>.trace.jsonl` and `<id>.score.json` (and
/// `<id>.replay.jsonl` for remote runs) into the output directory.
pub fn cmd_run(cfg: &Resolved) -> Result<Outcome, CliError> {
    let path = required(&cfg.scenario, "scenario")?;
    let scenario = load_scenario(path).map_err(scenario_error)?;
    let outcome = simulate(&scenario, cfg, cfg.mode, cfg.replay.as_deref())?;

    let out = &cfg.out;
    let trace_path = out.join(format!("{}.trace.jsonl", scenario.id));
    write_file(&trace_path, &outcome.trace.to_jsonl())?;
    let card = serde_json::to_string_pretty(&outcome.card).expect("score card serializes");
    write_file(&out.join(format!("{}.score.json", scenario.id)), &(card + "\n"))?;
    if let Some(rec) = &outcome.replay {
        write_file(&out.join(format!("{}.replay.jsonl", scenario.id)), &rec.to_jsonl())?;
    }
    println!(
        "{} {} {} {}: score {:.2}{}",
        scenario.id,
        cfg.planner.as_str(),
        cfg.reasoner.as_str(),
        cfg.mode.as_str(),
        outcome.card.score,
        if outcome.card.collision { " (collision)" } else { "" }
    );
    Ok(outcome)
}

#[derive(Deserialize)]
struct SuiteIds {
    scenario_ids: Vec<String>,
}

/// Loads a corpus directory, or its `scenarios/` subdirectory when present,
/// optionally restricted to the ids listed in a suite file.
pub fn load_benchmark_scenarios(
    corpus: &Path,
    suite: Option<&Path>,
) -> Result<Vec<Scenario>, CliError> {
    if !corpus.is_dir() {
        return Err(io_error(corpus, "not a directory"));
    }
    let nested = corpus.join("scenarios");
    let dir = if nested.is_dir() { nested } else { corpus.to_path_buf() };
    let mut scenarios = load_corpus(&dir).map_err(scenario_error)?;
    if let Some(suite) = suite {
        let text = std::fs::read_to_string(suite).map_err(|e| io_error(suite, e))?;
        let ids: SuiteIds = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", suite.display())))?;
        if let Some(missing) = ids
            .scenario_ids
            .iter()
            .find(|id| !scenarios.iter().any(|s| &s.id == *id))
        {
            return Err(CliError::Config(format!(
                "suite lists `{missing}`, which is not in the corpus"
            )));
        }
        scenarios.retain(|s| ids.scenario_ids.contains(&s.id));
    }
    if scenarios.is_empty() {
        return Err(CliError::Config(format!(
            "corpus {} has no scenarios",
            dir.display()
        )));
    }
    Ok(scenarios)
}

/// Reports of one benchmark, per mode in run order.
pub struct BenchOutput {
    pub reports: Vec<(SimMode, BenchmarkReport)>,
    pub files: Vec<PathBuf>,
}

pub const BENCH_MODES: [SimMode; 2] = [SimMode::NonReactive, SimMode::Reactive];

/// Simulates every scenario in both modes on a worker pool, then writes
/// `report_<stem>_<mode>.{csv,json}`, `hashes_<stem>_<mode>.txt` and, for
/// `k > 0`, `worst_<k>_<stem>.json` selected on the reactive scores.
pub fn cmd_bench(cfg: &Resolved, write_traces: bool) -> Result<BenchOutput, CliError> {
    let corpus = required(&cfg.corpus, "corpus")?;
    let scenarios = load_benchmark_scenarios(corpus, cfg.suite.as_deref())?;
    if cfg.k > scenarios.len() {
        return Err(CliError::Config(format!(
            "k = {} exceeds the {} scenarios in the corpus",
            cfg.k,
            scenarios.len()
        )));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("workers: {e}")))?;

    let stem = cfg.stem();
    let mut output = BenchOutput {
        reports: Vec::new(),
        files: Vec::new(),
    };
    for mode in BENCH_MODES {
        let outcomes: Vec<Outcome> = pool.install(|| {
            scenarios
                .par_iter()
                .map(|s| {
                    let replay = cfg
                        .replay
                        .as_ref()
                        .map(|dir| dir.join(mode.as_str()).join(format!("{}.jsonl", s.id)));
                    simulate(s, cfg, mode, replay.as_deref())
                })
                .collect::<Result<_, _>>()
        })?;

        let mut hashes = String::new();
        for o in &outcomes {
            hashes.push_str(&format!("{} {}\n", o.trace.scenario_id, o.trace.sha256()));
            if write_traces {
                let p = cfg
                    .out
                    .join("traces")
                    .join(&stem)
                    .join(mode.as_str())
                    .join(format!("{}.jsonl", o.trace.scenario_id));
                write_file(&p, &o.trace.to_jsonl())?;
            }
            if let Some(rec) = &o.replay {
                let p = cfg
                    .out
                    .join("replays")
                    .join(&stem)
                    .join(mode.as_str())
                    .join(format!("{}.jsonl", o.trace.scenario_id));
                write_file(&p, &rec.to_jsonl())?;
            }
        }
        let report = score_benchmark(
            outcomes
                .into_iter()
                .map(|o| (o.trace.scenario_id, o.card)),
        )
        .map_err(|e| CliError::Config(e.to_string()))?;

        let base = format!("{stem}_{}", mode.as_str());
        for (name, contents) in [
            (format!("report_{base}.csv"), report.to_csv()),
            (format!("report_{base}.json"), report.to_json() + "\n"),
            (format!("hashes_{base}.txt"), hashes),
        ] {
            let path = cfg.out.join(name);
            write_file(&path, &contents)?;
            output.files.push(path);
        }
        println!(
            "{stem} {:12} mean {:6.2}  collisions {:3}  failed {:.3}  ({} scenarios)",
            mode.as_str(),
            report.mean_score,
            report.collisions,
            report.failure_proportion,
            report.rows.len()
        );
        output.reports.push((mode, report));
    }

    if cfg.k > 0 {
        let (_, reactive) = output
            .reports
            .iter()
            .find(|(m, _)| *m == SimMode::Reactive)
            .expect("both modes ran");
        let scores: Vec<(String, f64)> = reactive
            .rows
            .iter()
            .map(|r| (r.scenario_id.clone(), r.card.score))
            .collect();
        let set = select_worst_k(&scores, cfg.k, SelectionMetric::RCls)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let path = cfg.out.join(format!("worst_{}_{stem}.json", cfg.k));
        let json = serde_json::to_string_pretty(&set).expect("benchmark set serializes");
        write_file(&path, &(json + "\n"))?;
        output.files.push(path);
    }
    Ok(output)
}

/// Text blocks describing the logged scene at time `t`, nearest first.
pub fn encode_at(cfg: &Resolved) -> Result<Vec<String>, CliError> {
    let path = required(&cfg.scenario, "scenario")?;
    let t = cfg
        .time
        .ok_or_else(|| CliError::Config("missing --time".into()))?;
    let scenario = load_scenario(path).map_err(scenario_error)?;
    if !(t >= 0.0 && t <= scenario.duration) {
        return Err(CliError::Config(format!(
            "time {t} is outside [0, {}]",
            scenario.duration
        )));
    }
    let frame = Frame::logged(&scenario, t);
    let blocks = encode_scene(&frame, &scenario.centerline, &cfg.encoder)
        .map_err(|e| CliError::Config(format!("encoding failed: {e}")))?;
    Ok(blocks.into_iter().map(|b| b.text).collect())
}

pub fn cmd_encode(cfg: &Resolved) -> Result<(), CliError> {
    let blocks = encode_at(cfg)?;
    if !blocks.is_empty() {
        println!("{}", blocks.join("\n\n"));
    }
    Ok(())
}
