//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

#[path = "../../core/tests/support/encoder_golden.rs"]
mod encoder_golden;
#[path = "../../core/tests/support/frenet_roundtrip.rs"]
mod frenet_roundtrip;
#[path = "../../core/tests/support/idm_oracle.rs"]
mod idm_oracle;
#[path = "../../core/tests/support/sampling_checks.rs"]
mod sampling_checks;
#[path = "../../core/tests/support/stub_server.rs"]
mod stub_server;
#[path = "../../core/tests/support/worst_k.rs"]
mod worst_k;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dualad_cli::commands::load_benchmark_scenarios;
use dualad_cli::{cmd_bench, simulate, Resolved, RunConfig};
use dualad_core::corpus::load_corpus;
use dualad_core::planners::IdmParams;
use dualad_core::reasoner::{arbitrate, DecisionSource, ReasonerDecision, MAX_SUGGESTED_SPEED};
use dualad_core::sim::{SimMode, SimTrace};
use dualad_core::Scenario;

type Outcome = Result<String, String>;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn corpus_dir() -> PathBuf {
    repo().join("corpus")
}

fn resolved(planner: &str, reasoner: &str) -> Resolved {
    RunConfig {
        planner: Some(planner.into()),
        reasoner: Some(reasoner.into()),
        ..Default::default()
    }
    .resolve()
    .expect("built-in configuration is valid")
}

fn ensure(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

fn encoder_suite() -> Outcome {
    let started = Instant::now();
    let goldens = encoder_golden::check_goldens(&repo().join("crates/core/tests/golden/encoder"))?;
    ensure(goldens >= 25, || format!("only {goldens} golden frames"))?;
    encoder_golden::fuzz_case_tables(1_000_000, 2024)?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{goldens} golden frames byte-identical, 1e6 fuzzed inputs fire one branch each, {:.1} s",
        elapsed.as_secs_f64()
    ))
}

fn frenet_round_trip() -> Outcome {
    let r = frenet_roundtrip::frenet_round_trip(3334, 11);
    ensure(r.samples >= 10_000, || format!("only {} samples", r.samples))?;
    ensure(r.max_position_error <= 1e-6 && r.max_heading_error <= 1e-6, || {
        format!(
            "max errors {:.2e} m / {:.2e} rad",
            r.max_position_error, r.max_heading_error
        )
    })?;
    Ok(format!(
        "{} poses, max error {:.1e} m / {:.1e} rad",
        r.samples, r.max_position_error, r.max_heading_error
    ))
}

fn idm_properties() -> Outcome {
    let p = IdmParams::default();
    let mut worst: f64 = 0.0;
    for case in &idm_oracle::CASES {
        let dev = idm_oracle::max_oracle_deviation(case, &p);
        ensure(dev < 1e-3, || format!("{}: {dev:.2e} m/s from the 1 ms oracle", case.name))?;
        worst = worst.max(dev);
    }
    let v = idm_oracle::free_road_final_speed(13.0, 5.0);
    ensure((v - 13.0).abs() < 0.1, || format!("free road ends at {v:.3} m/s, target 13"))?;
    let floor = p.min_gap_floor;
    let mut gaps = Vec::new();
    for mode in [SimMode::NonReactive, SimMode::Reactive] {
        let (last, min_gap, collided) = idm_oracle::stationary_leader_outcome(4.0, mode);
        ensure(!collided && min_gap > 0.0 && last >= floor, || {
            format!("stationary leader, {}: final gap {last:.2} m, collision {collided}", mode.as_str())
        })?;
        gaps.push(last);
    }
    Ok(format!(
        "oracle deviation {worst:.1e} m/s, free road {v:.3} m/s at 15 s, stationary leader gap {:.2} m",
        gaps[0]
    ))
}

fn arbiter_property() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..100_000 {
        let v_rule = match i % 10 {
            0 => 0.0,
            1 => MAX_SUGGESTED_SPEED,
            _ => rng.gen_range(0.0..30.0),
        };
        let suggestion = match i % 7 {
            0 => v_rule,
            1 => 0.0,
            2 => rng.gen_range(-10.0..0.0),
            3 => rng.gen_range(15.0..40.0),
            _ => rng.gen_range(0.0..15.0),
        };
        let d = ReasonerDecision::new(suggestion, "", DecisionSource::RemoteLlm);
        let out = arbitrate(v_rule, &d);
        let expected = v_rule.min(suggestion.clamp(0.0, MAX_SUGGESTED_SPEED));
        ensure(out == expected && out <= v_rule, || {
            format!("v_rule {v_rule}, suggestion {suggestion}: got {out}, expected {expected}")
        })?;
    }
    Ok("1e5 pairs match min(v_rule, clamp(suggestion, 0, 15)) and never exceed v_rule".into())
}

struct SuiteResult {
    mean: f64,
    collisions: usize,
}

fn run_suite(scenarios: &[Scenario], planner: &str, reasoner: &str, mode: SimMode) -> Result<SuiteResult, String> {
    let cfg = resolved(planner, reasoner);
    let mut total = 0.0;
    let mut collisions = 0;
    for s in scenarios {
        let o = simulate(s, &cfg, mode, None).map_err(|e| e.to_string())?;
        total += o.card.score;
        collisions += usize::from(o.card.collision);
    }
    Ok(SuiteResult {
        mean: total / scenarios.len() as f64,
        collisions,
    })
}

fn critical_suite_trend() -> Outcome {
    let started = Instant::now();
    let corpus = corpus_dir();
    let suite = load_benchmark_scenarios(&corpus, Some(&corpus.join("critical_suite.json")))
        .map_err(|e| e.to_string())?;
    ensure(suite.len() == 10, || format!("suite has {} scenarios", suite.len()))?;
    let mut parts = Vec::new();
    for planner in ["idm", "lattice"] {
        let bare = run_suite(&suite, planner, "none", SimMode::Reactive)?;
        let dual = run_suite(&suite, planner, "mock", SimMode::Reactive)?;
        ensure(dual.mean > bare.mean && dual.collisions < bare.collisions, || {
            format!(
                "{planner}: mean {:.2} -> {:.2}, collisions {} -> {}",
                bare.mean, dual.mean, bare.collisions, dual.collisions
            )
        })?;
        parts.push(format!(
            "{planner} {:.1} ({} coll.) -> +mock {:.1} ({} coll.)",
            bare.mean, bare.collisions, dual.mean, dual.collisions
        ));
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("R-CLS {}, {:.0} s", parts.join("; "), elapsed.as_secs_f64()))
}

fn first_collision(trace: &SimTrace) -> Option<f64> {
    trace.records.iter().find(|r| !r.collisions.is_empty()).map(|r| r.t)
}

fn speed_at(trace: &SimTrace, t: f64) -> f64 {
    trace
        .records
        .iter()
        .find(|r| (r.t - t).abs() < 1e-6)
        .map_or(f64::NAN, |r| r.ego.v)
}

fn crossing_pedestrian_slowdown() -> Outcome {
    let scenarios = load_corpus(corpus_dir().join("scenarios")).map_err(|e| e.to_string())?;
    let scenario = scenarios
        .iter()
        .find(|s| s.id == "crossing_pedestrian_02")
        .ok_or("crossing_pedestrian_02 is missing from the corpus")?;
    let bare = simulate(scenario, &resolved("idm", "none"), SimMode::NonReactive, None)
        .map_err(|e| e.to_string())?
        .trace;
    let dual = simulate(scenario, &resolved("idm", "mock"), SimMode::NonReactive, None)
        .map_err(|e| e.to_string())?
        .trace;
    let t_hit = first_collision(&bare).ok_or("the bare planner did not collide")?;
    ensure(!dual.collided(), || "DualAD collided".into())?;
    let t_cap = dual
        .records
        .iter()
        .find(|r| r.cap < r.desired_speed - 1e-6)
        .map(|r| r.t)
        .ok_or("the cap never dropped")?;
    ensure(t_cap <= t_hit - 2.0, || {
        format!("cap dropped at {t_cap:.1} s, bare collision at {t_hit:.1} s")
    })?;
    let (v_dual, v_bare) = (speed_at(&dual, t_hit), speed_at(&bare, t_hit));
    ensure(v_dual < v_bare, || {
        format!("at {t_hit:.1} s DualAD drives {v_dual:.2} m/s, bare {v_bare:.2} m/s")
    })?;
    Ok(format!(
        "cap drops at {t_cap:.1} s, bare IDM hits the pedestrian at {t_hit:.1} s; \
         DualAD passes without collision ({v_dual:.1} vs {v_bare:.1} m/s at {t_hit:.1} s)"
    ))
}

/// File name and contents of every output of one bench run.
type BenchFiles = Vec<(String, Vec<u8>)>;

fn bench_files(workers: usize) -> Result<(tempfile::TempDir, BenchFiles), String> {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = resolved("idm", "mock");
    cfg.corpus = Some(corpus_dir());
    cfg.out = out.path().to_path_buf();
    cfg.workers = Some(workers);
    cfg.k = 5;
    let bench = cmd_bench(&cfg, true).map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for path in &bench.files {
        let name = path
            .strip_prefix(out.path())
            .map_err(|e| e.to_string())?
            .display()
            .to_string();
        files.push((name, std::fs::read(path).map_err(|e| e.to_string())?));
    }
    Ok((out, files))
}

fn bench_determinism() -> Outcome {
    let (_a, first) = bench_files(1)?;
    let (_b, second) = bench_files(4)?;
    ensure(first.len() == second.len(), || "different file sets".into())?;
    for ((name_a, a), (name_b, b)) in first.iter().zip(&second) {
        ensure(name_a == name_b && a == b, || format!("{name_a} differs between runs"))?;
    }
    ensure(first.iter().any(|(n, _)| n.starts_with("hashes_")), || "no hash files".into())?;
    Ok(format!(
        "{} report, hash and worst-K files byte-identical across 1 and 4 workers",
        first.len()
    ))
}

fn sampling_planner() -> Outcome {
    let selected = sampling_checks::check_scale_invariance(100, 31)?;
    let scenarios = load_corpus(corpus_dir().join("scenarios")).map_err(|e| e.to_string())?;
    let sweep = sampling_checks::check_corpus_selections(&scenarios)?;
    ensure(sweep.selected > 0, || "no trajectory was selected on the corpus".into())?;
    Ok(format!(
        "selection unchanged under weight scaling on 100 scenes ({selected} non-fallback); \
         {} of {} corpus plans checked for limits and clearance",
        sweep.selected, sweep.plans
    ))
}

fn worst_k_selection() -> Outcome {
    for (k, seed) in [(24, 5), (55, 6)] {
        worst_k::check_worst_k(k, seed)?;
    }
    Ok("k = 24 and 55 on 2000 scores match the sort oracle".into())
}

fn remote_reasoner() -> Outcome {
    let lines = stub_server::check_query_contract()?;
    Ok(lines.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("encoder golden suite", encoder_suite),
        ("frenet round trip", frenet_round_trip),
        ("idm properties", idm_properties),
        ("arbiter", arbiter_property),
        ("critical suite trend", critical_suite_trend),
        ("crossing pedestrian slowdown", crossing_pedestrian_slowdown),
        ("bench determinism", bench_determinism),
        ("sampling planner", sampling_planner),
        ("worst-k selection", worst_k_selection),
        ("remote reasoner plumbing", remote_reasoner),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    let mut stdout = std::io::stdout();
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            Err(panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let line = match outcome {
            Ok(detail) => format!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                format!("criterion {:>2} {name}: FAIL ({why})", i + 1)
            }
        };
        writeln!(stdout, "{line}").unwrap();
        stdout.flush().unwrap();
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
