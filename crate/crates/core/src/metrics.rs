//! Closed-loop scoring of simulation traces.
//!
//! A trace with any collision scores 0. Otherwise the score is
//! `100 * (w_progress * progress + w_speed * speed_compliance
//! + w_comfort * comfort + w_ttc * min(1, min_ttc / 3 s))`.
//!
//! The formula approximates the structure of common closed-loop driving
//! scores; absolute values are only meaningful relative to each other.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{EGO_LENGTH, EGO_WIDTH};
use crate::geom::{boxes_collide, CartesianPose, OrientedBox};
use crate::scenario::Scenario;
use crate::sim::{SimTrace, TraceRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("trace has {got} records, expected {expected}")]
    IncompleteTrace { expected: usize, got: usize },
    #[error("benchmark has no traces")]
    EmptyBenchmark,
    #[error("invalid metric weights: {0}")]
    InvalidWeights(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricWeights {
    pub w_progress: f64,
    pub w_speed: f64,
    pub w_comfort: f64,
    pub w_ttc: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self {
            w_progress: 0.5,
            w_speed: 0.2,
            w_comfort: 0.2,
            w_ttc: 0.1,
        }
    }
}

impl MetricWeights {
    pub fn new(w_progress: f64, w_speed: f64, w_comfort: f64, w_ttc: f64) -> Result<Self, MetricsError> {
        let w = Self {
            w_progress,
            w_speed,
            w_comfort,
            w_ttc,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        let all = [self.w_progress, self.w_speed, self.w_comfort, self.w_ttc];
        if all.iter().any(|&w| !(w >= 0.0)) {
            return Err(MetricsError::InvalidWeights("weights must be >= 0".into()));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MetricsError::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub weights: MetricWeights,
    pub comfort_max_accel: f64,
    pub comfort_max_jerk: f64,
    /// TTC at or above this earns the full TTC term (s).
    pub ttc_full_score: f64,
    /// TTC search horizon; also the value reported when nothing is in reach (s).
    pub ttc_horizon: f64,
    /// Speeds this far above the limit still count as compliant (m/s).
    pub speed_tolerance: f64,
    /// Runs with more reasoner failures than this are flagged as failed.
    pub failure_threshold: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            weights: MetricWeights::default(),
            comfort_max_accel: 3.0,
            comfort_max_jerk: 5.0,
            ttc_full_score: 3.0,
            ttc_horizon: 10.0,
            speed_tolerance: 0.01,
            failure_threshold: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub score: f64,
    pub collision: bool,
    pub progress_ratio: f64,
    pub speed_compliance: f64,
    pub comfort: f64,
    pub min_ttc: f64,
    /// Largest lateral distance from the centerline (m).
    pub drivable_deviation: f64,
    pub reasoner_failures: usize,
    pub failed: bool,
}

/// Weighted sum of sub-metrics, gated by collision.
pub fn combine(
    weights: &MetricWeights,
    collision: bool,
    progress: f64,
    speed_compliance: f64,
    comfort: f64,
    ttc_term: f64,
) -> f64 {
    if collision {
        return 0.0;
    }
    let raw = weights.w_progress * progress
        + weights.w_speed * speed_compliance
        + weights.w_comfort * comfort
        + weights.w_ttc * ttc_term;
    (100.0 * raw).clamp(0.0, 100.0)
}

/// Earliest time in `[0, horizon]` at which two boxes moving at constant
/// velocity touch, by 0.1 s sampling refined with bisection.
pub fn constant_velocity_ttc(
    a: &OrientedBox,
    va: [f64; 2],
    b: &OrientedBox,
    vb: [f64; 2],
    horizon: f64,
) -> Option<f64> {
    let at = |t: f64| {
        let shift = |bx: &OrientedBox, v: [f64; 2]| {
            let c = bx.center;
            OrientedBox::new(
                CartesianPose::new(c.x + v[0] * t, c.y + v[1] * t, c.theta),
                bx.width,
                bx.length,
            )
        };
        boxes_collide(&shift(a, va), &shift(b, vb))
    };
    if at(0.0) {
        return Some(0.0);
    }
    let step = 0.1;
    let n = (horizon / step).ceil() as usize;
    let mut prev = 0.0;
    for k in 1..=n {
        let t = (k as f64 * step).min(horizon);
        if at(t) {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if at(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        prev = t;
    }
    None
}

/// Minimum TTC against agents ahead of a moving ego, capped at `horizon`.
fn record_ttc(rec: &TraceRecord, scenario: &Scenario, horizon: f64) -> f64 {
    let e = &rec.ego;
    if e.v <= 0.1 {
        return horizon;
    }
    let ego_box = OrientedBox::new(CartesianPose::new(e.x, e.y, e.theta), EGO_WIDTH, EGO_LENGTH);
    let (sin, cos) = e.theta.sin_cos();
    let ve = [e.v * cos, e.v * sin];
    let mut best = horizon;
    for (a, spec) in rec.agents.iter().zip(&scenario.agents) {
        if (a.x - e.x) * cos + (a.y - e.y) * sin <= 0.0 {
            continue;
        }
        let b = OrientedBox::new(CartesianPose::new(a.x, a.y, a.theta), spec.width, spec.length);
        let vb = [a.speed * a.theta.cos(), a.speed * a.theta.sin()];
        if let Some(t) = constant_velocity_ttc(&ego_box, ve, &b, vb, best) {
            best = best.min(t);
        }
    }
    best
}

/// Reference progress along the centerline from the logged ego, or from the
/// initial speed held for the whole duration when there is no log.
pub fn expert_progress(scenario: &Scenario) -> f64 {
    let path = &scenario.centerline;
    match &scenario.ego_log {
        Some(log) if log.len() >= 2 => {
            let (a, b) = (&log[0], &log[log.len() - 1]);
            (path.project(b.x, b.y).0 - path.project(a.x, a.y).0).max(0.0)
        }
        _ => (scenario.ego_init.speed * scenario.duration).max(1.0),
    }
}

pub fn score_trace(
    trace: &SimTrace,
    scenario: &Scenario,
    cfg: &MetricsConfig,
) -> Result<ScoreCard, MetricsError> {
    cfg.weights.validate()?;
    let expected = scenario.grid_len();
    if trace.records.len() < expected {
        return Err(MetricsError::IncompleteTrace {
            expected,
            got: trace.records.len(),
        });
    }
    let records = &trace.records[..expected];
    let path = &scenario.centerline;
    let collision = records.iter().any(|r| !r.collisions.is_empty());

    let first = &records[0].ego;
    let last = &records[records.len() - 1].ego;
    let travelled = path.project(last.x, last.y).0 - path.project(first.x, first.y).0;
    let expert = expert_progress(scenario);
    let progress_ratio = if expert < 0.1 {
        1.0
    } else {
        (travelled / expert).clamp(0.0, 1.0)
    };

    let dt = if records.len() > 1 {
        records[1].t - records[0].t
    } else {
        0.1
    };
    let intervals = records.len().saturating_sub(1).max(1);
    let over = records[..records.len() - 1]
        .iter()
        .filter(|r| r.ego.v > scenario.speed_limit + cfg.speed_tolerance)
        .count();
    let speed_compliance = 1.0 - over as f64 / intervals as f64;

    let comfortable = records
        .iter()
        .enumerate()
        .filter(|(k, r)| {
            let jerk = if *k == 0 {
                0.0
            } else {
                (r.ego.accel - records[k - 1].ego.accel) / dt
            };
            r.ego.accel.abs() <= cfg.comfort_max_accel + 1e-9
                && jerk.abs() <= cfg.comfort_max_jerk + 1e-9
        })
        .count();
    let comfort = comfortable as f64 / records.len() as f64;

    let min_ttc = records
        .iter()
        .map(|r| record_ttc(r, scenario, cfg.ttc_horizon))
        .fold(cfg.ttc_horizon, f64::min);
    let ttc_term = (min_ttc / cfg.ttc_full_score).min(1.0);

    let drivable_deviation = records
        .iter()
        .map(|r| path.project(r.ego.x, r.ego.y).1.abs())
        .fold(0.0, f64::max);

    let reasoner_failures = records.last().map_or(0, |r| r.reasoner_failures);
    Ok(ScoreCard {
        score: combine(
            &cfg.weights,
            collision,
            progress_ratio,
            speed_compliance,
            comfort,
            ttc_term,
        ),
        collision,
        progress_ratio,
        speed_compliance,
        comfort,
        min_ttc,
        drivable_deviation,
        reasoner_failures,
        failed: reasoner_failures > cfg.failure_threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub scenario_id: String,
    pub card: ScoreCard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    /// Sorted by scenario id.
    pub rows: Vec<BenchmarkRow>,
    pub mean_score: f64,
    pub collisions: usize,
    pub failed_runs: usize,
    pub failure_proportion: f64,
}

pub fn score_benchmark(
    cards: impl IntoIterator<Item = (String, ScoreCard)>,
) -> Result<BenchmarkReport, MetricsError> {
    let mut rows: Vec<BenchmarkRow> = cards
        .into_iter()
        .map(|(scenario_id, card)| BenchmarkRow { scenario_id, card })
        .collect();
    if rows.is_empty() {
        return Err(MetricsError::EmptyBenchmark);
    }
    rows.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    let n = rows.len() as f64;
    let mean_score = rows.iter().map(|r| r.card.score).sum::<f64>() / n;
    let collisions = rows.iter().filter(|r| r.card.collision).count();
    let failed_runs = rows.iter().filter(|r| r.card.failed).count();
    Ok(BenchmarkReport {
        rows,
        mean_score,
        collisions,
        failed_runs,
        failure_proportion: failed_runs as f64 / n,
    })
}

impl BenchmarkReport {
    pub const CSV_HEADER: &'static str =
        "scenario_id,score,collision,progress,speed_compliance,comfort,min_ttc,failed";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let c = &r.card;
            let _ = writeln!(
                out,
                "{},{:.4},{},{:.4},{:.4},{:.4},{:.4},{}",
                r.scenario_id,
                c.score,
                c.collision,
                c.progress_ratio,
                c.speed_compliance,
                c.comfort,
                c.min_ttc,
                c.failed
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn score_of(&self, id: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.scenario_id == id)
            .map(|r| r.card.score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn card(score: f64, failed: bool) -> ScoreCard {
        ScoreCard {
            score,
            collision: score == 0.0,
            progress_ratio: 1.0,
            speed_compliance: 1.0,
            comfort: 1.0,
            min_ttc: 10.0,
            drivable_deviation: 0.0,
            reasoner_failures: usize::from(failed),
            failed,
        }
    }

    #[test]
    fn collision_gates_score() {
        let w = MetricWeights::default();
        assert_eq!(combine(&w, true, 1.0, 1.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn perfect_and_half_progress() {
        let w = MetricWeights::default();
        assert!((combine(&w, false, 1.0, 1.0, 1.0, 1.0) - 100.0).abs() < 1e-9);
        assert!((combine(&w, false, 0.5, 1.0, 1.0, 1.0) - 75.0).abs() < 1e-9);
    }

    #[test]
    fn progress_only_weights() {
        let w = MetricWeights::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(combine(&w, false, 0.37, 0.1, 0.2, 0.3), 100.0 * 0.37);
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(MetricWeights::new(0.5, 0.5, 0.5, 0.0).is_err());
        assert!(MetricWeights::new(-0.5, 0.5, 0.5, 0.5).is_err());
    }

    #[test]
    fn benchmark_aggregation() {
        let r = score_benchmark(vec![("a".into(), card(80.0, false))]).unwrap();
        assert_eq!(r.mean_score, 80.0);
        let r = score_benchmark(vec![("b".into(), card(0.0, false)), ("a".into(), card(100.0, false))])
            .unwrap();
        assert_eq!(r.mean_score, 50.0);
        assert_eq!(r.rows[0].scenario_id, "a");
        let r = score_benchmark(vec![
            ("a".into(), card(10.0, true)),
            ("b".into(), card(20.0, false)),
            ("c".into(), card(30.0, false)),
        ])
        .unwrap();
        assert!((r.failure_proportion - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(score_benchmark(Vec::new()), Err(MetricsError::EmptyBenchmark));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let r = score_benchmark(vec![("a".into(), card(80.0, false))]).unwrap();
        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], BenchmarkReport::CSV_HEADER);
        assert!(lines[1].starts_with("a,80.0000,false,"));
    }

    #[test]
    fn head_on_ttc() {
        let a = OrientedBox::new(CartesianPose::new(0.0, 0.0, 0.0), 2.0, 4.0);
        let b = OrientedBox::new(CartesianPose::new(24.0, 0.0, 0.0), 2.0, 4.0);
        let t = constant_velocity_ttc(&a, [10.0, 0.0], &b, [0.0, 0.0], 10.0).unwrap();
        assert!((t - 2.0).abs() < 1e-9);
        assert!(constant_velocity_ttc(&a, [0.0, 0.0], &b, [0.0, 0.0], 10.0).is_none());
    }
}
