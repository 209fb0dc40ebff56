//! Background traffic: log replay or IDM-controlled along the logged paths.

use serde::{Deserialize, Serialize};

use crate::frame::AgentSnapshot;
use crate::geom::{boxes_collide, normalize_angle, OrientedBox, ReferencePath};
use crate::planners::{advance, idm_accel, DesiredGap, IdmParams};
use crate::scenario::{AgentKind, AgentRecord, AgentState, Scenario};

/// Extension of each logged path beyond its last sample (m).
const PATH_EXTENSION: f64 = 100.0;
/// Minimum spacing of the logged positions kept as path vertices (m).
const VERTEX_SPACING: f64 = 0.5;
/// Leaders farther than this are ignored (m).
const LOOKAHEAD: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackgroundConfig {
    pub idm: IdmParams,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        Self {
            idm: IdmParams {
                a: 1.5,
                s_star: 5.0,
                delta: 4.0,
                min_gap_floor: 1.0,
                max_brake: 4.0,
                half_lane_width: 1.5,
                desired_gap: DesiredGap::Constant,
                v0_from_speed_limit: false,
                ..IdmParams::default()
            },
        }
    }
}

/// Follows IDM along the path through the agent's logged positions.
#[derive(Debug, Clone)]
struct ReactiveTrack {
    path: ReferencePath,
    s: f64,
}

#[derive(Debug, Clone)]
pub struct Background {
    reactive: bool,
    tracks: Vec<Option<ReactiveTrack>>,
    states: Vec<AgentState>,
}

fn is_idm_controlled(kind: AgentKind) -> bool {
    matches!(kind, AgentKind::Vehicle | AgentKind::Bicycle)
}

fn logged_path(rec: &AgentRecord) -> ReferencePath {
    let mut pts: Vec<[f64; 2]> = Vec::new();
    for st in &rec.logged_states {
        let p = [st.x, st.y];
        let far = pts
            .last()
            .is_none_or(|q| (p[0] - q[0]).hypot(p[1] - q[1]) >= VERTEX_SPACING);
        if far {
            pts.push(p);
        }
    }
    let last_state = rec.logged_states[rec.logged_states.len() - 1];
    let heading = if pts.len() >= 2 {
        let (a, b) = (pts[pts.len() - 2], pts[pts.len() - 1]);
        (b[1] - a[1]).atan2(b[0] - a[0])
    } else {
        last_state.theta
    };
    let end = pts[pts.len() - 1];
    pts.push([
        end[0] + PATH_EXTENSION * heading.cos(),
        end[1] + PATH_EXTENSION * heading.sin(),
    ]);
    ReferencePath::new(pts).expect("logged path has distinct vertices")
}

impl Background {
    pub fn new(scenario: &Scenario, reactive: bool) -> Self {
        let states: Vec<AgentState> = scenario.agents.iter().map(|a| a.state_at(0.0)).collect();
        let tracks = scenario
            .agents
            .iter()
            .zip(&states)
            .map(|(rec, st)| {
                (reactive && is_idm_controlled(rec.kind)).then(|| {
                    let path = logged_path(rec);
                    let (s, _) = path.project(st.x, st.y);
                    ReactiveTrack { path, s }
                })
            })
            .collect();
        Self {
            reactive,
            tracks,
            states,
        }
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    pub fn snapshots(&self, scenario: &Scenario) -> Vec<AgentSnapshot> {
        scenario
            .agents
            .iter()
            .zip(&self.states)
            .map(|(rec, st)| AgentSnapshot {
                id: rec.id.clone(),
                kind: rec.kind,
                pose: st.pose(),
                speed: st.speed,
                width: rec.width,
                length: rec.length,
            })
            .collect()
    }

    /// Moves every agent from `t` to `t + dt`. `ego_box` is the ego footprint
    /// at `t + dt`.
    pub fn step(
        &mut self,
        scenario: &Scenario,
        t: f64,
        dt: f64,
        ego_box: &OrientedBox,
        cfg: &BackgroundConfig,
    ) {
        let t_next = t + dt;
        if !self.reactive {
            for (st, rec) in self.states.iter_mut().zip(&scenario.agents) {
                *st = rec.state_at(t_next);
            }
            return;
        }
        let old_boxes: Vec<OrientedBox> = scenario
            .agents
            .iter()
            .zip(&self.states)
            .map(|(rec, st)| rec.box_at(st))
            .collect();
        let mut new_states = self.states.clone();
        let mut new_boxes = old_boxes.clone();
        for i in 0..scenario.agents.len() {
            let rec = &scenario.agents[i];
            let Some(track) = &self.tracks[i] else {
                new_states[i] = rec.state_at(t_next);
                new_boxes[i] = rec.box_at(&new_states[i]);
                continue;
            };
            let current = self.states[i];
            let mut params = cfg.idm.clone();
            params.v0 = rec.state_at(t).speed.max(0.0);
            let gap = self.leader_gap(scenario, i, track, &old_boxes, ego_box, &params);
            let accel = match gap {
                Some(g) if g <= 0.0 => -params.max_brake,
                Some(g) => idm_accel(current.speed, g, &params).unwrap_or(-params.max_brake),
                None => idm_accel(current.speed, f64::INFINITY, &params).unwrap_or(0.0),
            };
            let (mut ds, mut v) = advance(current.speed, accel, dt);
            if let Some(g) = gap {
                let room = (g + params.min_gap_floor).max(0.0);
                if ds > room {
                    ds = room;
                    v = 0.0;
                }
            }
            let s_new = track.s + ds;
            let proposal = self.pose_on_track(track, s_new, t_next, v);
            let new_box = rec.box_at(&proposal);
            // never move into something that was not already touching
            let blocked = (0..scenario.agents.len()).filter(|&j| j != i).any(|j| {
                let touching_now = boxes_collide(&old_boxes[i], &old_boxes[j]);
                !touching_now
                    && (boxes_collide(&new_box, &old_boxes[j])
                        || boxes_collide(&new_box, &new_boxes[j]))
            }) || (!boxes_collide(&old_boxes[i], ego_box) && boxes_collide(&new_box, ego_box));
            if blocked {
                new_states[i] = AgentState {
                    t: t_next,
                    speed: 0.0,
                    ..current
                };
            } else {
                new_states[i] = proposal;
                new_boxes[i] = new_box;
                if let Some(tr) = &mut self.tracks[i] {
                    tr.s = s_new;
                }
            }
        }
        self.states = new_states;
    }

    fn pose_on_track(&self, track: &ReactiveTrack, s: f64, t: f64, speed: f64) -> AgentState {
        let p = track.path.point_at(s);
        AgentState {
            t,
            x: p[0],
            y: p[1],
            theta: normalize_angle(track.path.heading_at(s.min(track.path.length()))),
            speed,
        }
    }

    /// Bumper gap to the nearest agent or ego ahead on the agent's own path,
    /// less the IDM gap floor.
    fn leader_gap(
        &self,
        scenario: &Scenario,
        i: usize,
        track: &ReactiveTrack,
        boxes: &[OrientedBox],
        ego_box: &OrientedBox,
        params: &IdmParams,
    ) -> Option<f64> {
        let me = &scenario.agents[i];
        let along = |b: &OrientedBox, s: f64| {
            let rel = normalize_angle(b.center.theta - track.path.heading_at(s));
            0.5 * (b.length * rel.cos().abs() + b.width * rel.sin().abs())
        };
        let mut best: Option<f64> = None;
        let others = boxes
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, b)| b)
            .chain(std::iter::once(ego_box));
        for b in others {
            let (s, d) = track.path.project(b.center.x, b.center.y);
            let ds = s - track.s;
            if ds <= 0.0 || ds > LOOKAHEAD || d.abs() > params.half_lane_width {
                continue;
            }
            let gap = ds - 0.5 * me.length - along(b, s) - params.min_gap_floor;
            if best.is_none_or(|g| gap < g) {
                best = Some(gap);
            }
        }
        best
    }
}
