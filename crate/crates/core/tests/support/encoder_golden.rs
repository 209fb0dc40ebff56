//! Golden-file and branch-coverage checks for the text encoder, shared by the
//! encoder tests and the acceptance suite.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use dualad_core::encoder::{
    describe_lateral, describe_longitudinal, describe_orientation, encode_scene, lateral_case,
    longitudinal_case, orientation_case, render_block, EncoderConfig, LateralCase,
    LongitudinalCase, OrientationCase, ORIENTATION_PHRASES,
};
use dualad_core::{AgentKind, AgentSnapshot, CartesianPose, EgoSnapshot, Frame, ReferencePath};

#[derive(Deserialize)]
struct BlockCase {
    name: String,
    id: String,
    s: f64,
    d: f64,
    width: f64,
    length: f64,
    speed: f64,
    o: f64,
}

#[derive(Deserialize)]
struct SceneAgent {
    id: String,
    width: f64,
    length: f64,
    pose: [f64; 3],
    speed: f64,
}

#[derive(Deserialize)]
struct SceneCase {
    name: String,
    path: Vec<[f64; 2]>,
    ego: [f64; 4],
    agents: Vec<SceneAgent>,
}

#[derive(Deserialize)]
struct Cases {
    blocks: Vec<BlockCase>,
    scenes: Vec<SceneCase>,
}

fn render(blocks: &[String]) -> String {
    if blocks.is_empty() {
        String::new()
    } else {
        blocks.join("\n\n") + "\n"
    }
}

/// Renders every case in `dir/cases.json` and compares it byte for byte with
/// `dir/<name>.txt`. Returns the number of cases checked.
pub fn check_goldens(dir: &Path) -> Result<usize, String> {
    let cases: Cases = serde_json::from_str(
        &std::fs::read_to_string(dir.join("cases.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let cfg = EncoderConfig::default();
    let mut rendered = Vec::new();
    for b in &cases.blocks {
        let text = render_block(&b.id, b.s, b.d, b.width, b.length, b.speed, b.o, &cfg);
        rendered.push((b.name.clone(), render(&[text])));
    }
    for sc in &cases.scenes {
        let path = ReferencePath::new(sc.path.clone()).map_err(|e| e.to_string())?;
        let [x, y, theta, v] = sc.ego;
        let frame = Frame {
            t: 0.0,
            ego: EgoSnapshot::new(CartesianPose::new(x, y, theta), v),
            agents: sc
                .agents
                .iter()
                .map(|a| AgentSnapshot {
                    id: a.id.clone(),
                    kind: AgentKind::Vehicle,
                    pose: CartesianPose::new(a.pose[0], a.pose[1], a.pose[2]),
                    speed: a.speed,
                    width: a.width,
                    length: a.length,
                })
                .collect(),
        };
        let blocks = encode_scene(&frame, &path, &cfg).map_err(|e| e.to_string())?;
        let texts: Vec<String> = blocks.into_iter().map(|b| b.text).collect();
        rendered.push((sc.name.clone(), render(&texts)));
    }
    for (name, text) in &rendered {
        let golden = std::fs::read_to_string(dir.join(format!("{name}.txt")))
            .map_err(|e| format!("{name}: {e}"))?;
        if &golden != text {
            return Err(format!("{name}: expected\n{golden}\ngot\n{text}"));
        }
    }
    Ok(rendered.len())
}

fn pick(rng: &mut ChaCha8Rng, specials: &[f64], lo: f64, hi: f64) -> f64 {
    if rng.gen_bool(0.3) {
        specials[rng.gen_range(0..specials.len())]
    } else {
        rng.gen_range(lo..hi)
    }
}

fn nudge(x: f64, up: bool) -> f64 {
    if up {
        f64::from_bits(x.to_bits() + 1)
    } else {
        f64::from_bits(x.to_bits() - 1)
    }
}

/// Draws `n` random (s, d, o, speed) inputs, biased toward the table
/// boundaries, and checks that exactly one row of each case table fires.
pub fn fuzz_case_tables(n: usize, seed: u64) -> Result<(), String> {
    let cfg = EncoderConfig::default();
    let (a, b, g) = (cfg.alpha, cfg.beta, cfg.gamma);
    let pi = std::f64::consts::PI;
    let sd_specials = [
        -1.0,
        1.0,
        nudge(1.0, true),
        nudge(1.0, false),
        -nudge(1.0, true),
        -nudge(1.0, false),
        0.0,
        -0.0,
        g,
        -g,
        0.04,
        -0.05,
    ];
    let o_specials = [
        a,
        -a,
        b,
        -b,
        -pi,
        nudge(a, true),
        nudge(a, false),
        -nudge(a, true),
        nudge(b, true),
        nudge(b, false),
        -nudge(b, false),
        0.0,
    ];
    let v_specials = [0.0, 0.01, nudge(0.01, false), 0.0099, 15.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        let s = pick(&mut rng, &sd_specials, -60.0, 60.0);
        let d = pick(&mut rng, &sd_specials, -60.0, 60.0);
        let o = pick(&mut rng, &o_specials, -pi, pi);
        let v = pick(&mut rng, &v_specials, 0.0, 20.0);

        let lon_rows = [s > 1.0, s < -1.0, (-1.0..=1.0).contains(&s)];
        if lon_rows.iter().filter(|&&r| r).count() != 1 {
            return Err(format!("longitudinal rows overlap or miss at s = {s:e}"));
        }
        let lon = longitudinal_case(s, cfg.lon_lat_threshold);
        let expect = [
            LongitudinalCase::Ahead,
            LongitudinalCase::Behind,
            LongitudinalCase::Parallel,
        ][lon_rows.iter().position(|&r| r).unwrap()];
        let text = describe_longitudinal(s);
        let shapes = [
            text.ends_with(" meters ahead"),
            text.ends_with(" meters behind"),
            text == "parallel with the ego",
        ];
        if lon != expect || shapes.iter().filter(|&&x| x).count() != 1 {
            return Err(format!("longitudinal case wrong at s = {s:e}: {text}"));
        }

        let lat_rows = [d > 1.0, d < -1.0, (-1.0..=1.0).contains(&d)];
        if lat_rows.iter().filter(|&&r| r).count() != 1 {
            return Err(format!("lateral rows overlap or miss at d = {d:e}"));
        }
        let lat = lateral_case(d, cfg.lon_lat_threshold);
        let expect = [LateralCase::Left, LateralCase::Right, LateralCase::InLine]
            [lat_rows.iter().position(|&r| r).unwrap()];
        let text = describe_lateral(d);
        let shapes = [
            text.ends_with(" meters left"),
            text.ends_with(" meters right"),
            text == "directly in line with the ego",
        ];
        if lat != expect || shapes.iter().filter(|&&x| x).count() != 1 {
            return Err(format!("lateral case wrong at d = {d:e}: {text}"));
        }

        let same = -a <= o && o <= a;
        let opposite = o <= -b || o >= b;
        let towards = (d >= g && -b <= o && o <= -a) || (d <= -g && a <= o && o <= b);
        let rows = [same, opposite, towards, !(same || opposite || towards)];
        let first = rows.iter().position(|&r| r).unwrap();
        let at_boundary = o.abs() == a || o.abs() == b;
        if rows.iter().filter(|&&r| r).count() > 1 && !at_boundary {
            return Err(format!("orientation rows overlap off the boundary: o = {o:e}, d = {d:e}"));
        }
        let case = orientation_case(o, d, &cfg);
        let expect = [
            OrientationCase::Same,
            OrientationCase::Opposite,
            OrientationCase::Towards,
            OrientationCase::Away,
        ][first];
        let text = describe_orientation(o, d, v, &cfg);
        let hits = ORIENTATION_PHRASES.iter().filter(|p| text.ends_with(*p)).count();
        let verb_ok = text.starts_with(if v >= cfg.moving_speed_threshold {
            "moving "
        } else {
            "facing "
        });
        if case != expect || hits != 1 || !verb_ok {
            return Err(format!("orientation wrong at o = {o:e}, d = {d:e}, v = {v:e}: {text}"));
        }
    }
    Ok(())
}
