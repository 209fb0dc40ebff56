//! Frenet round trip over random in-corridor poses on three path shapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dualad_core::geom::{normalize_angle, to_cartesian, to_frenet};
use dualad_core::{FrenetPose, ReferencePath};

pub fn arc(center: [f64; 2], radius: f64, from: f64, to: f64, n: usize) -> Vec<[f64; 2]> {
    (0..=n)
        .map(|i| {
            let a = from + (to - from) * i as f64 / n as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect()
}

/// Straight, circular and S-shaped roads with the corridor half-width each
/// supports (well inside the turning radius).
pub fn test_paths() -> Vec<(&'static str, ReferencePath, f64)> {
    use std::f64::consts::PI;
    let straight = ReferencePath::straight([-20.0, 5.0], 0.3, 300.0).unwrap();
    let circle = ReferencePath::new(arc([0.0, 0.0], 30.0, -PI / 2.0, PI, 240)).unwrap();
    let mut s_curve = arc([0.0, 40.0], 40.0, -PI / 2.0, 0.0, 120);
    let second = arc([80.0, 40.0], 40.0, PI, PI / 2.0, 120);
    s_curve.extend(second.into_iter().skip(1));
    let s_curve = ReferencePath::new(s_curve).unwrap();
    vec![
        ("straight", straight, 8.0),
        ("circle", circle, 8.0),
        ("s_curve", s_curve, 8.0),
    ]
}

pub struct RoundTrip {
    pub samples: usize,
    pub max_position_error: f64,
    pub max_heading_error: f64,
}

/// Draws `per_path` Frenet poses per path, maps them to Cartesian and back,
/// and reports the worst deviation from the original.
pub fn frenet_round_trip(per_path: usize, seed: u64) -> RoundTrip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = RoundTrip {
        samples: 0,
        max_position_error: 0.0,
        max_heading_error: 0.0,
    };
    for (_, path, corridor) in test_paths() {
        let len = path.length();
        for _ in 0..per_path {
            let ego_s = rng.gen_range(0.0..len);
            let s_abs = rng.gen_range(0.0..len);
            let fp = FrenetPose {
                s: s_abs - ego_s,
                d: rng.gen_range(-corridor..corridor),
                theta: rng.gen_range(-3.0..3.0),
            };
            let cart = to_cartesian(&path, &fp, ego_s).unwrap();
            let back = to_frenet(&path, &cart, ego_s).unwrap();
            let pos = (back.s - fp.s).abs().max((back.d - fp.d).abs());
            let head = normalize_angle(back.theta - fp.theta).abs();
            out.max_position_error = out.max_position_error.max(pos);
            out.max_heading_error = out.max_heading_error.max(head);
            out.samples += 1;
        }
    }
    out
}
