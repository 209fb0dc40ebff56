//! Synthetic score tables and a selection oracle for worst-K.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dualad_core::scenario::{select_worst_k, SelectionMetric};

/// `n` scores in `[0, 100]` rounded to one decimal so that ties are common,
/// listed in shuffled id order.
pub fn score_table(n: usize, seed: u64) -> Vec<(String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(String, f64)> = (0..n)
        .map(|i| {
            let score = if rng.gen_bool(0.1) {
                0.0
            } else {
                (rng.gen_range(0.0..=100.0_f64) * 10.0).round() / 10.0
            };
            (format!("scenario_{i:05}"), score)
        })
        .collect();
    for i in (1..rows.len()).rev() {
        rows.swap(i, rng.gen_range(0..=i));
    }
    rows
}

/// Repeatedly takes the lowest remaining score, smallest id first.
pub fn oracle_worst_k(rows: &[(String, f64)], k: usize) -> Vec<String> {
    let mut left: Vec<&(String, f64)> = rows.iter().collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = 0;
        for (i, r) in left.iter().enumerate() {
            let b = left[best];
            if r.1 < b.1 || (r.1 == b.1 && r.0 < b.0) {
                best = i;
            }
        }
        out.push(left.remove(best).0.clone());
    }
    out
}

/// Compares `select_worst_k` with the oracle on a 2000-row table.
pub fn check_worst_k(k: usize, seed: u64) -> Result<(), String> {
    let rows = score_table(2000, seed);
    let set = select_worst_k(&rows, k, SelectionMetric::RCls).map_err(|e| e.to_string())?;
    let expected = oracle_worst_k(&rows, k);
    if set.scenario_ids != expected {
        return Err(format!("k={k}: selection differs from the oracle"));
    }
    if set.k != k || set.name != format!("worst-{k}-r_cls") {
        return Err(format!("k={k}: unexpected set header {} / {}", set.name, set.k));
    }
    Ok(())
}
