use crate::error::{Error, Result};
use crate::grid::ScalarGridField;
use crate::numerics::median;

/// Levels spaced over `(0, 1)` that set the typical window population.
const REFERENCE_LEVELS: usize = 64;
/// Candidate levels per requested level.
const OVERSAMPLE: usize = 9;
const BLACKLIST_FACTOR: f64 = 10.0;
/// A band must span this many typical one-cell value increments.
const MIN_BAND_INCREMENTS: f64 = 2.5;

fn window_count(values: &[f64], t: f64, delta: f64) -> usize {
    values.iter().filter(|&&v| (v - t).abs() < delta).count()
}

/// Midpoints of `count` equal sub-intervals of `(lo, hi)`.
pub fn band_levels(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (i as f64 + 0.5) * (hi - lo) / count as f64)
        .collect()
}

/// Median of `|u_a - u_b|` over face-adjacent cells straddling `t`, or
/// `None` when `t` is not crossed.
fn cell_increment(u: &ScalarGridField, t: f64) -> Option<f64> {
    let g = u.grid();
    let mut inc = Vec::new();
    for k in 0..g.len() {
        let idx = g.multi(k);
        let x = u.values()[k];
        for a in 0..g.dim() {
            if let Some(n) = g.offset(&idx, a, 1) {
                let y = u.at(&n);
                if (x > t) != (y > t) {
                    inc.push((x - y).abs());
                }
            }
        }
    }
    (!inc.is_empty()).then(|| median(&inc))
}

/// Picks `count` regular levels in `(lo, hi)`.
///
/// A level is blacklisted when the number of cells with `|u - t| < h` is
/// more than ten times the median of that count over reference levels
/// spread across `(0, 1)`: such a window catches a plateau of `u`. The whole
/// band is unresolved, and every level in it rejected, when it is narrower
/// than 2.5 typical one-cell increments of `u` at its middle level; its
/// levels would then not yield distinguishable discrete level sets. Each
/// sub-interval of the band contributes its non-blacklisted candidate closest
/// to its midpoint; sub-intervals without one borrow from the nearest valid
/// candidate not yet used.
pub fn select_levels(u: &ScalarGridField, band: (f64, f64), count: usize) -> Result<Vec<f64>> {
    let (lo, hi) = band;
    if !(0.0 <= lo && lo < hi && hi < 1.0 + 1e-15) || count == 0 {
        return Err(Error::invalid(format!("bad level band ({lo}, {hi}) with count {count}")));
    }
    let mid = 0.5 * (lo + hi);
    match cell_increment(u, mid) {
        Some(inc) if hi - lo >= MIN_BAND_INCREMENTS * inc => {}
        _ => return Err(Error::NoRegularLevel { lo, hi }),
    }
    let values = u.values();
    let delta = u.grid().spacing();
    let reference: Vec<f64> = band_levels(0.0, 1.0, REFERENCE_LEVELS)
        .iter()
        .map(|&t| window_count(values, t, delta) as f64)
        .collect();
    let baseline = median(&reference);
    let candidates = band_levels(lo, hi, count * OVERSAMPLE);
    let valid: Vec<bool> = candidates
        .iter()
        .map(|&t| {
            let c = window_count(values, t, delta) as f64;
            c <= BLACKLIST_FACTOR * baseline
        })
        .collect();
    if !valid.iter().any(|&v| v) {
        return Err(Error::NoRegularLevel { lo, hi });
    }
    let mut used = vec![false; candidates.len()];
    let mut out = Vec::with_capacity(count);
    for (i, mid) in band_levels(lo, hi, count).into_iter().enumerate() {
        let own = (i * OVERSAMPLE..(i + 1) * OVERSAMPLE).filter(|&k| valid[k] && !used[k]);
        let pick = own
            .min_by(|&a, &b| (candidates[a] - mid).abs().total_cmp(&(candidates[b] - mid).abs()))
            .or_else(|| {
                (0..candidates.len())
                    .filter(|&k| valid[k] && !used[k])
                    .min_by(|&a, &b| (candidates[a] - mid).abs().total_cmp(&(candidates[b] - mid).abs()))
            });
        match pick {
            Some(k) => {
                used[k] = true;
                out.push(candidates[k]);
            }
            None => break,
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}
