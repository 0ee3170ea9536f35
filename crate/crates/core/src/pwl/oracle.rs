//! Exhaustive search over discretized fillings.
//!
//! Each segment takes one of `steps + 1` lattice values `k·h/steps`. Every
//! combination whose total lies within one lattice step of `y` is scored and the
//! smallest PWL value returned. Scores are accumulated as integers
//! `Σ (2λ − 1)·k_λ`, so the search shares no arithmetic with the ordered filling
//! it is used to check.

use crate::par::{self, Exec};
use crate::{Error, Result};

use super::PwlGrid;

/// Largest grid the oracle accepts.
pub const MAX_ORACLE_SEGMENTS: usize = 6;

/// Worst-case gap between the oracle minimum and the exact minimum for `y`:
/// a total off by one step `h/steps` moves the value by at most the largest
/// slope times that step, and the largest slope is below `2ȳ`.
pub fn resolution_slack(grid: &PwlGrid, steps_per_segment: usize) -> f64 {
    2.0 * grid.y_max() * grid.seg_width() / steps_per_segment as f64
}

pub fn min_pwl_oracle(grid: &PwlGrid, y: f64, steps_per_segment: usize) -> Result<f64> {
    min_pwl_oracle_with(Exec::default(), grid, y, steps_per_segment)
}

/// [`min_pwl_oracle`] with an explicit execution strategy; the first segment's
/// lattice value is the unit of parallel work.
pub fn min_pwl_oracle_with(exec: Exec, grid: &PwlGrid, y: f64, steps_per_segment: usize) -> Result<f64> {
    let n = grid.num_segments();
    if n > MAX_ORACLE_SEGMENTS {
        return Err(Error::Argument(format!(
            "oracle limited to {MAX_ORACLE_SEGMENTS} segments, grid has {n}"
        )));
    }
    if steps_per_segment < 2 {
        return Err(Error::Argument("oracle needs at least 2 steps per segment".into()));
    }
    if !(0.0..=grid.y_max()).contains(&y) {
        return Err(Error::Domain { value: y, lower: 0.0, upper: grid.y_max() });
    }
    let steps = steps_per_segment as i64;
    if grid.seg_width() == 0.0 {
        return Ok(0.0);
    }
    let unit = grid.seg_width() / steps_per_segment as f64;
    let target = y / unit;
    // integer totals within one step of the target
    let lo = (target - 1.0).ceil().max(0.0) as i64;
    let hi = (target + 1.0).floor() as i64;

    let best = par::map_range(exec, steps as usize + 1, |k1| {
        let mut best = i64::MAX;
        search(1, n, steps, k1 as i64, k1 as i64, lo, hi, &mut best);
        best
    })
    .into_iter()
    .min()
    .unwrap_or(i64::MAX);

    if best == i64::MAX {
        return Err(Error::Argument(format!("no lattice filling within one step of {y}")));
    }
    Ok(best as f64 * unit * grid.seg_width())
}

/// Depth-first enumeration of segments `idx..n` given the running total and score.
#[allow(clippy::too_many_arguments)]
fn search(idx: usize, n: usize, steps: i64, total: i64, score: i64, lo: i64, hi: i64, best: &mut i64) {
    if idx == n {
        if (lo..=hi).contains(&total) && score < *best {
            *best = score;
        }
        return;
    }
    let remaining = (n - idx) as i64;
    if total > hi || total + remaining * steps < lo {
        return;
    }
    let weight = 2 * idx as i64 + 1;
    for k in 0..=steps {
        let t = total + k;
        if t > hi {
            break;
        }
        search(idx + 1, n, steps, t, score + weight * k, lo, hi, best);
    }
}
