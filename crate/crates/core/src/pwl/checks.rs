//! Sampled property checks over whole grids.
//!
//! Every sample draws from its own ChaCha stream keyed by `(seed, index)`, so the
//! sequential and parallel paths produce identical statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{is_eso, min_pwl_oracle_with, pwl_value, resolution_slack, FillingState, PwlGrid};
use crate::par::{self, Exec};
use crate::Result;

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Grids with log-uniform `ȳ ∈ [0.01, 20]` and `Λ ∈ 1..=max_segments`.
pub fn random_grids(count: usize, max_segments: usize, seed: u64) -> Vec<PwlGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let y_max = 10f64.powf(rng.random_range(-2.0..=20f64.log10()));
            let n = rng.random_range(1..=max_segments.max(1));
            PwlGrid::new(y_max, n).expect("sampled grid is valid")
        })
        .collect()
}

/// `y` uniform on `(0, ȳ]`.
fn sample_y(rng: &mut ChaCha8Rng, grid: &PwlGrid) -> f64 {
    let u: f64 = rng.random();
    (1.0 - u) * grid.y_max()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityStats {
    /// max |pwl_value(eso_fill(y)) − y² − eso_error(y)|
    pub max_residual: f64,
    /// max eso_error(y) − h²/4 (should be ≤ 0)
    pub max_bound_excess: f64,
    /// max |eso_error(midpoint) − h²/4| over all segment midpoints
    pub midpoint_gap: f64,
}

pub fn check_eso_identity(grid: &PwlGrid, samples: usize, seed: u64, exec: Exec) -> Result<IdentityStats> {
    let bound = grid.max_eso_error();
    let per_sample = par::map_range(exec, samples, |i| -> Result<(f64, f64)> {
        let y = sample_y(&mut rng_for(seed, i), grid);
        let err = grid.eso_error(y)?;
        let direct = pwl_value(&grid.eso_fill(y)?) - y * y;
        Ok(((direct - err).abs(), err - bound))
    });
    let mut stats = IdentityStats {
        max_residual: 0.0,
        max_bound_excess: f64::NEG_INFINITY,
        midpoint_gap: 0.0,
    };
    for r in per_sample {
        let (res, excess) = r?;
        stats.max_residual = stats.max_residual.max(res);
        stats.max_bound_excess = stats.max_bound_excess.max(excess);
    }
    let h = grid.seg_width();
    for m in 0..grid.num_segments() {
        let mid = (m as f64 + 0.5) * h;
        stats.midpoint_gap = stats.midpoint_gap.max((grid.eso_error(mid)? - bound).abs());
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverApproxStats {
    /// min over samples of pwl_value − y²
    pub min_margin: f64,
    /// min over samples of pwl_value − pwl_value(eso_fill(y))
    pub min_margin_vs_ordered: f64,
    /// samples that happened to be ordered
    pub ordered: usize,
}

/// Draws fillings with every `Δ_λ` uniform on `[0, h]`.
pub fn check_over_approximation(grid: &PwlGrid, samples: usize, seed: u64, exec: Exec) -> Result<OverApproxStats> {
    let h = grid.seg_width();
    let per_sample = par::map_range(exec, samples, |i| -> Result<(f64, f64, bool)> {
        let mut rng = rng_for(seed, i);
        let deltas: Vec<f64> = (0..grid.num_segments()).map(|_| rng.random::<f64>() * h).collect();
        let st = FillingState::new(*grid, deltas)?;
        let y = st.total().min(grid.y_max());
        let f = pwl_value(&st);
        let ordered = pwl_value(&grid.eso_fill(y)?);
        Ok((f - y * y, f - ordered, is_eso(&st, 0.0)))
    });
    let mut stats = OverApproxStats {
        min_margin: f64::INFINITY,
        min_margin_vs_ordered: f64::INFINITY,
        ordered: 0,
    };
    for r in per_sample {
        let (m, mo, ord) = r?;
        stats.min_margin = stats.min_margin.min(m);
        stats.min_margin_vs_ordered = stats.min_margin_vs_ordered.min(mo);
        stats.ordered += ord as usize;
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleStats {
    /// max |oracle − pwl_value(eso_fill(y))|
    pub max_gap: f64,
    /// min oracle − (y² − slack)
    pub min_lower_margin: f64,
    pub slack: f64,
}

/// Compares the exhaustive oracle with the ordered filling at `count` random `y`.
pub fn check_oracle_agreement(
    grid: &PwlGrid,
    count: usize,
    steps_per_segment: usize,
    seed: u64,
    exec: Exec,
) -> Result<OracleStats> {
    let slack = resolution_slack(grid, steps_per_segment);
    let per_sample = par::map_range(exec, count, |i| -> Result<(f64, f64)> {
        let y = sample_y(&mut rng_for(seed, i), grid);
        let oracle = min_pwl_oracle_with(Exec::Sequential, grid, y, steps_per_segment)?;
        let ordered = pwl_value(&grid.eso_fill(y)?);
        Ok(((oracle - ordered).abs(), oracle - (y * y - slack)))
    });
    let mut stats = OracleStats { max_gap: 0.0, min_lower_margin: f64::INFINITY, slack };
    for r in per_sample {
        let (gap, lower) = r?;
        stats.max_gap = stats.max_gap.max(gap);
        stats.min_lower_margin = stats.min_lower_margin.min(lower);
    }
    Ok(stats)
}
