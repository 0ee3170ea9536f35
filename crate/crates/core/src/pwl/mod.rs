//! Piecewise-linear approximation of `y²` on `[0, ȳ]`.
//!
//! The interval is split into `Λ` equal segments of width `h = ȳ/Λ`. Segment
//! `λ` (1-based) carries slope `(2λ − 1)·h`, so a filling `Δ_1..Δ_Λ` with
//! `0 ≤ Δ_λ ≤ h` approximates `y² ≈ Σ slope_λ·Δ_λ` where `y = Σ Δ_λ`.
//!
//! Because slopes increase with `λ`, filling segments strictly left to right
//! (the *ordered* or ESO filling) gives the smallest value for a given `y`, and
//! that value never falls below `y²`.

mod checks;
mod oracle;

pub use checks::{
    check_eso_identity, check_oracle_agreement, check_over_approximation, random_grids,
    IdentityStats, OracleStats, OverApproxStats,
};
pub use oracle::{min_pwl_oracle, min_pwl_oracle_with, resolution_slack, MAX_ORACLE_SEGMENTS};

use crate::{Error, Result};

/// Relative slack applied when validating hand-built or computed fillings.
const FILL_TOL_REL: f64 = 1e-9;

/// Segment geometry for one linearized quadratic term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwlGrid {
    y_max: f64,
    num_segments: usize,
    seg_width: f64,
}

impl PwlGrid {
    pub fn new(y_max: f64, num_segments: usize) -> Result<Self> {
        if !y_max.is_finite() || y_max < 0.0 {
            return Err(Error::Argument(format!("grid bound must be finite and nonnegative, got {y_max}")));
        }
        if num_segments == 0 {
            return Err(Error::Argument("grid needs at least one segment".into()));
        }
        Ok(PwlGrid { y_max, num_segments, seg_width: y_max / num_segments as f64 })
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn num_segments(&self) -> usize {
        self.num_segments
    }

    pub fn seg_width(&self) -> f64 {
        self.seg_width
    }

    /// Slope of segment `lambda` (1-based): `(2λ − 1)·h`.
    pub fn segment_slope(&self, lambda: usize) -> Result<f64> {
        if lambda == 0 || lambda > self.num_segments {
            return Err(Error::Argument(format!(
                "segment index {lambda} outside 1..={}",
                self.num_segments
            )));
        }
        Ok(self.slope_unchecked(lambda))
    }

    /// All slopes in segment order.
    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.num_segments).map(|l| self.slope_unchecked(l))
    }

    fn slope_unchecked(&self, lambda: usize) -> f64 {
        (2 * lambda - 1) as f64 * self.seg_width
    }

    fn check_domain(&self, y: f64) -> Result<()> {
        if !(0.0..=self.y_max).contains(&y) {
            return Err(Error::Domain { value: y, lower: 0.0, upper: self.y_max });
        }
        Ok(())
    }

    /// Index of the last segment an ordered filling of `y` touches; 1 for `y = 0`.
    pub fn lambda_up(&self, y: f64) -> Result<usize> {
        self.check_domain(y)?;
        Ok(self.lambda_up_unchecked(y))
    }

    fn lambda_up_unchecked(&self, y: f64) -> usize {
        if y == 0.0 || self.seg_width == 0.0 {
            return 1;
        }
        let raw = (y / self.seg_width).ceil();
        (raw as usize).clamp(1, self.num_segments)
    }

    /// The ordered filling of `y`: full segments up to `λ_up − 1`, the remainder
    /// in `λ_up`, zeros after.
    pub fn eso_fill(&self, y: f64) -> Result<FillingState> {
        self.check_domain(y)?;
        let up = self.lambda_up_unchecked(y);
        let h = self.seg_width;
        let mut deltas = vec![0.0; self.num_segments];
        for d in deltas.iter_mut().take(up - 1) {
            *d = h;
        }
        deltas[up - 1] = (y - (up - 1) as f64 * h).clamp(0.0, h);
        Ok(FillingState { grid: *self, deltas })
    }

    /// Closed-form absolute error of the ordered filling:
    /// `(λ_up·h − y)·(y − (λ_up − 1)·h)`.
    pub fn eso_error(&self, y: f64) -> Result<f64> {
        if !(y > 0.0 && y <= self.y_max) {
            return Err(Error::Domain { value: y, lower: 0.0, upper: self.y_max });
        }
        let up = self.lambda_up_unchecked(y) as f64;
        let h = self.seg_width;
        Ok(((up * h - y) * (y - (up - 1.0) * h)).max(0.0))
    }

    /// Worst-case absolute error of an ordered filling, reached at segment midpoints.
    pub fn max_eso_error(&self) -> f64 {
        self.seg_width * self.seg_width / 4.0
    }

    /// Default tolerance for [`is_eso`]: `1e-6·h`.
    pub fn default_eso_tol(&self) -> f64 {
        1e-6 * self.seg_width
    }
}

/// Segment values `Δ_1..Δ_Λ` attached to their grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FillingState {
    grid: PwlGrid,
    deltas: Vec<f64>,
}

impl FillingState {
    /// Validates `0 ≤ Δ_λ ≤ h` and `Σ Δ ≤ ȳ`. Violations below a relative
    /// 1e-9 slack are clamped away.
    pub fn new(grid: PwlGrid, deltas: Vec<f64>) -> Result<Self> {
        let tol = FILL_TOL_REL * grid.seg_width.max(f64::MIN_POSITIVE);
        Self::with_tolerance(grid, deltas, tol)
    }

    /// Like [`FillingState::new`] but with an absolute slack, for values read
    /// back from a solver.
    pub fn with_tolerance(grid: PwlGrid, mut deltas: Vec<f64>, tol: f64) -> Result<Self> {
        if deltas.len() != grid.num_segments {
            return Err(Error::Argument(format!(
                "filling has {} segments, grid has {}",
                deltas.len(),
                grid.num_segments
            )));
        }
        let h = grid.seg_width;
        for (i, d) in deltas.iter_mut().enumerate() {
            if !d.is_finite() || *d < -tol || *d > h + tol {
                return Err(Error::Argument(format!(
                    "segment {} value {d} outside [0, {h}]",
                    i + 1
                )));
            }
            *d = d.clamp(0.0, h);
        }
        let total: f64 = deltas.iter().sum();
        if total > grid.y_max + tol * grid.num_segments as f64 {
            return Err(Error::Argument(format!("filling total {total} exceeds {}", grid.y_max)));
        }
        Ok(FillingState { grid, deltas })
    }

    pub fn grid(&self) -> &PwlGrid {
        &self.grid
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// `y = Σ Δ_λ`.
    pub fn total(&self) -> f64 {
        self.deltas.iter().sum()
    }
}

/// Evidence that a filling is not ordered: segment `deficient_index` is short
/// while the later `compensating_index` holds more than the ordered filling of
/// the same total would put there. Indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsoWitness {
    pub deficient_index: usize,
    pub compensating_index: usize,
    pub remainder: f64,
}

/// PWL value `Σ slope_λ·Δ_λ`.
pub fn pwl_value(state: &FillingState) -> f64 {
    state.grid.slopes().zip(&state.deltas).map(|(s, d)| s * d).sum()
}

/// `|approx − y²| / y² × 100`.
pub fn relative_error(approx: f64, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Err(Error::UndefinedError);
    }
    let sq = y * y;
    Ok((approx - sq).abs() / sq * 100.0)
}

/// True iff some split index `m` has every earlier segment within `tol` of full,
/// segment `m` anywhere in `[0, h]`, and every later segment within `tol` of zero.
pub fn is_eso(state: &FillingState, tol: f64) -> bool {
    let h = state.grid.seg_width;
    let d = &state.deltas;
    let n = d.len();
    // full_prefix[m]: segments 0..m are all (nearly) full
    let mut full_prefix = vec![true; n + 1];
    for i in 0..n {
        full_prefix[i + 1] = full_prefix[i] && d[i] >= h - tol;
    }
    // empty_suffix[m]: segments m..n are all (nearly) empty
    let mut empty_suffix = vec![true; n + 1];
    for i in (0..n).rev() {
        empty_suffix[i] = empty_suffix[i + 1] && d[i] <= tol;
    }
    (0..n).any(|m| full_prefix[m] && empty_suffix[m + 1])
}

/// Locates a short segment followed by an over-filled one, or `None` when the
/// filling is exactly ordered (`is_eso(state, 0.0)`).
pub fn compensation_witness(state: &FillingState) -> Option<EsoWitness> {
    if is_eso(state, 0.0) {
        return None;
    }
    let h = state.grid.seg_width;
    let d = &state.deltas;
    // Not ordered: the first short segment is followed by a used one.
    let j = d.iter().position(|&v| v < h)?;
    let ordered = state.grid.eso_fill(state.total().min(state.grid.y_max)).ok()?;
    let e = ordered.deltas();
    let (k, excess) = d
        .iter()
        .zip(e)
        .enumerate()
        .skip(j + 1)
        .map(|(i, (a, b))| (i, a - b))
        .fold((j + 1, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let deficit = e[j] - d[j];
    let mut remainder = deficit.min(excess);
    let mut k = k;
    if !(remainder > 0.0) {
        // rounding in the reference filling; fall back to the raw shortfall
        k = (j + 1..d.len()).find(|&i| d[i] > 0.0)?;
        remainder = (h - d[j]).min(d[k]);
    }
    Some(EsoWitness { deficient_index: j + 1, compensating_index: k + 1, remainder })
}
