//! Emission of one PWL block `f(y, ȳ, Λ) ≈ y²` into a MILP.
//!
//! Rows emitted for a flow variable `y` (all tags end in `:<owner>:<kind>`):
//!
//! | tag     | row                                   |
//! |---------|---------------------------------------|
//! | `eq6`   | `y − y⁺ + y⁻ = 0`                     |
//! | `eq7`   | `y⁺ + y⁻ − Σ Δ_λ = 0`                 |
//! | `eq10`  | `y⁺ − ȳ·z⁺ ≤ 0`                       |
//! | `eq11`  | `y⁻ − ȳ·z⁻ ≤ 0`                       |
//! | `eq12`  | `z⁺ + z⁻ ≤ 1`                         |
//! | `eq20`  | `Δ_λ − M·x_λ ≥ h − M − ε⁺`, λ = 1..Λ  |
//! | `eq21`  | `Δ_{λ+1} − h·x_λ ≤ 0`, λ = 1..Λ−1     |
//!
//! `eq20`/`eq21` only in ordered (SO-PWL) mode. Segment bounds `0 ≤ Δ_λ ≤ h`
//! and `y⁺, y⁻ ∈ [0, ȳ]` are variable bounds. The approximation itself,
//! `Σ slope_λ·Δ_λ`, is returned as terms for the caller to place.

use crate::milp::{MilpModel, Sense, Terms, VarId};
use crate::pwl::PwlGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Segments only; any filling with the right total is admissible.
    Pwl,
    /// Segments plus big-M ordering rows that force left-to-right filling.
    SoPwl,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Pwl => "PWL",
            Mode::SoPwl => "SO-PWL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlowKind {
    P,
    Q,
}

impl FlowKind {
    pub fn label(self) -> &'static str {
        match self {
            FlowKind::P => "P",
            FlowKind::Q => "Q",
        }
    }
}

/// Big-M and ε⁺ for the ordering rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderingParams {
    pub big_m: f64,
    pub epsilon: f64,
}

impl OrderingParams {
    /// `M = h` and `ε⁺ = 1e-6·h`. With `Δ_λ ≥ 0`, `M = h` is the smallest value
    /// that leaves the row slack when `x_λ = 0`.
    pub fn for_grid(grid: &PwlGrid) -> Self {
        OrderingParams { big_m: grid.seg_width(), epsilon: 1e-6 * grid.seg_width() }
    }

    pub fn validate(&self, grid: &PwlGrid) -> Result<()> {
        if !(self.big_m > 0.0) {
            return Err(Error::Argument(format!("big-M must be positive, got {}", self.big_m)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < grid.seg_width()) {
            return Err(Error::Argument(format!(
                "epsilon {} must lie in (0, {})",
                self.epsilon,
                grid.seg_width()
            )));
        }
        Ok(())
    }
}

/// Naming scope of a block: names become `<stem>_<suffix>` and tags
/// `<eq>:<owner>:<kind>`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLabel {
    /// Tag owner, e.g. `branch(9,10)`.
    pub owner: String,
    /// Name suffix, e.g. `9_10`.
    pub suffix: String,
    pub kind: FlowKind,
}

impl BlockLabel {
    pub fn branch(from: usize, to: usize, kind: FlowKind) -> Self {
        BlockLabel { owner: format!("branch({from},{to})"), suffix: format!("{from}_{to}"), kind }
    }

    fn tag(&self, eq: &str) -> String {
        format!("{eq}:{}:{}", self.owner, self.kind.label())
    }

    fn tag_at(&self, eq: &str, lambda: usize) -> String {
        format!("{eq}:{}:{}:{lambda}", self.owner, self.kind.label())
    }

    fn name(&self, stem: &str) -> String {
        format!("{stem}{}_{}", self.kind.label(), self.suffix)
    }

    fn name_at(&self, stem: &str, lambda: usize) -> String {
        format!("{stem}{}_{}_{lambda}", self.kind.label(), self.suffix)
    }
}

/// Variables of one emitted block.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlBlockHandle {
    pub label: BlockLabel,
    pub mode: Mode,
    pub grid: PwlGrid,
    pub ordering: Option<OrderingParams>,
    pub y: VarId,
    pub deltas: Vec<VarId>,
    pub y_plus: VarId,
    pub y_minus: VarId,
    pub z_plus: VarId,
    pub z_minus: VarId,
    /// `x_λ`, empty in plain PWL mode.
    pub order: Vec<VarId>,
}

impl PwlBlockHandle {
    /// `scale · Σ slope_λ·Δ_λ`.
    pub fn value_terms(&self, scale: f64) -> Terms {
        self.grid.slopes().zip(&self.deltas).map(|(s, &d)| (d, scale * s)).collect()
    }
}

pub fn emit_pwl_block(
    model: &mut MilpModel,
    y: VarId,
    grid: PwlGrid,
    mode: Mode,
    ordering: Option<OrderingParams>,
    label: BlockLabel,
) -> Result<PwlBlockHandle> {
    if model.is_frozen() {
        return Err(Error::Frozen);
    }
    if !(grid.seg_width() > 0.0) {
        return Err(Error::Argument(format!("block {} has an empty grid", label.owner)));
    }
    let ordering = match mode {
        Mode::Pwl => None,
        Mode::SoPwl => {
            let p = ordering.unwrap_or_else(|| OrderingParams::for_grid(&grid));
            p.validate(&grid)?;
            Some(p)
        }
    };
    let n = grid.num_segments();
    let h = grid.seg_width();
    let y_max = grid.y_max();

    let mut deltas = Vec::with_capacity(n);
    for l in 1..=n {
        deltas.push(model.add_continuous(label.name_at("d", l), 0.0, h)?);
    }
    let y_plus = model.add_continuous(label.name("yp"), 0.0, y_max)?;
    let y_minus = model.add_continuous(label.name("ym"), 0.0, y_max)?;
    let z_plus = model.add_binary(label.name("zp"))?;
    let z_minus = model.add_binary(label.name("zm"))?;

    model.add_constraint(label.tag("eq6"), [(y, 1.0), (y_plus, -1.0), (y_minus, 1.0)], Sense::Eq, 0.0)?;
    let eq7 = [(y_plus, 1.0), (y_minus, 1.0)].into_iter().chain(deltas.iter().map(|&d| (d, -1.0)));
    model.add_constraint(label.tag("eq7"), eq7, Sense::Eq, 0.0)?;
    model.add_constraint(label.tag("eq10"), [(y_plus, 1.0), (z_plus, -y_max)], Sense::Le, 0.0)?;
    model.add_constraint(label.tag("eq11"), [(y_minus, 1.0), (z_minus, -y_max)], Sense::Le, 0.0)?;
    model.add_constraint(label.tag("eq12"), [(z_plus, 1.0), (z_minus, 1.0)], Sense::Le, 1.0)?;

    let mut order = Vec::new();
    if let Some(OrderingParams { big_m, epsilon }) = ordering {
        for l in 1..=n {
            order.push(model.add_binary(label.name_at("x", l))?);
        }
        for l in 1..=n {
            let (d, x) = (deltas[l - 1], order[l - 1]);
            model.add_constraint(label.tag_at("eq20", l), [(d, 1.0), (x, -big_m)], Sense::Ge, h - big_m - epsilon)?;
        }
        for l in 1..n {
            let (next, x) = (deltas[l], order[l - 1]);
            model.add_constraint(label.tag_at("eq21", l), [(next, 1.0), (x, -h)], Sense::Le, 0.0)?;
        }
    }

    Ok(PwlBlockHandle { label, mode, grid, ordering, y, deltas, y_plus, y_minus, z_plus, z_minus, order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{VarKind, MilpModel};

    fn emit(n: usize, mode: Mode) -> (MilpModel, PwlBlockHandle) {
        let grid = PwlGrid::new(0.1, n).unwrap();
        let mut m = MilpModel::new("b");
        let y = m.add_continuous("P_1_2", -0.1, 0.1).unwrap();
        let h = emit_pwl_block(&mut m, y, grid, mode, None, BlockLabel::branch(1, 2, FlowKind::P)).unwrap();
        (m, h)
    }

    fn count(m: &MilpModel, prefix: &str) -> usize {
        m.constraints_tagged(prefix).count()
    }

    #[test]
    fn pwl_counts() {
        let (m, h) = emit(50, Mode::Pwl);
        let continuous = m.variables().iter().filter(|v| v.kind == VarKind::Continuous).count();
        assert_eq!(continuous, 1 + 50 + 2);
        assert_eq!(m.num_binaries(), 2);
        assert_eq!(m.constraints().len(), 5);
        for eq in ["eq6:", "eq7:", "eq10:", "eq11:", "eq12:"] {
            assert_eq!(count(&m, eq), 1, "{eq}");
        }
        assert!(h.order.is_empty());
        assert!(m.constraint_by_tag("eq7:branch(1,2):P").is_some());
    }

    #[test]
    fn sopwl_counts() {
        let (m, h) = emit(50, Mode::SoPwl);
        assert_eq!(m.num_binaries(), 52);
        assert_eq!(count(&m, "eq20:"), 50);
        assert_eq!(count(&m, "eq21:"), 49);
        assert_eq!(h.order.len(), 50);
        let p = h.ordering.unwrap();
        assert_eq!(p.big_m, h.grid.seg_width());
    }

    #[test]
    fn single_segment() {
        let (m, h) = emit(1, Mode::SoPwl);
        assert_eq!(h.value_terms(1.0), vec![(h.deltas[0], 0.1)]);
        assert_eq!(count(&m, "eq20:"), 1);
        assert_eq!(count(&m, "eq21:"), 0);
    }

    #[test]
    fn frozen_and_bad_params() {
        let grid = PwlGrid::new(0.1, 4).unwrap();
        let mut m = MilpModel::new("b");
        let y = m.add_continuous("y", -0.1, 0.1).unwrap();
        let bad = OrderingParams { big_m: 1.0, epsilon: 0.0 };
        let label = BlockLabel::branch(1, 2, FlowKind::Q);
        assert!(emit_pwl_block(&mut m, y, grid, Mode::SoPwl, Some(bad), label.clone()).is_err());
        m.freeze();
        assert!(matches!(emit_pwl_block(&mut m, y, grid, Mode::Pwl, None, label), Err(Error::Frozen)));
    }
}
