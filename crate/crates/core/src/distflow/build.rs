//! Linearized DistFlow model of a radial feeder.
//!
//! Per branch `(i, j)` with impedance `r + jx`:
//!
//! * flows `P_ij`, `Q_ij` (sending end, free sign, `|·| ≤ ȳ`), `Isq_ij ∈ [0, I_max²]`
//! * one PWL block each for `P_ij²` and `Q_ij²`
//! * `eq4`: `v_norm²·Isq_ij = f(P_ij) + f(Q_ij)`
//! * `vdrop`: `V_j − V_i + 2(r·P_ij + x·Q_ij) − (r² + x²)·Isq_ij = 0`
//!
//! Per bus `j`, with `V_j` the squared voltage magnitude:
//!
//! * `balanceP`: `Σ_in (P_ij − r·Isq_ij) − Σ_out P_jk + Pg_j + Proot − β_j·p_j = 0`
//! * `balanceQ`: same with `Q`, `x`, `Qg`
//!
//! The root voltage is fixed to `v_norm²`. Each load is scaled by a pickup
//! variable `β_j` at fixed power factor, either binary (whole loads) or
//! continuous in `[0, 1]`.

use std::collections::HashSet;

use super::block::{emit_pwl_block, BlockLabel, FlowKind, Mode, OrderingParams, PwlBlockHandle};
use super::case::{Branch, NetworkCase};
use crate::milp::{MilpModel, ObjSense, Sense, Terms, VarId, VarKind};
use crate::pwl::PwlGrid;
use crate::{Error, Result};

/// What the substation does during the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootSupply {
    /// Upstream outage: root injection fixed to zero.
    Outage,
    /// Root injection free in both P and Q.
    Substation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadPickup {
    /// `β_j ∈ {0, 1}`
    Binary,
    /// `β_j ∈ [0, 1]`
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveKind {
    /// `max Σ β_i·p_i`
    Restoration,
    /// `max Σ β_i·p_i − weight·Σ r_ij·Isq_ij`
    RestorationWithLossPenalty { weight: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    pub num_segments: usize,
    pub mode: Mode,
    pub v_norm: f64,
    /// `None` picks `M = h` per block.
    pub big_m: Option<f64>,
    /// `None` picks `ε⁺ = 1e-6·h` per block.
    pub epsilon_plus: Option<f64>,
    pub objective: ObjectiveKind,
    /// Default squared-voltage bounds for buses without their own.
    pub v_sq_min: f64,
    pub v_sq_max: f64,
    pub root_supply: RootSupply,
    pub load_pickup: LoadPickup,
    /// Buses whose load may be restored; `None` means every load bus. Loads
    /// elsewhere stay disconnected (`β = 0`).
    pub restorable_buses: Option<Vec<usize>>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            num_segments: 50,
            mode: Mode::SoPwl,
            v_norm: 1.0,
            big_m: None,
            epsilon_plus: None,
            objective: ObjectiveKind::Restoration,
            v_sq_min: 0.81,
            v_sq_max: 1.21,
            root_supply: RootSupply::Outage,
            load_pickup: LoadPickup::Binary,
            restorable_buses: None,
        }
    }
}

impl BuildOptions {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_segments(mut self, n: usize) -> Self {
        self.num_segments = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_segments == 0 {
            return Err(Error::Argument("at least one segment is required".into()));
        }
        if !(self.v_norm > 0.0) {
            return Err(Error::Argument(format!("v_norm must be positive, got {}", self.v_norm)));
        }
        if matches!(self.big_m, Some(m) if !(m > 0.0)) {
            return Err(Error::Argument("big-M must be positive".into()));
        }
        if matches!(self.epsilon_plus, Some(e) if !(e > 0.0)) {
            return Err(Error::Argument("epsilon must be positive".into()));
        }
        if !(0.0 <= self.v_sq_min && self.v_sq_min <= self.v_sq_max) {
            return Err(Error::Argument("invalid voltage bounds".into()));
        }
        if let ObjectiveKind::RestorationWithLossPenalty { weight } = self.objective {
            if !(weight >= 0.0) {
                return Err(Error::Argument("loss weight must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// Grid for a branch flow: `ȳ = v_norm · I_max` with `I_max` in pu of
/// `I_base = S_base / (√3·V_base)`.
pub fn flow_bound(case: &NetworkCase, branch: &Branch, options: &BuildOptions) -> Result<PwlGrid> {
    let i_base = case.bases.i_amps();
    if !(i_base.is_finite() && i_base > 0.0) {
        return Err(Error::Case("bases must be positive".into()));
    }
    PwlGrid::new(options.v_norm * branch.i_max_amps / i_base, options.num_segments)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchVars {
    pub from: usize,
    pub to: usize,
    pub p: VarId,
    pub q: VarId,
    pub i_sqr: VarId,
    pub block_p: PwlBlockHandle,
    pub block_q: PwlBlockHandle,
}

impl BranchVars {
    pub fn block(&self, kind: FlowKind) -> &PwlBlockHandle {
        match kind {
            FlowKind::P => &self.block_p,
            FlowKind::Q => &self.block_q,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadVars {
    pub bus: usize,
    pub beta: VarId,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenVars {
    pub bus: usize,
    pub p: VarId,
    pub q: VarId,
}

/// Handles into a built model, aligned with the case's branch, bus, load and
/// generator lists.
#[derive(Debug, Clone, PartialEq)]
pub struct DistFlowArtifacts {
    pub options: BuildOptions,
    pub branches: Vec<BranchVars>,
    /// Squared voltage per bus, in case bus order.
    pub v_sqr: Vec<VarId>,
    pub loads: Vec<LoadVars>,
    pub generators: Vec<GenVars>,
    pub root_p: VarId,
    pub root_q: VarId,
}

impl DistFlowArtifacts {
    pub fn blocks(&self) -> impl Iterator<Item = &PwlBlockHandle> {
        self.branches.iter().flat_map(|b| [&b.block_p, &b.block_q])
    }

    pub fn branch(&self, from: usize, to: usize) -> Option<&BranchVars> {
        self.branches.iter().find(|b| b.from == from && b.to == to)
    }
}

/// Declares variables and all network rows for `case` into `model`. The
/// objective is left to [`build_restoration_objective`].
pub fn build_distflow(model: &mut MilpModel, case: &NetworkCase, options: &BuildOptions) -> Result<DistFlowArtifacts> {
    options.validate()?;
    let v_norm_sq = options.v_norm * options.v_norm;

    let mut v_sqr = Vec::with_capacity(case.buses.len());
    for bus in &case.buses {
        let (lo, hi) = if bus.id == case.root {
            (v_norm_sq, v_norm_sq)
        } else {
            (bus.v_sq_min.unwrap_or(options.v_sq_min), bus.v_sq_max.unwrap_or(options.v_sq_max))
        };
        v_sqr.push(model.add_continuous(format!("V_{}", bus.id), lo, hi)?);
    }

    let (root_lo, root_hi) = match options.root_supply {
        RootSupply::Outage => (0.0, 0.0),
        RootSupply::Substation => (f64::NEG_INFINITY, f64::INFINITY),
    };
    let root_p = model.add_continuous("Proot", root_lo, root_hi)?;
    let root_q = model.add_continuous("Qroot", root_lo, root_hi)?;

    let restorable: Option<HashSet<usize>> = options.restorable_buses.as_ref().map(|v| v.iter().copied().collect());
    let mut loads = Vec::with_capacity(case.loads.len());
    for l in &case.loads {
        let upper = match &restorable {
            Some(set) if !set.contains(&l.bus) => 0.0,
            _ => 1.0,
        };
        let kind = match options.load_pickup {
            LoadPickup::Binary => VarKind::Binary,
            LoadPickup::Continuous => VarKind::Continuous,
        };
        let beta = model.add_var(format!("beta_{}", l.bus), 0.0, upper, kind)?;
        loads.push(LoadVars { bus: l.bus, beta, p: l.p, q: l.q });
    }

    let mut generators = Vec::with_capacity(case.generators.len());
    for g in &case.generators {
        let p = model.add_continuous(format!("Pg_{}", g.bus), 0.0, g.p_max)?;
        let q = model.add_continuous(format!("Qg_{}", g.bus), g.q_min, g.q_max)?;
        generators.push(GenVars { bus: g.bus, p, q });
    }

    let mut branches = Vec::with_capacity(case.branches.len());
    for br in &case.branches {
        let grid = flow_bound(case, br, options)?;
        let y_max = grid.y_max();
        let i_max = case.i_max_pu(br);
        let suffix = format!("{}_{}", br.from, br.to);
        let p = model.add_continuous(format!("P_{suffix}"), -y_max, y_max)?;
        let q = model.add_continuous(format!("Q_{suffix}"), -y_max, y_max)?;
        let i_sqr = model.add_continuous(format!("Isq_{suffix}"), 0.0, i_max * i_max)?;

        let ordering = match (options.big_m, options.epsilon_plus) {
            (None, None) => None,
            (m, e) => {
                let d = OrderingParams::for_grid(&grid);
                Some(OrderingParams { big_m: m.unwrap_or(d.big_m), epsilon: e.unwrap_or(d.epsilon) })
            }
        };
        let block_p =
            emit_pwl_block(model, p, grid, options.mode, ordering, BlockLabel::branch(br.from, br.to, FlowKind::P))?;
        let block_q =
            emit_pwl_block(model, q, grid, options.mode, ordering, BlockLabel::branch(br.from, br.to, FlowKind::Q))?;

        let mut eq4: Terms = vec![(i_sqr, v_norm_sq)];
        eq4.extend(block_p.value_terms(-1.0));
        eq4.extend(block_q.value_terms(-1.0));
        model.add_constraint(format!("eq4:branch({},{})", br.from, br.to), eq4, Sense::Eq, 0.0)?;

        let (vi, vj) = (v_sqr[bus_pos(case, br.from)?], v_sqr[bus_pos(case, br.to)?]);
        model.add_constraint(
            format!("vdrop:branch({},{})", br.from, br.to),
            [(vj, 1.0), (vi, -1.0), (p, 2.0 * br.r), (q, 2.0 * br.x), (i_sqr, -(br.r * br.r + br.x * br.x))],
            Sense::Eq,
            0.0,
        )?;
        branches.push(BranchVars { from: br.from, to: br.to, p, q, i_sqr, block_p, block_q });
    }

    for bus in &case.buses {
        let mut bal_p: Terms = Vec::new();
        let mut bal_q: Terms = Vec::new();
        for (br, vars) in case.branches.iter().zip(&branches) {
            if br.to == bus.id {
                bal_p.extend([(vars.p, 1.0), (vars.i_sqr, -br.r)]);
                bal_q.extend([(vars.q, 1.0), (vars.i_sqr, -br.x)]);
            }
            if br.from == bus.id {
                bal_p.push((vars.p, -1.0));
                bal_q.push((vars.q, -1.0));
            }
        }
        for g in generators.iter().filter(|g| g.bus == bus.id) {
            bal_p.push((g.p, 1.0));
            bal_q.push((g.q, 1.0));
        }
        for l in loads.iter().filter(|l| l.bus == bus.id) {
            bal_p.push((l.beta, -l.p));
            bal_q.push((l.beta, -l.q));
        }
        if bus.id == case.root {
            bal_p.push((root_p, 1.0));
            bal_q.push((root_q, 1.0));
        }
        model.add_constraint(format!("balanceP:bus({})", bus.id), bal_p, Sense::Eq, 0.0)?;
        model.add_constraint(format!("balanceQ:bus({})", bus.id), bal_q, Sense::Eq, 0.0)?;
    }

    Ok(DistFlowArtifacts { options: options.clone(), branches, v_sqr, loads, generators, root_p, root_q })
}

fn bus_pos(case: &NetworkCase, id: usize) -> Result<usize> {
    case.bus_index(id).ok_or_else(|| Error::Case(format!("unknown bus {id}")))
}

/// Sets the restoration objective, tagged `eq22`.
pub fn build_restoration_objective(
    model: &mut MilpModel,
    case: &NetworkCase,
    artifacts: &DistFlowArtifacts,
) -> Result<()> {
    let mut terms: Terms = artifacts.loads.iter().map(|l| (l.beta, l.p)).collect();
    if let ObjectiveKind::RestorationWithLossPenalty { weight } = artifacts.options.objective {
        for (br, vars) in case.branches.iter().zip(&artifacts.branches) {
            terms.push((vars.i_sqr, -weight * br.r));
        }
    }
    model.set_objective(ObjSense::Maximize, terms, "eq22")
}

/// Builds, sets the objective and freezes a restoration model for `case`.
pub fn build_restoration_model(case: &NetworkCase, options: &BuildOptions) -> Result<(MilpModel, DistFlowArtifacts)> {
    let name = format!("{}_{}_{}", case.name, options.mode.label().replace('-', "").to_lowercase(), options.num_segments);
    let mut model = MilpModel::new(name);
    let artifacts = build_distflow(&mut model, case, options)?;
    build_restoration_objective(&mut model, case, &artifacts)?;
    model.freeze();
    Ok((model, artifacts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{recheck, FEAS_TOL};

    #[test]
    fn flow_bound_conversion() {
        let case = NetworkCase::bundled("ieee33_4dg").unwrap();
        let opts = BuildOptions::default();
        let grid = flow_bound(&case, &case.branches[0], &opts).unwrap();
        // 50 A on I_base = 10e6 / (√3·12.66e3) ≈ 456.04 A
        assert!((grid.y_max() - 0.1096388).abs() < 1e-6);
        assert_eq!(grid.num_segments(), 50);
        assert_eq!(grid.seg_width(), grid.y_max() / 50.0);

        let mut unit = case.branches[0].clone();
        unit.i_max_amps = case.bases.i_amps();
        let opts = BuildOptions { v_norm: 1.05, ..BuildOptions::default() };
        assert!((flow_bound(&case, &unit, &opts).unwrap().y_max() - 1.05).abs() < 1e-12);
    }

    #[test]
    fn ieee33_counts() {
        let case = NetworkCase::bundled("ieee33_4dg").unwrap();
        let (m, art) = build_restoration_model(&case, &BuildOptions::default().with_mode(Mode::Pwl)).unwrap();
        assert_eq!(art.branches.len(), 32);
        let deltas = m.variables().iter().filter(|v| v.name.starts_with('d')).count();
        assert_eq!(deltas, 3200);
        assert_eq!(m.num_binaries(), 32 * 2 * 2 + 32);
        assert_eq!(m.constraints_tagged("eq4:").count(), 32);
        assert_eq!(m.constraints_tagged("balanceP:").count(), 33);

        let (m, _) = build_restoration_model(&case, &BuildOptions::default()).unwrap();
        assert_eq!(m.num_binaries(), 32 * 2 * 52 + 32);
        let opts = BuildOptions { load_pickup: LoadPickup::Continuous, ..BuildOptions::default() };
        let (m, _) = build_restoration_model(&case, &opts).unwrap();
        assert_eq!(m.num_binaries(), 32 * 2 * 52);
        assert_eq!(m.constraints_tagged("eq20:").count(), 3200);
        assert_eq!(m.constraints_tagged("eq21:").count(), 32 * 2 * 49);
        assert!(m.variables().iter().filter(|v| v.kind == VarKind::Binary).all(|v| v.lower == 0.0 && v.upper == 1.0));
    }

    /// Assignment for the 2-bus toy with everything fed from the root and the
    /// segment values filled in order.
    fn toy_assignment(m: &MilpModel, art: &DistFlowArtifacts, case: &NetworkCase, p: f64, q: f64) -> Vec<f64> {
        let br = &case.branches[0];
        let vars = &art.branches[0];
        let mut x = vec![0.0; m.variables().len()];
        let fp = vars.block_p.grid.eso_fill(p).unwrap();
        let fq = vars.block_q.grid.eso_fill(q).unwrap();
        let f = crate::pwl::pwl_value(&fp) + crate::pwl::pwl_value(&fq);
        x[vars.p.index()] = p;
        x[vars.q.index()] = q;
        x[vars.i_sqr.index()] = f;
        for (block, st, y) in [(&vars.block_p, &fp, p), (&vars.block_q, &fq, q)] {
            for (d, v) in block.deltas.iter().zip(st.deltas()) {
                x[d.index()] = *v;
            }
            x[block.y_plus.index()] = y;
            x[block.z_plus.index()] = if y > 0.0 { 1.0 } else { 0.0 };
        }
        x[art.v_sqr[0].index()] = 1.0;
        x[art.v_sqr[1].index()] = 1.0 - 2.0 * (br.r * p + br.x * q) + (br.r * br.r + br.x * br.x) * f;
        x[art.root_p.index()] = p;
        x[art.root_q.index()] = q;
        x
    }

    #[test]
    fn empty_network_zero_flow() {
        let case = NetworkCase::bundled("empty2bus").unwrap();
        let (m, art) = build_restoration_model(&case, &BuildOptions::default()).unwrap();
        let mut x = vec![0.0; m.variables().len()];
        x[art.v_sqr[0].index()] = 1.0;
        x[art.v_sqr[1].index()] = 1.0;
        assert!(recheck(&m, &x, FEAS_TOL).is_empty());
    }

    #[test]
    fn toy_balance_by_hand() {
        let case = NetworkCase::bundled("toy2bus").unwrap();
        let opts = BuildOptions {
            root_supply: RootSupply::Substation,
            num_segments: 10,
            load_pickup: LoadPickup::Continuous,
            ..BuildOptions::default()
        };
        let (m, art) = build_restoration_model(&case, &opts).unwrap();
        let mut x = toy_assignment(&m, &art, &case, 0.0, 0.0);
        // load fully served by the root: sending end must cover load + r·Isq
        let grid = art.branches[0].block_p.grid;
        let (pl, ql) = (0.01, 0.005);
        // fixed point on the loss term; two passes settle it well below 1e-12
        let (mut p, mut q) = (pl, ql);
        for _ in 0..20 {
            let f = crate::pwl::pwl_value(&grid.eso_fill(p).unwrap()) + crate::pwl::pwl_value(&grid.eso_fill(q).unwrap());
            p = pl + 0.01 * f;
            q = ql + 0.01 * f;
        }
        let y = toy_assignment(&m, &art, &case, p, q);
        x.copy_from_slice(&y);
        x[art.loads[0].beta.index()] = 1.0;
        let gen = &art.generators[0];
        x[gen.p.index()] = 0.0;
        x[gen.q.index()] = 0.0;
        let v = recheck(&m, &x, FEAS_TOL);
        assert!(v.is_empty(), "{v:?}");
        // break the balance by serving only half the load
        x[art.loads[0].beta.index()] = 0.5;
        let tags: Vec<String> = recheck(&m, &x, FEAS_TOL).into_iter().map(|v| v.tag).collect();
        assert_eq!(tags, vec!["balanceP:bus(2)", "balanceQ:bus(2)"]);
    }

    #[test]
    fn restorable_subset_and_loss_penalty() {
        let case = NetworkCase::bundled("ieee33_4dg").unwrap();
        let opts = BuildOptions {
            restorable_buses: Some(vec![13, 14]),
            objective: ObjectiveKind::RestorationWithLossPenalty { weight: 2.0 },
            num_segments: 4,
            ..BuildOptions::default()
        };
        let (m, art) = build_restoration_model(&case, &opts).unwrap();
        let open: Vec<usize> =
            art.loads.iter().filter(|l| m.variable(l.beta).upper > 0.0).map(|l| l.bus).collect();
        assert_eq!(open, vec![13, 14]);
        assert_eq!(m.objective().tag, "eq22");
        assert_eq!(m.objective().terms.len(), 32 + 32);
        assert!(BuildOptions { num_segments: 0, ..BuildOptions::default() }.validate().is_err());
    }
}
