//! Radial network cases.
//!
//! Case documents are TOML:
//!
//! ```toml
//! name = "toy"
//! root = 1                 # optional, default 1
//!
//! [bases]
//! s_mva = 10.0
//! v_kv = 12.66             # line-to-line
//!
//! [[buses]]
//! id = 1
//! v_sq_min = 0.81          # optional, pu²
//! v_sq_max = 1.21          # optional, pu²
//!
//! [[branches]]
//! from = 1
//! to = 2
//! r_ohm = 0.0922           # or r_pu
//! x_ohm = 0.0470           # or x_pu
//! i_max_amps = 50.0
//!
//! [[loads]]
//! bus = 2
//! p_pu = 0.01
//! q_pu = 0.006
//!
//! [[generators]]
//! bus = 2
//! p_max_pu = 0.05
//! q_max_pu = 0.03
//! q_min_pu = 0.0           # optional
//! ```

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::Path;

use serde::Deserialize;

use crate::{Error, Result};

const IEEE33_4DG: &str = include_str!("../../cases/ieee33_4dg.toml");
const TOY2BUS: &str = include_str!("../../cases/toy2bus.toml");
const EMPTY2BUS: &str = include_str!("../../cases/empty2bus.toml");

/// Names accepted by [`NetworkCase::bundled`].
pub const BUNDLED_CASES: &[&str] = &["ieee33_4dg", "toy2bus", "empty2bus"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseDoc {
    name: Option<String>,
    root: Option<usize>,
    bases: BasesDoc,
    buses: Vec<BusDoc>,
    #[serde(default)]
    branches: Vec<BranchDoc>,
    #[serde(default)]
    loads: Vec<LoadDoc>,
    #[serde(default)]
    generators: Vec<GenDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BasesDoc {
    s_mva: f64,
    v_kv: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusDoc {
    id: usize,
    v_sq_min: Option<f64>,
    v_sq_max: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchDoc {
    from: usize,
    to: usize,
    r_ohm: Option<f64>,
    r_pu: Option<f64>,
    x_ohm: Option<f64>,
    x_pu: Option<f64>,
    i_max_amps: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadDoc {
    bus: usize,
    p_pu: f64,
    q_pu: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenDoc {
    bus: usize,
    p_max_pu: f64,
    q_max_pu: f64,
    #[serde(default)]
    q_min_pu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bases {
    pub s_mva: f64,
    pub v_kv: f64,
}

impl Bases {
    pub fn z_ohm(&self) -> f64 {
        self.v_kv * self.v_kv / self.s_mva
    }

    /// `S / (√3·V)` in amperes.
    pub fn i_amps(&self) -> f64 {
        self.s_mva * 1e6 / (3f64.sqrt() * self.v_kv * 1e3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub v_sq_min: Option<f64>,
    pub v_sq_max: Option<f64>,
}

/// Branch with impedance in pu.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub i_max_amps: f64,
}

impl Branch {
    pub fn label(&self) -> String {
        format!("{}-{}", self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub bus: usize,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: usize,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

/// A validated radial network in per-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub name: String,
    pub root: usize,
    pub bases: Bases,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub loads: Vec<Load>,
    pub generators: Vec<Generator>,
    index: HashMap<usize, usize>,
}

impl NetworkCase {
    pub fn bundled(name: &str) -> Result<Self> {
        let text = match name {
            "ieee33_4dg" => IEEE33_4DG,
            "toy2bus" => TOY2BUS,
            "empty2bus" => EMPTY2BUS,
            other => return Err(Error::Case(format!("no bundled case `{other}`"))),
        };
        load_case(text)
    }

    /// A bundled case name or a path to a case document.
    pub fn resolve(spec: &str) -> Result<Self> {
        if BUNDLED_CASES.contains(&spec) {
            return Self::bundled(spec);
        }
        load_case_path(spec)
    }

    /// Position of bus `id` in [`NetworkCase::buses`].
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Branch ampacity in pu of the current base.
    pub fn i_max_pu(&self, branch: &Branch) -> f64 {
        branch.i_max_amps / self.bases.i_amps()
    }

    pub fn total_load(&self) -> (f64, f64) {
        self.loads.iter().fold((0.0, 0.0), |(p, q), l| (p + l.p, q + l.q))
    }

    pub fn total_generation_p(&self) -> f64 {
        self.generators.iter().map(|g| g.p_max).sum()
    }
}

pub fn load_case_path(path: impl AsRef<Path>) -> Result<NetworkCase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_case(&text)
}

pub fn load_case(source: &str) -> Result<NetworkCase> {
    let doc: CaseDoc = toml::from_str(source).map_err(|e| Error::Case(e.to_string()))?;
    let bases = Bases { s_mva: doc.bases.s_mva, v_kv: doc.bases.v_kv };
    if !(bases.s_mva > 0.0 && bases.v_kv > 0.0) {
        return Err(Error::Case(format!("bases must be positive, got {} MVA / {} kV", bases.s_mva, bases.v_kv)));
    }
    let z_base = bases.z_ohm();

    let mut index = HashMap::new();
    let mut buses = Vec::with_capacity(doc.buses.len());
    for b in doc.buses {
        if index.insert(b.id, buses.len()).is_some() {
            return Err(Error::Case(format!("duplicate bus {}", b.id)));
        }
        if let (Some(lo), Some(hi)) = (b.v_sq_min, b.v_sq_max) {
            if lo > hi || lo < 0.0 {
                return Err(Error::Case(format!("bus {} voltage bounds [{lo}, {hi}] invalid", b.id)));
            }
        }
        buses.push(Bus { id: b.id, v_sq_min: b.v_sq_min, v_sq_max: b.v_sq_max });
    }
    let root = doc.root.unwrap_or(1);
    if !index.contains_key(&root) {
        return Err(Error::Case(format!("root bus {root} not declared")));
    }
    let known = |id: usize, what: &str| -> Result<()> {
        if index.contains_key(&id) {
            Ok(())
        } else {
            Err(Error::Case(format!("{what} references unknown bus {id}")))
        }
    };

    let mut branches = Vec::with_capacity(doc.branches.len());
    for b in doc.branches {
        known(b.from, "branch")?;
        known(b.to, "branch")?;
        let pick = |ohm: Option<f64>, pu: Option<f64>, what: &str| -> Result<f64> {
            match (ohm, pu) {
                (Some(o), None) => Ok(o / z_base),
                (None, Some(p)) => Ok(p),
                _ => Err(Error::Case(format!(
                    "branch {}-{} needs exactly one of {what}_ohm / {what}_pu",
                    b.from, b.to
                ))),
            }
        };
        let r = pick(b.r_ohm, b.r_pu, "r")?;
        let x = pick(b.x_ohm, b.x_pu, "x")?;
        if r < 0.0 || x < 0.0 {
            return Err(Error::Case(format!("branch {}-{} has negative impedance", b.from, b.to)));
        }
        if !(b.i_max_amps > 0.0) {
            return Err(Error::Case(format!("branch {}-{} needs a positive ampacity", b.from, b.to)));
        }
        branches.push(Branch { from: b.from, to: b.to, r, x, i_max_amps: b.i_max_amps });
    }

    let mut seen = HashSet::new();
    let mut loads = Vec::with_capacity(doc.loads.len());
    for l in doc.loads {
        known(l.bus, "load")?;
        if !seen.insert(l.bus) {
            return Err(Error::Case(format!("more than one load at bus {}", l.bus)));
        }
        if l.p_pu < 0.0 {
            return Err(Error::Case(format!("negative active load at bus {}", l.bus)));
        }
        loads.push(Load { bus: l.bus, p: l.p_pu, q: l.q_pu });
    }
    seen.clear();
    let mut generators = Vec::with_capacity(doc.generators.len());
    for g in doc.generators {
        known(g.bus, "generator")?;
        if !seen.insert(g.bus) {
            return Err(Error::Case(format!("more than one generator at bus {}", g.bus)));
        }
        if g.p_max_pu < 0.0 || g.q_min_pu > g.q_max_pu {
            return Err(Error::Case(format!("generator at bus {} has invalid limits", g.bus)));
        }
        generators.push(Generator { bus: g.bus, p_max: g.p_max_pu, q_min: g.q_min_pu, q_max: g.q_max_pu });
    }

    let case = NetworkCase {
        name: doc.name.unwrap_or_else(|| "case".into()),
        root,
        bases,
        buses,
        branches,
        loads,
        generators,
        index,
    };
    check_radial(&case)?;
    Ok(case)
}

/// Requires `n − 1` branches that connect every bus to the root.
fn check_radial(case: &NetworkCase) -> Result<()> {
    let n = case.buses.len();
    if case.branches.len() + 1 != n {
        return Err(Error::NotRadial(format!("{} buses but {} branches", n, case.branches.len())));
    }
    let mut adj = vec![Vec::new(); n];
    for br in &case.branches {
        if br.from == br.to {
            return Err(Error::NotRadial(format!("self loop at bus {}", br.from)));
        }
        let (a, b) = (case.index[&br.from], case.index[&br.to]);
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([case.index[&case.root]]);
    seen[queue[0]] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::NotRadial(format!("bus {} not reachable from the root (cycle elsewhere)", case.buses[i].id)));
    }
    Ok(())
}
