//! Run configuration: command-line flags, optionally overridden by a TOML file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;
use sopwl_core::distflow::{BuildOptions, LoadPickup, Mode, ObjectiveKind};
use sopwl_core::milp::{AdapterConfig, ADAPTER_ENV};
use sopwl_core::validation::DEFAULT_ZERO_FLOW_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Pwl,
    Sopwl,
    Both,
}

impl ModeArg {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::Pwl => vec![Mode::Pwl],
            ModeArg::Sopwl => vec![Mode::SoPwl],
            ModeArg::Both => vec![Mode::Pwl, Mode::SoPwl],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveArg {
    /// Maximize restored active load.
    Restoration,
    /// Restored load minus `--loss-weight` times the branch losses.
    LossPenalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PickupArg {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Table,
    Delimited,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Bundled case name (ieee33_4dg, toy2bus, empty2bus) or a case file path.
    #[arg(long, default_value = "ieee33_4dg")]
    pub case: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Sopwl)]
    pub mode: ModeArg,
    /// Segments per PWL block.
    #[arg(long, default_value_t = 50)]
    pub segments: usize,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Restoration)]
    pub objective: ObjectiveArg,
    #[arg(long, default_value_t = 1.0)]
    pub loss_weight: f64,
    #[arg(long, value_enum, default_value_t = PickupArg::Binary)]
    pub pickup: PickupArg,
    /// Solver command line; `{lp}` and `{sol}` are substituted.
    #[arg(long, env = ADAPTER_ENV)]
    pub adapter_cmd: Option<String>,
    /// Solver timeout in seconds.
    #[arg(long, default_value_t = 600)]
    pub timeout: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Flows below this magnitude (pu) get no relative error.
    #[arg(long, default_value_t = DEFAULT_ZERO_FLOW_FLOOR)]
    pub zero_flow_floor: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    pub format: FormatArg,
    /// TOML file whose keys override the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    case: Option<String>,
    mode: Option<ModeArg>,
    segments: Option<usize>,
    objective: Option<ObjectiveArg>,
    loss_weight: Option<f64>,
    pickup: Option<PickupArg>,
    adapter_cmd: Option<String>,
    timeout: Option<u64>,
    out: Option<PathBuf>,
    zero_flow_floor: Option<f64>,
    format: Option<FormatArg>,
}

impl RunArgs {
    /// Applies the config file, if any, and checks ranges.
    pub fn resolve(mut self) -> Result<Self> {
        if let Some(path) = self.config.clone() {
            self.apply_file(&path)?;
        }
        if self.segments == 0 {
            bail!("--segments must be at least 1");
        }
        if !(self.zero_flow_floor >= 0.0) {
            bail!("--zero-flow-floor must be nonnegative");
        }
        if self.timeout == 0 {
            bail!("--timeout must be positive");
        }
        Ok(self)
    }

    fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let f: FileConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = f.$field { self.$field = v; } )* };
        }
        take!(case, mode, segments, objective, loss_weight, pickup, timeout, out, zero_flow_floor, format);
        if f.adapter_cmd.is_some() {
            self.adapter_cmd = f.adapter_cmd;
        }
        Ok(())
    }

    pub fn build_options(&self, mode: Mode) -> BuildOptions {
        let objective = match self.objective {
            ObjectiveArg::Restoration => ObjectiveKind::Restoration,
            ObjectiveArg::LossPenalty => ObjectiveKind::RestorationWithLossPenalty { weight: self.loss_weight },
        };
        let load_pickup = match self.pickup {
            PickupArg::Binary => LoadPickup::Binary,
            PickupArg::Continuous => LoadPickup::Continuous,
        };
        BuildOptions { objective, load_pickup, ..BuildOptions::default().with_mode(mode).with_segments(self.segments) }
    }

    pub fn adapter(&self) -> Result<AdapterConfig> {
        let config = match &self.adapter_cmd {
            Some(cmd) if !cmd.trim().is_empty() => AdapterConfig::from_command_line(cmd)?,
            _ => AdapterConfig::bundled_highs(),
        };
        Ok(config.with_timeout(Duration::from_secs(self.timeout)))
    }
}

pub fn mode_dir(mode: Mode) -> &'static str {
    match mode {
        Mode::Pwl => "pwl",
        Mode::SoPwl => "sopwl",
    }
}
