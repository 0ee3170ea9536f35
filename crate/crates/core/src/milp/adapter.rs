//! Solver adapters.
//!
//! The contract is file based: the model is written as LP text, the solver is
//! handed the LP path and a solution path, and the solution file is read back
//! with [`parse_solution`]. [`SubprocessAdapter`] runs an external command;
//! [`FnAdapter`] wraps an in-process callback.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

use super::{parse_solution, write_lp, MilpModel, Solution, SolveStatus};
use crate::{Error, Result};

/// Environment variable holding the default adapter command line.
pub const ADAPTER_ENV: &str = "SOPWL_ADAPTER_CMD";

pub struct AdapterOutput {
    pub solution_text: String,
    pub log_path: Option<PathBuf>,
}

pub trait SolverAdapter: Send + Sync {
    /// Solves the model in `lp_path` and returns the solution text.
    fn run(&self, lp_path: &Path, workdir: &Path) -> Result<AdapterOutput>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterConfig {
    pub program: String,
    /// Argument template; `{lp}` and `{sol}` are replaced by the file paths.
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl AdapterConfig {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

    /// Splits a whitespace-separated command line. Placeholders `{lp}` and
    /// `{sol}` are appended when absent.
    pub fn from_command_line(cmd: &str) -> Result<Self> {
        let mut parts = cmd.split_whitespace().map(str::to_owned);
        let program = parts.next().ok_or_else(|| Error::Argument("empty adapter command".into()))?;
        let mut args: Vec<String> = parts.collect();
        if !args.iter().any(|a| a.contains("{lp}")) {
            args.push("{lp}".into());
        }
        if !args.iter().any(|a| a.contains("{sol}")) {
            args.push("{sol}".into());
        }
        Ok(AdapterConfig { program, args, timeout: Self::DEFAULT_TIMEOUT })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// The HiGHS script shipped in this repository's `tools/` directory.
    pub fn bundled_highs() -> Self {
        let script = concat!(env!("CARGO_MANIFEST_DIR"), "/../../tools/highs_adapter.py");
        AdapterConfig {
            program: "python3".into(),
            args: vec![script.into(), "{lp}".into(), "{sol}".into()],
            timeout: Self::DEFAULT_TIMEOUT,
        }
    }

    /// `$SOPWL_ADAPTER_CMD` when set, else [`AdapterConfig::bundled_highs`].
    pub fn from_env_or_bundled() -> Result<Self> {
        match std::env::var(ADAPTER_ENV) {
            Ok(cmd) if !cmd.trim().is_empty() => Self::from_command_line(&cmd),
            _ => Ok(Self::bundled_highs()),
        }
    }
}

pub struct SubprocessAdapter {
    pub config: AdapterConfig,
}

impl SubprocessAdapter {
    pub fn new(config: AdapterConfig) -> Self {
        SubprocessAdapter { config }
    }
}

impl SolverAdapter for SubprocessAdapter {
    fn run(&self, lp_path: &Path, workdir: &Path) -> Result<AdapterOutput> {
        let sol_path = workdir.join("model.sol");
        let log_path = workdir.join("solver.log");
        let _ = fs::remove_file(&sol_path);
        let lp = lp_path.to_string_lossy();
        let sol = sol_path.to_string_lossy();
        let args: Vec<String> =
            self.config.args.iter().map(|a| a.replace("{lp}", &lp).replace("{sol}", &sol)).collect();

        let log = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
        let log_err = log.try_clone().map_err(|e| Error::io(&log_path, e))?;
        let cmd_line = format!("{} {}", self.config.program, args.join(" "));
        log::debug!("running solver: {cmd_line}");
        let mut child = Command::new(&self.config.program)
            .args(&args)
            .stdin(Stdio::null())
            .stdout(log)
            .stderr(log_err)
            .spawn()
            .map_err(|source| Error::AdapterLaunch { cmd: cmd_line.clone(), source })?;

        let status = match child.wait_timeout(self.config.timeout).map_err(|e| Error::io(&log_path, e))? {
            Some(status) => status,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::Timeout(self.config.timeout.as_secs()));
            }
        };
        if !status.success() {
            let tail = fs::read_to_string(&log_path).unwrap_or_default();
            let tail: Vec<&str> = tail.lines().rev().take(5).collect();
            return Err(Error::Solver(format!(
                "`{cmd_line}` exited with {status}; log tail: {}",
                tail.into_iter().rev().collect::<Vec<_>>().join(" | ")
            )));
        }
        let solution_text = fs::read_to_string(&sol_path).map_err(|e| Error::io(&sol_path, e))?;
        Ok(AdapterOutput { solution_text, log_path: Some(log_path) })
    }
}

/// In-process adapter: the callback receives the LP text and returns solution text.
pub struct FnAdapter<F>(pub F);

impl<F> SolverAdapter for FnAdapter<F>
where
    F: Fn(&str) -> Result<String> + Send + Sync,
{
    fn run(&self, lp_path: &Path, _workdir: &Path) -> Result<AdapterOutput> {
        let text = fs::read_to_string(lp_path).map_err(|e| Error::io(lp_path, e))?;
        Ok(AdapterOutput { solution_text: (self.0)(&text)?, log_path: None })
    }
}

#[derive(Debug, Clone)]
pub struct SolveRun {
    pub solution: Solution,
    pub wall_time: Duration,
    pub lp_path: PathBuf,
    pub log_path: Option<PathBuf>,
}

/// Writes `model.lp` into `workdir`, runs the adapter and parses its output.
pub fn solve(model: &MilpModel, adapter: &dyn SolverAdapter, workdir: &Path) -> Result<SolveRun> {
    let text = write_lp(model)?;
    fs::create_dir_all(workdir).map_err(|e| Error::io(workdir, e))?;
    let lp_path = workdir.join("model.lp");
    fs::write(&lp_path, text).map_err(|e| Error::io(&lp_path, e))?;

    let start = Instant::now();
    let out = adapter.run(&lp_path, workdir)?;
    let wall_time = start.elapsed();

    let solution = parse_solution(&out.solution_text, model)?;
    if solution.status == SolveStatus::Error {
        return Err(Error::Solver("solver reported status `error`".into()));
    }
    Ok(SolveRun { solution, wall_time, lp_path, log_path: out.log_path })
}
