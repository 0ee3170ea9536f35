//! `sopwl`: build, export, solve and check PWL / SO-PWL restoration models.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;
use sopwl_core::distflow::{build_restoration_model, DistFlowArtifacts, Mode, NetworkCase};
use sopwl_core::milp::{parse_solution, recheck, solve, write_lp, MilpModel, Solution, SolveStatus, SubprocessAdapter, Violation, FEAS_TOL};
use sopwl_core::validation::{
    branch_errors, compare_voltages, comparison_table, injections_from_solution, radial_sweep, ErrorReport,
    SweepResult, VoltageComparison, STUDY_FEEDERS,
};

use config::{mode_dir, FormatArg, ModeArg, RunArgs};

#[derive(Parser)]
#[command(name = "sopwl", version, about = "PWL and SO-PWL DistFlow restoration models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, solve and check; writes everything under --out/<mode>/.
    Solve(RunArgs),
    /// Write the model as LP text to --out/<mode>/model.lp.
    ExportLp(RunArgs),
    /// Check an existing solution file against the model.
    Validate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        solution: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => args.resolve().and_then(|a| cmd_solve(&a)),
        Command::ExportLp(args) => args.resolve().and_then(|a| cmd_export_lp(&a)),
        Command::Validate { run, solution } => run.resolve().and_then(|a| cmd_validate(&a, &solution)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_case(args: &RunArgs) -> Result<NetworkCase> {
    NetworkCase::resolve(&args.case).with_context(|| format!("resolving case `{}`", args.case))
}

fn build(args: &RunArgs, case: &NetworkCase, mode: Mode) -> Result<(MilpModel, DistFlowArtifacts)> {
    Ok(build_restoration_model(case, &args.build_options(mode))?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_export_lp(args: &RunArgs) -> Result<bool> {
    let case = load_case(args)?;
    for mode in args.mode.modes() {
        let (model, _) = build(args, &case, mode)?;
        let dir = args.out.join(mode_dir(mode));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("model.lp");
        write(&path, &write_lp(&model)?)?;
        println!("{}", path.display());
    }
    Ok(true)
}

/// Everything checked after a solution is in hand.
struct Analysis {
    violations: Vec<Violation>,
    report: ErrorReport,
    sweep: std::result::Result<(SweepResult, VoltageComparison), String>,
}

impl Analysis {
    fn run(args: &RunArgs, case: &NetworkCase, model: &MilpModel, art: &DistFlowArtifacts, sol: &Solution) -> Result<Self> {
        let violations = recheck(model, sol.values(), FEAS_TOL);
        let report = branch_errors(sol, art, args.zero_flow_floor)?;
        let sweep = injections_from_solution(case, art, sol)
            .and_then(|inj| radial_sweep(case, &inj, art.options.v_norm))
            .and_then(|s| compare_voltages(case, art, sol, &s).map(|c| (s, c)))
            .map_err(|e| e.to_string());
        Ok(Analysis { violations, report, sweep })
    }

    fn passed(&self) -> bool {
        self.violations.is_empty() && (self.report.mode == Mode::Pwl || self.report.all_eso_ok()) && self.sweep.is_ok()
    }

    fn write_files(&self, dir: &Path) -> Result<()> {
        write(&dir.join("report.txt"), &self.report.to_table())?;
        write(&dir.join("report.csv"), &self.report.to_delimited())?;
        write(&dir.join("fillings.csv"), &self.report.filling_dump())?;
        if let Ok((_, cmp)) = &self.sweep {
            write(&dir.join("voltages.csv"), &cmp.to_delimited())?;
        }
        Ok(())
    }

    fn print(&self, format: FormatArg) {
        match format {
            FormatArg::Table => print!("{}", self.report.to_table()),
            FormatArg::Delimited => print!("{}", self.report.to_delimited()),
        }
        let tabulated: Vec<_> = STUDY_FEEDERS.iter().filter_map(|&(f, t)| self.report.record(f, t)).collect();
        if tabulated.len() == STUDY_FEEDERS.len() {
            let cells: Vec<String> = tabulated
                .iter()
                .map(|r| format!("{} {}", r.feeder(), r.p.e.map_or("-".into(), |e| format!("{e:.4}"))))
                .collect();
            println!("E_p on feeders {}", cells.join(", "));
        }
        let over = self.report.bound_violations(1e-6);
        println!("ordered branches within h^2/(4y^2): {}", if over.is_empty() { "all".to_string() } else { format!("{over:?} exceed") });
        for v in &self.violations {
            println!("violated {}: lhs {} {} {} (by {:e})", v.tag, v.lhs, v.sense.symbol(), v.rhs, v.amount);
        }
        match &self.sweep {
            Ok((s, c)) => println!(
                "sweep: {} iteration(s), max |V^2 model - V^2 sweep| {:e}, root slack ({:e}, {:e})",
                s.iterations, c.max_abs_dev, s.root_slack.0, s.root_slack.1
            ),
            Err(e) => println!("sweep failed: {e}"),
        }
        let mode = self.report.mode;
        if mode == Mode::SoPwl && !self.report.all_eso_ok() {
            println!("ordering check failed: some SO-PWL filling is not ordered");
        }
        println!("checks {}", if self.passed() { "passed" } else { "FAILED" });
    }

    fn json(&self) -> serde_json::Value {
        let feeders: serde_json::Map<String, serde_json::Value> = STUDY_FEEDERS
            .iter()
            .filter_map(|&(f, t)| self.report.record(f, t))
            .map(|r| (r.feeder(), json!(r.p.e)))
            .collect();
        json!({
            "max_e_p": self.report.max_e_p(),
            "mean_e_p": self.report.mean_e_p(),
            "feeder_e_p": feeders,
            "all_eso_ok": self.report.all_eso_ok(),
            "violations": self.violations.iter().map(|v| v.tag.clone()).collect::<Vec<_>>(),
            "sweep_iterations": self.sweep.as_ref().ok().map(|(s, _)| s.iterations),
            "max_voltage_deviation": self.sweep.as_ref().ok().map(|(_, c)| c.max_abs_dev),
            "sweep_error": self.sweep.as_ref().err(),
            "checks_passed": self.passed(),
        })
    }
}

struct Outcome {
    mode: Mode,
    status: SolveStatus,
    objective: f64,
    analysis: Option<Analysis>,
}

fn solve_one(args: &RunArgs, case: &NetworkCase, mode: Mode) -> Result<Outcome> {
    let (model, art) = build(args, case, mode)?;
    let dir = args.out.join(mode_dir(mode));
    let adapter = SubprocessAdapter::new(args.adapter()?);
    let run = solve(&model, &adapter, &dir).with_context(|| format!("{} solve", mode.label()))?;
    let sol = &run.solution;
    write(&dir.join("solution.txt"), &sol.to_text(&model))?;

    let analysis = match sol.status {
        SolveStatus::Optimal => Some(Analysis::run(args, case, &model, &art, sol)?),
        _ => None,
    };
    if let Some(a) = &analysis {
        a.write_files(&dir)?;
    }
    let meta = json!({
        "case": case.name,
        "mode": mode.label(),
        "segments": args.segments,
        "objective_kind": format!("{:?}", art.options.objective),
        "load_pickup": format!("{:?}", art.options.load_pickup),
        "status": sol.status.token(),
        "objective": sol.status.has_values().then_some(sol.objective_value),
        "solve_time_s": run.wall_time.as_secs_f64(),
        "variables": model.variables().len(),
        "binaries": model.num_binaries(),
        "constraints": model.constraints().len(),
        "checks": analysis.as_ref().map(Analysis::json),
    });
    write(&dir.join("run.json"), &serde_json::to_string_pretty(&meta)?)?;
    Ok(Outcome { mode, status: sol.status, objective: sol.objective_value, analysis })
}

fn cmd_solve(args: &RunArgs) -> Result<bool> {
    let case = load_case(args)?;
    let case = &case;
    let modes = args.mode.modes();
    // the two modes are independent models
    let outcomes: Vec<Result<Outcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = modes.iter().map(|&m| s.spawn(move || solve_one(args, case, m))).collect();
        handles.into_iter().map(|h| h.join().expect("solve thread panicked")).collect()
    });

    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let mut ok = true;
    let mut reports = Vec::new();
    for o in &outcomes {
        println!("== {} ({}): status {}, objective {}", o.mode.label(), case.name, o.status.token(), o.objective);
        match &o.analysis {
            Some(a) => {
                a.print(args.format);
                ok &= a.passed();
                reports.push(&a.report);
            }
            None => {
                eprintln!("error: {} solve ended with status `{}`", o.mode.label(), o.status.token());
                ok = false;
            }
        }
    }
    if args.mode == ModeArg::Both {
        if let [a, b] = reports.as_slice() {
            let table = comparison_table(a, b, &[]);
            write(&args.out.join("comparison.csv"), &table)?;
            println!("== comparison");
            let tabulated = STUDY_FEEDERS.iter().all(|&(f, t)| a.record(f, t).is_some());
            let rows: &[(usize, usize)] = if tabulated { &STUDY_FEEDERS } else { &[] };
            print!("{}", comparison_table(a, b, rows));
        }
    }
    Ok(ok)
}

fn cmd_validate(args: &RunArgs, solution: &Path) -> Result<bool> {
    if args.mode == ModeArg::Both {
        bail!("validate checks one model; pass --mode pwl or --mode sopwl");
    }
    let case = load_case(args)?;
    let mode = args.mode.modes()[0];
    let (model, art) = build(args, &case, mode)?;
    let text = fs::read_to_string(solution).with_context(|| format!("reading {}", solution.display()))?;
    let sol = parse_solution(&text, &model).with_context(|| format!("parsing {}", solution.display()))?;
    if sol.status != SolveStatus::Optimal {
        bail!("solution status is `{}`; nothing to validate", sol.status.token());
    }
    let analysis = Analysis::run(args, &case, &model, &art, &sol)?;
    let dir = args.out.join(mode_dir(mode));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    analysis.write_files(&dir)?;
    analysis.print(args.format);
    Ok(analysis.passed())
}
