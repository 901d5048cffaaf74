//! `mars` command-line front end. Exit codes: 0 ok or controllable, 1 input
//! error, 2 uncontrollable, 3 planning failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{read_json, AssemblyDoc, Params, SimulateConfig, SweepConfig};
use crate::controllability::controllability_margin;
use crate::error::{ConfigError, PlanError, SimError};
use crate::planner::{plan_reconfiguration, PlanMode, ReconfigPlan};
use crate::sim::{run_scenario, Scenario, SimSettings, TrackingResult};
use crate::sweep::{sweep, FaultFamily, SweepRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNCONTROLLABLE: i32 = 2;
pub const EXIT_PLAN_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mars", version, about = "Controllability margin analysis and reconfiguration planning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Margin and controllability verdict of one assembly.
    Analyze(IoArgs),
    /// Margin table over a fault family, one row per symmetry class.
    Sweep(IoArgs),
    /// Reconfiguration plan for an assembly with one faulty unit.
    Plan(PlanArgs),
    /// Closed-loop tracking run of one scenario.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct IoArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long, value_enum, default_value = "partial")]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Number of runs; run `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    /// Overrides the seed of the simulation settings.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Full,
    Partial,
}

impl From<ModeArg> for PlanMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => PlanMode::Full,
            ModeArg::Partial => PlanMode::Partial,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanReport {
    pub target: AssemblyDoc,
    pub target_cm: f64,
    /// Unit ids of the block that carries the faulty unit.
    pub carrier: Option<Vec<u32>>,
    pub carrier_cm: Option<f64>,
    pub cm_evaluations: usize,
    pub plan: ReconfigPlan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub rmse: [f64; 4],
    pub rmse_total: f64,
    pub crashed: bool,
    pub crash_time: Option<f64>,
    pub saturation_fraction: f64,
    pub steps: usize,
}

impl RunSummary {
    fn new(run: usize, seed: u64, r: &TrackingResult) -> Self {
        Self {
            run,
            seed,
            rmse: r.rmse,
            rmse_total: r.rmse_total,
            crashed: r.crashed,
            crash_time: r.crash_time,
            saturation_fraction: r.saturation_fraction,
            steps: r.steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimReport {
    pub scenario: Scenario,
    pub settings: SimSettings,
    pub runs: Vec<RunSummary>,
    pub mean_rmse_total: f64,
    pub crashed_runs: usize,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure { code: EXIT_INPUT, message: e.to_string() }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure { code: EXIT_INPUT, message: e.to_string() }
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        let code = match e {
            PlanError::NoFaultPresent | PlanError::MultipleFaults(_) | PlanError::Model(_) => EXIT_INPUT,
            _ => EXIT_PLAN_FAILED,
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_INPUT, message: format!("cannot write {}: {e}", path.display()) }
}

/// `out.json` -> `out.<tag>.csv`.
pub fn sidecar(output: &Path, tag: &str) -> PathBuf {
    output.with_extension(format!("{tag}.csv"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_failure(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), Failure> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| io_failure(path, e))?;
    w.write_record(header).map_err(|e| io_failure(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_failure(path, e))?;
    }
    w.flush().map_err(|e| io_failure(path, e))
}

/// Runs one command and returns its exit code. Diagnostics go to stderr.
pub fn run(cli: &Cli) -> i32 {
    let result = Params::load().map_err(Failure::from).and_then(|params| match &cli.command {
        Command::Analyze(io) => analyze(io, &params),
        Command::Sweep(io) => sweep_cmd(io, &params),
        Command::Plan(args) => plan(args, &params),
        Command::Simulate(args) => simulate(args, &params),
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn analyze(io: &IoArgs, params: &Params) -> Result<i32, Failure> {
    let doc: AssemblyDoc = read_json(&io.input)?;
    let a = doc.build(params)?;
    let report = controllability_margin(&a).map_err(PlanError::from)?;
    let summary = report.summary();
    write_json(&io.output, &summary)?;
    println!(
        "cm {} controllable {} rank_ok {} degenerate {}",
        summary.cm, summary.controllable, summary.rank_ok, summary.degenerate
    );
    Ok(if summary.controllable { EXIT_OK } else { EXIT_UNCONTROLLABLE })
}

fn sweep_cmd(io: &IoArgs, params: &Params) -> Result<i32, Failure> {
    let cfg: SweepConfig = read_json(&io.input)?;
    let base = cfg.assembly.build(params)?;
    let rows = sweep(&base, &cfg.family)?;
    write_sweep_csv(&io.output, &cfg.family, &rows)?;
    println!("{} classes", rows.len());
    Ok(EXIT_OK)
}

fn write_sweep_csv(path: &Path, family: &FaultFamily, rows: &[SweepRow]) -> Result<(), Failure> {
    let family = match family {
        FaultFamily::SingleUnit => "single_unit".to_string(),
        FaultFamily::UnitPairs => "unit_pairs".to_string(),
        FaultFamily::SingleRotor { unit } => format!("single_rotor:{unit}"),
    };
    write_csv(
        path,
        &["class", "family", "fault", "cm", "verdict", "members"],
        rows.iter().map(|r| {
            vec![
                r.class.to_string(),
                family.clone(),
                r.faults[0].clone(),
                r.cm.to_string(),
                if r.controllable { "controllable" } else { "uncontrollable" }.to_string(),
                r.faults.join("; "),
            ]
        }),
    )
}

fn plan(args: &PlanArgs, params: &Params) -> Result<i32, Failure> {
    let doc: AssemblyDoc = read_json(&args.io.input)?;
    let a = doc.build(params)?;
    let outcome = plan_reconfiguration(&a, args.mode.into())?;
    let report = PlanReport {
        target: AssemblyDoc::from_assembly(&outcome.target.assembly),
        target_cm: outcome.target.cm.expect("target margin is evaluated"),
        carrier: outcome.carrier.as_ref().map(|c| c.assembly.ids()),
        carrier_cm: outcome.carrier.as_ref().and_then(|c| c.cm),
        cm_evaluations: outcome.cm_evaluations,
        plan: outcome.plan,
    };
    write_json(&args.io.output, &report)?;
    write_csv(
        &sidecar(&args.io.output, "trace"),
        &["step", "structure_id", "cm"],
        report.plan.trace().iter().map(|r| vec![r.step.to_string(), r.structure_id.to_string(), r.cm.to_string()]),
    )?;
    println!(
        "{} steps, min intermediate cm {}, final cm {}",
        report.plan.step_count, report.plan.min_intermediate_cm, report.plan.final_cm
    );
    Ok(EXIT_OK)
}

fn simulate(args: &SimulateArgs, params: &Params) -> Result<i32, Failure> {
    let cfg: SimulateConfig = read_json(&args.io.input)?;
    let a = cfg.assembly.build(params)?;
    let mut settings = cfg.settings.clone().unwrap_or_else(|| params.simulation.clone());
    if let Some(seed) = args.seed {
        settings.seed = seed;
    }
    settings.validate()?;
    if args.repeat == 0 {
        return Err(Failure { code: EXIT_INPUT, message: "--repeat must be at least 1".into() });
    }
    if args.repeat > 1 && settings.noise_std == 0.0 {
        log::warn!("noise_std is 0; repeated runs are identical");
    }
    let mut runs = Vec::with_capacity(args.repeat);
    let mut first_trace = None;
    for i in 0..args.repeat {
        let s = SimSettings { seed: settings.seed.wrapping_add(i as u64), ..settings.clone() };
        let r = run_scenario(&a, cfg.scenario, &s)?;
        runs.push(RunSummary::new(i, s.seed, &r));
        first_trace.get_or_insert(r.trace);
    }
    let report = SimReport {
        scenario: cfg.scenario,
        mean_rmse_total: runs.iter().map(|r| r.rmse_total).sum::<f64>() / runs.len() as f64,
        crashed_runs: runs.iter().filter(|r| r.crashed).count(),
        settings,
        runs,
    };
    write_json(&args.io.output, &report)?;
    write_csv(
        &sidecar(&args.io.output, "trace"),
        &["t", "p_z", "phi", "theta", "psi", "v_z", "w_x", "w_y", "w_z"],
        first_trace
            .unwrap_or_default()
            .iter()
            .map(|p| std::iter::once(p.t).chain(p.x).map(|v| v.to_string()).collect()),
    )?;
    write_csv(
        &sidecar(&args.io.output, "runs"),
        &[
            "run",
            "seed",
            "rmse_total",
            "rmse_p_z",
            "rmse_phi",
            "rmse_theta",
            "rmse_psi",
            "crashed",
            "saturation_fraction",
        ],
        report.runs.iter().map(|r| {
            let mut row = vec![r.run.to_string(), r.seed.to_string(), r.rmse_total.to_string()];
            row.extend(r.rmse.iter().map(|v| v.to_string()));
            row.push(r.crashed.to_string());
            row.push(r.saturation_fraction.to_string());
            row
        }),
    )?;
    println!(
        "{}: mean rmse {} over {} runs, {} crashed",
        cfg.scenario.name(),
        report.mean_rmse_total,
        report.runs.len(),
        report.crashed_runs
    );
    Ok(EXIT_OK)
}
