//! Thin CLI over the scenario runner: runs a named scenario and writes the
//! tick log as CSV.
//!
//! Exit codes: 0 completed, 2 toppled, 3 solver failure.

use clap::{Args, Parser, Subcommand};
use quadmpc::config::RobotConfig;
use quadmpc::mpc::ReferenceMode;
use quadmpc::sim::{run_scenario, Outcome, ScenarioKind, ScenarioOptions, SCENARIO_NAMES};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "quadmpc", about = "Quadruped MPC locomotion simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop scenario and write a CSV log.
    Run(RunArgs),
    /// List the available scenarios.
    Scenarios,
    /// Print the effective configuration (defaults merged with --config).
    Config(ConfigArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name; see `quadmpc scenarios`.
    #[arg(long)]
    scenario: String,
    /// Simulated duration, seconds.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Optional configuration file overriding the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path; omit to skip writing a log.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Lateral pulse magnitude for the disturbance scenario, newtons.
    #[arg(long, default_value_t = 100.0)]
    force: f64,
    /// Fall height for the drop scenario, meters.
    #[arg(long, default_value_t = 0.8)]
    drop_height: f64,
    /// Slope for the incline scenario, degrees.
    #[arg(long, default_value_t = 20.0)]
    incline_deg: f64,
    /// Height reference model override: constant, sine or ramp.
    #[arg(long, value_parser = parse_ref_mode)]
    ref_model: Option<ReferenceMode>,
    /// MPC update rate override, Hz.
    #[arg(long)]
    mpc_rate: Option<f64>,
    /// MPC horizon override, steps.
    #[arg(long)]
    horizon: Option<usize>,
    /// Seed for the deterministic initial-pose perturbation (0 = none).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_ref_mode(s: &str) -> Result<ReferenceMode, String> {
    match s {
        "constant" => Ok(ReferenceMode::Constant),
        "sine" => Ok(ReferenceMode::Sine),
        "ramp" => Ok(ReferenceMode::Ramp),
        other => Err(format!("unknown reference model {other:?} (expected constant, sine or ramp)")),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RobotConfig, String> {
    match path {
        Some(p) => RobotConfig::load(p).map_err(|e| e.to_string()),
        None => Ok(RobotConfig::default()),
    }
}

fn run(args: &RunArgs) -> Result<ExitCode, String> {
    let kind = ScenarioKind::from_name(&args.scenario).map_err(|e| e.to_string())?;
    let mut cfg = load_config(&args.config)?;
    if let Some(rate) = args.mpc_rate {
        cfg.mpc.update_rate = rate;
    }
    if let Some(h) = args.horizon {
        cfg.mpc.horizon = h;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    let opts = ScenarioOptions {
        duration: args.duration,
        force: args.force,
        drop_height: args.drop_height,
        incline_deg: args.incline_deg,
        ref_mode: args.ref_model,
        seed: args.seed,
    };

    let result = run_scenario(kind, &cfg, &opts).map_err(|e| e.to_string())?;
    if let Some(out) = &args.out {
        quadmpc::sim::log::write_log(out, &result.records)
            .map_err(|e| format!("failed to write {}: {e}", out.display()))?;
    }

    let m = &result.metrics;
    println!("scenario:        {}", kind.name());
    println!("outcome:         {:?}", result.outcome);
    println!("ticks:           {}", m.ticks);
    println!("distance:        {:.3} m", m.distance_traveled);
    println!("max tilt:        {:.2} deg", m.max_tilt.to_degrees());
    println!("mean |z error|:  {:.4} m", m.mean_height_error);
    if let Some(rt) = m.recovery_time {
        println!("recovery time:   {rt:.2} s");
    }
    if let Some(st) = m.stall_time {
        println!("stall detected:  t = {st:.2} s");
    }
    if let Some(tt) = m.transition_time {
        println!("transition time: {tt:.2} s");
    }
    println!(
        "solve time:      mean {:.2} ms, max {:.2} ms",
        m.mean_solve_ms, m.max_solve_ms
    );

    Ok(match result.outcome {
        Outcome::Completed => ExitCode::SUCCESS,
        Outcome::Toppled => ExitCode::from(2),
        Outcome::SolverFailed => ExitCode::from(3),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Scenarios => {
            for name in SCENARIO_NAMES {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Config(args) => load_config(&args.config).map(|cfg| {
            print!("{}", cfg.to_file_string());
            ExitCode::SUCCESS
        }),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
