//! carbonsim command line: profiling, scheduling, simulation, sweeps, and
//! closed-form sensitivity analysis, all driven by one JSON plan.
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 the command
//! ran but produced only infeasible (or fallback-only) results.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod plot;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable overriding the output directory.
pub const OUTPUT_DIR_ENV: &str = "CARBONSIM_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "carbonsim", version, about = "Carbon-accounted LLM serving simulator")]
struct Cli {
    /// Path to the JSON experiment plan.
    #[arg(long, global = true, default_value = "configs/default.json")]
    config: PathBuf,

    /// Override plan values by dotted path, e.g. --set sim.duration_s=10.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    overrides: Vec<String>,

    /// Output directory (precedence: this flag, then CARBONSIM_OUTPUT_DIR,
    /// then the plan's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the profiling database over every (config, application, qps) cell.
    Profile,
    /// Complete the profile matrices and pick a configuration per workload.
    Schedule {
        /// Profile database CSV (defaults to `<out>/profile_db.csv`).
        #[arg(long)]
        database: Option<PathBuf>,
        /// SLO attainment target in (0, 1].
        #[arg(long)]
        slo_target: Option<f64>,
        /// Fallback priority: slo | default.
        #[arg(long)]
        priority: Option<String>,
    },
    /// Simulate one configuration on one workload and emit raw reports.
    Simulate {
        #[arg(long)]
        config_id: String,
        #[arg(long)]
        app: String,
        #[arg(long)]
        qps: f64,
        /// Request size percentile: p25 | p50 | p75.
        #[arg(long)]
        percentile: Option<String>,
    },
    /// Re-run scheduling along one axis and emit savings tables plus plots.
    Sweep {
        /// Axis: qps | carbon_intensity | lifetime | bandwidth.
        #[arg(long)]
        axis: String,
        /// Application (defaults to the plan's sweeps.application).
        #[arg(long)]
        app: Option<String>,
    },
    /// Closed-form savings sensitivity from two simulated operating points.
    Analyze {
        /// Disaggregated configuration to compare against the default
        /// (defaults to the cheapest feasible disaggregated config).
        #[arg(long)]
        config_id: Option<String>,
        #[arg(long)]
        app: Option<String>,
        #[arg(long)]
        qps: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let plan = match carbonsim::config::load_plan(&cli.config, &cli.overrides) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var(OUTPUT_DIR_ENV).ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(&plan.output_dir));

    let result = match &cli.command {
        Command::Profile => commands::cmd_profile(&plan, &out_dir),
        Command::Schedule {
            database,
            slo_target,
            priority,
        } => commands::cmd_schedule(
            &plan,
            &out_dir,
            database.as_deref(),
            *slo_target,
            priority.as_deref(),
        ),
        Command::Simulate {
            config_id,
            app,
            qps,
            percentile,
        } => commands::cmd_simulate(&plan, &out_dir, config_id, app, *qps, percentile.as_deref()),
        Command::Sweep { axis, app } => commands::cmd_sweep(&plan, &out_dir, axis, app.as_deref()),
        Command::Analyze {
            config_id,
            app,
            qps,
        } => commands::cmd_analyze(&plan, &out_dir, config_id.as_deref(), app.as_deref(), *qps),
    };

    match result {
        Ok(commands::Outcome::Ok) => ExitCode::SUCCESS,
        Ok(commands::Outcome::InfeasibleOnly) => {
            eprintln!("warning: all results are infeasible or fallback-only");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
