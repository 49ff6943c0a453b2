//! Command-line surface: scenario runs with CSV telemetry, validation, and
//! preset listing.
//!
//! Exit codes: 0 success; 1 runtime failure; 2 usage or configuration
//! error; 3 safety violation (a pairwise distance reached the collision
//! radius); 4 singularity events; 5 saturation events when the scenario
//! sets `run.fail_on_saturation`; 6 I/O error (including refusing to
//! overwrite existing output without `--force`).

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{apply_overrides, parse_scenario, Scenario};
use crate::monitor::RunSummary;
use crate::presets;
use crate::sim::run_scenario_with;
use crate::telemetry::CsvSink;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SAFETY: i32 = 3;
pub const EXIT_SINGULARITY: i32 = 4;
pub const EXIT_SATURATION: i32 = 5;
pub const EXIT_IO: i32 = 6;

#[derive(Debug, Parser)]
#[command(
    name = "orbitswarm",
    about = "Deterministic unicycle-swarm simulation with collision-cone safety filters",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and emit CSV telemetry plus a summary.
    Run(RunArgs),
    /// Parse and validate a scenario file, reporting any issues.
    Validate(ValidateArgs),
    /// Inspect the shipped scenario presets.
    Presets(PresetsArgs),
}

#[derive(Debug, Parser)]
pub struct RunArgs {
    /// Scenario file to run.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,

    /// Shipped preset name to run instead of a file.
    #[arg(long)]
    pub preset: Option<String>,

    /// Output directory for robots.csv, pairs.csv, summary.csv.
    #[arg(long)]
    pub out: PathBuf,

    /// Seed for the scenario's random draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Scenario overrides as dotted key=value pairs (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Stop at the first collision instead of continuing and flagging.
    #[arg(long)]
    pub halt_on_collision: bool,

    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Parser)]
pub struct ValidateArgs {
    /// Scenario file to check.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,

    /// Shipped preset name to check instead of a file.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Parser)]
pub struct PresetsArgs {
    #[command(subcommand)]
    pub action: PresetsAction,
}

#[derive(Debug, Subcommand)]
pub enum PresetsAction {
    /// List preset names and one-line descriptions.
    List,
    /// Print a preset's scenario document.
    Show { name: String },
}

/// Resolved run request; mirrors the `run` subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario_text: String,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub overrides: Vec<String>,
    pub halt_on_collision: bool,
    pub force: bool,
}

fn load_scenario_text(
    config: &Option<PathBuf>,
    preset: &Option<String>,
) -> Result<String, (i32, String)> {
    match (config, preset) {
        (Some(path), None) => std::fs::read_to_string(path)
            .map_err(|e| (EXIT_USAGE, format!("cannot read {}: {e}", path.display()))),
        (None, Some(name)) => presets::get(name)
            .map(|p| p.text.to_string())
            .ok_or_else(|| {
                (
                    EXIT_USAGE,
                    format!(
                        "unknown preset `{name}` (available: {})",
                        presets::PRESETS
                            .iter()
                            .map(|p| p.name)
                            .collect::<Vec<_>>()
                            .join(", ")
                    ),
                )
            }),
        _ => Err((EXIT_USAGE, "give exactly one of --config or --preset".into())),
    }
}

fn prepare_scenario(cfg: &RunConfig) -> Result<Scenario, (i32, String)> {
    let text = apply_overrides(&cfg.scenario_text, &cfg.overrides)
        .map_err(|e| (EXIT_USAGE, e.to_string()))?;
    let mut scenario = parse_scenario(&text).map_err(|e| (EXIT_USAGE, e.to_string()))?;
    if cfg.halt_on_collision {
        scenario.run.halt_on_collision = true;
    }
    Ok(scenario)
}

/// Executes a run request end to end and returns the process exit code.
pub fn run_command(cfg: &RunConfig) -> i32 {
    let scenario = match prepare_scenario(cfg) {
        Ok(s) => s,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };

    if let Err(e) = std::fs::create_dir_all(&cfg.out_dir) {
        eprintln!("error: cannot create {}: {e}", cfg.out_dir.display());
        return EXIT_IO;
    }
    let mut sink = match CsvSink::create(&cfg.out_dir, scenario.run.record_stride, cfg.force) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_IO;
        }
    };

    let summary = match run_scenario_with(&scenario, cfg.seed, &mut sink) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return match e {
                crate::sim::SimError::Invalid(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            };
        }
    };

    let files = match sink.finish() {
        Ok(files) => files,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_IO;
        }
    };

    print!("{}", summary.render_text(scenario.safety.r));
    for file in files {
        println!("wrote {}", file.display());
    }

    exit_code_for(&scenario, &summary)
}

/// Failure classes in precedence order: safety, then singularity, then
/// (when the scenario opts in) saturation.
pub fn exit_code_for(scenario: &Scenario, summary: &RunSummary) -> i32 {
    if summary.totals.collisions > 0 {
        EXIT_SAFETY
    } else if summary.totals.singularities > 0 {
        EXIT_SINGULARITY
    } else if scenario.run.fail_on_saturation && summary.totals.saturations > 0 {
        EXIT_SATURATION
    } else {
        EXIT_OK
    }
}

pub fn validate_command(args: &ValidateArgs) -> i32 {
    let text = match load_scenario_text(&args.config, &args.preset) {
        Ok(t) => t,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    match parse_scenario(&text) {
        Ok(sc) => {
            println!(
                "scenario OK: {} robots, {} swarms, duration {}s at dt {}s",
                sc.total_robots(),
                sc.swarms.len(),
                sc.run.duration,
                sc.run.dt
            );
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn presets_command(args: &PresetsArgs) -> i32 {
    match &args.action {
        PresetsAction::List => {
            for preset in presets::PRESETS {
                println!("{:24}{}", preset.name, preset.description);
            }
            EXIT_OK
        }
        PresetsAction::Show { name } => match presets::get(name) {
            Some(preset) => {
                print!("{}", preset.text);
                EXIT_OK
            }
            None => {
                eprintln!("error: unknown preset `{name}`");
                EXIT_USAGE
            }
        },
    }
}

/// Dispatches a parsed command line.
pub fn dispatch(cli: Cli) -> i32 {
    match cli.command {
        Command::Run(args) => {
            let text = match load_scenario_text(&args.config, &args.preset) {
                Ok(t) => t,
                Err((code, msg)) => {
                    eprintln!("error: {msg}");
                    return code;
                }
            };
            run_command(&RunConfig {
                scenario_text: text,
                out_dir: args.out,
                seed: args.seed,
                overrides: args.overrides,
                halt_on_collision: args.halt_on_collision,
                force: args.force,
            })
        }
        Command::Validate(args) => validate_command(&args),
        Command::Presets(args) => presets_command(&args),
    }
}
