//! Lattice gauge laboratory command line. `make-field` constructs catalog
//! connections, `run <command>` dispatches analysis and solver runs, and
//! `schema` prints the configuration schema. Exit codes: 0 success, 1
//! invalid configuration or input, 2 failed check, 3 non-convergence.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{Ctx, Outcome};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "ymlab", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Construct a catalog field and archive it.
    MakeField(CommonArgs),
    /// Run one analysis or solver command against a field.
    Run {
        #[arg(value_enum)]
        command: RunCommand,
        #[command(flatten)]
        args: CommonArgs,
    },
    /// Print the JSON schema accepted by --config.
    Schema,
}

#[derive(Clone, Copy, ValueEnum)]
enum RunCommand {
    Curvature,
    Functional,
    Entropy,
    Spectrum,
    Flow,
    Verify,
    FindSoliton,
    Rescale,
    Descent,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path of the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving report.json and any archives.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Data-parallel worker count; defaults to YMLAB_WORKERS, then all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the seed field of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Escalate warnings to check failures (exit 2).
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are successful outputs, not usage errors
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(commands::EXIT_CONFIG as u8);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    let code = match cli.command {
        Cmd::Schema => {
            print!("{}", config::schema_string());
            commands::EXIT_OK
        }
        Cmd::MakeField(args) => dispatch(None, args),
        Cmd::Run { command, args } => dispatch(Some(command), args),
    };
    ExitCode::from(code as u8)
}

/// Parses the configuration, runs the command, writes the report, and maps
/// the outcome to an exit code.
fn dispatch(command: Option<RunCommand>, args: CommonArgs) -> i32 {
    init_workers(args.workers);

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.config.display());
            return commands::EXIT_CONFIG;
        }
    };
    let mut de = serde_json::Deserializer::from_str(&text);
    let cfg: RunConfig = match serde_path_to_error::deserialize(&mut de) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error at {}: {}", e.path(), e.inner());
            return commands::EXIT_CONFIG;
        }
    };

    let seed = args.seed.or(cfg.seed).unwrap_or(1);
    let ctx = Ctx { cfg, out: args.out, seed };
    let result = match command {
        None => commands::make_field(&ctx),
        Some(RunCommand::Curvature) => commands::cmd_curvature(&ctx),
        Some(RunCommand::Functional) => commands::cmd_functional(&ctx),
        Some(RunCommand::Entropy) => commands::cmd_entropy(&ctx),
        Some(RunCommand::Spectrum) => commands::cmd_spectrum(&ctx),
        Some(RunCommand::Flow) => commands::cmd_flow(&ctx),
        Some(RunCommand::Verify) => commands::cmd_verify(&ctx),
        Some(RunCommand::FindSoliton) => commands::cmd_find_soliton(&ctx),
        Some(RunCommand::Rescale) => commands::cmd_rescale(&ctx),
        Some(RunCommand::Descent) => commands::cmd_descent(&ctx),
    };

    match result {
        Ok(outcome) => match write_report(&ctx.out, &outcome) {
            Ok(()) => outcome.exit_code(args.strict),
            Err(e) => {
                eprintln!("cannot write report: {e}");
                commands::EXIT_CONFIG
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            commands::error_exit_code(&e)
        }
    }
}

/// Reports are printed to stdout and written to report.json with identical
/// bytes; serde_json's float formatting keeps them reproducible.
fn write_report(out: &std::path::Path, outcome: &Outcome) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(&outcome.report)?;
    text.push('\n');
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("report.json"), &text)?;
    print!("{text}");
    Ok(())
}

fn init_workers(flag: Option<usize>) {
    let from_env = std::env::var("YMLAB_WORKERS").ok().and_then(|v| v.parse::<usize>().ok());
    if let Some(w) = flag.or(from_env) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global();
    }
}
