use clap::{Parser, ValueEnum};
use moyal_scatter::harness::{self, RunConfig, Subcommand};
use moyal_scatter::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    StarCheck,
    Evolve,
    Scatter,
    Implementability,
    Bogoliubov,
    FockCheck,
    LmProbe,
    All,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::StarCheck => Subcommand::StarCheck,
            Command::Evolve => Subcommand::Evolve,
            Command::Scatter => Subcommand::Scatter,
            Command::Implementability => Subcommand::Implementability,
            Command::Bogoliubov => Subcommand::Bogoliubov,
            Command::FockCheck => Subcommand::FockCheck,
            Command::LmProbe => Subcommand::LmProbe,
            Command::All => Subcommand::All,
        }
    }
}

/// Dirac scattering on a discretized torus, with commutative and Moyal potentials.
#[derive(Parser, Debug)]
#[command(name = "moyal-scatter", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `out_dir` from the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Number of grid levels for refinement studies.
    #[arg(long, default_value_t = 3)]
    refine: usize,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Schema { .. } => 2,
        Error::Io(_) | Error::Json(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match std::fs::read_to_string(&cli.config) {
        Ok(text) => RunConfig::from_json_str(&text),
        Err(e) => Err(Error::Io(e)),
    };
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let out = cli
        .out_dir
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match harness::run(cli.command.into(), config, &out, cli.refine) {
        Ok(report) => {
            for c in &report.checks {
                let v = c.value.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
                println!("{:<8} {:<48} {v}", format!("{:?}", c.status).to_lowercase(), c.id);
            }
            println!("report: {}", out.join("report.json").display());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failing checks: {}", report.failing.join(", "));
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
