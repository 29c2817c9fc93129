use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sfprobe_cli::commands::{self, Run};
use sfprobe_cli::config::{Format, RunConfig};
use sfprobe_cli::curve::CurveFile;
use sfprobe_cli::validate::run_checks;
use sfprobe_cli::CliError;

#[derive(Parser)]
#[command(name = "sfprobe", version, about = "Superfluid response and impurity-probe sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides output.directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Lorentzian broadening in E_F (overrides numerics.epsilon).
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Curve format (overrides output.format).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Gap, chemical potential and sound speed across the crossover.
    Eos,
    /// Collective-mode dispersion, pair threshold and spectral weight.
    Dispersion,
    /// Dynamic structure factor on a (q, nu) grid.
    DsfGrid,
    /// Impurity decay rate against trap frequency.
    Gamma,
    /// Sum rules, identities and cross-checks, written as a JSON report.
    Validate,
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.output.directory = out.clone();
    }
    if let Some(eps) = cli.epsilon {
        config.numerics.epsilon = eps;
    }
    if let Some(format) = cli.format {
        config.output.format = format;
    }
    Ok(config)
}

fn write_curves(run: &Run, curves: &[CurveFile]) -> Result<(), CliError> {
    for c in curves {
        for path in c.write(&run.config.output.directory, run.config.output.format)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let run = Run::new(resolve(cli)?, cli.threads)?;
    match cli.command {
        Command::Eos => write_curves(&run, &commands::eos(&run)?),
        Command::Dispersion => write_curves(&run, &commands::dispersion(&run)?),
        Command::DsfGrid => write_curves(&run, &commands::dsf_grid(&run)?),
        Command::Gamma => write_curves(&run, &commands::gamma(&run)?),
        Command::Validate => {
            let report = run_checks(&run)?;
            let dir = &run.config.output.directory;
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            let path = dir.join("validate.json");
            let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            println!("wrote {}", path.display());
            for c in &report.checks {
                let measured = c.measured.map_or("n/a".to_string(), |m| format!("{m:.3e}"));
                let status = if c.passed { "pass" } else { "FAIL" };
                println!("{status} {}: {measured} (threshold {:.0e}) {}", c.name, c.threshold, c.detail);
            }
            let failures: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
            if failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::Validation(failures.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sfprobe: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
