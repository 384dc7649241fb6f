use std::path::PathBuf;
use std::process::ExitCode;

use cislunar_cli::commands::{self, load_scenario};
use cislunar_cli::CliError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cislunar", version, about = "Cislunar clock-network simulator")]
struct Cli {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long, global = true, default_value = "lunar_net")]
    config: String,
    /// Output directory for artifacts.
    #[arg(long, global = true, env = "CISLUNAR_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the stdout digest.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its artifacts.
    Run,
    /// Latin-hypercube sweep over the correction scales.
    Sweep {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Compare two coordinate conventions on the same truth.
    CompareModels {
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        b: Option<String>,
        /// Window length in days.
        #[arg(long)]
        days: Option<f64>,
    },
    /// Print the digest of a previous run.
    Report {
        /// Run directory or summary.json; defaults to --out.
        path: Option<PathBuf>,
    },
    /// List the bundled scenarios.
    Scenarios,
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    let scenario = || -> Result<_, CliError> {
        let mut s = load_scenario(&cli.config)?;
        if let Some(seed) = cli.seed {
            s.seed = seed;
        }
        Ok(s)
    };
    match &cli.command {
        Command::Run => Ok(commands::run(&scenario()?, &cli.out)?.render()),
        Command::Sweep { samples } => {
            let (s, _) = commands::sweep(&scenario()?, &cli.out, *samples)?;
            let mut text = format!(
                "sweep {}: {} samples, faithfulness {:.4}, {} passing\n",
                s.scenario, s.samples, s.faithfulness, s.passing
            );
            for a in &s.ablations {
                text.push_str(&format!(
                    "  without {:<9} divergence {:+.4} µs/day, worst pair {:.3e} s\n",
                    a.family,
                    a.divergence_rate * 1e6,
                    a.max_pair_disagreement
                ));
            }
            Ok(text)
        }
        Command::CompareModels { a, b, days } => {
            let s = commands::compare_models(&scenario()?, &cli.out, a.as_deref(), b.as_deref(), *days)?;
            Ok(format!(
                "{} vs {} over {:.2} days: pairwise delta {:.3e} s, label delta {:.3e} s\n",
                s.convention_a, s.convention_b, s.window_days, s.pairwise_delta, s.label_delta
            ))
        }
        Command::Report { path } => commands::report(path.as_ref().unwrap_or(&cli.out)),
        Command::Scenarios => Ok(cislunar_cli::scenario::BUNDLED
            .iter()
            .map(|(name, _)| format!("{name}\n"))
            .collect()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", CliError::Usage(e.to_string().trim_end().to_owned()).to_json());
            return ExitCode::from(1);
        }
    };
    match execute(&cli) {
        Ok(text) => {
            if !cli.quiet {
                print!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
