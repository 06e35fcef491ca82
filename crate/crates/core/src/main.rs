use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fermion_rpa::config::RunConfig;
use fermion_rpa::experiments::{experiment_names, run_all};

#[derive(Parser)]
#[command(
    name = "fermion-rpa",
    version,
    about = "Fermi-ball, patch and Bogoliubov-kernel experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments listed in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Overrides the config's output_dir and FERMION_RPA_OUT.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the names of all registered experiments.
    ListExperiments,
    /// Parse and validate a config file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for n in experiment_names() {
                println!("{n}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match RunConfig::from_path(&config) {
            Ok(c) => {
                println!(
                    "ok: N = {}, k_F = {}, {} experiment(s)",
                    c.ball.n_particles(),
                    c.ball.k_fermi(),
                    c.experiments.len()
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Run { config, workers, out } => {
            let cfg = match RunConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let dir = cfg.resolve_output_dir(out.as_deref());
            match run_all(&cfg, &dir, workers) {
                Ok(m) => {
                    for e in &m.experiments {
                        match &e.error {
                            None => println!("{:<28} ok      {:>8} rows  {:.2}s", e.name, e.rows, e.seconds),
                            Some(err) => println!("{:<28} FAILED  {err}", e.name),
                        }
                    }
                    println!("manifest: {}", dir.join("manifest.json").display());
                    if m.failures() > 0 {
                        ExitCode::from(2)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
