use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nibec::catalog::{format_catalog, list_catalog};
use nibec::experiment::{exit_code, run_path};

/// Runs entropy-dissipation experiments from TOML configs.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// List the catalog models and their parameters.
    Catalog,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("NIBEC_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if n > 0 {
            // Only fails if a pool was already built, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match cli.command {
        Command::Catalog => {
            print!("{}", format_catalog(&list_catalog()));
            ExitCode::SUCCESS
        }
        Command::Run { config } => {
            let result = run_path(&config);
            match &result {
                Ok(v) => {
                    for c in &v.checks {
                        println!("{:<6} {} = {} (threshold {})", if c.pass { "pass" } else { "FAIL" }, c.name, c.value, c.threshold);
                    }
                }
                Err(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&result) as u8)
        }
    }
}
