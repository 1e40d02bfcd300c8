use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pmc_lab::scenario::{dump_domain, load_config, run_file, RunArtifacts, RunOptions};

#[derive(Parser)]
#[command(name = "pmc-lab", version, about = "Prescribed mean curvature scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory, overriding the config's `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for tasks with independent sub-runs.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Omit timings so that reruns produce identical files.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its run directory.
    Run { config: PathBuf },
    /// Parse and check a scenario without running it.
    Validate { config: PathBuf },
    /// Rasterize the scenario's domain and write it out.
    DumpDomain { config: PathBuf },
}

fn report(art: &RunArtifacts) -> ExitCode {
    for e in &art.manifest.errors {
        eprintln!("error [{}/{}]: {}", e.stage, e.kind, e.message);
    }
    println!("{} -> {}", art.manifest.status, art.out_dir.display());
    if art.ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let opts = RunOptions {
        out: cli.out,
        threads: cli.threads,
        deterministic: cli.deterministic,
    };
    let result = match cli.command {
        Command::Run { config } => run_file(&config, &opts).map(|a| report(&a)),
        Command::Validate { config } => match load_config(&config).and_then(|c| c.validate()) {
            Ok(()) => {
                println!("ok");
                Ok(ExitCode::SUCCESS)
            }
            Err(e) => {
                eprintln!("error [config-parse/{}]: {e}", e.kind());
                Ok(ExitCode::FAILURE)
            }
        },
        Command::DumpDomain { config } => load_config(&config)
            .and_then(|c| dump_domain(&c, &opts))
            .map(|a| report(&a)),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
