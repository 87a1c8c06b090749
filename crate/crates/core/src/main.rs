use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use polyham::cli::{init_threads, run, Command, ExitStatus, RunConfig};

/// Spectral verification of multiply-periodic multi-time Hamilton equations.
#[derive(Debug, Parser)]
#[command(name = "polyham", version)]
struct Args {
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which would read as a rejection.
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { ExitStatus::InvalidConfig.code() } else { 0 });
        }
    };
    let result = init_threads().and_then(|_| RunConfig::load(&args.config)).and_then(|mut cfg| {
        cfg.command = args.command;
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(out) = args.out {
            cfg.out = out;
        }
        run(&cfg)
    });
    match result {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", outcome.summary);
            for path in &outcome.artifacts {
                let _ = writeln!(stdout, "  wrote {}", path.display());
            }
            ExitCode::from(outcome.status.code())
        }
        Err(e) => {
            eprintln!("polyham: {e}");
            ExitCode::from(ExitStatus::for_error(&e).code())
        }
    }
}
