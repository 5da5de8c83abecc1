use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use shiftlab::cli::{error_json, exit_code, run, write_outputs, Command};
use shiftlab::config::RunConfig;
use shiftlab::Error;

/// Numerical laboratory for shift-like polynomial automorphisms of C^k.
#[derive(Debug, Parser)]
#[command(name = "shiftlab", version)]
struct Args {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main_inner(args: &Args) -> Result<(), Error> {
    let mut cfg = RunConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.set("seed", seed.to_string())?;
    }
    if let Some(threads) = args.threads {
        cfg.set("threads", threads.to_string())?;
    }
    let threads = cfg.threads()?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    let outputs = run(args.command, &cfg)?;
    write_outputs(&args.out, &outputs)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                e.exit();
            }
            let err = Error::InvalidParameter(e.to_string().trim().to_string());
            eprintln!("{}", error_json(&err));
            return ExitCode::from(exit_code(&err) as u8);
        }
    };
    match main_inner(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
