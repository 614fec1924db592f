use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use ssp::cli::{exit_code, run_command, Outcome, EXIT_CONFIG};
use ssp::config::{load_config, Command, RunConfig};

/// Diffusion startpoint toolkit: inversion, sampling, style transfer and ablations.
#[derive(Debug, Parser)]
#[command(name = "ssp", version)]
struct Args {
    /// invert | sample | transfer | ablate | sweep | selftest (overrides the config's command)
    command: Option<String>,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (falls back to SSP_THREADS).
    #[arg(long, env = "SSP_THREADS")]
    threads: Option<usize>,
}

fn resolve(args: &Args) -> ssp::Result<RunConfig> {
    let command = args
        .command
        .as_deref()
        .map(str::parse::<Command>)
        .transpose()?;
    let mut cfg = match (&args.config, command) {
        (Some(path), _) => load_config(path)?,
        (None, Some(c)) => RunConfig::for_command(c),
        (None, None) => {
            return Err(ssp::Error::Config {
                message: "give a command or --config".into(),
                line: 0,
                column: 0,
            })
        }
    };
    if let Some(c) = command {
        cfg.command = c;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("ssp: cannot set thread count: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let outcome = resolve(&args).and_then(|cfg| run_command(&cfg));
    match outcome {
        Ok(o) => {
            match &o {
                Outcome::Selftest(checks) => {
                    for c in checks {
                        println!("{c}");
                    }
                }
                Outcome::Written(paths) => {
                    for p in paths {
                        println!("{}", p.display());
                    }
                }
            }
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("ssp: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
