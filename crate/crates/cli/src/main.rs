//! Run orchestration: `fblab <subcommand> [--config PATH] [--out DIR]
//! [--seed N] [--quiet]`. Exit status 0 on success, 2 when a check fails,
//! 1 on errors. `FBLAB_THREADS` caps the worker pool.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use commands::Runner;
use config::{parse_config, RunConfig};

struct Args {
    subcommand: String,
    config_path: Option<PathBuf>,
    out: PathBuf,
    seed: Option<u64>,
    quiet: bool,
}

fn parse_args() -> Result<Args, String> {
    let mut args = std::env::args().skip(1);
    let mut parsed = Args {
        subcommand: String::new(),
        config_path: None,
        out: PathBuf::from("out"),
        seed: None,
        quiet: false,
    };
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--config" => {
                parsed.config_path = Some(args.next().ok_or("--config needs a path")?.into())
            }
            "--out" => parsed.out = args.next().ok_or("--out needs a directory")?.into(),
            "--seed" => {
                parsed.seed = Some(
                    args.next()
                        .ok_or("--seed needs a value")?
                        .parse()
                        .map_err(|e| format!("bad seed: {e}"))?,
                )
            }
            "--quiet" => parsed.quiet = true,
            "--help" | "-h" => {
                return Err(usage());
            }
            other if parsed.subcommand.is_empty() && !other.starts_with('-') => {
                parsed.subcommand = other.to_string();
            }
            other => return Err(format!("unexpected argument `{other}`\n{}", usage())),
        }
    }
    if parsed.subcommand.is_empty() {
        return Err(usage());
    }
    Ok(parsed)
}

fn usage() -> String {
    "usage: fblab <solve|sweep|monotonicity|identity|blowup|counterexample|montecarlo|decay|all> \
     [--config PATH] [--out DIR] [--seed N] [--quiet]"
        .to_string()
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(1);
        }
    };
    if let Ok(threads) = std::env::var("FBLAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let mut cfg = match &args.config_path {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match parse_config(&text) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(1);
                }
            },
            Err(e) => {
                eprintln!("cannot read {}: {e}", path.display());
                return ExitCode::from(1);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let runner = Runner { cfg: &cfg, out: args.out, quiet: args.quiet };
    match runner.run(&args.subcommand) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{{\"error\": \"{}\"}}", e.to_string().replace('"', "'"));
            ExitCode::from(1)
        }
    }
}
