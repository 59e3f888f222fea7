use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mirror_fki_cli::run::log_lines;
use mirror_fki_cli::{parse_config, run};

/// Runs one experiment described by a config file.
#[derive(Parser, Debug)]
#[command(name = "mirror-fki", version, about)]
struct Args {
    /// Path of the run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` in [run].
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `threads` in [run].
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `out` in [run].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn fail(out: &std::path::Path, msg: String) -> ExitCode {
    eprintln!("error: {msg}");
    let _ = log_lines(out, &[format!("error: {msg}")]);
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let fallback_out = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(&fallback_out, format!("cannot read {}: {e}", args.config.display())),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return fail(&fallback_out, format!("{}: {e}", args.config.display())),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.threads {
        if t == 0 {
            return fail(&fallback_out, "--threads must be at least 1".into());
        }
        cfg.threads = Some(t);
    }
    if let Some(o) = args.out {
        cfg.out = o;
    }
    match run(&cfg) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for c in outcome.report.checks.iter().filter(|c| !c.passed) {
                println!("  failed {}: {}", c.name, c.detail);
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
