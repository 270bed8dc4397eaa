use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use shearlab::cli::{resolve_out_dir, run_command, Command, Diagnostic, RunOptions, EXIT_CONFIG};
use shearlab::config::RunConfig;
use shearlab::report::{emit_json, Format};

/// Numerical checks of enhanced dissipation and Taylor dispersion for shear flows.
#[derive(Debug, Parser)]
#[command(name = "shearlab", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides SHEARLAB_OUT and the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn emit_diagnostic(d: &Diagnostic) {
    eprintln!("{}", serde_json::to_string(d).unwrap_or_else(|_| d.message.clone()));
}

fn main() -> ExitCode {
    let args = Args::parse();
    let loaded = match &args.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    };
    let mut cfg = match loaded {
        Ok(c) => c,
        Err(e) => {
            let d = Diagnostic::from_error(args.command.name(), &e);
            emit_diagnostic(&d);
            let dir = resolve_out_dir(args.out.as_deref(), &RunConfig::default());
            let _ = emit_json(&d, &dir, "diagnostic.json");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(w) = cfg.workers.filter(|w| *w > 0) {
        shearlab::par::init_workers(w);
    }
    let outcome = run_command(args.command, &cfg, &RunOptions { format: args.format, out: args.out });
    for line in &outcome.lines {
        println!("{line}");
    }
    if let Some(d) = &outcome.diagnostic {
        emit_diagnostic(d);
    }
    ExitCode::from(outcome.exit_code as u8)
}
