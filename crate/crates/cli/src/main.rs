use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use filamentlab_cli::{run, CliError, Mode, RunConfig, EXIT_OK};

/// Vortex-filament studies in batch: simulate, sweep eps, check or correct
/// compatibility, diagnose a stored run.
#[derive(Debug, Parser)]
#[command(name = "filamentlab", version)]
struct Args {
    mode: Mode,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set solver.eps=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn fail(err: &CliError, cfg: Option<&RunConfig>) -> ExitCode {
    let report = err.report();
    if err.is_numerical() {
        if let Some(cfg) = cfg {
            let body = serde_json::json!({ "config": cfg.echo(), "error": report });
            let path = cfg.out_dir.join("failure.json");
            if std::fs::create_dir_all(&cfg.out_dir).is_ok() {
                let _ = std::fs::write(&path, format!("{body:#}\n"));
            }
        }
    }
    eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| report.reason.clone()));
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match RunConfig::load(args.mode, args.config.as_deref(), &args.set) {
        Ok(c) => c,
        Err(e) => return fail(&e, None),
    };
    match run(&cfg) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", out.summary);
            println!("output: {}", cfg.out_dir.display());
            ExitCode::from(EXIT_OK as u8)
        }
        Err(e) => fail(&e, Some(&cfg)),
    }
}
