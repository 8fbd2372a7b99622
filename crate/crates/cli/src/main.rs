use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod config;
mod run;
mod svg;

use config::{parse_config, Command};
use run::Outcome;

/// Experiments for the one-dimensional singular Cucker-Smale model.
#[derive(Parser, Debug)]
#[command(name = "flocklab", version)]
struct Cli {
    /// Subcommand; overrides `command` in the config file
    #[arg(value_enum)]
    command: Option<Command>,
    /// YAML or JSON config file
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set n=128` (repeatable)
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Overrides `output_dir`
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

fn status(fields: &str) {
    eprintln!("status {fields}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match parse_config(
        cli.config.as_deref(),
        &cli.overrides,
        cli.command,
        cli.output_dir.as_deref(),
    ) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            status(&format!("result=error exit=1 message={:?}", e.to_string()));
            return ExitCode::from(1);
        }
    };
    let command = cfg.command().as_str();
    match run::run(&cfg) {
        Ok(Outcome::Done { files }) => {
            status(&format!(
                "result=ok exit=0 command={command} output_dir={:?} files={}",
                cfg.output_dir.display().to_string(),
                files.join(";")
            ));
            ExitCode::SUCCESS
        }
        Ok(Outcome::VerifyFailed { failed }) => {
            status(&format!(
                "result=verify_failed exit=2 command={command} failed={}",
                failed.join(";")
            ));
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            status(&format!(
                "result=error exit=1 command={command} message={:?}",
                e.to_string()
            ));
            ExitCode::from(1)
        }
    }
}
