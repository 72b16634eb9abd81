mod args;
mod commands;
mod context;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use context::Context;
use error::{CliError, CliResult};

fn parse(argv: &[String]) -> Result<Cli, clap::Error> {
    Cli::try_parse_from(std::iter::once("cptr".to_string()).chain(argv.iter().cloned()))
}

/// Runs one command from its arguments (program name excluded) and returns
/// the manifest path.
pub(crate) fn run(argv: Vec<String>) -> CliResult<PathBuf> {
    let cli = parse(&argv).map_err(|e| CliError::Usage(e.to_string()))?;
    execute(cli, argv)
}

fn execute(cli: Cli, argv: Vec<String>) -> CliResult<PathBuf> {
    if let Command::Replay(a) = &cli.command {
        let outcome = commands::replay(a)?;
        let mut ctx = Context::new("replay", argv, outcome.into.clone(), None, cli.seed, Vec::new(), None)?;
        commands::record_replay(&mut ctx, &outcome)?;
        return ctx.finish();
    }
    let mut ctx = Context::new(
        commands::name(&cli.command),
        argv,
        cli.out_dir.clone(),
        cli.input_dir.clone(),
        cli.seed,
        cli.zones.clone(),
        cli.config.clone(),
    )?;
    commands::dispatch(&mut ctx, &cli.command)?;
    ctx.finish()
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = match parse(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli, argv) {
        Ok(manifest) => {
            println!("manifest: {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
