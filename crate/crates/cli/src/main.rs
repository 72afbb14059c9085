//! `metadrift`: generate corpora and streams, train meta-detectors, run
//! detection with or without a labelling oracle, and benchmark.
//!
//! Exit status is 0 on success, 1 on a runtime failure and 2 on a usage
//! error.

mod args;
mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use args::{Cli, Command};
use manifest::ManifestBuilder;

fn run(cli: Cli, argv: &[String]) -> Result<()> {
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating output dir {}", cli.out.display()))?;
    let name = match &cli.command {
        Command::Gen(_) => "gen",
        Command::Train(_) => "train",
        Command::Detect(_) => "detect",
        Command::Bench(_) => "bench",
        Command::Serve(_) => "serve",
    };
    let manifest = ManifestBuilder::start(name, argv);
    let outcome = match &cli.command {
        Command::Gen(a) => commands::gen(a, &cli.out)?,
        Command::Train(a) => commands::train(a, &cli.out)?,
        Command::Detect(a) => commands::detect(a, &cli.out, false)?,
        Command::Bench(a) => commands::bench(a, &cli.out)?,
        Command::Serve(a) => commands::detect(a, &cli.out, true)?,
    };
    commands::finish(manifest, &cli.out, outcome)
}

fn main() -> ExitCode {
    let (argv, config_path) = config::take_config_flag(std::env::args().collect());
    let argv = match config_path {
        Some(p) => match config::config_args(p.as_ref()) {
            Ok(extra) => config::merge(argv, extra),
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        },
        None => argv,
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    match run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
