//! `rfadv`: dataset generation, training, attacks, sweeps and benchmarks.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rfadv", version, about = "Adversarial attacks on I/Q modulation classifiers")]
struct Cli {
    /// Flat JSON file with defaults for the subcommand's parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the merged parameters as JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    GenData(config::GenData),
    Train(config::Train),
    Attack(config::Attack),
    Sweep(config::Sweep),
    Bench(config::Bench),
}

fn layered<T>(flags: T, file: &Option<PathBuf>, print: bool, run: fn(T) -> Result<()>) -> Result<()>
where
    T: serde::de::DeserializeOwned + serde::Serialize + Default,
    T: Overlay,
{
    let base: T = match file {
        Some(p) => config::load(p)?,
        None => T::default(),
    };
    let merged = flags.overlay_on(base);
    if print {
        println!("{}", serde_json::to_string_pretty(&merged)?);
        return Ok(());
    }
    run(merged)
}

trait Overlay {
    fn overlay_on(self, base: Self) -> Self;
}

macro_rules! overlay {
    ($($t:ty),*) => {$(
        impl Overlay for $t {
            fn overlay_on(self, base: Self) -> Self {
                self.overlay(base)
            }
        }
    )*};
}
overlay!(config::GenData, config::Train, config::Attack, config::Sweep, config::Bench);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (cfg, print) = (&cli.config, cli.print_config);
    let result = match cli.command {
        Command::GenData(c) => layered(c, cfg, print, commands::gen_data),
        Command::Train(c) => layered(c, cfg, print, commands::train),
        Command::Attack(c) => layered(c, cfg, print, commands::attack),
        Command::Sweep(c) => layered(c, cfg, print, commands::sweep),
        Command::Bench(c) => layered(c, cfg, print, commands::bench),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
