use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pnpb_cli::{
    parse_config, resolve_output_dir, run_config, ConfigError, RunConfig, OUTPUT_ROOT_VAR,
};
use pnpb_core::preset;
use pnpb_core::presets::{PRESET_ALIASES, PRESET_NAMES};

const EXIT_VALIDATION: u8 = 1;
const EXIT_SOLVER: u8 = 2;

/// Poisson-Nernst-Planck-Bikermann simulations from configuration files.
#[derive(Parser)]
#[command(name = "pnpb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep point of a configuration and write CSV output.
    Run { config: PathBuf },
    /// List the built-in presets.
    Presets,
    /// Check a configuration without running it.
    Verify { config: PathBuf },
}

fn load(path: &Path) -> anyhow::Result<Result<RunConfig, ConfigError>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(parse_config(&text))
}

fn list_presets() -> anyhow::Result<()> {
    for name in PRESET_NAMES {
        let p = preset::<f64>(name)?;
        let labels: Vec<&str> = p.points.iter().map(|s| s.label.as_str()).collect();
        println!("{:<14} {} [{}]", p.name, p.description, labels.join(" "));
    }
    for (alias, target) in PRESET_ALIASES {
        println!("{alias:<14} alias of {target}");
    }
    Ok(())
}

fn run(config: &RunConfig) -> anyhow::Result<bool> {
    let root = std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from);
    let out = resolve_output_dir(&config.output_dir, root.as_deref());
    let outcomes = run_config(config, &out);
    let mut ok = true;
    for o in &outcomes {
        let label = if o.label.is_empty() {
            "default"
        } else {
            &o.label
        };
        match &o.result {
            Ok(s) => {
                let eq = s.equilibrium_iterations.map_or(String::new(), |n| {
                    format!(", equilibrium in {n} iterations")
                });
                println!(
                    "ok   {}/{label}: {} steps to t = {}, min Gamma {:.6e}{eq} -> {}",
                    config.name,
                    s.steps,
                    s.final_time,
                    s.min_gamma,
                    o.dir.display()
                );
            }
            Err(e) => {
                ok = false;
                println!("FAIL {}/{label}: {e}", config.name);
            }
        }
    }
    Ok(ok)
}

fn main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            list_presets()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { config } => match load(&config)? {
            Ok(c) => {
                println!(
                    "{}: {} sweep point(s), mode {:?}",
                    config.display(),
                    c.points.len(),
                    c.mode
                );
                Ok(ExitCode::SUCCESS)
            }
            Err(e) => {
                eprintln!("error: {e}");
                Ok(ExitCode::from(EXIT_VALIDATION))
            }
        },
        Command::Run { config } => match load(&config)? {
            Ok(c) => Ok(if run(&c)? {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_SOLVER)
            }),
            Err(e) => {
                eprintln!("error: {e}");
                Ok(ExitCode::from(EXIT_VALIDATION))
            }
        },
    }
}
