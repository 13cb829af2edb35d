use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nvfluidics_cli::config::{to_toml, ScenarioConfig};
use nvfluidics_cli::examples::{self, EXAMPLES};
use nvfluidics_cli::run::{digest_mismatches, load, run, Loaded};
use nvfluidics_cli::ScenarioError;

#[derive(Parser)]
#[command(name = "nvfluidics", version, about = "Run NV-sensor simulation scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario, or repeat a run from its manifest and check the digests.
    Run {
        #[command(flatten)]
        source: Source,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Use the full-size Monte Carlo counts (10000 averages, 32000 spins).
        #[arg(long)]
        full_scale: bool,
        /// Override the output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Parse and validate a scenario, then print it with defaults filled.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// List the bundled scenarios, or print one.
    ListExamples {
        /// Print the named scenario file.
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Scenario or manifest file.
    path: Option<PathBuf>,
    /// Name of a bundled scenario.
    #[arg(long)]
    example: Option<String>,
}

impl Source {
    fn load(&self) -> Result<Loaded, ScenarioError> {
        match (&self.path, &self.example) {
            (Some(path), _) => load(path),
            (None, Some(name)) => Ok(Loaded::Scenario(Box::new(examples::find(name)?.config()?))),
            (None, None) => unreachable!("clap requires a source"),
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), ScenarioError> {
    match cli.command {
        Command::Run {
            source,
            seed,
            full_scale,
            out_dir,
        } => {
            let (mut config, reference) = match source.load()? {
                Loaded::Scenario(c) => (*c, None),
                Loaded::Manifest(m) => (m.config.clone(), Some(m)),
            };
            if reference.is_some() && (seed.is_some() || full_scale) {
                return Err(ScenarioError::Invalid(vec![nvfluidics_cli::Issue {
                    path: "<command line>".into(),
                    message: "--seed and --full-scale cannot change a run replayed from a manifest".into(),
                }]));
            }
            apply_overrides(&mut config, seed, full_scale, out_dir);
            config.validate()?;
            let (manifest, dir) = run(&config)?;
            for (name, digest) in &manifest.outputs {
                println!("{}  {}", digest, dir.join(name).display());
            }
            for (key, value) in &manifest.summary {
                println!("{key} = {value}");
            }
            for note in &manifest.notes {
                println!("note: {note}");
            }
            if let Some(reference) = reference {
                let mismatches = digest_mismatches(&reference, &manifest);
                if !mismatches.is_empty() {
                    return Err(ScenarioError::DigestMismatch(mismatches));
                }
                println!("all {} output digests match the manifest", manifest.outputs.len());
            }
            Ok(())
        }
        Command::Validate { source } => {
            let config = match source.load()? {
                Loaded::Scenario(c) => *c,
                Loaded::Manifest(m) => m.config,
            };
            print!("{}", to_toml(&config)?);
            Ok(())
        }
        Command::ListExamples { show } => {
            match show {
                Some(name) => print!("{}", examples::find(&name)?.text),
                None => {
                    for e in &EXAMPLES {
                        println!("{:<12} {}", e.name, e.description());
                    }
                }
            }
            Ok(())
        }
    }
}

fn apply_overrides(config: &mut ScenarioConfig, seed: Option<u64>, full_scale: bool, out_dir: Option<PathBuf>) {
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if full_scale {
        config.apply_full_scale();
    }
    if let Some(dir) = out_dir {
        config.output.dir = Some(dir);
    }
}
