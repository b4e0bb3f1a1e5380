//! `mfelab`: config-driven batch runner for the mean-field vortex library.
//!
//! One TOML file describes one run. Every run that reaches execution writes
//! its artifacts plus a `manifest.json` naming each file with its SHA-256
//! checksum, so identical configs and seeds produce byte-identical output
//! trees. Exit codes: 0 success, 2 expected analytic outcomes reported as
//! data, 1 errors.

mod config;
mod runner;

use std::collections::BTreeMap;
use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use serde_json::json;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "mfelab", version, about = "Mean-field vortex laboratory batch runner")]
struct Cli {
    /// Run configuration (TOML), one file per run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's [output] dir.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Seed for random initial presets; overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweep points.
    #[arg(long, default_value = "1")]
    threads: NonZeroUsize,
    /// Check the configuration and list every violation without running.
    #[arg(long)]
    validate_only: bool,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

fn run(cli: Cli) -> Result<u8> {
    let text = std::fs::read_to_string(&cli.config)
        .with_context(|| format!("reading config {}", cli.config.display()))?;
    let raw: config::RawConfig = toml::from_str(&text)
        .with_context(|| format!("parsing config {}", cli.config.display()))?;

    let resolved = config::validate(&raw, cli.seed, cli.output.as_deref());

    if cli.validate_only {
        return Ok(match &resolved {
            Ok(_) => {
                println!("configuration ok");
                0
            }
            Err(violations) => {
                for v in violations {
                    println!("{v}");
                }
                1
            }
        });
    }

    let cfg = match resolved {
        Ok(cfg) => cfg,
        Err(violations) => {
            for v in &violations {
                eprintln!("invalid config: {v}");
            }
            return Ok(1);
        }
    };

    let (code, artifacts) = match runner::execute(&cfg, cli.threads.get()) {
        Ok(pair) => pair,
        Err(message) => {
            eprintln!("error: {message}");
            return Ok(1);
        }
    };

    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating output dir {}", cfg.output_dir.display()))?;
    let mut checksums = BTreeMap::new();
    for (name, bytes) in &artifacts.files {
        let path = cfg.output_dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        checksums.insert(name.clone(), sha256_hex(bytes));
    }
    let manifest = json!({
        "schema_version": 1,
        "command": cfg.command.name(),
        "seed": cfg.seed,
        "exit_code": code,
        "files": checksums,
    });
    let mut manifest_text = serde_json::to_string_pretty(&manifest).expect("manifest is plain data");
    manifest_text.push('\n');
    let manifest_path = cfg.output_dir.join("manifest.json");
    std::fs::write(&manifest_path, manifest_text)
        .with_context(|| format!("writing {}", manifest_path.display()))?;

    Ok(u8::try_from(code).unwrap_or(1))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
