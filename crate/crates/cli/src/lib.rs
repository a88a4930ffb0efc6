//! Experiment runner for the focklens simulations.
//!
//! A run reads a TOML document, resolves recipe defaults, executes inside a
//! rayon pool of the requested width and writes CSV tables plus a
//! `manifest.json` with checksums into the output directory. Data files do
//! not depend on the worker count.

pub mod config;
pub mod error;
pub mod output;
pub mod recipes;

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use config::{parse_config, Command, Overrides, RunConfig};
use error::HarnessError;
use output::{manifest_path, write_json, write_tables, Manifest, ERROR_FILE};

/// Runs an already-parsed configuration and writes every output.
pub fn execute(config: &RunConfig) -> Result<Manifest, HarnessError> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::RangeViolation {
            key: "workers".into(),
            message: e.to_string(),
        })?;
    let output = pool.install(|| recipes::run_recipe(config))?;
    let outputs = write_tables(&config.out_dir, &output.tables)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: config.command.name().into(),
        recipe: config.recipe.name().into(),
        config: config.clone(),
        started_unix_seconds: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        outputs,
        summary: output.summary,
    };
    write_json(&manifest_path(&config.out_dir), &manifest)?;
    Ok(manifest)
}

/// Reads `config_path`, applies `overrides` and runs `command`.
pub fn run_file(command: Command, config_path: &Path, overrides: &Overrides) -> Result<Manifest, HarnessError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| HarnessError::io(config_path, e))?;
    let config = parse_config(&text, command, overrides)?;
    log::info!("{} / {} -> {}", command, config.recipe, config.out_dir.display());
    execute(&config)
}

/// Writes the machine-readable error record into `dir` (best effort).
pub fn write_error_record(dir: &Path, error: &HarnessError) {
    if let Err(e) = write_json(&dir.join(ERROR_FILE), &error.record()) {
        log::warn!("could not write error record: {e}");
    }
}
