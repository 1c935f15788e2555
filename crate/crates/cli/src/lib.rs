//! Scenario runner for `geomech`: reads a TOML scenario, integrates the
//! chosen system and writes a trajectory CSV plus a JSON drift report.

pub mod config;
mod error;
pub mod output;
pub mod registry;
pub mod scenario;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

pub use config::ScenarioConfig;
pub use error::CliError;
pub use registry::{list_systems, SystemKind, SystemSpec, REGISTRY};
pub use scenario::{execute, Outcome};

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub system: SystemKind,
    pub trajectory_path: PathBuf,
    pub report_path: PathBuf,
    pub wall_time_seconds: f64,
}

/// Runs one scenario file. Outputs are written only if the whole run
/// succeeds; relative paths are taken from the file's directory.
pub fn run_file(path: &Path) -> Result<RunSummary, CliError> {
    let cfg = ScenarioConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run_config(&cfg, base)
}

pub fn run_config(cfg: &ScenarioConfig, base: &Path) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    let outcome = execute(cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let outputs = cfg.outputs.resolved(base);
    output::write_all(&outcome, &outputs, wall)?;
    Ok(RunSummary {
        system: outcome.kind,
        trajectory_path: outputs.trajectory_path,
        report_path: outputs.report_path,
        wall_time_seconds: wall,
    })
}

/// Runs independent scenarios on up to `jobs` threads. Results come back in
/// input order.
pub fn run_files(paths: &[PathBuf], jobs: usize) -> Vec<Result<RunSummary, CliError>> {
    let jobs = jobs.clamp(1, paths.len().max(1));
    if jobs == 1 {
        return paths.iter().map(|p| run_file(p)).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<RunSummary, CliError>>>> = paths.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = paths.get(i) else { break };
                let r = run_file(path);
                *results[i].lock().expect("no panics while holding the lock") = Some(r);
            });
        }
    });
    results.into_iter().map(|m| m.into_inner().expect("unpoisoned").expect("every slot filled")).collect()
}
