//! Scenario runner: reads a strict TOML scenario, runs it on a fixed-size
//! thread pool and writes CSV/JSON datasets plus a checksummed manifest.

pub mod config;
pub mod dataset;
pub mod scenario;

use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{Config, Kind};
use dataset::Artifact;

pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetEntry {
    pub file: String,
    pub sha256: String,
    pub rows: Option<usize>,
}

/// Keys appear in declaration order. The thread count is not recorded:
/// it does not affect any output.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: &'static str,
    pub seed: u64,
    pub units: &'static str,
    pub config: Config,
    pub datasets: Vec<DatasetEntry>,
}

pub struct RunRequest {
    pub kind: Kind,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Runs a scenario and writes its datasets and `manifest.json` into `out`.
pub fn execute(req: &RunRequest) -> Result<Manifest, CliError> {
    let config = Config::load(&req.config, req.kind)?;
    let seed = req.seed.or(config.seed).unwrap_or(0);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = req.threads {
        if t == 0 {
            return Err(CliError::Schema("--threads must be positive".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Io(e.to_string()))?;
    let outcome = pool.install(|| scenario::run(req.kind, &config, seed))?;
    write_outputs(&req.out, req.kind, seed, config, &outcome.artifacts)
}

fn write_outputs(
    out: &Path,
    kind: Kind,
    seed: u64,
    config: Config,
    artifacts: &[Artifact],
) -> Result<Manifest, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    for a in artifacts {
        a.write(out)?;
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        kind: kind.as_str(),
        seed,
        units: "frequencies in Hz, times in s, phases in rad, susceptibilities in s",
        config: Config {
            seed: Some(seed),
            kind: Some(kind),
            ..config
        },
        datasets: artifacts
            .iter()
            .map(|a| DatasetEntry {
                file: a.file.clone(),
                sha256: dataset::sha256_hex(&a.bytes),
                rows: a.rows,
            })
            .collect(),
    };
    Artifact::json("manifest", &manifest)?.write(out)?;
    Ok(manifest)
}
