//! Run directories and their manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::CliError;

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

pub struct RunDir {
    root: PathBuf,
    command: &'static str,
    config: Map<String, Value>,
    started: f64,
    clock: Instant,
    outputs: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    status: &'a str,
    started_unix: f64,
    finished_unix: f64,
    elapsed_s: f64,
    config: &'a Map<String, Value>,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl RunDir {
    /// Creates `root`. An existing non-empty directory needs `force`.
    pub fn create(root: &Path, command: &'static str, config: &RunConfig, force: bool) -> Result<Self, CliError> {
        let occupied = fs::read_dir(root).map(|mut d| d.next().is_some()).unwrap_or(false);
        if occupied && !force {
            return Err(CliError::Config(format!(
                "{} already exists and is not empty (use --force to overwrite)",
                root.display()
            )));
        }
        fs::create_dir_all(root).map_err(|e| CliError::output(root, e))?;
        let config = config
            .effective()
            .into_iter()
            .map(|(k, v)| (k.to_string(), Value::String(v)))
            .collect();
        Ok(Self {
            root: root.to_path_buf(),
            command,
            config,
            started: unix_now(),
            clock: Instant::now(),
            outputs: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `contents` to `rel` under the run directory.
    pub fn write(&mut self, rel: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::output(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::output(&path, e))?;
        self.record(path.clone());
        Ok(path)
    }

    /// Notes a file written by other means.
    pub fn record(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    /// Writes `manifest.json`; the only file carrying timestamps.
    pub fn finish(self, error: Option<&CliError>) -> Result<(), CliError> {
        let mut outputs: Vec<String> = self
            .outputs
            .iter()
            .map(|p| p.strip_prefix(&self.root).unwrap_or(p).display().to_string())
            .collect();
        outputs.sort();
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            status: if error.is_some() { "failed" } else { "ok" },
            started_unix: self.started,
            finished_unix: unix_now(),
            elapsed_s: self.clock.elapsed().as_secs_f64(),
            config: &self.config,
            outputs,
            error: error.map(ToString::to_string),
        };
        let path = self.root.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::output(&path, e))
    }
}
