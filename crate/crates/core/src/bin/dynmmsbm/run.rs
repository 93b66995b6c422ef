use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::LevelFilter;
use serde_json::Value;

use crate::error::CliError;

pub const CONFIG_FILE: &str = "config.json";
pub const LOG_FILE: &str = "run.log";
pub const METRICS_FILE: &str = "metrics.json";

/// Output directory of one run: config snapshot, log, metrics and artifacts.
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    pub fn create(path: &Path, snapshot: &Value) -> Result<Self, CliError> {
        fs::create_dir_all(path).map_err(|e| CliError::Run(format!("cannot create {}: {e}", path.display())))?;
        let run = RunDir { path: path.to_path_buf() };
        run.write_json(CONFIG_FILE, snapshot)?;
        let log = File::create(run.file(LOG_FILE))?;
        let _ = env_logger::Builder::new()
            .filter_level(LevelFilter::Info)
            .parse_default_env()
            .format_timestamp(None)
            .target(env_logger::Target::Pipe(Box::new(log)))
            .try_init();
        Ok(run)
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_json(&self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut f = File::create(self.file(name))?;
        serde_json::to_writer_pretty(&mut f, value)?;
        writeln!(f)?;
        Ok(())
    }

    pub fn write_metrics(&self, metrics: &Value) -> Result<(), CliError> {
        self.write_json(METRICS_FILE, metrics)
    }

    pub fn csv_writer(&self, name: &str) -> Result<csv::Writer<File>, CliError> {
        Ok(csv::Writer::from_path(self.file(name))?)
    }
}
