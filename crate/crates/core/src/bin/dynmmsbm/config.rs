use std::fs;
use std::path::Path;

use clap::CommandFactory;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::args::Cli;
use crate::error::CliError;

pub const THREADS_ENV: &str = "DYNMMSBM_THREADS";
const GLOBAL_KEYS: [&str; 3] = ["command", "seed", "threads"];

/// Effective settings of one run after merging the config file and flags.
pub struct Resolved<T> {
    pub args: T,
    pub seed: u64,
    pub threads: usize,
    /// Flat object with the command name, seed, threads and every set key.
    pub snapshot: Value,
}

fn read_config(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    let value: Value = if is_toml {
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    };
    match value {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::Usage(format!("{}: expected a table of settings", path.display()))),
    }
}

/// Drops unset options and false switches so they do not shadow file values.
fn set_entries<T: Serialize>(args: &T) -> Map<String, Value> {
    match serde_json::to_value(args).expect("arguments serialize") {
        Value::Object(m) => m
            .into_iter()
            .filter(|(_, v)| !matches!(v, Value::Null | Value::Bool(false)))
            .collect(),
        _ => Map::new(),
    }
}

fn known_keys(command: &str) -> Vec<String> {
    let cli = Cli::command();
    let sub = cli.find_subcommand(command).expect("known subcommand");
    sub.get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .chain(GLOBAL_KEYS.iter().map(|s| s.to_string()))
        .collect()
}

fn as_u64(v: &Value, key: &str) -> Result<u64, CliError> {
    v.as_u64()
        .ok_or_else(|| CliError::Usage(format!("config key {key:?} must be a non-negative integer")))
}

pub fn resolve<T: Serialize + DeserializeOwned>(
    command: &str,
    cli_args: &T,
    seed: Option<u64>,
    threads: Option<usize>,
    config: Option<&Path>,
) -> Result<Resolved<T>, CliError> {
    let mut file = match config {
        Some(p) => read_config(p)?,
        None => Map::new(),
    };
    let known = known_keys(command);
    if let Some(bad) = file.keys().find(|k| !known.contains(k)) {
        return Err(CliError::Usage(format!("unknown config key {bad:?} for `{command}`")));
    }
    if let Some(c) = file.remove("command") {
        if c.as_str() != Some(command) {
            return Err(CliError::Usage(format!("config file is for command {c}, not `{command}`")));
        }
    }
    let file_seed = file.remove("seed").map(|v| as_u64(&v, "seed")).transpose()?;
    let file_threads = file.remove("threads").map(|v| as_u64(&v, "threads")).transpose()?;

    let mut merged = file;
    merged.extend(set_entries(cli_args));
    let args: T = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("invalid settings: {e}")))?;

    let seed = seed
        .or(file_seed)
        .ok_or_else(|| CliError::Usage("a seed is required (--seed or `seed` in the config file)".into()))?;
    let env_threads = match std::env::var(THREADS_ENV) {
        Ok(s) => Some(
            s.parse::<u64>()
                .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a non-negative integer")))?,
        ),
        Err(_) => None,
    };
    let threads = threads
        .map(|t| t as u64)
        .or(file_threads)
        .or(env_threads)
        .unwrap_or(0) as usize;

    let mut snapshot = Map::new();
    snapshot.insert("command".into(), Value::from(command));
    snapshot.insert("seed".into(), Value::from(seed));
    snapshot.insert("threads".into(), Value::from(threads));
    snapshot.extend(set_entries(&args));
    Ok(Resolved {
        args,
        seed,
        threads,
        snapshot: Value::Object(snapshot),
    })
}
