//! Config-file loading and the `run.json` reproducibility manifest.
//!
//! Every subcommand resolves its parameters in three layers: built-in
//! defaults, then a `--config` JSON file, then explicit flags. The resolved
//! result is written to `<out>/run.json` as
//! `{"command": ..., "seed": ..., "params": {...}}` before any work starts,
//! so feeding that file back via `--config` reproduces the run exactly.
//!
//! `--config` accepts either a previous `run.json` or a bare parameter
//! object. The output directory and `--threads` are deliberately not part of
//! the manifest: outputs are byte-identical regardless of where they are
//! written or how many workers computed them.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::errors::CliError;

/// Values recovered from a `--config` file, before flag overrides.
#[derive(Debug)]
pub struct FileConfig<T> {
    pub params: Option<T>,
    pub seed: Option<u64>,
}

impl<T> FileConfig<T> {
    fn empty() -> Self {
        FileConfig {
            params: None,
            seed: None,
        }
    }
}

/// Reads a config file for `command`. A manifest written by a different
/// subcommand is rejected as a usage error; malformed JSON is a parse error.
pub fn load_config<T: DeserializeOwned>(
    path: Option<&Path>,
    command: &str,
) -> Result<FileConfig<T>, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::empty());
    };
    let text = fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    let Some(obj) = value.as_object() else {
        return Err(trajsynth_core::Error::parse(format!(
            "config {} must be a JSON object",
            path.display()
        ))
        .into());
    };
    if obj.contains_key("command") || obj.contains_key("params") {
        // A run manifest from a previous invocation.
        if let Some(cmd) = obj.get("command").and_then(Value::as_str) {
            if cmd != command {
                return Err(CliError::usage(format!(
                    "config {} was written by `{cmd}`, not `{command}`",
                    path.display()
                )));
            }
        }
        let seed = obj.get("seed").and_then(Value::as_u64);
        let params = match obj.get("params") {
            Some(p) => Some(serde_json::from_value(p.clone())?),
            None => None,
        };
        return Ok(FileConfig { params, seed });
    }
    // A bare parameter object.
    Ok(FileConfig {
        params: Some(serde_json::from_value(value)?),
        seed: None,
    })
}

/// Writes `<out>/run.json` capturing the fully resolved parameters and seed.
pub fn write_manifest<T: Serialize>(
    out: &Path,
    command: &str,
    seed: u64,
    params: &T,
) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Manifest<'a, T> {
        command: &'a str,
        seed: u64,
        params: &'a T,
    }
    let text = serde_json::to_string_pretty(&Manifest {
        command,
        seed,
        params,
    })?;
    fs::write(out.join("run.json"), text + "\n")?;
    Ok(())
}
