//! Flat key-value config files. Each key names a flag of the subcommand;
//! the file expands to `--key value` arguments placed before the explicit
//! ones, so flags on the command line win.

use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};
use crate::io::read_text;

/// Environment variable naming a directory searched for relative config paths.
pub const CONFIG_DIR_VAR: &str = "HISEG_CONFIG_DIR";

/// Relative paths are looked up in `config_dir` first, then taken as given.
pub fn resolve(path: &Path, config_dir: Option<&Path>) -> PathBuf {
    if path.is_relative() {
        if let Some(dir) = config_dir {
            let candidate = dir.join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

pub fn parse(text: &str, path: &Path) -> Result<Vec<String>> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::io(path, e.message()))?;
    let mut args = Vec::new();
    for (key, value) in table {
        if key == "config" {
            return Err(CliError::Config(format!(
                "{}: config files cannot include other configs",
                path.display()
            )));
        }
        let flag = format!("--{key}");
        let scalar = |v: &toml::Value| -> Result<String> {
            match v {
                toml::Value::String(s) => Ok(s.clone()),
                toml::Value::Integer(i) => Ok(i.to_string()),
                toml::Value::Float(f) => Ok(f.to_string()),
                _ => Err(CliError::Config(format!(
                    "{}: key {key:?} must be a scalar or a list of scalars",
                    path.display()
                ))),
            }
        };
        match &value {
            toml::Value::Boolean(true) => args.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>>>()?;
                args.push(flag);
                args.push(parts.join(","));
            }
            v => {
                args.push(flag);
                args.push(scalar(v)?);
            }
        }
    }
    Ok(args)
}

pub fn load(path: &Path, config_dir: Option<&Path>) -> Result<Vec<String>> {
    let path = resolve(path, config_dir);
    parse(&read_text(&path)?, &path)
}
