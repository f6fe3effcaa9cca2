//! Config-file overlay: a TOML table per subcommand supplies defaults that
//! command-line flags override.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Raised for requests that are malformed rather than failing; exits with 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub out_dir: Option<PathBuf>,
    pub gen: Option<toml::Table>,
    pub solve: Option<toml::Table>,
    pub crb: Option<toml::Table>,
    pub bench: Option<toml::Table>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<ConfigFile> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }
}

/// Fields set on the command line win; unset ones (null, or `false` for
/// switches, which the serializer skips) fall back to the file's table.
pub fn overlay<T: Serialize + DeserializeOwned>(cli: &T, table: Option<&toml::Table>, section: &str) -> Result<T> {
    let Some(table) = table else {
        return Ok(serde_json::from_value(serde_json::to_value(cli)?)?);
    };
    let mut merged = serde_json::to_value(table)?;
    let Value::Object(flags) = serde_json::to_value(cli)? else { unreachable!("argument structs serialize to maps") };
    let obj = merged.as_object_mut().expect("TOML tables are maps");
    for (k, v) in flags {
        if !v.is_null() {
            obj.insert(k, v);
        }
    }
    serde_json::from_value(merged).map_err(|e| usage(format!("config [{section}]: {e}")))
}

/// Prints the resolved settings as one JSON line.
pub fn echo<T: Serialize>(command: &str, resolved: &T) -> Result<()> {
    println!("config {command}: {}", serde_json::to_string(resolved)?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Args {
        a: Option<f64>,
        b: Option<f64>,
        #[serde(skip_serializing_if = "std::ops::Not::not")]
        flag: bool,
    }

    #[test]
    fn flags_override_file_and_unset_flags_fall_through() {
        let table: toml::Table = toml::from_str("a = 1.0\nb = 2.0\nflag = true").unwrap();
        let cli = Args { a: Some(5.0), b: None, flag: false };
        let got = overlay(&cli, Some(&table), "t").unwrap();
        assert_eq!(got, Args { a: Some(5.0), b: Some(2.0), flag: true });
    }

    #[test]
    fn unknown_config_key_is_a_usage_error() {
        let table: toml::Table = toml::from_str("c = 1").unwrap();
        let err = overlay(&Args::default(), Some(&table), "t").unwrap_err();
        assert!(err.is::<Usage>());
    }
}
