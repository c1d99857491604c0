//! Merging of command-line flags with an optional flat TOML file.
//!
//! File keys are the long flag names (`model-config = "m.toml"`), plus a
//! top-level `seed`. Flags given on the command line win over file values.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::failure::{CliResult, Failure};

pub fn read_toml<T: DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    toml::from_str(&text).map_err(|e| Failure::config(format!("{what} {}: {e}", path.display())))
}

/// Flag values layered over the file table; unknown file keys are errors.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: Map<String, Value>, path: &Path) -> CliResult<T> {
    let Value::Object(given) = serde_json::to_value(flags).expect("flag structs serialize") else {
        unreachable!("flag structs are objects");
    };
    let mut merged = file;
    merged.extend(given);
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| Failure::config(format!("config file {}: {e}", path.display())))
}

/// Reads the global config file as a flat key/value map and splits off `seed`.
pub fn load_file(path: &Path) -> CliResult<(Option<u64>, Map<String, Value>)> {
    let table: toml::Table = read_toml(path, "config file")?;
    let Value::Object(mut map) = serde_json::to_value(table).expect("toml tables serialize") else {
        unreachable!("tables are objects");
    };
    let seed = match map.remove("seed") {
        None => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| Failure::config(format!("config file {}: seed must be a non-negative integer", path.display())))?,
        ),
    };
    Ok((seed, map))
}

/// The resolved settings of one invocation, for the stderr banner.
pub fn describe<T: Serialize>(command: &str, seed: Option<u64>, args: &T) -> String {
    let mut table = toml::Table::new();
    if let Some(s) = seed {
        table.insert("seed".into(), toml::Value::Integer(s as i64));
    }
    let body = toml::to_string(args).unwrap_or_default();
    let head = toml::to_string(&table).unwrap_or_default();
    format!("resolved configuration for `{command}`:\n{head}{body}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(rename_all = "kebab-case", deny_unknown_fields)]
    struct Demo {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        per_class: Option<usize>,
    }

    fn file(pairs: &[(&str, Value)]) -> Map<String, Value> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn flags_override_file() {
        let flags = Demo {
            out: Some("flag".into()),
            per_class: None,
        };
        let f = file(&[("out", "file".into()), ("per-class", 3.into())]);
        let m = merge(&flags, f, Path::new("c.toml")).unwrap();
        assert_eq!(m.out.as_deref(), Some("flag"));
        assert_eq!(m.per_class, Some(3));
    }

    #[test]
    fn unknown_file_key_is_config_error() {
        let f = file(&[("bogus", 1.into())]);
        let err = merge(&Demo::default(), f, Path::new("c.toml")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.message.contains("bogus"));
    }
}
