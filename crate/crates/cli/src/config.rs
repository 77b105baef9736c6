//! Layered option resolution: built-in defaults, then the TOML config file,
//! then environment variables and flags (clap merges those two).
//!
//! A config file holds shared keys at the top level and per-command keys in
//! a table named after the subcommand:
//!
//! ```toml
//! bins = 20
//! format = "json"
//!
//! [cascade]
//! calibrator = "platt"
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

/// Option set of one subcommand. Every field is optional so that layers
/// can be merged; `defaults` supplies the lowest layer.
pub trait Layered: Serialize + DeserializeOwned + Default {
    const SECTION: &'static str;

    fn defaults() -> Value;
}

pub fn read_file(path: &Path) -> Result<toml::Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.parse::<toml::Table>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn object(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(map) => map,
        _ => Map::new(),
    }
}

fn normalize(key: &str) -> String {
    key.replace('-', "_")
}

/// Merges `cli` over the file layer over the defaults.
pub fn resolve<T: Layered>(cli: &T, file: Option<&toml::Table>) -> Result<T, CliError> {
    let known = object(serde_json::to_value(T::default()).expect("options serialize"));
    let mut merged = object(T::defaults());

    if let Some(table) = file {
        for (key, value) in table {
            let key = normalize(key);
            if value.is_table() || !known.contains_key(&key) {
                continue;
            }
            merged.insert(key, to_json(value)?);
        }
        if let Some(section) = table.get(T::SECTION) {
            let section = section.as_table().ok_or_else(|| {
                CliError::Config(format!("config key {:?} must be a table", T::SECTION))
            })?;
            for (key, value) in section {
                let key = normalize(key);
                if !known.contains_key(&key) {
                    return Err(CliError::Config(format!(
                        "unknown key {key:?} in [{}]",
                        T::SECTION
                    )));
                }
                merged.insert(key, to_json(value)?);
            }
        }
    }

    for (key, value) in object(serde_json::to_value(cli).expect("options serialize")) {
        if !value.is_null() {
            merged.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(e.to_string()))
}

fn to_json(value: &toml::Value) -> Result<Value, CliError> {
    serde_json::to_value(value).map_err(|e| CliError::Config(e.to_string()))
}

/// Value of a required option, or a contract error naming its flag.
pub fn required<T: Clone>(value: &Option<T>, flag: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Contract(format!("missing required option --{flag}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    struct Opts {
        bins: Option<usize>,
        name: Option<String>,
        flag: Option<bool>,
        min_count: Option<usize>,
    }

    impl Layered for Opts {
        const SECTION: &'static str = "demo";

        fn defaults() -> Value {
            serde_json::json!({ "bins": 15 })
        }
    }

    #[test]
    fn precedence_is_cli_then_file_then_default() {
        let file: toml::Table = "bins = 20\nname = \"top\"\n[demo]\nname = \"section\"\n".parse().unwrap();
        let cli = Opts::default();
        let got = resolve(&cli, Some(&file)).unwrap();
        assert_eq!(got.bins, Some(20));
        assert_eq!(got.name.as_deref(), Some("section"));

        let cli = Opts {
            bins: Some(7),
            ..Opts::default()
        };
        assert_eq!(resolve(&cli, Some(&file)).unwrap().bins, Some(7));
        assert_eq!(resolve(&Opts::default(), None).unwrap().bins, Some(15));
    }

    #[test]
    fn unknown_section_key_is_rejected_but_foreign_top_level_is_ignored() {
        let file: toml::Table = "val_base = \"x\"\n".parse().unwrap();
        assert!(resolve(&Opts::default(), Some(&file)).is_ok());
        let file: toml::Table = "[demo]\nbogus = 1\n".parse().unwrap();
        assert!(matches!(resolve(&Opts::default(), Some(&file)), Err(CliError::Config(_))));
    }

    #[test]
    fn kebab_keys_are_accepted() {
        let file: toml::Table = "min-count = 3\n[demo]\nflag = true\n".parse().unwrap();
        let got = resolve(&Opts::default(), Some(&file)).unwrap();
        assert_eq!((got.flag, got.min_count), (Some(true), Some(3)));
    }
}
