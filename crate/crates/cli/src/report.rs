//! Input digests, provenance headers and table writers shared by every command.

use std::fs;
use std::path::{Path, PathBuf};

use confcal::{FileFormat, PredictionSet, Role};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "confcal";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Tracks every input read during a command so reports can list digests.
#[derive(Debug, Default)]
pub struct Inputs {
    digests: Vec<InputDigest>,
}

impl Inputs {
    pub fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.digests.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(bytes)
    }

    pub fn load_set(&mut self, path: &Path, role: Role) -> CliResult<PredictionSet> {
        self.read(path)?;
        PredictionSet::load(path, FileFormat::from_path(path), role).map_err(|source| CliError::Input {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn digests(&self) -> &[InputDigest] {
        &self.digests
    }
}

pub fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes reports and tables under one output directory and remembers
/// what was written.
#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(confcal::Error::from)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Rows as `{stem}.csv` or a JSON array in `{stem}.json`.
    pub fn write_rows<T: Serialize>(&mut self, stem: &str, format: Format, rows: &[T]) -> CliResult<PathBuf> {
        match format {
            Format::Json => self.write_json(&format!("{stem}.json"), rows),
            Format::Csv => {
                let mut writer = csv::Writer::from_writer(Vec::new());
                for row in rows {
                    writer.serialize(row).map_err(confcal::Error::from)?;
                }
                let bytes = writer
                    .into_inner()
                    .map_err(|e| CliError::Contract(format!("csv buffer: {e}")))?;
                self.write_bytes(&format!("{stem}.csv"), &bytes)
            }
        }
    }

    /// Writes through a caller-supplied CSV writer.
    pub fn write_with(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut Vec<u8>) -> confcal::Result<()>,
    ) -> CliResult<PathBuf> {
        let mut bytes = Vec::new();
        write(&mut bytes)?;
        self.write_bytes(name, &bytes)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Report object: provenance header followed by the body's own fields.
pub fn report<C: Serialize, B: Serialize>(command: &str, config: &C, inputs: &Inputs, body: &B) -> Value {
    let mut map = Map::new();
    map.insert("tool".into(), Value::from(TOOL));
    map.insert("version".into(), Value::from(VERSION));
    map.insert("command".into(), Value::from(command));
    map.insert("config".into(), serde_json::to_value(config).expect("config serializes"));
    map.insert(
        "inputs".into(),
        serde_json::to_value(inputs.digests()).expect("digests serialize"),
    );
    if let Value::Object(fields) = serde_json::to_value(body).expect("report body serializes") {
        map.extend(fields);
    }
    Value::Object(map)
}
