use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use spotlight_core::pipeline::ConfigError;
use spotlight_core::Error;

pub fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Parse a JSON file; parse failures are reported as config errors naming the
/// offending field path.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Config(ConfigError::Parse { path: path.display().to_string(), message: e.to_string() })
    })
}

/// Parse a JSON-lines file, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Error> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                Error::Config(ConfigError::Parse {
                    path: format!("{}:{}", path.display(), i + 1),
                    message: e.to_string(),
                })
            })
        })
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Pretty JSON to `out`, or to standard output.
pub fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
    text.push('\n');
    match out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn error_json(e: &Error) -> String {
    let mut obj = json!({ "kind": e.kind(), "message": e.to_string() });
    let config = match e {
        Error::Config(c) => Some(c),
        Error::Sim(spotlight_core::sim::SimError::Config(c)) => Some(c),
        _ => None,
    };
    if let Some(c) = config {
        obj["field"] = json!(c.field());
    }
    json!({ "error": obj }).to_string()
}
