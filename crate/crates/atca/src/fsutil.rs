use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Refuse to overwrite `path` unless `force`; with `force`, remove it.
pub fn claim(path: &Path, force: bool) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    if !force {
        return Err(Error::OutputExists(path.into()));
    }
    if path.is_dir() {
        fs::remove_dir_all(path).map_err(Error::io(path))
    } else {
        fs::remove_file(path).map_err(Error::io(path))
    }
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(Error::io(path))
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(Error::io(path))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serialises");
    text.push('\n');
    write(path, text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::BadJson {
        path: path.into(),
        line: e.line(),
        why: e.to_string(),
    })
}
