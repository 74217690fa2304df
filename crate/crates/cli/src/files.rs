use std::fs;
use std::path::{Path, PathBuf};

use manifold_icp::io::{parse_dataset, parse_model};
use manifold_icp::kinematics::{builtin_model, DatasetFile, SerialManipulator};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write(path: &Path, text: &str) -> CliResult<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, text).map_err(io)
}

pub fn write_json(path: &Path, doc: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(doc).expect("JSON value serializes");
    text.push('\n');
    write(path, &text)
}

/// Parses `text` read from `path`, attributing failures to the file.
pub fn parse<T>(path: &Path, text: &str, f: impl FnOnce(&str) -> manifold_icp::Result<T>) -> CliResult<T> {
    f(text).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// A built-in model name, else a model file.
pub fn load_model(arg: &str) -> CliResult<SerialManipulator> {
    if let Some(m) = builtin_model(arg) {
        return Ok(m);
    }
    let path = PathBuf::from(arg);
    if !path.exists() {
        return Err(CliError::Invalid(format!("{arg:?} is neither a built-in model nor a model file")));
    }
    let text = read(&path)?;
    parse(&path, &text, parse_model)
}

pub struct Loaded<T> {
    pub value: T,
    pub text: String,
}

pub fn load_dataset(path: &Path) -> CliResult<Loaded<DatasetFile>> {
    let text = read(path)?;
    let value = parse(path, &text, parse_dataset)?;
    Ok(Loaded { value, text })
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}
