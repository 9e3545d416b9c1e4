//! On-disk formats: policy checkpoints, line-delimited pool files and
//! versioned CSV tables.

mod csv_table;
mod policy_file;
mod pool_file;

pub use csv_table::{read_csv, write_csv, CSV_SCHEMA_PREFIX};
pub use policy_file::{policy_from_str, policy_to_string, read_policy, write_policy};
pub use pool_file::{pools_from_str, pools_to_string, read_pools, write_pools, PoolRecord};

use std::fs;
use std::path::Path;

use crate::error::{LireError, Result};

/// Writes `contents`, creating parent directories as needed.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| LireError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| LireError::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| LireError::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| LireError::Config(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_file(path, &text)
}
