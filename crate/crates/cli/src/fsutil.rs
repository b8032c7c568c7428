use std::fs;
use std::path::{Path, PathBuf};

use pcrobust_core::Error;

use crate::error::CliResult;

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e).into())
}

/// Sorted stems of the files in `dir` with extension `ext`.
pub fn stems(dir: &Path, ext: &str) -> CliResult<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push(stem.to_string());
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Files under `root` with extension `ext`, as sorted relative paths.
pub fn walk(root: &Path, ext: &str) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().and_then(|e| e.to_str()) == Some(ext) {
                out.push(path.strip_prefix(root).expect("walked below root").to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn copy(from: &Path, to: &Path) -> CliResult<()> {
    if let Some(parent) = to.parent() {
        create_dir(parent)?;
    }
    fs::copy(from, to).map_err(|e| Error::io(to, e))?;
    Ok(())
}

#[cfg(unix)]
pub fn symlink(from: &Path, to: &Path) -> CliResult<()> {
    if let Some(parent) = to.parent() {
        create_dir(parent)?;
    }
    let target = fs::canonicalize(from).map_err(|e| Error::io(from, e))?;
    if to.symlink_metadata().is_ok() {
        fs::remove_file(to).map_err(|e| Error::io(to, e))?;
    }
    std::os::unix::fs::symlink(target, to).map_err(|e| Error::io(to, e).into())
}

#[cfg(not(unix))]
pub fn symlink(from: &Path, to: &Path) -> CliResult<()> {
    copy(from, to)
}

pub fn write(path: &Path, contents: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e).into())
}
