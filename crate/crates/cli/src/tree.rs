//! Walking sample directories and writing artifacts.

use std::path::{Path, PathBuf};

use anyhow::Context;
use walkdir::WalkDir;

use crate::InputError;

/// Files under `root` with extension `ext`, as sorted relative paths.
pub fn files_with_ext(root: &Path, ext: &str) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| InputError(format!("walking {}: {e}", root.display())))?;
        let path = entry.path();
        if entry.file_type().is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext)) {
            out.push(path.strip_prefix(root).expect("walk stays under root").to_path_buf());
        }
    }
    Ok(out)
}

/// `(system, condition, id)` of a `<system>/<condition>/<id>.<ext>` path.
pub fn sample_key(rel: &Path) -> anyhow::Result<(String, String, String)> {
    let parts: Vec<String> = rel
        .with_extension("")
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    if parts.len() < 3 {
        return Err(InputError(format!(
            "{} is not laid out as <system>/<condition>/<id>",
            rel.display()
        ))
        .into());
    }
    Ok((parts[0].clone(), parts[1].clone(), parts[2..].join("/")))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    write(path, serde_json::to_string_pretty(value)? + "\n")
}

pub fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_from_paths() {
        assert_eq!(
            sample_key(Path::new("tt2/comma/d1_2_0.json")).unwrap(),
            ("tt2".into(), "comma".into(), "d1_2_0".into())
        );
        assert_eq!(sample_key(Path::new("a/b/c/d.json")).unwrap().2, "c/d");
        assert!(sample_key(Path::new("a/d.json")).is_err());
    }
}
