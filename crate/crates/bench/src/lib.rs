//! Benchmark workloads drawn from the regression corpus.

use std::path::{Path, PathBuf};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// `(file name, source)` of every corpus case whose name starts with `prefix`, sorted by name.
pub fn workloads(prefix: &str) -> Vec<(String, String)> {
    let Ok(entries) = std::fs::read_dir(corpus_dir()) else { return Vec::new() };
    let mut out: Vec<(String, String)> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            if !name.starts_with(prefix) || !name.ends_with(".cpp") {
                return None;
            }
            std::fs::read_to_string(e.path()).ok().map(|src| (name, src))
        })
        .collect();
    out.sort();
    out
}
