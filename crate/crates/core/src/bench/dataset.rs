use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const QUERY_FILE: &str = "query.txt";
pub const DATA_FILE: &str = "data.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.png";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("item {item}: missing {file}")]
    MissingFile { item: String, file: &'static str },
    #[error("item {0}: query is empty")]
    EmptyQuery(String),
    #[error("no benchmark items to run")]
    NoItems,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub id: String,
    pub query: String,
    pub data_path: PathBuf,
    pub ground_truth: PathBuf,
}

/// One item per subdirectory of `root`, sorted by id. Plain files in `root`
/// are ignored; a malformed item directory is an error.
pub fn load_benchmark(root: &Path) -> Result<Vec<BenchmarkItem>, BenchError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| BenchError::Io { path, source }
    };
    let mut items = Vec::new();
    for entry in std::fs::read_dir(root).map_err(io(root))? {
        let entry = entry.map_err(io(root))?;
        let dir = entry.path();
        if !dir.is_dir() {
            continue;
        }
        let id = entry.file_name().to_string_lossy().into_owned();
        for file in [QUERY_FILE, DATA_FILE, GROUND_TRUTH_FILE] {
            if !dir.join(file).is_file() {
                return Err(BenchError::MissingFile { item: id, file });
            }
        }
        let query_path = dir.join(QUERY_FILE);
        let query = std::fs::read_to_string(&query_path).map_err(io(&query_path))?;
        let query = query.trim();
        if query.is_empty() {
            return Err(BenchError::EmptyQuery(id));
        }
        items.push(BenchmarkItem {
            query: query.to_string(),
            data_path: dir.join(DATA_FILE),
            ground_truth: dir.join(GROUND_TRUTH_FILE),
            id,
        });
    }
    items.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(items)
}
