//! The user-facing inputs of a session.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{DataTable, TableError};

#[derive(Debug, Error)]
pub enum RequestError {
    #[error("request {0:?} has empty text")]
    EmptyText(String),
    #[error("request id {0:?} is not a plain directory name")]
    BadId(String),
    #[error("data file {path}: {source}")]
    Data {
        path: PathBuf,
        #[source]
        source: TableError,
    },
}

/// A plotting request and where its data and outputs live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRequest {
    pub id: String,
    pub text: String,
    pub data_path: PathBuf,
    pub output_dir: PathBuf,
}

impl UserRequest {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        data_path: impl Into<PathBuf>,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            data_path: data_path.into(),
            output_dir: output_dir.into(),
        }
    }

    /// Checks the invariants and loads the data table.
    pub fn load_table(&self) -> Result<DataTable, RequestError> {
        if self.text.trim().is_empty() {
            return Err(RequestError::EmptyText(self.id.clone()));
        }
        if self.id.is_empty() || self.id == "." || self.id == ".." || self.id.contains(['/', '\\'])
        {
            return Err(RequestError::BadId(self.id.clone()));
        }
        DataTable::from_csv_path(&self.data_path).map_err(|source| RequestError::Data {
            path: self.data_path.clone(),
            source,
        })
    }

    /// `{output-dir}/{id}`: drafts, figures, job specs, and the trace go here.
    pub fn session_dir(&self) -> PathBuf {
        self.output_dir.join(&self.id)
    }

    pub fn draft_path(&self, version: u32) -> PathBuf {
        self.session_dir().join(format!("draft_v{version}.py"))
    }

    pub fn figure_path(&self, version: u32) -> PathBuf {
        self.session_dir().join(format!("figure_v{version}.png"))
    }

    pub fn trace_path(&self) -> PathBuf {
        self.session_dir().join("trace.jsonl")
    }

    pub fn data_file_name(&self) -> String {
        file_name(&self.data_path)
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
