//! On-disk formats: resource files, LM counts, LETOR datasets, model JSON,
//! JSON-lines event logs and learning-curve CSV.
//!
//! Line-oriented text formats accept `#` comment lines and blank lines.
//! Parse errors carry the 1-based line number.

mod letor;
mod lexicon;
mod lm;
mod log;

pub use letor::{read_letor, write_letor};
pub use lexicon::{
    read_embeddings, read_frequency, read_lemmas, read_ppdb, read_thesaurus, write_embeddings, write_frequency,
    write_lemmas, write_ppdb, write_thesaurus,
};
pub use lm::{read_corpus, read_lm, write_lm};
pub use log::{
    read_events, read_jsonl, read_model, write_curve_csv, write_jsonl, write_model, JsonlWriter, CURVE_HEADER,
};

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Stream(#[from] std::io::Error),
}

impl FormatError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse { line, message: message.into() }
    }

    /// Line number of a parse error.
    pub fn line(&self) -> Option<usize> {
        match self {
            FormatError::Parse { line, .. } => Some(*line),
            _ => None,
        }
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>, FormatError> {
    File::open(path).map(BufReader::new).map_err(|source| FormatError::Io { path: path.into(), source })
}

pub fn create(path: &Path) -> Result<BufWriter<File>, FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| FormatError::Io { path: dir.into(), source })?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| FormatError::Io { path: path.into(), source })
}

/// Yields `(line_number, line)` for content lines, skipping blanks and
/// `#` comments.
pub(crate) fn content_lines<R: std::io::BufRead>(
    reader: R,
) -> impl Iterator<Item = Result<(usize, String), FormatError>> {
    reader.lines().enumerate().filter_map(|(i, l)| match l {
        Err(e) => Some(Err(FormatError::Stream(e))),
        Ok(l) => {
            let t = l.trim_end_matches(['\r', '\n']);
            if t.trim().is_empty() || t.trim_start().starts_with('#') {
                None
            } else {
                Some(Ok((i + 1, t.to_string())))
            }
        }
    })
}

pub(crate) fn parse_f64(line: usize, field: &str, what: &str) -> Result<f64, FormatError> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| FormatError::parse(line, format!("invalid {what} {field:?}")))
}
