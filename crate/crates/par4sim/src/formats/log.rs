use std::fs::{File, OpenOptions};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use par4sim_core::adaptive::{IterationRecord, UsageEvent};
use par4sim_core::ltr::RankerModel;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::FormatError;

pub fn write_model<W: Write>(model: &RankerModel, mut w: W) -> Result<(), FormatError> {
    serde_json::to_writer_pretty(&mut w, model)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_model<R: BufRead>(reader: R) -> Result<RankerModel, FormatError> {
    Ok(serde_json::from_reader(reader)?)
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut w: W) -> Result<(), FormatError> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| FormatError::parse(i + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn read_events<R: BufRead>(reader: R) -> Result<Vec<UsageEvent>, FormatError> {
    read_jsonl(reader)
}

/// Append-only JSON-lines file. Each append is flushed and synced before
/// it returns.
#[derive(Debug)]
pub struct JsonlWriter {
    path: PathBuf,
    file: File,
}

impl JsonlWriter {
    pub fn append(path: &Path) -> Result<Self, FormatError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|source| FormatError::Io { path: dir.into(), source })?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| FormatError::Io { path: path.into(), source })?;
        Ok(Self { path: path.into(), file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write<T: Serialize>(&mut self, item: &T) -> Result<(), FormatError> {
        let mut line = serde_json::to_vec(item)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }
}

pub const CURVE_HEADER: &str = "iteration,adaptive,baseline,lm_order";

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.4}", 100.0 * x)).unwrap_or_default()
}

/// Learning curve as percentages; only evaluated iterations appear.
pub fn write_curve_csv<W: Write>(records: &[IterationRecord], mut w: W) -> Result<(), FormatError> {
    writeln!(w, "{CURVE_HEADER}")?;
    for r in records.iter().filter(|r| r.mean_ndcg_at_10.is_some()) {
        writeln!(
            w,
            "{},{},{},{}",
            r.iteration,
            pct(r.mean_ndcg_at_10),
            pct(r.mean_ndcg_at_10_baseline),
            pct(r.mean_ndcg_at_10_lm_order)
        )?;
    }
    w.flush()?;
    Ok(())
}
