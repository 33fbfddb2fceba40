//! Notebook documents and execution traces.
//!
//! A notebook file only records the final state of every cell. The optional
//! execution log written by the capture harness keeps every run in order,
//! including re-runs with the source as it was at that moment.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed notebook: {0}")]
    MalformedNotebook(String),
    #[error("malformed execution log: {0}")]
    MalformedTrace(String),
    #[error("execution log entry {index} references cell_pos {cell_pos}, but the notebook has {cells} code cells")]
    TraceCellMismatch {
        index: usize,
        cell_pos: u32,
        cells: usize,
    },
}

/// One code cell as stored in the notebook document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotebookCell {
    /// 1-based ordinal among the document's code cells.
    pub cell_pos: u32,
    pub exec_count: Option<u32>,
    pub source_lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellExecution {
    pub epoch: u32,
    pub cell_pos: u32,
    pub exec_count: u32,
    pub source_lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub notebook_path: String,
    pub executions: Vec<CellExecution>,
}

/// One entry of `trace.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLogEntry {
    #[serde(default)]
    pub epoch: Option<u32>,
    pub cell_pos: u32,
    pub exec_count: u32,
    #[serde(default)]
    pub source: Option<Vec<String>>,
    /// Set by the harness when the cell raised; informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Splits notebook source (string or list of strings) into physical lines
/// without trailing newlines.
fn split_source(value: &Value) -> Result<Vec<String>, String> {
    let joined = match value {
        Value::String(s) => s.clone(),
        Value::Array(parts) => {
            let mut out = String::new();
            for p in parts {
                match p {
                    Value::String(s) => out.push_str(s),
                    other => return Err(format!("source entry is not a string: {other}")),
                }
            }
            out
        }
        Value::Null => String::new(),
        other => return Err(format!("source is neither string nor list: {other}")),
    };
    Ok(split_lines(&joined))
}

pub fn split_lines(text: &str) -> Vec<String> {
    if text.is_empty() {
        return Vec::new();
    }
    let mut lines: Vec<String> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect();
    if text.ends_with('\n') {
        lines.pop();
    }
    lines
}

/// Parses a notebook JSON document and returns its code cells in document order.
pub fn parse_notebook(text: &str) -> Result<Vec<NotebookCell>, IngestError> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| IngestError::MalformedNotebook(e.to_string()))?;
    let cells = doc
        .get("cells")
        .and_then(Value::as_array)
        .ok_or_else(|| IngestError::MalformedNotebook("missing \"cells\" array".into()))?;

    let mut out = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        let kind = cell
            .get("cell_type")
            .and_then(Value::as_str)
            .ok_or_else(|| IngestError::MalformedNotebook(format!("cell {i} has no cell_type")))?;
        if kind != "code" {
            continue;
        }
        let exec_count = match cell.get("execution_count") {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_u64().ok_or_else(|| {
                IngestError::MalformedNotebook(format!("cell {i} has a non-integer execution_count"))
            })? as u32),
        };
        let source_lines = split_source(cell.get("source").unwrap_or(&Value::Null))
            .map_err(|e| IngestError::MalformedNotebook(format!("cell {i}: {e}")))?;
        out.push(NotebookCell {
            cell_pos: out.len() as u32 + 1,
            exec_count,
            source_lines,
        });
    }
    Ok(out)
}

pub fn load_notebook(path: &Path) -> Result<Vec<NotebookCell>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_notebook(&text)
}

pub fn parse_trace_log(text: &str) -> Result<Vec<TraceLogEntry>, IngestError> {
    serde_json::from_str(text).map_err(|e| IngestError::MalformedTrace(e.to_string()))
}

pub fn load_trace_log(path: &Path) -> Result<Vec<TraceLogEntry>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_trace_log(&text)
}

/// Orders executions either by the log or, in static mode, by execution counter.
pub fn build_trace(
    notebook_path: &str,
    cells: &[NotebookCell],
    trace_log: Option<&[TraceLogEntry]>,
) -> Result<ExecutionTrace, IngestError> {
    let executions = match trace_log {
        Some(log) => {
            let mut out = Vec::with_capacity(log.len());
            for (index, entry) in log.iter().enumerate() {
                let cell = cells
                    .iter()
                    .find(|c| c.cell_pos == entry.cell_pos)
                    .ok_or(IngestError::TraceCellMismatch {
                        index,
                        cell_pos: entry.cell_pos,
                        cells: cells.len(),
                    })?;
                let source_lines = match &entry.source {
                    Some(parts) => split_lines(&parts.concat_lines()),
                    None => cell.source_lines.clone(),
                };
                out.push(CellExecution {
                    epoch: index as u32 + 1,
                    cell_pos: entry.cell_pos,
                    exec_count: entry.exec_count,
                    source_lines,
                });
            }
            out
        }
        None => {
            let mut executed: Vec<&NotebookCell> =
                cells.iter().filter(|c| c.exec_count.is_some()).collect();
            // stable: equal counters keep document order
            executed.sort_by_key(|c| c.exec_count);
            executed
                .into_iter()
                .enumerate()
                .map(|(i, c)| CellExecution {
                    epoch: i as u32 + 1,
                    cell_pos: c.cell_pos,
                    exec_count: c.exec_count.unwrap_or_default(),
                    source_lines: c.source_lines.clone(),
                })
                .collect()
        }
    };
    Ok(ExecutionTrace {
        notebook_path: notebook_path.to_string(),
        executions,
    })
}

/// Log sources may be stored nbformat-style (each part keeps its newline) or
/// as bare lines; both are normalised here.
trait ConcatLines {
    fn concat_lines(&self) -> String;
}

impl ConcatLines for Vec<String> {
    fn concat_lines(&self) -> String {
        if self.iter().all(|p| !p.contains('\n')) {
            self.join("\n")
        } else {
            self.concat()
        }
    }
}
