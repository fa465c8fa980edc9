//! Cost matrices on disk: CSV rows `scheduler,workload,cost` or a JSON list
//! of `{scheduler, workload, cost}` objects.

use std::fs;
use std::path::Path;

use loopsched_core::eval::{CostMatrix, EvalError};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CostFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
    #[error("{path}: {source}")]
    Invalid { path: String, source: EvalError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub scheduler: String,
    pub workload: String,
    pub cost: f64,
}

pub fn parse_cost_csv(text: &str) -> Result<Vec<CostRow>, String> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let expected = ["scheduler", "workload", "cost"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(format!("expected header `scheduler,workload,cost`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")));
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| format!("row {}: {e}", i + 2)))
        .collect()
}

pub fn load_cost_matrix(path: &Path) -> Result<CostMatrix, CostFileError> {
    let p = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| CostFileError::Io { path: p.clone(), source })?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let rows = if is_json {
        serde_json::from_str::<Vec<CostRow>>(&text).map_err(|e| e.to_string())
    } else {
        parse_cost_csv(&text)
    }
    .map_err(|reason| CostFileError::Format { path: p.clone(), reason })?;
    CostMatrix::from_cells(rows.into_iter().map(|r| (r.scheduler, r.workload, r.cost)))
        .map_err(|source| CostFileError::Invalid { path: p, source })
}
