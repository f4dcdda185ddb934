//! Matrix input/output: plain-text rows of decimals and JSON array-of-arrays.

use std::fs;
use std::path::Path;

use super::{PpdError, SymMatrix};

/// Parses whitespace-separated rows, one matrix row per line.  Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_matrix_text(s: &str) -> Result<SymMatrix, PpdError> {
    let mut rows = Vec::new();
    for (ln, line) in s.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    PpdError::Parse(format!("line {}: '{}' is not a number", ln + 1, tok))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    SymMatrix::new(&rows)
}

/// Parses a JSON array of arrays of numbers.
pub fn parse_matrix_json(s: &str) -> Result<SymMatrix, PpdError> {
    let rows: Vec<Vec<f64>> =
        serde_json::from_str(s).map_err(|e| PpdError::Parse(e.to_string()))?;
    SymMatrix::new(&rows)
}

/// Parses either format, deciding by the first non-whitespace character.
pub fn parse_matrix_auto(s: &str) -> Result<SymMatrix, PpdError> {
    if s.trim_start().starts_with('[') {
        parse_matrix_json(s)
    } else {
        parse_matrix_text(s)
    }
}

/// Reads a matrix file in either supported format.
pub fn read_matrix_file(path: &Path) -> Result<SymMatrix, PpdError> {
    parse_matrix_auto(&fs::read_to_string(path)?)
}

/// Renders the matrix as plain-text rows with round-trippable decimals.
pub fn matrix_to_text(q: &SymMatrix) -> String {
    let mut out = String::new();
    for row in q.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Renders the matrix as a JSON array of arrays.
pub fn matrix_to_json(q: &SymMatrix) -> String {
    serde_json::to_string(&q.rows()).expect("finite matrix entries always serialize")
}
