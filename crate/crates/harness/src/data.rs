//! Reading numeric sample files.
//!
//! One observation per line, coordinates separated by commas and/or
//! whitespace. Blank lines and lines starting with `#` are skipped, and a
//! first row that is entirely non-numeric is taken as a header.

use std::path::Path;

use gof_core::Sample;

use crate::error::{HarnessError, Result};

pub fn parse_sample(text: &str, source: &str) -> Result<Sample> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut seen_data = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        let parsed: Vec<Option<f64>> = tokens.iter().map(|t| t.parse().ok()).collect();
        if !seen_data && parsed.iter().all(Option::is_none) {
            seen_data = true;
            continue;
        }
        seen_data = true;
        let row: Vec<f64> = parsed
            .iter()
            .zip(&tokens)
            .map(|(v, t)| {
                v.filter(|x| x.is_finite()).ok_or_else(|| {
                    HarnessError::Input(format!(
                        "{source}, line {}: not a finite number: {t:?}",
                        i + 1
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(HarnessError::Input(format!(
                    "{source}, line {}: expected {} columns, found {}",
                    i + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(HarnessError::Input(format!("{source}: no observations")));
    }
    Ok(Sample::from_rows(&rows)?)
}

pub fn read_sample(path: &Path) -> Result<Sample> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_sample(&text, &path.display().to_string())
}
